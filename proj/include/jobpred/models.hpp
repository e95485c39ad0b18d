#pragma once

// The three classifier architectures assembled from the layer kit, plus the
// ModelBundle persistence unit.
//
//   TextCNN:          embed -> {conv_k + relu -> max pool} x branches -> concat
//                     -> dropout -> dense -> softmax
//   BiGRU-CNN:        embed -> spatial dropout -> [Bi-GRU a | Bi-GRU b] per
//                     position -> conv + relu -> max pool -> dense -> softmax
//   BiGRU-LSTM-CNN:   as BiGRU-CNN with block b a Bi-LSTM

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "jobpred/data.hpp"
#include "jobpred/layers.hpp"
#include "jobpred/tensor.hpp"

namespace jobpred {

enum class Architecture { textcnn, bigru_cnn, bigru_lstm_cnn };

inline std::string to_string(Architecture a) {
  switch (a) {
    case Architecture::textcnn: return "textcnn";
    case Architecture::bigru_cnn: return "bigru-cnn";
    case Architecture::bigru_lstm_cnn: return "bigru-lstm-cnn";
  }
  return "?";
}

inline Architecture parse_architecture(std::string_view s) {
  if (s == "textcnn") return Architecture::textcnn;
  if (s == "bigru-cnn") return Architecture::bigru_cnn;
  if (s == "bigru-lstm-cnn") return Architecture::bigru_lstm_cnn;
  throw ConfigError("unknown architecture \"" + std::string(s) + "\"");
}

struct ModelConfig {
  Architecture architecture = Architecture::textcnn;
  std::size_t max_len = kMaxLen;
  std::size_t embed_dim = kEmbedDim;
  std::size_t num_classes = 25;
  std::vector<std::size_t> textcnn_filter_sizes{3, 4, 5};
  std::vector<std::size_t> textcnn_filter_counts{170, 171, 171};
  std::size_t rnn_hidden_units = 112;
  std::size_t conv_after_rnn_filters = 64;
  std::size_t conv_after_rnn_kernel = 3;
  double dropout_rate = 0.2;
  bool embeddings_trainable = false;
  // One cell per recurrent block shared by both directions.
  bool tie_directions = false;
  std::uint64_t rng_seed = 0;

  bool is_recurrent() const { return architecture != Architecture::textcnn; }

  void validate() const {
    if (max_len == 0 || embed_dim == 0) throw ConfigError("max_len and embed_dim must be positive");
    if (num_classes < 2) throw ConfigError("need at least 2 classes");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout_rate must be in [0,1)");
    if (architecture == Architecture::textcnn) {
      if (textcnn_filter_sizes.empty() || textcnn_filter_sizes.size() != textcnn_filter_counts.size()) {
        throw ConfigError("textcnn filter sizes and counts must be non-empty and of equal length");
      }
      for (std::size_t i = 0; i < textcnn_filter_sizes.size(); ++i) {
        const std::size_t k = textcnn_filter_sizes[i];
        if (k == 0 || textcnn_filter_counts[i] == 0) throw ConfigError("textcnn filter sizes/counts must be positive");
        if (k > max_len) throw ConfigError("filter size " + std::to_string(k) + " exceeds max_len");
        for (std::size_t j = 0; j < i; ++j)
          if (textcnn_filter_sizes[j] == k) throw ConfigError("duplicate textcnn filter size");
      }
    } else {
      if (rnn_hidden_units == 0 || conv_after_rnn_filters == 0 || conv_after_rnn_kernel == 0) {
        throw ConfigError("recurrent widths must be positive");
      }
      if (conv_after_rnn_kernel > max_len) throw ConfigError("conv kernel exceeds max_len");
    }
  }

  nlohmann::json to_json() const {
    return {{"architecture", to_string(architecture)},
            {"max_len", max_len},
            {"embed_dim", embed_dim},
            {"num_classes", num_classes},
            {"textcnn_filter_sizes", textcnn_filter_sizes},
            {"textcnn_filter_counts", textcnn_filter_counts},
            {"rnn_hidden_units", rnn_hidden_units},
            {"conv_after_rnn_filters", conv_after_rnn_filters},
            {"conv_after_rnn_kernel", conv_after_rnn_kernel},
            {"dropout_rate", dropout_rate},
            {"embeddings_trainable", embeddings_trainable},
            {"tie_directions", tie_directions},
            {"rng_seed", rng_seed}};
  }

  static ModelConfig from_json(const nlohmann::json& j) {
    try {
      ModelConfig c;
      c.architecture = parse_architecture(j.at("architecture").get<std::string>());
      c.max_len = j.at("max_len").get<std::size_t>();
      c.embed_dim = j.at("embed_dim").get<std::size_t>();
      c.num_classes = j.at("num_classes").get<std::size_t>();
      c.textcnn_filter_sizes = j.at("textcnn_filter_sizes").get<std::vector<std::size_t>>();
      c.textcnn_filter_counts = j.at("textcnn_filter_counts").get<std::vector<std::size_t>>();
      c.rnn_hidden_units = j.at("rnn_hidden_units").get<std::size_t>();
      c.conv_after_rnn_filters = j.at("conv_after_rnn_filters").get<std::size_t>();
      c.conv_after_rnn_kernel = j.at("conv_after_rnn_kernel").get<std::size_t>();
      c.dropout_rate = j.at("dropout_rate").get<double>();
      c.embeddings_trainable = j.at("embeddings_trainable").get<bool>();
      c.tie_directions = j.at("tie_directions").get<bool>();
      c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
      return c;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("model config: ") + e.what());
    }
  }
};

struct TrainingMetadata {
  std::size_t epochs_run = 0;
  double best_validation_f1 = 0.0;
};

inline constexpr const char* kEmbeddingParam = "embedding/table";

/// Config, named parameters (including the embedding table), and the
/// vocabulary/label registry the model was built against.
struct ModelBundle {
  ModelConfig config;
  std::map<std::string, Tensor> parameters;
  std::shared_ptr<const Vocabulary> vocabulary;
  std::shared_ptr<const LabelRegistry> labels;
  TrainingMetadata training;
  std::string identifier;  // set when saved or loaded

  std::uint64_t vocabulary_hash() const { return vocabulary->hash(); }
  std::uint64_t label_hash() const { return labels->hash(); }

  const Tensor& param(const std::string& name) const {
    auto it = parameters.find(name);
    if (it == parameters.end()) throw ConfigError("model has no parameter " + name);
    return it->second;
  }

  /// Parameters updated by training (the embedding table only when trainable).
  std::vector<std::pair<std::string, Tensor>> trainable() const {
    std::vector<std::pair<std::string, Tensor>> out;
    for (const auto& [name, t] : parameters)
      if (name != kEmbeddingParam || config.embeddings_trainable) out.emplace_back(name, t);
    return out;
  }

  /// Independent copy of every parameter buffer.
  ModelBundle clone() const {
    ModelBundle b = *this;
    for (auto& [name, t] : b.parameters) t = t.clone(t.requires_grad());
    return b;
  }
};

namespace detail {

inline std::string cell_prefix(const std::string& block, const std::string& direction) {
  return block + "/" + direction + "/";
}

inline std::vector<std::string> directions(const ModelConfig& c) {
  if (c.tie_directions) return {"shared"};
  return {"forward", "backward"};
}

inline CellKind block_kind(const ModelConfig& c, int block) {
  if (block == 0) return CellKind::gru;
  return c.architecture == Architecture::bigru_lstm_cnn ? CellKind::lstm : CellKind::gru;
}

inline const char* block_name(int block) { return block == 0 ? "rnn_a" : "rnn_b"; }

}  // namespace detail

/// Every parameter the architecture declares, with its shape.
inline std::vector<std::pair<std::string, Shape>> declared_parameters(const ModelConfig& c, std::size_t vocab_size) {
  c.validate();
  std::vector<std::pair<std::string, Shape>> out;
  out.emplace_back(kEmbeddingParam, Shape{vocab_size, c.embed_dim});
  std::size_t features = 0;
  if (c.architecture == Architecture::textcnn) {
    for (std::size_t i = 0; i < c.textcnn_filter_sizes.size(); ++i) {
      const std::size_t k = c.textcnn_filter_sizes[i], n = c.textcnn_filter_counts[i];
      const std::string pre = "conv_k" + std::to_string(k) + "/";
      out.emplace_back(pre + "filters", Shape{k, c.embed_dim, n});
      out.emplace_back(pre + "bias", Shape{n});
      features += n;
    }
  } else {
    const std::size_t H = c.rnn_hidden_units;
    for (int block = 0; block < 2; ++block) {
      const CellKind kind = detail::block_kind(c, block);
      for (const auto& dir : detail::directions(c))
        for (const auto& gate : RecurrentCellParams::gate_names(kind)) {
          const std::string pre = detail::cell_prefix(detail::block_name(block), dir) + gate + "/";
          out.emplace_back(pre + "weight", Shape{c.embed_dim + H, H});
          out.emplace_back(pre + "bias", Shape{H});
        }
    }
    out.emplace_back("conv/filters", Shape{c.conv_after_rnn_kernel, 4 * H, c.conv_after_rnn_filters});
    out.emplace_back("conv/bias", Shape{c.conv_after_rnn_filters});
    features = c.conv_after_rnn_filters;
  }
  out.emplace_back("output/weight", Shape{features, c.num_classes});
  out.emplace_back("output/bias", Shape{c.num_classes});
  return out;
}

/// Parameter count excluding the embedding table.
inline std::size_t parameter_count(const ModelBundle& b) {
  std::size_t n = 0;
  for (const auto& [name, t] : b.parameters)
    if (name != kEmbeddingParam) n += t.size();
  return n;
}

/// Builds a freshly initialized model (Glorot-uniform weights, zero biases,
/// seeded from config.rng_seed). Without a pretrained table the embedding
/// rows start from U(-0.05, 0.05).
inline ModelBundle build_model(const ModelConfig& config, std::shared_ptr<const Vocabulary> vocabulary,
                               std::shared_ptr<const LabelRegistry> labels,
                               std::optional<EmbeddingTable> embeddings = std::nullopt) {
  config.validate();
  if (!vocabulary || !labels) throw ConfigError("model needs a vocabulary and a label registry");
  if (labels->size() != config.num_classes) {
    throw ConfigError("num_classes " + std::to_string(config.num_classes) + " but label registry has " +
                      std::to_string(labels->size()));
  }
  ModelBundle b{config, {}, vocabulary, labels, {}, {}};
  const auto declared = declared_parameters(config, vocabulary->size());

  if (embeddings) {
    if (embeddings->vocab_size() != vocabulary->size() || embeddings->dim() != config.embed_dim) {
      throw ShapeError("embedding table " + shape_str(embeddings->matrix.shape()) + " does not match vocabulary " +
                       std::to_string(vocabulary->size()) + " x " + std::to_string(config.embed_dim));
    }
    b.parameters[kEmbeddingParam] = embeddings->matrix.clone(config.embeddings_trainable);
  } else {
    Rng rng(derive_seed(config.rng_seed, 0));
    b.parameters[kEmbeddingParam] =
        EmbeddingTable::random(vocabulary->size(), config.embed_dim, rng).matrix.clone(config.embeddings_trainable);
  }

  std::uint64_t tag = 1;
  for (const auto& [name, shape] : declared) {
    if (name == kEmbeddingParam) continue;
    Rng rng(derive_seed(config.rng_seed, tag++));
    const bool is_bias = name.size() >= 4 && name.compare(name.size() - 4, 4, "bias") == 0;
    if (is_bias) {
      Tensor bias = Tensor::zeros(shape, true);
      if (name.find("/forget/") != std::string::npos)
        for (double& v : bias.mutable_values()) v = 1.0;
      b.parameters[name] = bias;
    } else if (shape.size() == 3) {  // conv filters k x cin x cout
      b.parameters[name] = glorot_uniform(shape, shape[0] * shape[1], shape[0] * shape[2], rng);
    } else {
      b.parameters[name] = glorot_uniform(shape, shape[0], shape[1], rng);
    }
  }
  return b;
}

inline ModelBundle build_textcnn(const ModelConfig& config, std::shared_ptr<const Vocabulary> vocabulary,
                                 std::shared_ptr<const LabelRegistry> labels,
                                 std::optional<EmbeddingTable> embeddings = std::nullopt) {
  if (config.architecture != Architecture::textcnn) throw ConfigError("build_textcnn needs architecture textcnn");
  return build_model(config, std::move(vocabulary), std::move(labels), std::move(embeddings));
}

inline ModelBundle build_bigru_cnn(const ModelConfig& config, std::shared_ptr<const Vocabulary> vocabulary,
                                   std::shared_ptr<const LabelRegistry> labels,
                                   std::optional<EmbeddingTable> embeddings = std::nullopt) {
  if (config.architecture != Architecture::bigru_cnn) throw ConfigError("build_bigru_cnn needs architecture bigru-cnn");
  return build_model(config, std::move(vocabulary), std::move(labels), std::move(embeddings));
}

inline ModelBundle build_bigru_lstm_cnn(const ModelConfig& config, std::shared_ptr<const Vocabulary> vocabulary,
                                        std::shared_ptr<const LabelRegistry> labels,
                                        std::optional<EmbeddingTable> embeddings = std::nullopt) {
  if (config.architecture != Architecture::bigru_lstm_cnn) {
    throw ConfigError("build_bigru_lstm_cnn needs architecture bigru-lstm-cnn");
  }
  return build_model(config, std::move(vocabulary), std::move(labels), std::move(embeddings));
}

/// Throws unless every declared parameter is present with its declared shape.
inline void audit_parameters(const ModelBundle& b) {
  const auto declared = declared_parameters(b.config, b.vocabulary->size());
  if (declared.size() != b.parameters.size()) {
    throw FormatError("model has " + std::to_string(b.parameters.size()) + " parameters, architecture declares " +
                      std::to_string(declared.size()));
  }
  for (const auto& [name, shape] : declared) {
    auto it = b.parameters.find(name);
    if (it == b.parameters.end()) throw FormatError("missing parameter " + name);
    if (it->second.shape() != shape) {
      throw FormatError("parameter " + name + " has shape " + shape_str(it->second.shape()) + ", expected " +
                        shape_str(shape));
    }
  }
}

namespace detail {

inline RecurrentCellParams cell_view(const ModelBundle& b, int block, const std::string& dir) {
  const CellKind kind = block_kind(b.config, block);
  RecurrentCellParams p{kind, b.config.embed_dim, b.config.rnn_hidden_units, {}, {}};
  for (const auto& gate : RecurrentCellParams::gate_names(kind)) {
    const std::string pre = cell_prefix(block_name(block), dir) + gate + "/";
    p.weights.push_back(b.param(pre + "weight"));
    p.biases.push_back(b.param(pre + "bias"));
  }
  return p;
}

inline Tensor recurrent_block(const ModelBundle& b, int block, const Tensor& x, std::size_t true_length) {
  if (b.config.tie_directions) return bidirectional_run(cell_view(b, block, "shared"), x, true_length);
  return bidirectional_run(cell_view(b, block, "forward"), cell_view(b, block, "backward"), x, true_length);
}

}  // namespace detail

inline void check_compatible(const ModelBundle& b, const EncodedDocument& doc) {
  if (doc.vocabulary_hash != b.vocabulary_hash()) {
    throw CompatibilityError("document encoded with vocabulary " + hex64(doc.vocabulary_hash) + ", model expects " +
                             hex64(b.vocabulary_hash()));
  }
  if (doc.indices.size() != b.config.max_len) {
    throw ShapeError("document has " + std::to_string(doc.indices.size()) + " slots, model expects " +
                     std::to_string(b.config.max_len));
  }
}

/// Unnormalized class scores. Dropout is active only in train mode.
inline Tensor forward_logits(const ModelBundle& b, const EncodedDocument& doc, Mode mode, Rng& rng) {
  check_compatible(b, doc);
  const ModelConfig& c = b.config;
  EmbeddingTable table{b.param(kEmbeddingParam), c.embeddings_trainable};
  Tensor x = embed(doc, table);
  Tensor features;
  if (c.architecture == Architecture::textcnn) {
    std::vector<Tensor> pooled;
    for (std::size_t k : c.textcnn_filter_sizes) {
      const std::string pre = "conv_k" + std::to_string(k) + "/";
      pooled.push_back(global_max_pool(relu(conv1d(x, b.param(pre + "filters"), b.param(pre + "bias")))));
    }
    features = dropout(concat(pooled), c.dropout_rate, mode, rng);
  } else {
    Tensor dropped = spatial_dropout1d(x, c.dropout_rate, mode, rng);
    Tensor a = detail::recurrent_block(b, 0, dropped, doc.true_length);
    Tensor bb = detail::recurrent_block(b, 1, dropped, doc.true_length);
    Tensor seq = concat({a, bb});
    features = global_max_pool(relu(conv1d(seq, b.param("conv/filters"), b.param("conv/bias"))));
  }
  return dense(features, b.param("output/weight"), b.param("output/bias"));
}

/// Eval-mode class distribution; builds no graph.
inline Tensor predict_proba(const ModelBundle& b, const EncodedDocument& doc) {
  NoGradGuard guard;
  Rng unused(0);
  return softmax(forward_logits(b, doc, Mode::eval, unused));
}

/// Index of the largest entry; ties go to the lowest index.
inline std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

inline std::size_t predict(const ModelBundle& b, const EncodedDocument& doc) {
  return argmax(predict_proba(b, doc).values());
}

}  // namespace jobpred
