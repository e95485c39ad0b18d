#pragma once

// On-disk model format. A checkpoint is a directory:
//
//   manifest.json          format version, config, hashes, parameter shapes,
//                          training metadata
//   vocab.txt, labels.txt  the vocabulary and label registry
//   params/<name>.bin      flat little-endian float64 buffer per parameter
//
// Saving writes a sibling temp directory and renames it into place.

#include <bit>
#include <cstring>
#include <optional>
#include <string>

#include <json.hpp>

#include "jobpred/models.hpp"

namespace jobpred {

inline constexpr int kCheckpointFormatVersion = 1;

namespace detail {

inline std::string encode_le(std::span<const double> values) {
  std::string out(values.size() * 8, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(values[i]);
    for (int b = 0; b < 8; ++b) out[i * 8 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  return out;
}

inline std::vector<double> decode_le(std::string_view bytes) {
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= std::uint64_t(static_cast<unsigned char>(bytes[i * 8 + b])) << (8 * b);
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

inline std::uint64_t parse_hex64(const std::string& s) {
  if (s.size() != 16 || s.find_first_not_of("0123456789abcdef") != std::string::npos) {
    throw FormatError("bad hash \"" + s + "\"");
  }
  return std::stoull(s, nullptr, 16);
}

}  // namespace detail

/// Identifier derived from the manifest bytes: "<arch>-<fnv1a hex>".
inline std::string model_identifier(Architecture arch, std::string_view manifest_text) {
  return to_string(arch) + "-" + hex64(fnv1a(manifest_text));
}

inline std::string checkpoint_manifest(const ModelBundle& b) {
  nlohmann::json params = nlohmann::json::array();
  for (const auto& [name, t] : b.parameters) params.push_back({{"name", name}, {"shape", t.shape()}});
  nlohmann::json m = {{"format_version", kCheckpointFormatVersion},
                      {"config", b.config.to_json()},
                      {"vocabulary_hash", hex64(b.vocabulary_hash())},
                      {"label_registry_hash", hex64(b.label_hash())},
                      {"parameters", params},
                      {"training",
                       {{"epochs_run", b.training.epochs_run}, {"best_validation_f1", b.training.best_validation_f1}}}};
  return m.dump(2) + "\n";
}

/// Writes the bundle to `dir` (replacing any previous checkpoint there) and
/// returns its identifier.
inline std::string save_checkpoint(ModelBundle& b, const fs::path& dir) {
  audit_parameters(b);
  const std::string manifest = checkpoint_manifest(b);
  fs::path tmp = dir;
  tmp += ".tmp-" + hex64(fnv1a(manifest)).substr(0, 8);
  fs::remove_all(tmp);
  write_file(tmp / "manifest.json", manifest);
  write_file(tmp / "vocab.txt", b.vocabulary->serialize());
  write_file(tmp / "labels.txt", b.labels->serialize());
  for (const auto& [name, t] : b.parameters) write_file(tmp / "params" / (name + ".bin"), detail::encode_le(t.values()));
  fs::remove_all(dir);
  fs::rename(tmp, dir);
  b.identifier = model_identifier(b.config.architecture, manifest);
  return b.identifier;
}

struct CheckpointExpectations {
  std::optional<std::uint64_t> vocabulary_hash;
  std::optional<std::uint64_t> label_registry_hash;
};

inline ModelBundle load_checkpoint(const fs::path& dir, const CheckpointExpectations& expect = {}) {
  if (!fs::is_directory(dir)) throw InputError("checkpoint not found: " + dir.string());
  const std::string manifest_text = read_file(dir / "manifest.json");
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(manifest_text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(dir.string() + "/manifest.json: " + e.what());
  }
  ModelBundle b;
  std::vector<std::pair<std::string, Shape>> listed;
  std::uint64_t vocab_hash = 0, label_hash = 0;
  try {
    const int version = m.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw FormatError("unsupported checkpoint format_version " + std::to_string(version));
    }
    b.config = ModelConfig::from_json(m.at("config"));
    vocab_hash = detail::parse_hex64(m.at("vocabulary_hash").get<std::string>());
    label_hash = detail::parse_hex64(m.at("label_registry_hash").get<std::string>());
    for (const auto& p : m.at("parameters")) listed.emplace_back(p.at("name").get<std::string>(), p.at("shape").get<Shape>());
    b.training.epochs_run = m.at("training").at("epochs_run").get<std::size_t>();
    b.training.best_validation_f1 = m.at("training").at("best_validation_f1").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(dir.string() + "/manifest.json: " + e.what());
  }

  if (expect.vocabulary_hash && *expect.vocabulary_hash != vocab_hash) {
    throw CompatibilityError("checkpoint vocabulary " + hex64(vocab_hash) + " does not match expected " +
                             hex64(*expect.vocabulary_hash));
  }
  if (expect.label_registry_hash && *expect.label_registry_hash != label_hash) {
    throw CompatibilityError("checkpoint label registry " + hex64(label_hash) + " does not match expected " +
                             hex64(*expect.label_registry_hash));
  }

  b.vocabulary = std::make_shared<const Vocabulary>(Vocabulary::parse(read_file(dir / "vocab.txt")));
  b.labels = std::make_shared<const LabelRegistry>(LabelRegistry::parse(read_file(dir / "labels.txt")));
  if (b.vocabulary->hash() != vocab_hash) throw FormatError("vocab.txt does not match the manifest hash");
  if (b.labels->hash() != label_hash) throw FormatError("labels.txt does not match the manifest hash");

  for (const auto& [name, shape] : listed) {
    const fs::path file = dir / "params" / (name + ".bin");
    const std::string bytes = read_file(file);
    const std::size_t want = shape_numel(shape) * 8;
    if (bytes.size() != want) {
      throw FormatError(file.string() + ": " + std::to_string(bytes.size()) + " bytes, expected " +
                        std::to_string(want) + (bytes.size() < want ? " (truncated)" : ""));
    }
    const bool grad = name != kEmbeddingParam || b.config.embeddings_trainable;
    b.parameters[name] = Tensor(shape, detail::decode_le(bytes), grad);
  }
  audit_parameters(b);
  b.identifier = model_identifier(b.config.architecture, manifest_text);
  return b;
}

}  // namespace jobpred
