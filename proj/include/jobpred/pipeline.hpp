#pragma once

// End-to-end steps shared by the CLI and the acceptance runner:
// load -> preprocess -> split -> vocabulary -> embeddings -> train/evaluate.

#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "jobpred/checkpoint.hpp"
#include "jobpred/ensemble.hpp"
#include "jobpred/evaluation.hpp"
#include "jobpred/training.hpp"

namespace jobpred {

struct Corpus {
  std::vector<RawExample> examples;
  std::vector<std::vector<std::string>> tokens;  // preprocessed, untruncated
  std::vector<std::size_t> raw_words;
  std::shared_ptr<const LabelRegistry> labels;

  std::size_t size() const { return examples.size(); }
};

inline Corpus make_corpus(std::vector<RawExample> examples, std::shared_ptr<const LabelRegistry> labels) {
  Corpus c;
  c.labels = std::move(labels);
  c.examples = std::move(examples);
  for (const auto& e : c.examples) {
    c.tokens.push_back(preprocess(e.description));
    c.raw_words.push_back(raw_word_count(e.description));
  }
  return c;
}

inline Corpus load_corpus(const fs::path& path,
                          std::shared_ptr<const LabelRegistry> labels =
                              std::make_shared<const LabelRegistry>(LabelRegistry::it_jobs())) {
  return make_corpus(load_dataset(path, *labels), labels);
}

/// Loads `path` if it exists (checking it fits the corpus); otherwise creates
/// a fresh split and saves it there.
inline SplitManifest resolve_split(const Corpus& corpus, std::uint64_t seed, const fs::path& path) {
  if (fs::exists(path)) {
    auto m = SplitManifest::load(path);
    m.validate(corpus.size());
    return m;
  }
  auto m = split_dataset(corpus.size(), seed);
  m.save(path);
  return m;
}

inline std::shared_ptr<const Vocabulary> corpus_vocabulary(const Corpus& corpus, const std::vector<std::size_t>& ids) {
  std::vector<std::vector<std::string>> docs;
  docs.reserve(ids.size());
  for (std::size_t i : ids) docs.push_back(corpus.tokens.at(i));
  return std::make_shared<const Vocabulary>(build_vocabulary(docs));
}

inline std::vector<EncodedDocument> encode_subset(const Corpus& corpus, const std::vector<std::size_t>& ids,
                                                  const Vocabulary& vocab, std::size_t max_len) {
  std::vector<EncodedDocument> out;
  out.reserve(ids.size());
  for (std::size_t i : ids) {
    auto d = encode(corpus.tokens.at(i), vocab, max_len);
    d.label_id = corpus.examples[i].label_id;
    out.push_back(std::move(d));
  }
  return out;
}

struct EmbeddingSource {
  fs::path path;
  EmbeddingFormat format = EmbeddingFormat::glove_text;
};

struct TrainingRun {
  TrainResult result;
  std::optional<double> embedding_coverage;
};

/// Vocabulary from the training split, optional pretrained vectors, train.
inline TrainingRun train_on_split(const Corpus& corpus, const SplitManifest& split, ModelConfig model_config,
                                  const TrainConfig& train_config, const std::optional<EmbeddingSource>& embeddings,
                                  std::ostream* log = nullptr) {
  split.validate(corpus.size());
  model_config.num_classes = corpus.labels->size();
  auto vocab = corpus_vocabulary(corpus, split.train);
  TrainingRun run;
  std::optional<EmbeddingTable> table;
  if (embeddings) {
    auto loaded = load_embeddings(embeddings->path, embeddings->format, *vocab, model_config.embed_dim,
                                  derive_seed(model_config.rng_seed, 0));
    run.embedding_coverage = loaded.coverage;
    table = std::move(loaded.table);
  }
  const auto bundle = build_model(model_config, vocab, corpus.labels, std::move(table));
  const auto train_docs = encode_subset(corpus, split.train, *vocab, model_config.max_len);
  const auto val_docs = encode_subset(corpus, split.validation, *vocab, model_config.max_len);
  run.result = train(bundle, train_docs, val_docs, train_config, log);
  return run;
}

struct SplitPredictions {
  std::vector<std::size_t> truths, predictions, raw_words;
  std::vector<std::vector<std::size_t>> member_predictions;  // per member, same order
};

/// Runs every ensemble member (and the vote) over the given corpus ids.
inline SplitPredictions predict_split(const EnsembleSpec& spec, const Corpus& corpus, const std::vector<std::size_t>& ids) {
  spec.validate();
  if (spec.labels().hash() != corpus.labels->hash()) {
    throw CompatibilityError("model label registry differs from the dataset's");
  }
  SplitPredictions out;
  out.member_predictions.resize(spec.size());
  for (std::size_t i : ids) {
    const auto p = ensemble_predict_tokens(spec, corpus.tokens.at(i));
    out.truths.push_back(corpus.examples[i].label_id);
    out.predictions.push_back(p.label_id);
    out.raw_words.push_back(corpus.raw_words[i]);
    for (std::size_t m = 0; m < spec.size(); ++m) out.member_predictions[m].push_back(p.member_votes[m]);
  }
  return out;
}

}  // namespace jobpred
