#pragma once

// Seeded synthetic job-description corpora for smoke runs and tests.
// Each label gets a handful of signature words; documents mix those with a
// shared filler pool and common English function words.

#include <array>
#include <string>
#include <vector>

#include "jobpred/data.hpp"
#include "jobpred/random.hpp"

namespace jobpred {

struct SyntheticCorpusOptions {
  std::size_t min_words = 20;
  std::size_t max_words = 80;
  double long_fraction = 0.0;  // share of documents drawn from 501..700 words
  double signal = 0.3;         // probability a word is a label signature word
  std::size_t signature_words = 8;
  std::uint64_t seed = 0;
};

namespace detail {

inline std::string pseudo_word(Rng& rng) {
  static constexpr std::array<const char*, 20> onsets = {"b", "c", "d", "f", "g", "k", "l", "m", "n", "p",
                                                         "r", "s", "t", "v", "z", "br", "st", "tr", "pl", "gr"};
  static constexpr std::array<const char*, 6> vowels = {"a", "e", "i", "o", "u", "ei"};
  std::string w;
  const std::size_t syllables = 2 + uniform_index(rng, 2);
  for (std::size_t s = 0; s < syllables; ++s) {
    w += onsets[uniform_index(rng, onsets.size())];
    w += vowels[uniform_index(rng, vowels.size())];
  }
  w += "n";
  return w;
}

}  // namespace detail

/// CSV text with header "description,label" and counts[i] rows of label i.
inline std::string synthetic_corpus_csv(const LabelRegistry& labels, const std::vector<std::size_t>& counts,
                                        const SyntheticCorpusOptions& opt = {}) {
  if (counts.size() != labels.size()) throw ConfigError("need one count per label");
  Rng rng(opt.seed);
  std::vector<std::vector<std::string>> signature(labels.size());
  for (std::size_t l = 0; l < labels.size(); ++l) {
    for (const auto& w : preprocess(labels.name(l))) signature[l].push_back(w);
    for (std::size_t k = 0; k < opt.signature_words; ++k) signature[l].push_back(detail::pseudo_word(rng));
  }
  std::vector<std::string> filler;
  for (int k = 0; k < 150; ++k) filler.push_back(detail::pseudo_word(rng));
  static constexpr std::array<const char*, 10> glue = {"the", "and", "of", "with", "for", "a", "in", "to", "our", "is"};

  std::vector<std::size_t> order;
  for (std::size_t l = 0; l < counts.size(); ++l) order.insert(order.end(), counts[l], l);
  shuffle(order, rng);

  std::string csv = "description,label\n";
  for (std::size_t l : order) {
    const bool long_doc = uniform01(rng) < opt.long_fraction;
    const std::size_t n = long_doc ? 501 + uniform_index(rng, 200)
                                   : opt.min_words + uniform_index(rng, opt.max_words - opt.min_words + 1);
    std::string text;
    for (std::size_t i = 0; i < n; ++i) {
      if (i) text += ' ';
      const double u = uniform01(rng);
      if (u < opt.signal) text += signature[l][uniform_index(rng, signature[l].size())];
      else if (u < opt.signal + 0.2) text += glue[uniform_index(rng, glue.size())];
      else text += filler[uniform_index(rng, filler.size())];
      if (i + 1 < n && uniform01(rng) < 0.05) text += ',';
    }
    csv += "\"" + text + "\"," + labels.name(l) + "\n";
  }
  return csv;
}

/// Word vectors for the given tokens in GloVe text format (one row per token).
inline std::string synthetic_vectors_glove(const std::vector<std::string>& tokens, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::string out;
  char buf[32];
  for (const auto& t : tokens) {
    out += t;
    for (std::size_t d = 0; d < dim; ++d) {
      std::snprintf(buf, sizeof buf, " %.5f", uniform(rng, -0.5, 0.5));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace jobpred
