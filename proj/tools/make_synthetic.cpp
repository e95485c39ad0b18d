// Writes a synthetic job-description dataset (and optionally matching word
// vectors) for smoke runs.

#include <iostream>
#include <set>

#include <CLI11.hpp>

#include "jobpred/synthetic.hpp"

using namespace jobpred;

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic dataset with the 25 IT job labels"};
  std::string out_csv, out_vectors;
  std::size_t per_label = 8, dim = 16, min_words = 20, max_words = 80;
  bool table_counts = false;
  SyntheticCorpusOptions opt;
  app.add_option("--out", out_csv, "CSV path")->required();
  app.add_option("--vectors", out_vectors, "Also write GloVe-format vectors for the corpus tokens");
  app.add_option("--dim", dim, "Vector width");
  app.add_option("--per-label", per_label, "Documents per label");
  app.add_flag("--table-counts", table_counts, "Use the published per-label counts (10,000 documents)");
  app.add_option("--min-words", min_words, "Shortest regular document");
  app.add_option("--max-words", max_words, "Longest regular document");
  app.add_option("--long-fraction", opt.long_fraction, "Share of documents longer than 500 words");
  app.add_option("--seed", opt.seed, "Generator seed");
  CLI11_PARSE(app, argc, argv);
  opt.min_words = min_words;
  opt.max_words = max_words;

  const auto& labels = LabelRegistry::it_jobs();
  std::vector<std::size_t> counts(labels.size(), per_label);
  if (table_counts) {
    const auto c = LabelRegistry::it_jobs_counts();
    counts.assign(c.begin(), c.end());
  }
  try {
    const std::string csv = synthetic_corpus_csv(labels, counts, opt);
    write_file(out_csv, csv);
    if (!out_vectors.empty()) {
      std::set<std::string> vocab;
      for (const auto& e : parse_dataset(csv, labels))
        for (auto& t : preprocess(e.description)) vocab.insert(t);
      // Leave every tenth token out so coverage is below 1.
      std::vector<std::string> tokens;
      std::size_t i = 0;
      for (const auto& t : vocab)
        if (i++ % 10 != 9) tokens.push_back(t);
      write_file(out_vectors, synthetic_vectors_glove(tokens, dim, opt.seed + 1));
    }
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
  return 0;
}
