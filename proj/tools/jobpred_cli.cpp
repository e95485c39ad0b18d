// jobpred: train, evaluate and serve IT job-title classifiers.
//
// Exit codes: 0 ok, 1 usage, 2 data/format, 3 runtime/divergence.

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "jobpred/pipeline.hpp"
#include "jobpred/service.hpp"

namespace fs = std::filesystem;
using namespace jobpred;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitRuntime = 3;

struct Options {
  std::string dataset;
  std::string embeddings;
  std::string embedding_format = "glove-text";
  std::string arch = "bigru-cnn";
  std::vector<std::string> models;
  std::uint64_t split_seed = 2020;
  std::string split_manifest;
  std::string out;
  std::string bind = "127.0.0.1:8080";
  std::string cors_origin = "*";
  std::size_t top_k = 5;
  std::string text;
  std::string input;
  bool json = false;
  std::size_t boundary = 500;

  ModelConfig model;
  TrainConfig train;
};

void write_output(const fs::path& dir, const std::string& name, const std::string& text) {
  if (dir.empty()) return;
  write_file(dir / name, text);
}

std::vector<fs::path> model_paths(const Options& o) {
  if (o.models.empty()) throw ConfigError("--model is required");
  return {o.models.begin(), o.models.end()};
}

EnsembleSpec load_spec(const Options& o) { return load_predictor(model_paths(o))->spec(); }

std::string member_name(const ModelBundle& b, std::size_t index) {
  return to_string(b.config.architecture) + "#" + std::to_string(index + 1);
}

int cmd_train(Options o) {
  if (o.out.empty()) throw ConfigError("--out is required");
  const fs::path out = o.out;
  o.model.architecture = parse_architecture(o.arch);
  o.model.num_classes = LabelRegistry::it_jobs().size();
  o.model.validate();
  o.train.validate();

  const auto corpus = load_corpus(o.dataset);
  fs::create_directories(out);
  const fs::path split_path = o.split_manifest.empty() ? out / "split.json" : fs::path(o.split_manifest);
  const auto split = resolve_split(corpus, o.split_seed, split_path);
  std::cerr << "dataset: " << corpus.size() << " documents; split train/val/test = " << split.train.size() << "/"
            << split.validation.size() << "/" << split.test.size() << " (" << split_path.string() << ")\n";

  std::optional<EmbeddingSource> emb;
  if (!o.embeddings.empty()) emb = EmbeddingSource{o.embeddings, parse_embedding_format(o.embedding_format)};
  else std::cerr << "warning: no --embeddings given, embedding rows are randomly initialized\n";

  std::ofstream history(out / "history.log");
  struct Tee : std::streambuf {
    std::ostream &a, &b;
    Tee(std::ostream& x, std::ostream& y) : a(x), b(y) {}
    int overflow(int c) override {
      a.put(static_cast<char>(c));
      b.put(static_cast<char>(c));
      return c;
    }
  } tee(history, std::cerr);
  std::ostream both(&tee);

  auto run = train_on_split(corpus, split, o.model, o.train, emb, &both);
  if (run.embedding_coverage) std::cerr << "embedding coverage: " << *run.embedding_coverage << "\n";
  const auto id = save_checkpoint(run.result.bundle, out / "model");
  std::cout << "saved " << (out / "model").string() << " (" << id << "), best epoch " << run.result.best_epoch
            << ", validation macro-F1 " << run.result.bundle.training.best_validation_f1 << "\n";
  return 0;
}

int cmd_evaluate(const Options& o) {
  if (o.split_manifest.empty()) throw ConfigError("--split-manifest is required");
  const auto spec = load_spec(o);
  const auto corpus = load_corpus(o.dataset);
  const auto split = SplitManifest::load(o.split_manifest);
  split.validate(corpus.size());
  const auto preds = predict_split(spec, corpus, split.test);
  const std::size_t classes = corpus.labels->size();

  std::vector<NamedReport> rows;
  std::string jsonl;
  for (std::size_t m = 0; m < spec.size(); ++m) {
    rows.push_back({member_name(*spec.members[m], m), compute_metrics(preds.truths, preds.member_predictions[m], classes)});
  }
  const auto final_report = compute_metrics(preds.truths, preds.predictions, classes);
  if (spec.size() > 1) rows.push_back({"Ensemble", final_report});
  for (const auto& r : rows) jsonl += report_json(r.model, r.report, corpus.labels.get()).dump() + "\n";

  const std::string table = render_report(rows);
  const std::string per_label = render_label_report(final_report, *corpus.labels);
  std::string lengths;
  for (const auto& b : length_bucket_f1(preds.raw_words, preds.truths, preds.predictions, classes, o.boundary)) {
    lengths += b.name + " words: " + std::to_string(b.count) + " docs, macro-F1 " +
               (b.macro_f1 ? detail::percent(*b.macro_f1) : std::string("absent")) + "\n";
  }
  std::cout << "test documents: " << preds.truths.size() << "\n\n" << table << "\n" << per_label << "\n" << lengths;
  if (!o.out.empty()) {
    write_output(o.out, "report.txt", table);
    write_output(o.out, "labels.txt", per_label);
    write_output(o.out, "length_buckets.txt", lengths);
    write_output(o.out, "report.jsonl", jsonl);
  }
  return 0;
}

int cmd_analyze_length(const Options& o) {
  if (o.split_manifest.empty()) throw ConfigError("--split-manifest is required");
  const auto spec = load_spec(o);
  const auto corpus = load_corpus(o.dataset);
  const auto split = SplitManifest::load(o.split_manifest);
  split.validate(corpus.size());
  const auto preds = predict_split(spec, corpus, split.test);
  const std::size_t classes = corpus.labels->size();
  nlohmann::json records = nlohmann::json::array();
  std::cout << "bucket      docs  macro-F1 (%)\n";
  for (const auto& b : length_bucket_f1(preds.raw_words, preds.truths, preds.predictions, classes, o.boundary)) {
    std::cout << detail::pad_right(b.name, 10) << detail::pad_left(std::to_string(b.count), 6) << "  "
              << (b.macro_f1 ? detail::percent(*b.macro_f1) : std::string("absent")) << "\n";
    records.push_back({{"bucket", b.name}, {"count", b.count}, {"macro_f1", b.macro_f1 ? nlohmann::json(*b.macro_f1) : nlohmann::json()}});
  }
  if (!o.out.empty()) write_output(o.out, "length_buckets.json", records.dump(2) + "\n");
  return 0;
}

int cmd_predict(const Options& o) {
  const auto predictor = load_predictor(model_paths(o));
  std::vector<std::string> texts;
  if (!o.input.empty()) {
    std::istringstream in(read_file(o.input));
    for (std::string line; std::getline(in, line);) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      texts.push_back(line);
    }
  } else {
    texts.push_back(o.text);
  }
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto r = predict_text(*predictor, texts[i], o.top_k);
    if (r.tokens_before_truncation == 0) {
      std::cerr << "warning: input " << i + 1 << " has no tokens after preprocessing\n";
    }
    if (o.json) {
      std::cout << r.to_json(predictor->labels()).dump() << "\n";
      continue;
    }
    std::cout << r.label_name << "\n";
    for (const auto& [id, p] : r.scores)
      std::cout << "  " << detail::pad_left(detail::percent(p), 6) << "%  " << predictor->labels().name(id) << "\n";
  }
  return 0;
}

volatile std::sig_atomic_t g_stop = 0;

void on_signal(int) { g_stop = 1; }

int cmd_serve(const Options& o) {
  const auto [host, port] = parse_bind(o.bind);
  PredictionService service;
  HttpServer server(service, ServerOptions{o.cors_origin});
  const int bound = server.bind(host, port);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.start();
  std::cerr << "listening on " << host << ":" << bound << "\n";
  service.set_predictor(load_predictor(model_paths(o)));
  std::cerr << "model loaded: " << service.predictor()->identifier() << "\n";
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  std::cerr << "shutting down\n";
  server.stop();
  return 0;
}

void add_model_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--model", o.models, "Checkpoint directory or ensemble manifest; repeat for an ensemble")
      ->required();
}

void add_dataset_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--dataset", o.dataset, "Dataset CSV/TSV with description and label columns")->required();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"IT job-title classification: train, evaluate, predict, serve"};
  app.set_config("--config", "", "TOML/INI file with option defaults (flags win)");
  app.require_subcommand(1);
  Options o;

  auto* train = app.add_subcommand("train", "Train one architecture and save the best checkpoint");
  add_dataset_options(train, o);
  train->add_option("--embeddings", o.embeddings, "Pretrained word vectors");
  train->add_option("--embedding-format", o.embedding_format, "glove-text or fasttext-vec")
      ->check(CLI::IsMember({"glove-text", "fasttext-vec"}));
  train->add_option("--arch", o.arch, "textcnn, bigru-cnn or bigru-lstm-cnn")
      ->check(CLI::IsMember({"textcnn", "bigru-cnn", "bigru-lstm-cnn"}));
  train->add_option("--split-seed", o.split_seed, "Seed for the train/validation/test split");
  train->add_option("--split-manifest", o.split_manifest, "Split manifest to reuse or create (default <out>/split.json)");
  train->add_option("--out", o.out, "Output directory")->required();
  train->add_option("--seed", o.model.rng_seed, "Seed for initialization");
  train->add_option("--train-seed", o.train.seed, "Seed for shuffling and dropout");
  train->add_option("--max-len", o.model.max_len, "Token slots per document");
  train->add_option("--embed-dim", o.model.embed_dim, "Embedding width");
  train->add_option("--hidden-units", o.model.rnn_hidden_units, "Recurrent units per direction");
  train->add_option("--conv-filters", o.model.conv_after_rnn_filters, "Filters in the post-recurrent convolution");
  train->add_option("--textcnn-counts", o.model.textcnn_filter_counts, "Filters per TextCNN branch");
  train->add_option("--dropout", o.model.dropout_rate, "Dropout rate");
  train->add_flag("--trainable-embeddings", o.model.embeddings_trainable, "Fine-tune the embedding table");
  train->add_flag("--tie-directions", o.model.tie_directions, "Share recurrent weights between directions");
  train->add_option("--epochs", o.train.max_epochs, "Maximum epochs");
  train->add_option("--batch-size", o.train.batch_size, "Mini-batch size");
  train->add_option("--lr", o.train.learning_rate, "Adam step size");
  train->add_option("--patience", o.train.early_stop_patience, "Epochs without validation improvement before stopping");
  train->add_option("--clip", o.train.gradient_clip_norm, "Global gradient norm limit");

  auto* evaluate = app.add_subcommand("evaluate", "Score a model or ensemble on the split's test documents");
  add_model_options(evaluate, o);
  add_dataset_options(evaluate, o);
  evaluate->add_option("--split-manifest", o.split_manifest, "Split manifest written by train")->required();
  evaluate->add_option("--out", o.out, "Directory for report files");
  evaluate->add_option("--boundary", o.boundary, "Word-count boundary for the length buckets");

  auto* predict = app.add_subcommand("predict", "Predict job titles for free text");
  add_model_options(predict, o);
  auto* text_opt = predict->add_option("--text", o.text, "Description text");
  auto* input_opt = predict->add_option("--input", o.input, "File with one description per line");
  text_opt->excludes(input_opt);
  predict->add_option("--top-k", o.top_k, "Number of ranked labels to show")->check(CLI::PositiveNumber);
  predict->add_flag("--json", o.json, "One JSON result per line");

  auto* serve = app.add_subcommand("serve", "Run the HTTP prediction service");
  add_model_options(serve, o);
  serve->add_option("--bind", o.bind, "host:port");
  serve->add_option("--cors-origin", o.cors_origin, "Access-Control-Allow-Origin value");

  auto* length = app.add_subcommand("analyze-length", "Macro-F1 by document length on the test split");
  add_model_options(length, o);
  add_dataset_options(length, o);
  length->add_option("--split-manifest", o.split_manifest, "Split manifest written by train")->required();
  length->add_option("--boundary", o.boundary, "Word-count boundary");
  length->add_option("--out", o.out, "Directory for length_buckets.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*train) return cmd_train(o);
    if (*evaluate) return cmd_evaluate(o);
    if (*predict) return cmd_predict(o);
    if (*serve) return cmd_serve(o);
    if (*length) return cmd_analyze_length(o);
  } catch (const Error& e) {
    std::cerr << "jobpred: " << e.what() << "\n";
    switch (e.kind()) {
      case ErrorKind::config: return kExitUsage;
      case ErrorKind::divergence:
      case ErrorKind::numeric: return kExitRuntime;
      default: return kExitData;
    }
  } catch (const std::exception& e) {
    std::cerr << "jobpred: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
