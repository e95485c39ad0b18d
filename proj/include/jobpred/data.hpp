#pragma once

// Dataset ingestion, label registry, preprocessing, vocabulary, encoding,
// splitting, and pretrained-embedding loading.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "jobpred/document.hpp"
#include "jobpred/error.hpp"
#include "jobpred/layers.hpp"
#include "jobpred/random.hpp"

namespace jobpred {

namespace fs = std::filesystem;

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw InputError("failed writing " + path.string());
}

namespace detail {

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

inline std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Labels

/// Ordered set of job titles; id = position.
class LabelRegistry {
 public:
  LabelRegistry() = default;

  explicit LabelRegistry(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.empty()) throw ConfigError("label registry is empty");
    for (std::size_t i = 0; i < names_.size(); ++i) {
      auto key = detail::ascii_lower(detail::trim(names_[i]));
      if (key.empty()) throw ConfigError("empty label name at position " + std::to_string(i));
      if (!index_.emplace(key, i).second) throw ConfigError("duplicate label name: " + names_[i]);
    }
    Fnv1a h;
    for (const auto& n : names_) {
      h.update(n);
      h.update("\n");
    }
    hash_ = h.digest();
  }

  /// The 25 IT job titles, in the dataset's published order.
  static const LabelRegistry& it_jobs() {
    static const LabelRegistry registry({
        "Data Scientist", "Data Analyst", "Data Architect", "Data Engineer", "Statistics",
        "Database Administrator", "Business Analyst", "Data and Analytics Manager", "Machine Learning",
        "Artificial Intelligence", "Deep Learning", "Business Intelligence Analyst",
        "Data Visualization Expert", "Data Quality Manager", "Big Data Engineer", "Data Warehousing",
        "Technology Integration", "IT Consultant", "IT Systems Administrator", "Cloud Architect",
        "Technical Operations", "Cloud Services Developer", "Full Stack Developer",
        "Information Security Analyst", "Network Architect",
    });
    return registry;
  }

  /// Published per-label sample counts matching it_jobs() order (total 10,000).
  static constexpr std::array<std::size_t, 25> it_jobs_counts() {
    return {400, 397, 399, 385, 390, 400, 396, 399, 392, 382, 381, 372, 377,
            394, 320, 385, 399, 398, 399, 540, 394, 395, 400, 395, 511};
  }

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(std::size_t id) const {
    if (id >= names_.size()) throw LabelError("label id " + std::to_string(id) + " out of range");
    return names_[id];
  }
  /// Case-insensitive, whitespace-trimmed lookup.
  std::optional<std::size_t> find(std::string_view name) const {
    auto it = index_.find(detail::ascii_lower(detail::trim(name)));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  std::size_t id(std::string_view name) const {
    if (auto i = find(name)) return *i;
    throw LabelError("unknown label \"" + std::string(name) + "\"");
  }
  std::uint64_t hash() const { return hash_; }

  std::string serialize() const {
    std::string out;
    for (const auto& n : names_) out += n + "\n";
    return out;
  }
  static LabelRegistry parse(std::string_view text) {
    std::vector<std::string> names;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
      auto t = detail::trim(line);
      if (!t.empty()) names.emplace_back(t);
    }
    return LabelRegistry(std::move(names));
  }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
  std::uint64_t hash_ = 0;
};

// ---------------------------------------------------------------------------
// Dataset file

struct RawExample {
  std::string description;
  std::string label;
  std::size_t label_id = 0;
};

namespace detail {

// RFC 4180 records: quoted fields may hold delimiters, "" escapes and newlines.
// Each record carries the 1-based line number it started on.
struct CsvRecord {
  std::vector<std::string> fields;
  std::size_t line = 0;
};

inline std::vector<CsvRecord> parse_delimited(std::string_view text, char delim) {
  std::vector<CsvRecord> records;
  CsvRecord cur;
  std::string field;
  bool in_quotes = false, field_started = false;
  std::size_t line = 1;
  cur.line = 1;
  auto end_field = [&] {
    cur.fields.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(cur.fields.size() == 1 && trim(cur.fields[0]).empty())) records.push_back(std::move(cur));
    cur = CsvRecord{};
    cur.line = line;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == delim) {
      end_field();
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      continue;
    } else if (c == '\n') {
      ++line;
      end_record();
    } else {
      field += c;
      field_started = true;
    }
  }
  if (in_quotes) throw ParseError("unterminated quoted field starting near line " + std::to_string(cur.line));
  if (field_started || !field.empty() || !cur.fields.empty()) end_record();
  return records;
}

inline char detect_delimiter(std::string_view text) {
  const auto header = text.substr(0, text.find('\n'));
  const auto commas = std::count(header.begin(), header.end(), ',');
  const auto tabs = std::count(header.begin(), header.end(), '\t');
  return tabs > commas ? '\t' : ',';
}

inline std::optional<std::size_t> find_column(const std::vector<std::string>& header,
                                              std::initializer_list<std::string_view> names) {
  for (std::string_view want : names)
    for (std::size_t i = 0; i < header.size(); ++i)
      if (ascii_lower(trim(header[i])) == want) return i;
  return std::nullopt;
}

}  // namespace detail

/// Parses a comma- or tab-separated file whose header names a description
/// column and a label column. Row numbers in errors are 1-based data rows.
inline std::vector<RawExample> parse_dataset(std::string_view text, const LabelRegistry& registry) {
  if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  auto records = detail::parse_delimited(text, detail::detect_delimiter(text));
  if (records.empty()) throw ParseError("dataset has no header");
  const auto& header = records.front().fields;
  auto desc_col = detail::find_column(header, {"description", "job_description", "job description", "text",
                                               "jobdescription", "content"});
  auto label_col = detail::find_column(header, {"label", "job_title", "job title", "title", "category",
                                                "class", "query", "jobtitle"});
  if (!desc_col || !label_col) throw ParseError("header must name a description column and a label column");
  std::vector<RawExample> out;
  out.reserve(records.size() - 1);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& f = records[r].fields;
    if (f.size() != header.size()) {
      throw ParseError("row " + std::to_string(r) + " (line " + std::to_string(records[r].line) + ") has " +
                       std::to_string(f.size()) + " fields, header has " + std::to_string(header.size()));
    }
    auto id = registry.find(f[*label_col]);
    if (!id) {
      throw LabelError("row " + std::to_string(r) + ": unknown label \"" + std::string(detail::trim(f[*label_col])) +
                       "\"");
    }
    out.push_back({f[*desc_col], registry.name(*id), *id});
  }
  return out;
}

inline std::vector<RawExample> load_dataset(const fs::path& path, const LabelRegistry& registry) {
  if (!fs::exists(path)) throw InputError("dataset not found: " + path.string());
  return parse_dataset(read_file(path), registry);
}

inline std::vector<std::size_t> label_histogram(const std::vector<RawExample>& examples, std::size_t classes) {
  std::vector<std::size_t> counts(classes, 0);
  for (const auto& e : examples) ++counts.at(e.label_id);
  return counts;
}

/// Whitespace-separated word count of the raw text.
inline std::size_t raw_word_count(std::string_view text) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : text) {
    const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

// ---------------------------------------------------------------------------
// Preprocessing

/// English stopwords restricted to [a-z0-9]+ forms. Mirrors data/stopwords_en.txt.
inline const std::vector<std::string_view>& default_stopword_list() {
  static const std::vector<std::string_view> words = {
      "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "your", "yours", "yourself",
      "yourselves", "he", "him", "his", "himself", "she", "her", "hers", "herself", "it", "its", "itself",
      "they", "them", "their", "theirs", "themselves", "what", "which", "who", "whom", "this", "that",
      "these", "those", "am", "is", "are", "was", "were", "be", "been", "being", "have", "has", "had",
      "having", "do", "does", "did", "doing", "a", "an", "the", "and", "but", "if", "or", "because", "as",
      "until", "while", "of", "at", "by", "for", "with", "about", "against", "between", "into", "through",
      "during", "before", "after", "above", "below", "to", "from", "up", "down", "in", "out", "on", "off",
      "over", "under", "again", "further", "then", "once", "here", "there", "when", "where", "why", "how",
      "all", "any", "both", "each", "few", "more", "most", "other", "some", "such", "no", "nor", "not",
      "only", "own", "same", "so", "than", "too", "very", "s", "t", "can", "will", "just", "don", "should",
      "now", "d", "ll", "m", "o", "re", "ve", "y", "ain", "aren", "couldn", "didn", "doesn", "hadn",
      "hasn", "haven", "isn", "ma", "mightn", "mustn", "needn", "shan", "shouldn", "wasn", "weren", "won",
      "wouldn",
  };
  return words;
}

using StopwordSet = std::unordered_set<std::string>;

inline const StopwordSet& default_stopwords() {
  static const StopwordSet set = [] {
    StopwordSet s;
    for (auto w : default_stopword_list()) s.emplace(w);
    return s;
  }();
  return set;
}

/// One token per line; blank lines and lines starting with '#' are skipped.
inline StopwordSet parse_stopwords(std::string_view text) {
  StopwordSet s;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    auto t = detail::trim(line);
    if (!t.empty() && t.front() != '#') s.emplace(detail::ascii_lower(t));
  }
  return s;
}

/// lowercase -> every char outside [a-z0-9 ] becomes a space -> split on
/// whitespace runs -> drop stopwords.
inline std::vector<std::string> preprocess(std::string_view text, const StopwordSet& stopwords = default_stopwords()) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty() && !stopwords.contains(cur)) tokens.push_back(cur);
    cur.clear();
  };
  for (char ch : text) {
    char c = ch;
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
      cur += c;
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

// ---------------------------------------------------------------------------
// Vocabulary

class Vocabulary {
 public:
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnknownToken = "<unk>";

  Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

  /// Real tokens in id order starting at id 2.
  explicit Vocabulary(const std::vector<std::string>& tokens) {
    tokens_ = {std::string(kPadToken), std::string(kUnknownToken)};
    for (const auto& t : tokens) {
      if (t == kPadToken || t == kUnknownToken) throw VocabularyError("reserved token in vocabulary: " + t);
      if (!ids_.emplace(t, tokens_.size()).second) throw VocabularyError("duplicate token: " + t);
      tokens_.push_back(t);
    }
    Fnv1a h;
    for (const auto& t : tokens_) {
      h.update(t);
      h.update("\n");
    }
    hash_ = h.digest();
  }

  std::size_t size() const { return tokens_.size(); }
  std::size_t id(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnknownId : it->second;
  }
  bool contains(const std::string& token) const { return ids_.contains(token); }
  const std::string& token(std::size_t id) const {
    if (id >= tokens_.size()) throw VocabularyError("id " + std::to_string(id) + " out of range");
    return tokens_[id];
  }
  std::uint64_t hash() const { return hash_; }

  std::string serialize() const {
    std::string out;
    for (const auto& t : tokens_) out += t + "\n";
    return out;
  }
  static Vocabulary parse(std::string_view text) {
    std::vector<std::string> lines;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    if (lines.size() < 2 || lines[0] != kPadToken || lines[1] != kUnknownToken) {
      throw FormatError("vocabulary file must start with " + std::string(kPadToken) + " and " +
                        std::string(kUnknownToken));
    }
    return Vocabulary(std::vector<std::string>(lines.begin() + 2, lines.end()));
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
  std::uint64_t hash_ = 0;
};

/// Tokens with count >= min_frequency, ordered by descending count then
/// lexicographically. Build it from the training split only.
inline Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& documents,
                                   std::size_t min_frequency = 1) {
  if (documents.empty()) throw InputError("cannot build a vocabulary from an empty training set");
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& doc : documents)
    for (const auto& t : doc) ++counts[t];
  std::vector<std::pair<std::string, std::size_t>> items;
  for (auto& [t, c] : counts)
    if (c >= std::max<std::size_t>(min_frequency, 1) && t != Vocabulary::kPadToken && t != Vocabulary::kUnknownToken)
      items.emplace_back(t, c);
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> tokens;
  tokens.reserve(items.size());
  for (auto& [t, c] : items) tokens.push_back(t);
  return Vocabulary(tokens);
}

/// Map to ids (unknown -> 1), keep the first max_len, right-pad with 0.
inline EncodedDocument encode(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                              std::size_t max_len = kMaxLen) {
  EncodedDocument doc;
  doc.indices.assign(max_len, kPadId);
  doc.true_length = std::min(tokens.size(), max_len);
  for (std::size_t i = 0; i < doc.true_length; ++i) doc.indices[i] = vocab.id(tokens[i]);
  doc.vocabulary_hash = vocab.hash();
  return doc;
}

inline std::vector<std::string> decode(const EncodedDocument& doc, const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < doc.true_length; ++i) out.push_back(vocab.token(doc.indices[i]));
  return out;
}

// ---------------------------------------------------------------------------
// Splits

struct SplitManifest {
  std::uint64_t seed = 0;
  std::size_t dataset_size = 0;
  std::vector<std::size_t> train, validation, test;

  bool operator==(const SplitManifest&) const = default;

  /// Throws unless the three lists partition 0..dataset_size-1.
  void validate(std::size_t n) const {
    if (dataset_size != n) {
      throw InputError("split manifest covers " + std::to_string(dataset_size) + " examples, dataset has " +
                       std::to_string(n));
    }
    std::vector<char> seen(n, 0);
    for (const auto* part : {&train, &validation, &test})
      for (std::size_t id : *part) {
        if (id >= n) throw InputError("split manifest id " + std::to_string(id) + " out of range");
        if (seen[id]++) throw InputError("split manifest id " + std::to_string(id) + " appears twice");
      }
    if (train.size() + validation.size() + test.size() != n) throw InputError("split manifest does not cover dataset");
  }

  nlohmann::json to_json() const {
    return {{"seed", seed}, {"dataset_size", dataset_size}, {"train", train}, {"validation", validation}, {"test", test}};
  }
  static SplitManifest from_json(const nlohmann::json& j) {
    try {
      SplitManifest m;
      m.seed = j.at("seed").get<std::uint64_t>();
      m.dataset_size = j.at("dataset_size").get<std::size_t>();
      m.train = j.at("train").get<std::vector<std::size_t>>();
      m.validation = j.at("validation").get<std::vector<std::size_t>>();
      m.test = j.at("test").get<std::vector<std::size_t>>();
      return m;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("split manifest: ") + e.what());
    }
  }
  void save(const fs::path& path) const { write_file(path, to_json().dump(1) + "\n"); }
  static SplitManifest load(const fs::path& path) {
    try {
      return from_json(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(std::string("split manifest: ") + e.what());
    }
  }
};

/// Seeded shuffle of 0..n-1; first round(0.1 n) -> test, then
/// round(0.2 (n - |test|)) -> validation, rest -> train.
inline SplitManifest split_dataset(std::size_t n, std::uint64_t seed) {
  if (n < 10) throw InputError("need at least 10 examples to split, got " + std::to_string(n));
  std::vector<std::size_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = i;
  Rng rng(seed);
  shuffle(ids, rng);
  const auto n_test = static_cast<std::size_t>(std::llround(0.10 * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(0.20 * static_cast<double>(n - n_test)));
  SplitManifest m;
  m.seed = seed;
  m.dataset_size = n;
  m.test.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));
  m.validation.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_test),
                      ids.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
  m.train.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_test + n_val), ids.end());
  return m;
}

// ---------------------------------------------------------------------------
// Pretrained embeddings

enum class EmbeddingFormat { glove_text, fasttext_vec };

inline EmbeddingFormat parse_embedding_format(std::string_view s) {
  if (s == "glove-text") return EmbeddingFormat::glove_text;
  if (s == "fasttext-vec") return EmbeddingFormat::fasttext_vec;
  throw ConfigError("unknown embedding format \"" + std::string(s) + "\"");
}

struct LoadedEmbeddings {
  EmbeddingTable table;
  double coverage = 0.0;  // fraction of real (non-reserved) vocabulary tokens found in the file
  std::size_t found = 0;
};

/// In-vocabulary rows are copied from the file; the rest start from seeded
/// U(-0.05, 0.05); the pad row is forced to zero.
inline LoadedEmbeddings parse_embeddings(std::string_view text, EmbeddingFormat format, const Vocabulary& vocab,
                                         std::size_t dim = kEmbedDim, std::uint64_t seed = 0) {
  Rng rng(seed);
  LoadedEmbeddings out{EmbeddingTable::random(vocab.size(), dim, rng), 0.0, 0};
  auto values = out.table.matrix.mutable_values();
  std::vector<char> filled(vocab.size(), 0);
  std::size_t line_no = 0, pos = 0;
  bool header_pending = format == EmbeddingFormat::fasttext_vec;
  std::vector<std::string_view> fields;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    fields.clear();
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
      std::size_t j = i;
      while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
      if (j > i) fields.push_back(line.substr(i, j - i));
      i = j;
    }
    if (fields.empty()) continue;
    if (header_pending) {
      header_pending = false;
      std::size_t count = 0, file_dim = 0;
      if (fields.size() != 2 || std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), count).ec != std::errc{} ||
          std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), file_dim).ec != std::errc{}) {
        throw ParseError("line 1: expected \"count dim\" header");
      }
      if (file_dim != dim) {
        throw FormatError("embedding dimension " + std::to_string(file_dim) + " != expected " + std::to_string(dim));
      }
      continue;
    }
    if (fields.size() != dim + 1) {
      if (fields.size() >= 2) {
        throw FormatError("line " + std::to_string(line_no) + ": embedding dimension " +
                          std::to_string(fields.size() - 1) + " != expected " + std::to_string(dim));
      }
      throw ParseError("line " + std::to_string(line_no) + ": malformed embedding line");
    }
    const std::string token(fields[0]);
    if (!vocab.contains(token)) continue;
    const std::size_t id = vocab.id(token);
    if (filled[id]) continue;
    for (std::size_t k = 0; k < dim; ++k) {
      double v = 0.0;
      auto f = fields[k + 1];
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc{} || ptr != f.data() + f.size() || !std::isfinite(v)) {
        throw ParseError("line " + std::to_string(line_no) + ": bad number \"" + std::string(f) + "\"");
      }
      values[id * dim + k] = v;
    }
    filled[id] = 1;
  }
  std::fill_n(values.begin(), dim, 0.0);
  for (std::size_t id = 2; id < vocab.size(); ++id) out.found += filled[id];
  const std::size_t real = vocab.size() - 2;
  out.coverage = real == 0 ? 0.0 : static_cast<double>(out.found) / static_cast<double>(real);
  return out;
}

inline LoadedEmbeddings load_embeddings(const fs::path& path, EmbeddingFormat format, const Vocabulary& vocab,
                                        std::size_t dim = kEmbedDim, std::uint64_t seed = 0) {
  if (!fs::exists(path)) throw InputError("embeddings not found: " + path.string());
  return parse_embeddings(read_file(path), format, vocab, dim, seed);
}

}  // namespace jobpred
