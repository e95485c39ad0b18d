#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "jobpred/data.hpp"
#include "test_util.hpp"

using namespace jobpred;

namespace {

std::string table_ii_shaped_csv() {
  const auto& reg = LabelRegistry::it_jobs();
  const auto counts = LabelRegistry::it_jobs_counts();
  std::string csv = "description,label\n";
  for (std::size_t l = 0; l < reg.size(); ++l)
    for (std::size_t i = 0; i < counts[l]; ++i)
      csv += "\"Job " + std::to_string(i) + ", role \"\"" + reg.name(l) + "\"\"\"," + reg.name(l) + "\n";
  return csv;
}

}  // namespace

TEST(LabelRegistry, CanonicalOrderAndCounts) {
  const auto& reg = LabelRegistry::it_jobs();
  ASSERT_EQ(reg.size(), 25u);
  EXPECT_EQ(reg.name(0), "Data Scientist");
  EXPECT_EQ(reg.name(24), "Network Architect");
  EXPECT_EQ(reg.id("cloud architect"), 19u);
  EXPECT_EQ(reg.id("  Big Data Engineer "), 14u);
  const auto counts = LabelRegistry::it_jobs_counts();
  EXPECT_EQ(std::accumulate(counts.begin(), counts.end(), std::size_t{0}), 10000u);
  EXPECT_EQ(counts[reg.id("Data Scientist")], 400u);
  EXPECT_EQ(counts[reg.id("Cloud Architect")], 540u);
  EXPECT_EQ(counts[reg.id("Network Architect")], 511u);
  EXPECT_EQ(counts[reg.id("Big Data Engineer")], 320u);
  EXPECT_THROW(reg.id("Astronaut"), LabelError);
  EXPECT_THROW(LabelRegistry({"a", "A"}), ConfigError);
  EXPECT_EQ(LabelRegistry::parse(reg.serialize()).hash(), reg.hash());
}

TEST(LoadDataset, HistogramMatchesPublishedCounts) {
  auto examples = parse_dataset(table_ii_shaped_csv(), LabelRegistry::it_jobs());
  ASSERT_EQ(examples.size(), 10000u);
  auto hist = label_histogram(examples, 25);
  const auto counts = LabelRegistry::it_jobs_counts();
  EXPECT_TRUE(std::equal(hist.begin(), hist.end(), counts.begin()));
  EXPECT_EQ(examples.front().description, "Job 0, role \"Data Scientist\"");
}

TEST(LoadDataset, HeaderOnlyIsEmpty) {
  EXPECT_TRUE(parse_dataset("description,label\n", LabelRegistry::it_jobs()).empty());
}

TEST(LoadDataset, UnknownLabelNamesRow) {
  try {
    parse_dataset("description,label\nfine,Data Analyst\nspace walks,Astronaut\n", LabelRegistry::it_jobs());
    FAIL();
  } catch (const LabelError& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("Astronaut"), std::string::npos);
  }
}

TEST(LoadDataset, MalformedRowsAreParseErrors) {
  EXPECT_THROW(parse_dataset("description,label\na,b,c\n", LabelRegistry::it_jobs()), ParseError);
  EXPECT_THROW(parse_dataset("description,label\n\"open,Data Analyst\n", LabelRegistry::it_jobs()), ParseError);
  EXPECT_THROW(parse_dataset("foo,bar\nx,y\n", LabelRegistry::it_jobs()), ParseError);
  EXPECT_THROW(load_dataset("/nonexistent/jobs.csv", LabelRegistry::it_jobs()), InputError);
}

TEST(LoadDataset, TabDelimitedWithMultilineQuotedField) {
  auto ex = parse_dataset("label\tdescription\r\nIT Consultant\t\"line one\nline two\"\r\n", LabelRegistry::it_jobs());
  ASSERT_EQ(ex.size(), 1u);
  EXPECT_EQ(ex[0].description, "line one\nline two");
  EXPECT_EQ(ex[0].label_id, 17u);
}

TEST(Preprocess, Examples) {
  EXPECT_EQ(preprocess("Data Scientist #1 @ ACME!!"), (std::vector<std::string>{"data", "scientist", "1", "acme"}));
  EXPECT_TRUE(preprocess("").empty());
  EXPECT_TRUE(preprocess("THE the The").empty());
  EXPECT_EQ(preprocess("Java/J2EE, SQL+Hibernate"), (std::vector<std::string>{"java", "j2ee", "sql", "hibernate"}));
  EXPECT_EQ(preprocess("caf\xC3\xA9 r\xC3\xA9sum\xC3\xA9"), (std::vector<std::string>{"caf", "r", "sum"}));
}

TEST(Preprocess, IdempotentOnJoinedOutput) {
  Rng rng(5);
  const std::string alphabet = "abcXYZ019 #@&*$.,!-\t\nThe and IT \xC3\xA9";
  for (int trial = 0; trial < 300; ++trial) {
    std::string text;
    const std::size_t len = uniform_index(rng, 80);
    for (std::size_t i = 0; i < len; ++i) text += alphabet[uniform_index(rng, alphabet.size())];
    auto tokens = preprocess(text);
    std::string joined;
    for (std::size_t i = 0; i < tokens.size(); ++i) joined += (i ? " " : "") + tokens[i];
    EXPECT_EQ(preprocess(joined), tokens);
  }
}

TEST(Stopwords, ShippedFileMatchesEmbeddedList) {
  auto from_file = parse_stopwords(read_file(std::filesystem::path(JOBPRED_DATA_DIR) / "stopwords_en.txt"));
  EXPECT_EQ(from_file, default_stopwords());
  EXPECT_TRUE(default_stopwords().contains("the"));
  EXPECT_GE(default_stopwords().size(), 100u);
  EXPECT_LE(default_stopwords().size(), 200u);
  for (auto w : {"data", "scientist", "acme", "1"}) EXPECT_FALSE(default_stopwords().contains(w)) << w;
}

TEST(Vocabulary, FrequencyThenLexicographic) {
  std::vector<std::vector<std::string>> corpus{{"a", "b"}, {"b", "c"}};
  Vocabulary v = build_vocabulary(corpus, 1);
  ASSERT_EQ(v.size(), 5u);
  EXPECT_EQ(v.token(0), "<pad>");
  EXPECT_EQ(v.token(1), "<unk>");
  EXPECT_EQ(v.id("b"), 2u);
  EXPECT_EQ(v.id("a"), 3u);
  EXPECT_EQ(v.id("c"), 4u);
  EXPECT_EQ(v.id("zzz"), kUnknownId);

  Vocabulary v2 = build_vocabulary(corpus, 2);
  ASSERT_EQ(v2.size(), 3u);
  EXPECT_EQ(v2.id("b"), 2u);
  EXPECT_EQ(v2.id("a"), kUnknownId);

  EXPECT_THROW(build_vocabulary({}, 1), InputError);
  EXPECT_EQ(Vocabulary::parse(v.serialize()).hash(), v.hash());
  EXPECT_NE(v.hash(), v2.hash());
  EXPECT_THROW(Vocabulary::parse("a\nb\n"), FormatError);
}

TEST(Encode, Examples) {
  Vocabulary v = build_vocabulary({{"data", "scientist", "data"}}, 1);
  EncodedDocument empty = encode({}, v);
  EXPECT_EQ(empty.indices.size(), kMaxLen);
  EXPECT_EQ(empty.true_length, 0u);
  for (auto i : empty.indices) EXPECT_EQ(i, kPadId);

  std::vector<std::string> long_doc(1500, "data");
  long_doc[1199] = "scientist";
  long_doc[1200] = "other";
  EncodedDocument l = encode(long_doc, v);
  EXPECT_EQ(l.true_length, kMaxLen);
  EXPECT_EQ(l.indices[1199], v.id("scientist"));

  EncodedDocument d = encode({"data", "scientist"}, v);
  EXPECT_EQ(d.indices[0], v.id("data"));
  EXPECT_EQ(d.indices[1], v.id("scientist"));
  EXPECT_EQ(d.true_length, 2u);
  for (std::size_t i = 2; i < kMaxLen; ++i) EXPECT_EQ(d.indices[i], 0u);
  EXPECT_EQ(d.vocabulary_hash, v.hash());
}

TEST(Encode, DecodeRoundTripsInVocabularyTokens) {
  Rng rng(8);
  std::vector<std::string> words{"alpha", "beta", "gamma", "delta", "eps"};
  Vocabulary v = build_vocabulary({words}, 1);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> doc(uniform_index(rng, 40));
    for (auto& t : doc) t = words[uniform_index(rng, words.size())];
    const std::size_t max_len = 1 + uniform_index(rng, 30);
    auto enc = encode(doc, v, max_len);
    std::vector<std::string> expected(doc.begin(), doc.begin() + static_cast<std::ptrdiff_t>(std::min(doc.size(), max_len)));
    EXPECT_EQ(decode(enc, v), expected);
  }
}

TEST(Split, PublishedRatiosAtTenThousand) {
  auto m = split_dataset(10000, 42);
  EXPECT_EQ(m.test.size(), 1000u);
  EXPECT_EQ(m.validation.size(), 1800u);
  EXPECT_EQ(m.train.size(), 7200u);
  EXPECT_NO_THROW(m.validate(10000));
  EXPECT_EQ(split_dataset(10000, 42), m);
  EXPECT_NE(split_dataset(10000, 43), m);
  EXPECT_THROW(split_dataset(9, 1), InputError);
}

TEST(Split, DisjointAndExhaustiveForRandomSizes) {
  Rng rng(123);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 10 + uniform_index(rng, 491);
    const std::uint64_t seed = rng();
    auto m = split_dataset(n, seed);
    std::set<std::size_t> all;
    for (const auto* part : {&m.train, &m.validation, &m.test}) all.insert(part->begin(), part->end());
    EXPECT_EQ(all.size(), n);
    EXPECT_EQ(m.train.size() + m.validation.size() + m.test.size(), n);
    EXPECT_EQ(m.test.size(), static_cast<std::size_t>(std::llround(0.1 * n)));
    EXPECT_EQ(m.validation.size(), static_cast<std::size_t>(std::llround(0.2 * (n - m.test.size()))));
  }
}

TEST(Split, ManifestPersistsAndValidates) {
  auto m = split_dataset(57, 9);
  auto path = std::filesystem::temp_directory_path() / "jobpred_split_test.json";
  m.save(path);
  EXPECT_EQ(SplitManifest::load(path), m);
  EXPECT_THROW(m.validate(58), InputError);
  auto broken = m;
  broken.test.push_back(broken.train.front());
  EXPECT_THROW(broken.validate(57), InputError);
  std::filesystem::remove(path);
}

TEST(Embeddings, GloveLineCopiedWithFullCoverage) {
  Vocabulary v({"data"});
  std::string line = "data";
  for (int i = 0; i < 300; ++i) line += " 0.1";
  auto loaded = parse_embeddings(line + "\n", EmbeddingFormat::glove_text, v);
  EXPECT_EQ(loaded.coverage, 1.0);
  for (std::size_t j = 0; j < 300; ++j) {
    EXPECT_EQ(loaded.table.matrix.at(v.id("data"), j), 0.1);
    EXPECT_EQ(loaded.table.matrix.at(kPadId, j), 0.0);
  }
}

TEST(Embeddings, FasttextHeaderSkippedAndPadForcedZero) {
  Vocabulary v({"data", "cloud", "nothere"});
  std::string body;
  for (std::string tok : {"<pad>", "cloud", "data"}) {
    body += tok;
    for (int i = 0; i < 300; ++i) body += " 0.5";
    body += "\n";
  }
  auto loaded = parse_embeddings("2 300\n" + body, EmbeddingFormat::fasttext_vec, v, 300, 7);
  EXPECT_NEAR(loaded.coverage, 2.0 / 3.0, 1e-15);
  for (std::size_t j = 0; j < 300; ++j) EXPECT_EQ(loaded.table.matrix.at(kPadId, j), 0.0);
  EXPECT_EQ(loaded.table.matrix.at(v.id("cloud"), 5), 0.5);
  const double oov = loaded.table.matrix.at(v.id("nothere"), 3);
  EXPECT_GE(oov, -0.05);
  EXPECT_LT(oov, 0.05);
  auto again = parse_embeddings("2 300\n" + body, EmbeddingFormat::fasttext_vec, v, 300, 7);
  EXPECT_EQ(again.table.matrix.at(v.id("nothere"), 3), oov);
}

TEST(Embeddings, Errors) {
  Vocabulary v({"data"});
  EXPECT_THROW(parse_embeddings("data 0.1 0.2\n", EmbeddingFormat::glove_text, v), FormatError);
  EXPECT_THROW(parse_embeddings("2 50\n", EmbeddingFormat::fasttext_vec, v), FormatError);
  std::string bad = "data";
  for (int i = 0; i < 299; ++i) bad += " 0.1";
  bad += " nan?";
  try {
    parse_embeddings("\n" + bad + "\n", EmbeddingFormat::glove_text, v);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(parse_embeddings("lonely\n", EmbeddingFormat::glove_text, v), ParseError);
}
