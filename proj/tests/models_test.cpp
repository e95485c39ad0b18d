#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "jobpred/models.hpp"
#include "test_util.hpp"

using namespace jobpred;

namespace {

std::shared_ptr<const Vocabulary> toy_vocab(std::size_t words = 20) {
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < words; ++i) tokens.push_back("w" + std::to_string(i));
  return std::make_shared<const Vocabulary>(tokens);
}

std::shared_ptr<const LabelRegistry> toy_labels(std::size_t n) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) names.push_back("label" + std::to_string(i));
  return std::make_shared<const LabelRegistry>(names);
}

ModelConfig shrunk(Architecture arch) {
  ModelConfig c;
  c.architecture = arch;
  c.max_len = 10;
  c.embed_dim = 8;
  c.num_classes = 3;
  c.textcnn_filter_counts = {4, 3, 3};
  c.rnn_hidden_units = 4;
  c.conv_after_rnn_filters = 5;
  c.rng_seed = 7;
  return c;
}

EncodedDocument toy_doc(const Vocabulary& v, std::size_t max_len, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::string> toks;
  for (std::size_t i = 0; i < n; ++i) toks.push_back("w" + std::to_string(uniform_index(rng, 20)));
  return encode(toks, v, max_len);
}

const Architecture kAll[] = {Architecture::textcnn, Architecture::bigru_cnn, Architecture::bigru_lstm_cnn};

}  // namespace

TEST(ModelConfig, DefaultTextCnnCountsSumTo512) {
  ModelConfig c;
  EXPECT_EQ(std::accumulate(c.textcnn_filter_counts.begin(), c.textcnn_filter_counts.end(), std::size_t{0}), 512u);
  EXPECT_EQ(c.max_len, 1200u);
  EXPECT_EQ(c.embed_dim, 300u);
  EXPECT_DOUBLE_EQ(c.dropout_rate, 0.2);
}

TEST(ModelConfig, InvalidValuesRejected) {
  ModelConfig c;
  c.dropout_rate = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ModelConfig{};
  c.textcnn_filter_counts = {170, 171};
  EXPECT_THROW(c.validate(), ConfigError);
  c = ModelConfig{};
  c.max_len = 2;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ModelConfig{};
  c.num_classes = 25;
  EXPECT_THROW(build_model(c, toy_vocab(), toy_labels(3)), ConfigError);
  EXPECT_THROW(build_bigru_cnn(c, toy_vocab(), toy_labels(25)), ConfigError);
}

TEST(ModelConfig, JsonRoundTrip) {
  ModelConfig c = shrunk(Architecture::bigru_lstm_cnn);
  c.tie_directions = true;
  c.dropout_rate = 0.35;
  const ModelConfig back = ModelConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_THROW(ModelConfig::from_json(nlohmann::json{{"architecture", "textcnn"}}), FormatError);
  EXPECT_THROW(parse_architecture("rnn"), ConfigError);
}

TEST(TextCnn, DefaultParameterCountMatchesArithmetic) {
  // Hand-summed from the declared shapes: per branch k*300*n weights + n biases.
  const std::size_t expected = (3 * 300 * 170 + 170) + (4 * 300 * 171 + 171) + (5 * 300 * 171 + 171) + (512 * 25 + 25);
  EXPECT_EQ(expected, 628037u);
  ModelConfig c;
  auto b = build_textcnn(c, toy_vocab(5), std::make_shared<const LabelRegistry>(LabelRegistry::it_jobs()));
  EXPECT_EQ(parameter_count(b), expected);
}

TEST(BiGru, DefaultParameterCountsMatchArithmetic) {
  const std::size_t gate = (300 + 112) * 112 + 112;
  const std::size_t head = (3 * 448 * 64 + 64) + (64 * 25 + 25);
  auto labels = std::make_shared<const LabelRegistry>(LabelRegistry::it_jobs());
  ModelConfig c;
  c.architecture = Architecture::bigru_cnn;
  EXPECT_EQ(parameter_count(build_bigru_cnn(c, toy_vocab(5), labels)), 2 * 2 * 3 * gate + head);
  c.architecture = Architecture::bigru_lstm_cnn;
  EXPECT_EQ(parameter_count(build_bigru_lstm_cnn(c, toy_vocab(5), labels)), 2 * 3 * gate + 2 * 4 * gate + head);
  c.tie_directions = true;
  EXPECT_EQ(parameter_count(build_bigru_lstm_cnn(c, toy_vocab(5), labels)), 3 * gate + 4 * gate + head);
}

TEST(Models, ShapeAuditPassesAndDetectsTampering) {
  for (Architecture a : kAll) {
    auto b = build_model(shrunk(a), toy_vocab(), toy_labels(3));
    EXPECT_NO_THROW(audit_parameters(b)) << to_string(a);
    EXPECT_EQ(b.param(kEmbeddingParam).shape(), (Shape{22, 8}));
    auto broken = b;
    broken.parameters["output/bias"] = Tensor::zeros({4});
    EXPECT_THROW(audit_parameters(broken), FormatError);
    broken = b;
    broken.parameters.erase("output/weight");
    EXPECT_THROW(audit_parameters(broken), FormatError);
  }
  auto b = build_model(shrunk(Architecture::bigru_cnn), toy_vocab(), toy_labels(3));
  EXPECT_EQ(b.param("conv/filters").shape(), (Shape{3, 16, 5}));
  EXPECT_EQ(b.param("rnn_b/backward/candidate/weight").shape(), (Shape{12, 4}));
}

TEST(Models, InitializationIsSeeded) {
  for (Architecture a : kAll) {
    auto x = build_model(shrunk(a), toy_vocab(), toy_labels(3));
    auto y = build_model(shrunk(a), toy_vocab(), toy_labels(3));
    ModelConfig other = shrunk(a);
    other.rng_seed = 8;
    auto z = build_model(other, toy_vocab(), toy_labels(3));
    EXPECT_EQ(testutil::to_vec(x.param("output/weight")), testutil::to_vec(y.param("output/weight")));
    EXPECT_NE(testutil::to_vec(x.param("output/weight")), testutil::to_vec(z.param("output/weight")));
  }
}

TEST(Models, LstmForgetBiasStartsAtOne) {
  auto b = build_model(shrunk(Architecture::bigru_lstm_cnn), toy_vocab(), toy_labels(3));
  for (double v : testutil::to_vec(b.param("rnn_b/forward/forget/bias"))) EXPECT_EQ(v, 1.0);
  for (double v : testutil::to_vec(b.param("rnn_b/forward/input/bias"))) EXPECT_EQ(v, 0.0);
}

TEST(Models, OutputIsValidDistribution) {
  auto vocab = toy_vocab();
  for (Architecture a : kAll) {
    auto b = build_model(shrunk(a), vocab, toy_labels(3));
    for (std::uint64_t s = 0; s < 10; ++s) {
      const auto p = predict_proba(b, toy_doc(*vocab, 10, 1 + s % 12, s));
      ASSERT_EQ(p.shape(), Shape{3});
      double total = 0;
      for (double v : testutil::to_vec(p)) {
        EXPECT_TRUE(std::isfinite(v));
        EXPECT_GE(v, 0.0);
        total += v;
      }
      EXPECT_NEAR(total, 1.0, 1e-6) << to_string(a);
    }
  }
}

TEST(Models, AllPaddingDocumentIsWellDefined) {
  auto vocab = toy_vocab();
  for (Architecture a : kAll) {
    auto b = build_model(shrunk(a), vocab, toy_labels(3));
    const auto p = predict_proba(b, encode({}, *vocab, 10));
    double total = 0;
    for (double v : testutil::to_vec(p)) {
      EXPECT_TRUE(std::isfinite(v));
      total += v;
    }
    EXPECT_NEAR(total, 1.0, 1e-6);
  }
}

TEST(Models, ZeroDenseWeightsGiveUniform) {
  auto vocab = toy_vocab();
  auto labels = std::make_shared<const LabelRegistry>(LabelRegistry::it_jobs());
  for (Architecture a : kAll) {
    ModelConfig c = shrunk(a);
    c.num_classes = 25;
    auto b = build_model(c, vocab, labels);
    for (double& v : b.parameters.at("output/weight").mutable_values()) v = 0.0;
    const auto p = predict_proba(b, toy_doc(*vocab, 10, 6, 3));
    for (double v : testutil::to_vec(p)) EXPECT_NEAR(v, 0.04, 1e-15);
    EXPECT_EQ(predict(b, toy_doc(*vocab, 10, 6, 3)), 0u);
  }
}

TEST(Models, PredictProbaIsDeterministicAndBuildsNoGraph) {
  auto vocab = toy_vocab();
  for (Architecture a : kAll) {
    auto b = build_model(shrunk(a), vocab, toy_labels(3));
    const auto doc = toy_doc(*vocab, 10, 8, 11);
    const auto p1 = predict_proba(b, doc);
    const auto p2 = predict_proba(b, doc);
    EXPECT_EQ(testutil::to_vec(p1), testutil::to_vec(p2));
    EXPECT_FALSE(p1.requires_grad());
  }
}

TEST(Models, VocabularyMismatchIsCompatibilityError) {
  auto vocab = toy_vocab();
  auto b = build_model(shrunk(Architecture::textcnn), vocab, toy_labels(3));
  Vocabulary other(std::vector<std::string>{"x", "y"});
  EXPECT_THROW(predict_proba(b, encode({"x"}, other, 10)), CompatibilityError);
  EXPECT_THROW(predict_proba(b, encode({"w1"}, *vocab, 12)), ShapeError);
}

TEST(Models, PredictEqualsArgmaxOfIndependentProba) {
  // Recompute the TextCNN distribution with the scalar oracle kernels.
  auto vocab = toy_vocab();
  ModelConfig c = shrunk(Architecture::textcnn);
  auto b = build_model(c, vocab, toy_labels(3));
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto doc = toy_doc(*vocab, 10, 3 + s % 8, 100 + s);
    oracle::Mat x(10, oracle::Vec(8));
    const auto& table = b.param(kEmbeddingParam);
    for (std::size_t t = 0; t < 10; ++t)
      for (std::size_t d = 0; d < 8; ++d) x[t][d] = table.at(doc.indices[t], d);
    oracle::Vec features;
    for (std::size_t k : c.textcnn_filter_sizes) {
      const auto& f = b.param("conv_k" + std::to_string(k) + "/filters");
      const std::size_t n = f.dim(2);
      std::vector<oracle::Mat> filters(k, oracle::Mat(8, oracle::Vec(n)));
      for (std::size_t j = 0; j < k; ++j)
        for (std::size_t ci = 0; ci < 8; ++ci)
          for (std::size_t co = 0; co < n; ++co) filters[j][ci][co] = f[(j * 8 + ci) * n + co];
      const auto y = oracle::conv1d(x, filters, testutil::to_vec(b.param("conv_k" + std::to_string(k) + "/bias")));
      for (std::size_t co = 0; co < n; ++co) {
        double m = -1e300;
        for (const auto& row : y) m = std::max(m, std::max(0.0, row[co]));
        features.push_back(m);
      }
    }
    const auto logits = oracle::gate(features, testutil::to_mat(b.param("output/weight")),
                                     testutil::to_vec(b.param("output/bias")));
    double z = 0;
    for (double l : logits) z += std::exp(l);
    std::size_t best = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
      EXPECT_NEAR(predict_proba(b, doc)[i], std::exp(logits[i]) / z, 1e-12);
      if (logits[i] > logits[best]) best = i;
    }
    EXPECT_EQ(predict(b, doc), best);
  }
}

TEST(Models, ScalingOutputLayerKeepsPrediction) {
  auto vocab = toy_vocab();
  for (Architecture a : kAll) {
    auto b = build_model(shrunk(a), vocab, toy_labels(3));
    auto scaled = b.clone();
    for (const char* name : {"output/weight", "output/bias"})
      for (double& v : scaled.parameters.at(name).mutable_values()) v *= 3.5;
    for (std::uint64_t s = 0; s < 10; ++s) {
      const auto doc = toy_doc(*vocab, 10, 2 + s, s);
      EXPECT_EQ(predict(b, doc), predict(scaled, doc));
    }
  }
}

TEST(Argmax, TieBreakAndOneHot) {
  std::vector<double> uniform(25, 0.04);
  EXPECT_EQ(argmax(uniform), 0u);
  std::vector<double> hot(25, 0.0);
  hot[17] = 1.0;
  EXPECT_EQ(argmax(hot), 17u);
  EXPECT_EQ(argmax(std::vector<double>{0.2, 0.4, 0.4}), 1u);
}

TEST(BiGru, SingleTokenHalvesEqualWithTiedDirections) {
  auto vocab = toy_vocab();
  for (Architecture a : {Architecture::bigru_cnn, Architecture::bigru_lstm_cnn}) {
    ModelConfig c = shrunk(a);
    c.tie_directions = true;
    auto b = build_model(c, vocab, toy_labels(3));
    const auto doc = toy_doc(*vocab, 10, 1, 5);
    EmbeddingTable table{b.param(kEmbeddingParam), false};
    const Tensor x = embed(doc, table);
    for (int block = 0; block < 2; ++block) {
      const Tensor h = detail::recurrent_block(b, block, x, 1);
      for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(h.at(0, j), h.at(0, 4 + j));
    }
  }
}

TEST(BiGru, ParallelBlocksAreIndependent) {
  auto vocab = toy_vocab();
  for (Architecture a : {Architecture::bigru_cnn, Architecture::bigru_lstm_cnn}) {
    auto b = build_model(shrunk(a), vocab, toy_labels(3));
    const auto doc = toy_doc(*vocab, 10, 7, 9);
    EmbeddingTable table{b.param(kEmbeddingParam), false};
    const Tensor x = embed(doc, table);
    const Tensor ha = detail::recurrent_block(b, 0, x, doc.true_length);
    const Tensor hb = detail::recurrent_block(b, 1, x, doc.true_length);
    EXPECT_NE(testutil::to_vec(ha), testutil::to_vec(hb));

    // Reseeding only block b moves the logits.
    Rng rng(12345);
    auto reseeded = b.clone();
    for (auto& [name, t] : reseeded.parameters)
      if (name.rfind("rnn_b/", 0) == 0 && name.ends_with("weight"))
        t = glorot_uniform(t.shape(), t.dim(0), t.dim(1), rng);
    Rng unused(0);
    NoGradGuard guard;
    EXPECT_NE(testutil::to_vec(forward_logits(b, doc, Mode::eval, unused)),
              testutil::to_vec(forward_logits(reseeded, doc, Mode::eval, unused)));
  }
}

TEST(Models, TrainModeDropoutIsSeededAndEvalIsNot) {
  auto vocab = toy_vocab();
  for (Architecture a : kAll) {
    ModelConfig c = shrunk(a);
    c.dropout_rate = 0.5;
    auto b = build_model(c, vocab, toy_labels(3));
    const auto doc = toy_doc(*vocab, 10, 9, 4);
    NoGradGuard guard;
    Rng r1(1), r2(1), r3(2);
    const auto l1 = forward_logits(b, doc, Mode::train, r1);
    const auto l2 = forward_logits(b, doc, Mode::train, r2);
    const auto l3 = forward_logits(b, doc, Mode::train, r3);
    EXPECT_EQ(testutil::to_vec(l1), testutil::to_vec(l2));
    EXPECT_NE(testutil::to_vec(l1), testutil::to_vec(l3));
  }
}

class FullModelGradient : public ::testing::TestWithParam<std::tuple<Architecture, bool, bool>> {};

TEST_P(FullModelGradient, FiniteDifferenceBelowTolerance) {
  const auto [arch, trainable, tied] = GetParam();
  auto vocab = toy_vocab();
  ModelConfig c = shrunk(arch);
  c.embeddings_trainable = trainable;
  c.tie_directions = tied;
  auto b = build_model(c, vocab, toy_labels(3));
  const auto doc = toy_doc(*vocab, 10, 10, 21);
  const std::size_t target = 2;
  std::vector<Tensor> params;
  for (auto& [name, t] : b.trainable()) params.push_back(t);
  auto loss = [&] {
    Rng rng(99);  // same dropout mask on every evaluation
    const Tensor logits = forward_logits(b, doc, Mode::train, rng);
    return softmax_cross_entropy(reshape(logits, {1, 3}), std::span<const std::size_t>(&target, 1));
  };
  EXPECT_LT(finite_difference_check(loss, params), 1e-4);
}

INSTANTIATE_TEST_SUITE_P(AllArchitectures, FullModelGradient,
                         ::testing::Values(std::make_tuple(Architecture::textcnn, false, false),
                                           std::make_tuple(Architecture::textcnn, true, false),
                                           std::make_tuple(Architecture::bigru_cnn, false, false),
                                           std::make_tuple(Architecture::bigru_cnn, true, true),
                                           std::make_tuple(Architecture::bigru_lstm_cnn, false, false),
                                           std::make_tuple(Architecture::bigru_lstm_cnn, true, true)));
