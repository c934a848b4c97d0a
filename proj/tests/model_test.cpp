#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "salm/error.hpp"
#include "salm/model.hpp"

namespace salm {
namespace {

using testing::tiny_model;

std::vector<TokenId> ids(std::initializer_list<TokenId> l) { return l; }

TEST(InitParameters, SameSeedIsBitIdentical) {
  const auto c = tiny_model(20, 11);
  EXPECT_TRUE(init_parameters(c) == init_parameters(c));
}

TEST(InitParameters, DifferentSeedsDiffer) {
  EXPECT_FALSE(init_parameters(tiny_model(20, 1)) == init_parameters(tiny_model(20, 2)));
}

TEST(InitParameters, LayerNormGainsOneAndBiasesZero) {
  const auto p = init_parameters(tiny_model(20));
  for (const auto& [name, t] : p.tensors()) {
    if (name.ends_with("_gain")) EXPECT_TRUE((t->array() == 1.0).all()) << name;
    if (name.ends_with("bias")) EXPECT_TRUE((t->array() == 0.0).all()) << name;
  }
  EXPECT_TRUE(p.all_finite());
  p.check_shapes(tiny_model(20));
}

TEST(InitParameters, WeightScaleMatchesInverseSqrtWidth) {
  ModelConfig c = tiny_model(200);
  c.d_model = 64;
  c.d_ff = 128;
  const auto p = init_parameters(c);
  const Matrix& w = p.token_embedding;
  const double mean = w.mean();
  const double var = (w.array() - mean).square().mean();
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(std::sqrt(var), 1.0 / 8.0, 0.01);
}

TEST(ModelConfig, HeadsMustDivideWidth) {
  ModelConfig c = tiny_model(10);
  c.n_heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Forward, SingleTokenShape) {
  const auto c = tiny_model(20);
  const auto r = forward(c, init_parameters(c), ids({5}));
  EXPECT_EQ(r.logits.rows(), 1);
  EXPECT_EQ(r.logits.cols(), 20);
  EXPECT_EQ(r.trace.hidden.rows(), 1);
}

TEST(Forward, RejectsOverlongAndOutOfRange) {
  auto c = tiny_model(20);
  c.max_seq_len = 4;
  const auto p = init_parameters(c);
  EXPECT_THROW(forward(c, p, ids({1, 2, 3, 4, 5})), LengthError);
  EXPECT_THROW(forward(c, p, ids({1, 20})), IndexError);
  EXPECT_THROW(forward(c, p, ids({1, -1})), IndexError);
  EXPECT_THROW(forward(c, p, std::vector<TokenId>{}), LengthError);
}

TEST(Forward, CausalityUnderFuturePerturbation) {
  const auto c = tiny_model(30);
  const auto p = init_parameters(c);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<TokenId> seq(12);
    for (auto& t : seq) t = static_cast<TokenId>(rng() % 30);
    const auto base = forward(c, p, seq).logits;
    const std::size_t cut = rng() % 11;
    auto changed = seq;
    for (std::size_t i = cut + 1; i < changed.size(); ++i)
      changed[i] = static_cast<TokenId>((changed[i] + 1 + rng() % 29) % 30);
    const auto other = forward(c, p, changed).logits;
    for (std::size_t r = 0; r <= cut; ++r)
      EXPECT_EQ(base.row(static_cast<Eigen::Index>(r)), other.row(static_cast<Eigen::Index>(r)))
          << "row " << r << " changed after perturbing positions > " << cut;
  }
}

TEST(Forward, SoftmaxRowsSumToOne) {
  const auto c = tiny_model(30);
  const auto p = init_parameters(c);
  const auto logits = forward(c, p, ids({1, 4, 9, 2, 7, 7, 3})).logits;
  const Matrix logp = log_softmax_rows(logits);
  for (Eigen::Index r = 0; r < logp.rows(); ++r)
    EXPECT_NEAR(logp.row(r).array().exp().sum(), 1.0, 1e-6);
}

TEST(LogSoftmax, StableForHugeLogits) {
  Matrix m(1, 3);
  m << 1e308, 1e308, -1e308;
  const Matrix out = log_softmax_rows(m);
  EXPECT_TRUE(out.allFinite() || std::isinf(out(0, 2)));
  EXPECT_NEAR(out(0, 0), std::log(0.5), 1e-12);
}

TEST(SequenceLogProb, ZeroModelIsUniform) {
  const auto c = tiny_model(16);
  const auto p = Parameters::zeros(c);
  const std::vector<TokenId> y = {5, 6, 7, Vocabulary::kEos};
  const double lp = sequence_log_prob(c, p, ids({4, 9}), y);
  EXPECT_NEAR(lp, 4.0 * std::log(1.0 / 16.0), 1e-12);
}

TEST(SequenceLogProb, LengthOneResponsesSumToOne) {
  const auto c = tiny_model(24);
  const auto p = init_parameters(c);
  const auto ctx = ids({4, 8, 15});
  // y = [v] is only a valid response for v == EOS, so brute-force over the
  // first-step distribution via two-token responses [v, EOS] marginalized on
  // the first position.
  double total = 0.0;
  for (TokenId v = 0; v < 24; ++v) {
    const std::vector<TokenId> y = {v, Vocabulary::kEos};
    const double both = sequence_log_prob(c, p, ctx, y);
    std::vector<TokenId> longer_ctx(ctx.begin(), ctx.end());
    longer_ctx.push_back(v);
    const double second = sequence_log_prob(c, p, longer_ctx, std::vector<TokenId>{Vocabulary::kEos});
    total += std::exp(both - second);
  }
  EXPECT_NEAR(total, 1.0, 1e-6);
}

TEST(SequenceLogProb, AppendingATokenDecreasesScore) {
  const auto c = tiny_model(24);
  const auto p = init_parameters(c);
  const std::vector<TokenId> shortr = {7, Vocabulary::kEos};
  const std::vector<TokenId> longr = {7, 9, Vocabulary::kEos};
  // compare prefix probabilities: log P(7, 9 | X) < log P(7 | X)
  const double one = sequence_log_prob(c, p, ids({4}), shortr) -
                     sequence_log_prob(c, p, ids({4, 7}), std::vector<TokenId>{Vocabulary::kEos});
  const double two = sequence_log_prob(c, p, ids({4}), longr) -
                     sequence_log_prob(c, p, ids({4, 7, 9}), std::vector<TokenId>{Vocabulary::kEos});
  EXPECT_LT(two, one);
  EXPECT_LT(sequence_log_prob(c, p, ids({4}), longr), 0.0);
}

TEST(SequenceLogProb, RequiresEosTerminatedResponse) {
  const auto c = tiny_model(24);
  const auto p = init_parameters(c);
  EXPECT_THROW(sequence_log_prob(c, p, ids({4}), std::vector<TokenId>{}), LengthError);
  EXPECT_THROW(sequence_log_prob(c, p, ids({4}), ids({5, 6})), LengthError);
}

Matrix random_logit_weights(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix w(rows, cols);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = n(rng);
  return w;
}

TEST(Backward, MatchesFiniteDifferences) {
  const auto c = tiny_model(12, 21);
  Parameters p = init_parameters(c);
  // non-trivial layer-norm parameters so their gradients are exercised
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 0.2);
  for (auto& [name, t] : p.tensors())
    if (name.find("ln") != std::string::npos || name.ends_with("bias"))
      for (Eigen::Index i = 0; i < t->size(); ++i) t->data()[i] += n(rng);

  const std::vector<TokenId> seq = {1, 5, 7, 3, 9, 11, 2, 4};
  const Matrix weights = random_logit_weights(static_cast<Eigen::Index>(seq.size()), 12, 9);
  auto loss = [&](const Parameters& q) {
    return (forward(c, q, seq).logits.array() * weights.array()).sum();
  };
  const auto fwd = forward(c, p, seq);
  const Parameters grads = backward(c, p, fwd.trace, weights);
  const auto result = testing::finite_difference_check(p, grads, loss, 200, 1e-4, 1e-3, 1e-8, 4);
  EXPECT_GT(result.checked, 1000u);
  for (const auto& m : result.mismatches)
    ADD_FAILURE() << m.tensor << "[" << m.index << "] analytic " << m.analytic << " numeric "
                  << m.numeric;
}

TEST(Backward, UnusedPositionsGetZeroGradient) {
  const auto c = tiny_model(12);
  const auto p = init_parameters(c);
  const std::vector<TokenId> seq = {1, 5, 7};
  const auto fwd = forward(c, p, seq);
  const Parameters g = backward(c, p, fwd.trace, random_logit_weights(3, 12, 1));
  EXPECT_TRUE((g.positional_embedding.bottomRows(c.max_seq_len - 3).array() == 0.0).all());
  EXPECT_TRUE((g.token_embedding.row(0).array() == 0.0).all());
  EXPECT_FALSE((g.positional_embedding.topRows(3).array() == 0.0).all());
}

TEST(Backward, LinearInUpstreamGradient) {
  const auto c = tiny_model(12);
  const auto p = init_parameters(c);
  const std::vector<TokenId> seq = {1, 5, 7, 2};
  const auto fwd = forward(c, p, seq);
  const Matrix w = random_logit_weights(4, 12, 3);
  const Parameters g1 = backward(c, p, fwd.trace, w);
  const Parameters g2 = backward(c, p, fwd.trace, Matrix(2.0 * w));
  const auto a = g1.tensors();
  const auto b = g2.tensors();
  for (std::size_t i = 0; i < a.size(); ++i)
    EXPECT_TRUE(((2.0 * *a[i].second) - *b[i].second).cwiseAbs().maxCoeff() <= 1e-12) << a[i].first;
}

TEST(Backward, RejectsMismatchedShapes) {
  const auto c = tiny_model(12);
  const auto p = init_parameters(c);
  const auto fwd = forward(c, p, ids({1, 2}));
  Parameters g = Parameters::zeros(c);
  EXPECT_THROW(backward(c, p, fwd.trace, Matrix::Zero(3, 12), g), ShapeError);
  auto other = tiny_model(12);
  other.n_layers = 3;
  Parameters g3 = Parameters::zeros(other);
  EXPECT_THROW(backward(other, p, fwd.trace, Matrix::Zero(2, 12), g3), ShapeError);
}

Parameters rigged(const ModelConfig& c, TokenId favoured, double bias) {
  Parameters p = Parameters::zeros(c);
  p.output_bias(0, favoured) = bias;
  return p;
}

TEST(Decode, EosFavouredStopsImmediately) {
  const auto c = tiny_model(12);
  const auto out = decode(c, rigged(c, Vocabulary::kEos, 5.0), ids({4, 5}), {DecodeMode::kGreedy, 10});
  EXPECT_EQ(out, ids({Vocabulary::kEos}));
}

TEST(Decode, EosSuppressedRunsToMaxLen) {
  const auto c = tiny_model(12);
  const auto out = decode(c, rigged(c, Vocabulary::kEos, -5.0), ids({4, 5}), {DecodeMode::kGreedy, 7});
  ASSERT_EQ(out.size(), 7u);
  // all other logits tie at zero: lowest id wins
  for (TokenId t : out) EXPECT_EQ(t, 0);
}

TEST(Decode, GreedyAndSeededSamplingAreDeterministic) {
  const auto c = tiny_model(12);
  const auto p = init_parameters(c);
  const DecodeOptions greedy{DecodeMode::kGreedy, 8};
  EXPECT_EQ(decode(c, p, ids({4, 5}), greedy), decode(c, p, ids({4, 5}), greedy));
  const DecodeOptions sample{DecodeMode::kSample, 8, 1.0, 99};
  EXPECT_EQ(decode(c, p, ids({4, 5}), sample), decode(c, p, ids({4, 5}), sample));
}

TEST(Decode, NeverExceedsMaxLenOrPositionTable) {
  auto c = tiny_model(12);
  c.max_seq_len = 6;
  const auto p = rigged(c, Vocabulary::kEos, -5.0);
  const auto out = decode(c, p, ids({4, 5}), {DecodeMode::kSample, 50, 1.0, 3});
  EXPECT_LE(out.size(), 50u);
  EXPECT_LE(out.size() + 3, c.max_seq_len + 1);
  EXPECT_THROW(decode(c, p, ids({4}), {DecodeMode::kGreedy, 0}), ConfigError);
}

}  // namespace
}  // namespace salm
