#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "test_util.hpp"
#include "wuneng/autodiff.hpp"
#include "wuneng/error.hpp"

namespace wuneng {
namespace {

using testing::random_attn_head;
using testing::random_matrix;

// Brute-force causal attention: explicit max-shifted exponentials and sums.
TensorD loop_attention(const TensorD& q, const TensorD& k, const TensorD& v) {
  const std::size_t n = q.rows(), dk = q.cols();
  TensorD out({n, v.cols()}, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    std::vector<double> score(t + 1);
    double mx = -INFINITY;
    for (std::size_t s = 0; s <= t; ++s) {
      double acc = 0.0;
      for (std::size_t c = 0; c < dk; ++c) acc += q(t, c) * k(s, c);
      score[s] = acc / std::sqrt(static_cast<double>(dk));
      mx = std::max(mx, score[s]);
    }
    double z = 0.0;
    for (auto& e : score) z += (e = std::exp(e - mx));
    for (std::size_t s = 0; s <= t; ++s) {
      for (std::size_t c = 0; c < v.cols(); ++c) out(t, c) += score[s] / z * v(s, c);
    }
  }
  return out;
}

TEST(ProjectQkv, ZeroInputGivesZero) {
  Rng rng(1);
  const auto p = random_attn_head(4, 2, rng, 0.0);
  const QKV r = attention::project_qkv(TensorD::zeros(3, 4), p);
  EXPECT_EQ(r.q, TensorD::zeros(3, 2));
  EXPECT_EQ(r.k, TensorD::zeros(3, 2));
  EXPECT_EQ(r.v, TensorD::zeros(3, 2));
}

TEST(ProjectQkv, IdentityQueryWeights) {
  Rng rng(2);
  auto p = random_attn_head(3, 3, rng, 0.0);
  p.w_q = TensorD::identity(3);
  const TensorD x = random_matrix(2, 3, rng);
  EXPECT_EQ(attention::project_qkv(x, p).q, x);
}

TEST(ProjectQkv, MatchesExplicitSums) {
  Rng rng(3);
  const auto p = random_attn_head(4, 2, rng, 0.0);
  const TensorD x = random_matrix(3, 4, rng);
  const QKV r = attention::project_qkv(x, p);
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t c = 0; c < 2; ++c) {
      double q = 0, k = 0, v = 0;
      for (std::size_t i = 0; i < 4; ++i) {
        q += x(t, i) * p.w_q(i, c);
        k += x(t, i) * p.w_k(i, c);
        v += x(t, i) * p.w_v(i, c);
      }
      EXPECT_NEAR(r.q(t, c), q, 1e-14);
      EXPECT_NEAR(r.k(t, c), k, 1e-14);
      EXPECT_NEAR(r.v(t, c), v, 1e-14);
    }
  }
}

TEST(ProjectQkv, ShapeMismatchThrows) {
  Rng rng(4);
  const auto p = random_attn_head(4, 2, rng, 0.0);
  EXPECT_THROW(attention::project_qkv(TensorD::zeros(3, 5), p), ShapeError);
}

TEST(AugmentQueries, LambdaZeroLeavesQueries) {
  Rng rng(5);
  const auto p = random_attn_head(4, 2, rng, 0.0);
  const TensorD x = random_matrix(3, 4, rng);
  std::vector<HeadState> s(3, HeadState{random_matrix(2, 2, rng)});
  EXPECT_EQ(attention::augment_queries(x, s, p), attention::project_qkv(x, p).q);
}

TEST(AugmentQueries, ZeroStatesLeaveQueries) {
  Rng rng(6);
  const auto p = random_attn_head(4, 2, rng, 0.7);
  const TensorD x = random_matrix(3, 4, rng);
  std::vector<HeadState> s(3, HeadState::zeros(2));
  EXPECT_EQ(attention::augment_queries(x, s, p), attention::project_qkv(x, p).q);
}

TEST(AugmentQueries, TwoTokenHandOracle) {
  // d_model = d_k = 2 so every product is written out.
  AttnHeadParams p;
  p.w_q = TensorD::matrix(2, 2, {1, 0, 0, 2});
  p.w_k = TensorD::matrix(2, 2, {0, 1, 1, 0});
  p.w_v = TensorD::identity(2);
  p.w_q_state = TensorD::matrix(2, 2, {1, 1, 0, 1});
  p.lambda = TensorD::scalar(0.5);
  const TensorD x = TensorD::matrix(2, 2, {1, 2, 3, -1});
  std::vector<HeadState> s = {HeadState{TensorD::matrix(2, 2, {1, 0, 0, 1})},
                              HeadState{TensorD::matrix(2, 2, {0, 1, 2, 0})}};
  // Token 0: q0 = [1, 4]; k0 = [2, 1]; S0^T k0 = [2, 1]; r W_qs = [2, 3].
  //   q = [1 + 1, 4 + 1.5] = [2, 5.5]
  // Token 1: q0 = [3, -2]; k1 = [-1, 3]; S1^T k1 = [6, -1]; r W_qs = [6, 5].
  //   q = [3 + 3, -2 + 2.5] = [6, 0.5]
  const TensorD q = attention::augment_queries(x, s, p);
  EXPECT_EQ(q, TensorD::matrix(2, 2, {2, 5.5, 6, 0.5}));
}

TEST(AugmentQueries, StateCountMustMatchTokens) {
  Rng rng(7);
  const auto p = random_attn_head(4, 2, rng, 0.5);
  std::vector<HeadState> s(2, HeadState::zeros(2));
  EXPECT_THROW(attention::augment_queries(random_matrix(3, 4, rng), s, p), ShapeError);
}

TEST(CausalHead, SingleTokenReturnsValue) {
  Rng rng(8);
  const TensorD q = random_matrix(1, 3, rng), k = random_matrix(1, 3, rng),
                v = random_matrix(1, 3, rng);
  EXPECT_EQ(attention::causal_head(q, k, v), v);
}

TEST(CausalHead, ZeroQueryAveragesPrefix) {
  Rng rng(9);
  const TensorD k = random_matrix(4, 2, rng), v = random_matrix(4, 2, rng);
  const TensorD out = attention::causal_head(TensorD::zeros(4, 2), k, v);
  for (std::size_t t = 0; t < 4; ++t) {
    for (std::size_t c = 0; c < 2; ++c) {
      double mean = 0.0;
      for (std::size_t s = 0; s <= t; ++s) mean += v(s, c);
      EXPECT_NEAR(out(t, c), mean / static_cast<double>(t + 1), 1e-15);
    }
  }
}

TEST(CausalHead, MatchesLoopOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(100 + seed);
    const std::size_t n = 1 + rng.uniform_int(7);
    const TensorD q = random_matrix(n, 3, rng, -2, 2), k = random_matrix(n, 3, rng, -2, 2),
                  v = random_matrix(n, 3, rng);
    EXPECT_LE(max_abs_diff(attention::causal_head(q, k, v), loop_attention(q, k, v)), 1e-12);
  }
}

TEST(CausalHead, FutureTokensHaveNoInfluence) {
  Rng rng(10);
  TensorD q = random_matrix(5, 2, rng), k = random_matrix(5, 2, rng), v = random_matrix(5, 2, rng);
  const TensorD before = attention::causal_head(q, k, v);
  k(4, 0) += 3.0;
  v(4, 1) -= 2.0;
  q(4, 1) += 1.0;
  const TensorD after = attention::causal_head(q, k, v);
  for (std::size_t t = 0; t < 4; ++t) {
    for (std::size_t c = 0; c < 2; ++c) EXPECT_EQ(before(t, c), after(t, c));
  }
}

TEST(ScaledLogits, DividesBySqrtDk) {
  const TensorD q = TensorD::matrix(1, 4, {1, 1, 1, 1});
  const TensorD l = attention::scaled_logits(q, q);
  EXPECT_DOUBLE_EQ(l(0, 0), 2.0);
}

TEST(CausalAttentionGraph, BlocksAreIndependentSequences) {
  Rng rng(11);
  const TensorD q = random_matrix(6, 2, rng), k = random_matrix(6, 2, rng),
                v = random_matrix(6, 2, rng);
  ad::Graph g(false);
  const TensorD out =
      attention::causal_attention(g.constant(q), g.constant(k), g.constant(v), 3).value();
  for (std::size_t b = 0; b < 2; ++b) {
    auto blk = [&](const TensorD& m) {
      TensorD r({3, 2}, 0.0);
      for (std::size_t t = 0; t < 3; ++t)
        for (std::size_t c = 0; c < 2; ++c) r(t, c) = m(3 * b + t, c);
      return r;
    };
    EXPECT_LE(max_abs_diff(blk(out), attention::causal_head(blk(q), blk(k), blk(v))), 1e-15);
  }
}

}  // namespace
}  // namespace wuneng
