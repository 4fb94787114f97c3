#include <gtest/gtest.h>

#include "test_util.hpp"
#include "wuneng/error.hpp"
#include "wuneng/layer.hpp"

namespace wuneng {
namespace {

using testing::random_matrix;

LayerParams tiny_layer(const FusionConfig& fusion, std::uint64_t seed, bool scalars_on) {
  Rng rng(seed);
  LayerParams p = init_layer({8, 2, 16}, fusion, rng);
  if (scalars_on) {
    for (auto& a : p.attn) a.lambda[0] = rng.uniform(0.3, 0.9);
    for (auto& s : p.state) s.alpha[0] = rng.uniform(0.3, 0.9);
    for (auto& m : p.middle) {
      m.beta[0] = rng.uniform(0.3, 0.9);
      m.gamma_mid[0] = rng.uniform(0.3, 0.9);
    }
  }
  p.ln1_shift = testing::random_vector(8, rng, -0.1, 0.1);
  return p;
}

// Chains the per-module reference functions token by token.
TensorD layer_oracle(const TensorD& h, const LayerParams& p, std::vector<HeadState>* last) {
  const std::size_t n = h.rows(), n_heads = p.attn.size(), d_k = p.attn[0].w_q.cols();
  const bool cross = p.fusion.middle != MiddleMode::kOff;
  const TensorD x = numerics::layer_norm_rows(h, p.ln1_scale, p.ln1_shift, kLayerNormEps);

  std::vector<QKV> qkv;
  std::vector<TensorD> a0, m0;
  for (std::size_t hd = 0; hd < n_heads; ++hd) {
    qkv.push_back(attention::project_qkv(x, p.attn[hd]));
    a0.push_back(attention::causal_head(qkv[hd].q, qkv[hd].k, qkv[hd].v));
    if (cross) {
      TensorD m({n, d_k}, 0.0);
      for (std::size_t t = 0; t < n; ++t) {
        const TensorD r = fusion::middle_head(a0[hd].row_vector(t), TensorD({d_k}, 0.0),
                                              p.middle[hd], p.fusion.middle);
        for (std::size_t c = 0; c < d_k; ++c) m(t, c) = r[c];
      }
      m0.push_back(m);
    }
  }
  std::vector<std::vector<TensorD>> value_groups{a0};
  if (cross) value_groups.push_back(m0);
  const TensorD fused = fusion::combine_f(value_groups, p.fusion.combine);

  AttnOutput heads;
  std::vector<TensorD> reads, mids;
  std::vector<double> gammas;
  for (std::size_t hd = 0; hd < n_heads; ++hd) {
    const auto s_seq = state::run_recurrence(x, fused, p.state[hd]);
    if (last) last->push_back(s_seq.back());
    const TensorD q = attention::augment_queries(x, s_seq, p.attn[hd]);
    const TensorD a = attention::causal_head(q, qkv[hd].k, qkv[hd].v);
    TensorD read({n, d_k}, 0.0), mid({n, d_k}, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      const TensorD r = state::state_readout(s_seq[t], x.row_vector(t), p.state[hd].w_hat_k,
                                             p.state[hd].alpha[0]);
      for (std::size_t c = 0; c < d_k; ++c) read(t, c) = r[c];
      if (cross) {
        const TensorD m = fusion::middle_head(a.row_vector(t), r, p.middle[hd], p.fusion.middle);
        for (std::size_t c = 0; c < d_k; ++c) mid(t, c) = m[c];
      }
    }
    heads.per_head.push_back(a);
    reads.push_back(read);
    if (cross) {
      mids.push_back(mid);
      gammas.push_back(p.middle[hd].gamma_mid[0]);
    }
  }
  const TensorD attn =
      fusion::hybrid_attention_out(heads, reads, mids, HybridProjection{p.w_attn}, gammas, p.fusion);
  const TensorD h1 = numerics::add(h, attn);
  return numerics::add(h1, ffn(h1, p));
}

class LayerModes : public ::testing::TestWithParam<FusionConfig> {};

TEST_P(LayerModes, MatchesModuleComposition) {
  const LayerParams p = tiny_layer(GetParam(), 21, true);
  Rng rng(22);
  const TensorD h = random_matrix(3, 8, rng);
  std::vector<HeadState> last;
  const TensorD expect = layer_oracle(h, p, &last);
  const LayerOutput out = layer_forward(h, p);
  EXPECT_LE(max_abs_diff(out.h, expect), 1e-12);
  ASSERT_EQ(out.final_states.size(), 2u);
  for (std::size_t hd = 0; hd < 2; ++hd) {
    EXPECT_LE(max_abs_diff(out.final_states[hd].s, last[hd].s), 1e-12);
  }
}

INSTANTIATE_TEST_SUITE_P(
    AllModes, LayerModes,
    ::testing::Values(FusionConfig{CombineMode::kConcatProject, MiddleMode::kOff},
                      FusionConfig{CombineMode::kConcatProject, MiddleMode::kConcat},
                      FusionConfig{CombineMode::kConcatProject, MiddleMode::kAdditive},
                      FusionConfig{CombineMode::kConcatProject, MiddleMode::kGated},
                      FusionConfig{CombineMode::kSum, MiddleMode::kOff},
                      FusionConfig{CombineMode::kSum, MiddleMode::kConcat},
                      FusionConfig{CombineMode::kSum, MiddleMode::kAdditive},
                      FusionConfig{CombineMode::kSum, MiddleMode::kGated}));

TEST(Layer, InitialScalarsAreZero) {
  const LayerParams p = tiny_layer({}, 1, false);
  for (const auto& a : p.attn) EXPECT_EQ(a.lambda[0], 0.0);
  for (const auto& s : p.state) EXPECT_EQ(s.alpha[0], 0.0);
  for (const auto& m : p.middle) {
    EXPECT_EQ(m.beta[0], 0.0);
    EXPECT_EQ(m.gamma_mid[0], 0.0);
  }
}

TEST(Layer, ReducesToPlainBlock) {
  const LayerParams p = tiny_layer({CombineMode::kConcatProject, MiddleMode::kOff}, 3, false);
  Rng rng(4);
  const TensorD h = random_matrix(5, 8, rng);
  const TensorD x = numerics::layer_norm_rows(h, p.ln1_scale, p.ln1_shift, kLayerNormEps);
  std::vector<TensorD> heads;
  for (const auto& a : p.attn) {
    const QKV r = attention::project_qkv(x, a);
    heads.push_back(attention::causal_head(r.q, r.k, r.v));
  }
  TensorD w_top({8, 8}, 0.0);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j) w_top(i, j) = p.w_attn(i, j);
  const TensorD h1 = numerics::add(h, numerics::matmul(numerics::concat_cols(heads), w_top));
  const TensorD expect = numerics::add(h1, ffn(h1, p));
  EXPECT_LE(max_abs_diff(layer_forward(h, p).h, expect), 1e-12);
}

TEST(Layer, ZeroFfnOutputLeavesResidual) {
  LayerParams p = tiny_layer({}, 5, true);
  p.ffn_out.fill(0.0);
  Rng rng(6);
  const TensorD h = random_matrix(4, 8, rng);
  LayerParams other = p;
  other.ffn_in = random_matrix(8, 16, rng);
  other.ln2_scale = testing::random_vector(8, rng);
  // h + a + 0: the FFN input side cannot reach the output.
  EXPECT_TRUE(bit_identical(layer_forward(h, p).h, layer_forward(h, other).h));
  EXPECT_EQ(ffn(h, p), TensorD::zeros(4, 8));
}

TEST(Ffn, ZeroInputWeightsGiveZero) {
  LayerParams p = tiny_layer({}, 7, false);
  p.ffn_in.fill(0.0);
  Rng rng(8);
  EXPECT_EQ(ffn(random_matrix(3, 8, rng), p), TensorD::zeros(3, 8));
}

TEST(Ffn, NegativePreactivationsAreDead) {
  LayerParams p = tiny_layer({}, 9, false);
  // ln(h) of [1, -1, 1, -1, ...] is +-1; weights that map it below zero.
  TensorD h({1, 8}, 0.0);
  for (std::size_t i = 0; i < 8; ++i) h[i] = i % 2 == 0 ? 1.0 : -1.0;
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 16; ++j) p.ffn_in(i, j) = i % 2 == 0 ? -1.0 : 1.0;
  EXPECT_EQ(ffn(h, p), TensorD::zeros(1, 8));
}

TEST(Ffn, SingleTokenOracle) {
  const LayerParams p = tiny_layer({}, 10, false);
  Rng rng(11);
  const TensorD h = random_matrix(1, 8, rng);
  const TensorD x = numerics::layer_norm_rows(h, p.ln2_scale, p.ln2_shift, kLayerNormEps);
  std::vector<double> hidden(16, 0.0);
  for (std::size_t j = 0; j < 16; ++j) {
    double z = 0.0;
    for (std::size_t i = 0; i < 8; ++i) z += x[i] * p.ffn_in(i, j);
    hidden[j] = z > 0 ? z * z : 0.0;
  }
  const TensorD out = ffn(h, p);
  for (std::size_t c = 0; c < 8; ++c) {
    double y = 0.0;
    for (std::size_t j = 0; j < 16; ++j) y += hidden[j] * p.ffn_out(j, c);
    EXPECT_NEAR(out[c], y, 1e-13);
  }
}

TEST(Layer, WidthMismatchThrows) {
  const LayerParams p = tiny_layer({}, 12, false);
  EXPECT_THROW(layer_forward(TensorD::zeros(3, 6), p), ShapeError);
}

}  // namespace
}  // namespace wuneng
