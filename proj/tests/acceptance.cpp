// Acceptance run: one [PASS]/[FAIL] line per criterion, exit status 1 if any fail.
//
//   wuneng_acceptance [--scratch DIR] [--only N]
//
// The copy-task run (criterion 7) trains twice and takes several minutes.
// Verdict lines are also written to DIR/acceptance_report.txt.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <string>
#include <vector>

#include "test_util.hpp"
#include "wuneng/checkpoint.hpp"
#include "wuneng/distill.hpp"
#include "wuneng/error.hpp"
#include "wuneng/gradcheck.hpp"
#include "wuneng/model.hpp"
#include "wuneng/train.hpp"

namespace fs = std::filesystem;
using namespace wuneng;
using testing::random_matrix;
using testing::random_state_params;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;
std::ofstream g_report;  // copy of the verdict lines, kept in the scratch dir

void report(int id, const char* name, const Outcome& o) {
  char head[128];
  std::snprintf(head, sizeof head, "[%s] %d. %s: ", o.pass ? "PASS" : "FAIL", id, name);
  std::printf("%s%s\n", head, o.detail.c_str());
  std::fflush(stdout);
  g_report << head << o.detail << '\n' << std::flush;
  if (!o.pass) ++g_failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<int> random_tokens(Rng& rng, std::size_t n, std::size_t vocab) {
  std::vector<int> t(n);
  for (auto& x : t) x = static_cast<int>(rng.uniform_int(vocab));
  return t;
}

ModelConfig tiny(CombineMode combine, MiddleMode middle, std::uint64_t seed = 5) {
  ModelConfig c;
  c.vocab_size = 16;
  c.d_model = 8;
  c.n_heads = 2;
  c.n_layers = 2;
  c.d_ffn = 32;
  c.fusion = {combine, middle};
  c.seed = seed;
  return c;
}

std::vector<FusionConfig> all_modes() {
  std::vector<FusionConfig> out;
  for (auto c : {CombineMode::kConcatProject, CombineMode::kSum}) {
    for (auto m : {MiddleMode::kOff, MiddleMode::kConcat, MiddleMode::kAdditive,
                   MiddleMode::kGated}) {
      out.push_back({c, m});
    }
  }
  return out;
}

std::string mode_label(const FusionConfig& f) {
  return std::string(to_string(f.combine)) + "/" + std::string(to_string(f.middle));
}

std::vector<unsigned char> file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// ---------------------------------------------------------------------------

Outcome reduction() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto combine = trial % 2 == 0 ? CombineMode::kConcatProject : CombineMode::kSum;
    ModelParams p = gradcheck::perturbed_model(tiny(combine, MiddleMode::kOff, 100 + trial));
    for (auto& l : p.layers) {
      for (auto& a : l.attn) a.lambda = TensorD::scalar(0.0);
      for (auto& s : l.state) s.alpha = TensorD::scalar(0.0);
    }
    Rng rng(200 + static_cast<std::uint64_t>(trial));
    const auto tokens = random_tokens(rng, 3 + rng.uniform_int(10), 16);
    worst = std::max(worst, max_abs_diff(model_forward(tokens, p), plain_forward(tokens, p)));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-12 && secs < 1.0,
          fmt("20 inputs, max |diff| %.3g (limit 1e-12), %.3f s (limit 1 s)", worst, secs)};
}

// Same model as `wuneng gradcheck` with no config. Central differences are
// only valid away from the relu^2 kink; other seeds can land an FFN
// pre-activation within one step of zero.
ModelConfig gradcheck_model(CombineMode combine, MiddleMode middle) {
  ModelConfig c = tiny(combine, middle, 3);
  c.vocab_size = 6;
  c.d_ffn = 16;
  return c;
}

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string failed;
  double worst_rel = 0.0, worst_abs = 0.0;
  for (const auto& f : all_modes()) {
    const GradReport r = gradcheck::check_model(gradcheck_model(f.combine, f.middle));
    for (const auto& rec : r.records) {
      worst_rel = std::max(worst_rel, rec.max_rel_error);
      worst_abs = std::max(worst_abs, rec.max_abs_error);
    }
    if (!r.pass) {
      ok = false;
      failed += " " + mode_label(f);
    }
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < 120.0;
  return {ok, fmt("8 modes, an entry passes at rel <= 1e-4 or abs <= 1e-7; worst rel %.3g, "
                  "worst abs %.3g, %.1f s (limit 120 s)%s%s",
                  worst_rel, worst_abs, secs, failed.empty() ? "" : ", failing:", failed.c_str())};
}

Outcome delta_invariants() {
  Rng rng(31);
  double worst_erase = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 2 + rng.uniform_int(6);
    const HeadState s{random_matrix(d, d, rng, -5, 5)};
    TensorD kh = testing::random_vector(d, rng);
    const double norm = std::sqrt(numerics::dot(kh.data(), kh.data()));
    for (auto& x : kh.data()) x /= norm;
    TokenStateInputs in{TensorD({d}, 1.0), kh, testing::random_vector(d, rng),
                        testing::random_vector(d, rng), TensorD({d}, 1.0)};
    const HeadState next = state::delta_rule_step(s, in);
    const double kk = numerics::dot(in.k.data(), kh.data());
    for (std::size_t i = 0; i < d; ++i) {
      worst_erase =
          std::max(worst_erase, std::abs(numerics::dot(next.s.row(i), kh.data()) - in.v[i] * kk));
    }
  }

  // Gates over a wide spread of pre-activations, with zero tokens mixed in
  // to reach the exact-zero removal key.
  std::size_t bad_w = 0, bad_a = 0, bad_kappa = 0, zero_keys = 0;
  const std::size_t dm = 8, dk = 4;
  const StateParams p = random_state_params(dm, dm, dk, rng);
  for (int t = 0; t < 10000; ++t) {
    TensorD x = t % 50 == 0 ? TensorD({1, dm}, 0.0) : random_matrix(1, dm, rng, -3, 3);
    const TokenStateInputs in = state::token_state_inputs(x, x, p);
    for (double w : in.w.data()) bad_w += (w > 0.0 && w <= 1.0) ? 0 : 1;
    for (double a : in.a.data()) bad_a += (a > 0.0 && a < 1.0) ? 0 : 1;
    const double n = std::sqrt(numerics::dot(in.kappa_hat.data(), in.kappa_hat.data()));
    if (n == 0.0) ++zero_keys;
    else if (std::abs(n - 1.0) > 1e-12) ++bad_kappa;
  }
  const bool ok = worst_erase <= 1e-10 && bad_w == 0 && bad_a == 0 && bad_kappa == 0;
  return {ok, fmt("erase-then-write max err %.3g on 100 states; 1e4 tokens: w out of (0,1] %zu, "
                  "a out of (0,1) %zu, |kappa_hat| not in {0,1} %zu (%zu exact zeros)",
                  worst_erase, bad_w, bad_a, bad_kappa, zero_keys)};
}

Outcome causality() {
  const auto modes = all_modes();
  std::size_t broken = 0, unchanged_tail = 0;
  for (int pair = 0; pair < 50; ++pair) {
    const FusionConfig& f = modes[static_cast<std::size_t>(pair) % modes.size()];
    const ModelParams p =
        gradcheck::perturbed_model(tiny(f.combine, f.middle, 300 + static_cast<std::uint64_t>(pair)));
    Rng rng(400 + static_cast<std::uint64_t>(pair));
    const std::size_t n = 4 + rng.uniform_int(9);
    auto tokens = random_tokens(rng, n, 16);
    const std::size_t j = 1 + rng.uniform_int(n - 1);
    const TensorD before = model_forward(tokens, p);
    tokens[j] = static_cast<int>((static_cast<std::size_t>(tokens[j]) + 1 + rng.uniform_int(15)) % 16);
    const TensorD after = model_forward(tokens, p);
    for (std::size_t t = 0; t < j; ++t) {
      for (std::size_t c = 0; c < 16; ++c) {
        if (std::bit_cast<std::uint64_t>(before(t, c)) != std::bit_cast<std::uint64_t>(after(t, c))) {
          ++broken;
        }
      }
    }
    bool moved = false;
    for (std::size_t c = 0; c < 16; ++c) moved = moved || before(j, c) != after(j, c);
    if (!moved) ++unchanged_tail;
  }
  return {broken == 0 && unchanged_tail == 0,
          fmt("50 pairs over 8 modes: %zu prefix logits changed (need 0), %zu perturbations "
              "invisible at their own position (need 0)",
              broken, unchanged_tail)};
}

// Definitional fold: gates computed from their formulas, transition matrix
// built explicitly, S_t = S_{t-1} T + v^T k.
std::vector<TensorD> fold_oracle(const TensorD& x, const TensorD& f, const StateParams& p) {
  const std::size_t dk = p.w_decay.cols();
  TensorD s({dk, dk}, 0.0);
  std::vector<TensorD> out;
  for (std::size_t t = 0; t < x.rows(); ++t) {
    std::vector<double> w(dk), a(dk), kap(dk), k(dk), v(dk);
    for (std::size_t j = 0; j < dk; ++j) {
      double zd = p.b_decay[j], zi = p.b_icl[j], zk = 0, zr = 0, zv = 0;
      for (std::size_t i = 0; i < x.cols(); ++i) {
        zd += x(t, i) * p.w_decay(i, j);
        zi += x(t, i) * p.w_icl(i, j);
        zk += x(t, i) * p.w_kappa(i, j);
        zr += x(t, i) * p.w_repl(i, j);
      }
      for (std::size_t i = 0; i < f.cols(); ++i) zv += f(t, i) * p.w_sv(i, j);
      w[j] = std::exp(-std::log1p(std::exp(zd)));
      a[j] = 1.0 / (1.0 + std::exp(-zi));
      kap[j] = zk;
      k[j] = zr;
      v[j] = zv;
    }
    double nk = 0;
    for (double e : kap) nk += e * e;
    nk = std::sqrt(nk);
    for (auto& e : kap) e = nk > 0 ? e / nk : 0.0;
    TensorD next({dk, dk}, 0.0);
    for (std::size_t r = 0; r < dk; ++r) {
      for (std::size_t c = 0; c < dk; ++c) {
        double acc = v[r] * k[c];
        for (std::size_t m = 0; m < dk; ++m) {
          const double tr = (m == c ? w[m] : 0.0) - kap[m] * a[c] * kap[c];
          acc += s(r, m) * tr;
        }
        next(r, c) = acc;
      }
    }
    s = next;
    out.push_back(s);
  }
  return out;
}

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

Outcome oracles() {
  double worst_rec = 0.0, worst_attn = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(500 + seed);
    const std::size_t dm = 3 + rng.uniform_int(6), df = 2 + rng.uniform_int(8);
    const std::size_t dk = 1 + rng.uniform_int(5), n = 1 + rng.uniform_int(12);
    const StateParams p = random_state_params(dm, df, dk, rng);
    const TensorD x = random_matrix(n, dm, rng), f = random_matrix(n, df, rng);
    const auto got = state::run_recurrence(x, f, p);
    const auto want = fold_oracle(x, f, p);
    for (std::size_t t = 0; t < n; ++t) worst_rec = std::max(worst_rec, max_abs_diff(got[t].s, want[t]));

    const TensorD q = random_matrix(n, dk, rng, -2, 2), k = random_matrix(n, dk, rng, -2, 2),
                  v = random_matrix(n, 1 + rng.uniform_int(5), rng);
    worst_attn = std::max(worst_attn, max_abs_diff(attention::causal_head(q, k, v),
                                                   loop_attention(q, k, v)));
  }
  return {worst_rec <= 1e-10 && worst_attn <= 1e-10,
          fmt("20 cases: recurrence vs fold %.3g, causal head vs loop %.3g (limit 1e-10)",
              worst_rec, worst_attn)};
}

ModelConfig copy_model() {
  ModelConfig c;
  c.vocab_size = 16;
  c.d_model = 64;
  c.n_heads = 4;
  c.n_layers = 2;
  c.d_ffn = 256;
  c.fusion = {CombineMode::kConcatProject, MiddleMode::kGated};
  c.seed = 1;
  return c;
}

Outcome init_anchor() {
  double worst = 0.0;
  std::string seen;
  for (std::size_t vocab : {8u, 16u, 120u}) {
    ModelConfig c = copy_model();
    c.vocab_size = vocab;
    c.d_model = 16;
    TrainConfig t;
    t.steps = 1;
    t.batch = 4;
    t.seq_len = 8;
    t.task = vocab >= 120 ? TaskKind::kPermCompose : TaskKind::kCopy;
    const TrainResult r = train::run(init_model(c), t);
    const double err = std::abs(r.records[0].loss - std::log(static_cast<double>(vocab)));
    worst = std::max(worst, err);
    seen += fmt(" V=%zu:%.17g", vocab, r.records[0].loss);
  }
  return {worst <= 1e-12, fmt("step-0 loss vs ln V, max err %.3g (limit 1e-12);%s", worst,
                              seen.c_str())};
}

TrainConfig copy_train() {
  TrainConfig t;
  t.task = TaskKind::kCopy;
  t.steps = 3000;
  t.batch = 32;
  t.seq_len = 32;
  t.adam.lr = 2e-3;
  t.seed = 1;
  t.stop_acc = 0.999;
  t.stop_window = 20;
  return t;
}

Outcome copy_convergence(const fs::path& scratch) {
  std::vector<std::vector<std::string>> lines(2);
  std::vector<double> secs(2);
  std::vector<fs::path> ckpts = {scratch / "copy_a.ckpt", scratch / "copy_b.ckpt"};
  EvalResult held_out;
  std::size_t steps = 0;
  for (int run = 0; run < 2; ++run) {
    const auto t0 = Clock::now();
    const TrainResult r = train::run(init_model(copy_model()), copy_train());
    secs[static_cast<std::size_t>(run)] = seconds_since(t0);
    for (const auto& rec : r.records) {
      lines[static_cast<std::size_t>(run)].push_back(to_json_line(rec, false));
    }
    save_checkpoint(ckpts[static_cast<std::size_t>(run)], r.params);
    if (run == 0) {
      steps = r.records.size();
      held_out = train::evaluate(r.params, TaskKind::kCopy, 1024, 32,
                                 train::data_seed(copy_train().seed) + 1);
    }
  }
  const bool replay = lines[0] == lines[1] && file_bytes(ckpts[0]) == file_bytes(ckpts[1]);
  const bool ok = held_out.acc >= 0.99 && steps <= 3000 && secs[0] <= 900.0 && replay;
  return {ok, fmt("held-out acc %.4f on 1024 samples (need >= 0.99) after %zu steps, %.0f s "
                  "(limit 900 s); replay metrics+checkpoint byte-identical: %s",
                  held_out.acc, steps, secs[0], replay ? "yes" : "no")};
}

Outcome distill_examples() {
  Rng rng(41);
  const TensorD h = random_matrix(5, 6, rng);
  const double align_same = distill::align_loss(h, h);
  const TensorD logits = random_matrix(5, 9, rng, -3, 3);
  const double kl_same = distill::token_kl(logits, logits);
  double worst_limit = 0.0;
  for (std::size_t vocab : {4u, 10u, 50u}) {
    TensorD teacher({3, vocab}, 0.0);
    for (std::size_t t = 0; t < 3; ++t) teacher(t, (t * 7) % vocab) = 30.0;
    const double kl = distill::token_kl(teacher, TensorD::zeros(3, vocab));
    worst_limit = std::max(worst_limit, std::abs(kl - std::log(static_cast<double>(vocab))));
  }
  return {align_same == 0.0 && kl_same == 0.0 && worst_limit <= 1e-3,
          fmt("align(h,h)=%g, kl(z,z)=%g, one-hot-limit KL vs ln V max err %.3g (limit 1e-3)",
              align_same, kl_same, worst_limit)};
}

// Counts payload floats by walking the serialized layout directly.
std::size_t serialized_floats(const std::vector<unsigned char>& b) {
  std::size_t pos = sizeof(kCheckpointMagic) + 4;
  auto u32 = [&] {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b.at(pos++)) << (8 * i);
    return v;
  };
  auto u64 = [&] {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b.at(pos++)) << (8 * i);
    return v;
  };
  pos += u32();
  const std::uint32_t count = u32();
  std::size_t floats = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    pos += u32();
    const std::uint32_t rank = u32();
    std::size_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) n *= u64();
    floats += n;
    pos += 8 * n;
  }
  if (pos != b.size()) throw Error("serialized layout walk ended before end of file");
  return floats;
}

Outcome accounting(const fs::path& scratch) {
  Rng rng(51);
  const auto modes = all_modes();
  std::size_t mismatches = 0, roundtrip_bad = 0;
  std::string sizes;
  for (int i = 0; i < 5; ++i) {
    ModelConfig c;
    c.n_heads = 1 + rng.uniform_int(4);
    c.d_model = c.n_heads * (2 + rng.uniform_int(5));
    c.vocab_size = 4 + rng.uniform_int(40);
    c.n_layers = rng.uniform_int(4);
    c.d_ffn = 1 + rng.uniform_int(48);
    c.fusion = modes[rng.uniform_int(modes.size())];
    c.seed = 60 + static_cast<std::uint64_t>(i);
    const ModelParams p = gradcheck::perturbed_model(c);
    const fs::path path = scratch / ("acct_" + std::to_string(i) + ".ckpt");
    save_checkpoint(path, p);
    const auto bytes = file_bytes(path);
    const std::size_t counted = count_params(c).total(), stored = serialized_floats(bytes);
    if (counted != stored) ++mismatches;
    sizes += fmt(" %zu", stored);

    const ModelParams back = load_checkpoint(path, c);
    std::vector<const TensorD*> a, b;
    visit_model(p, [&](const std::string&, const TensorD& t) { a.push_back(&t); });
    visit_model(back, [&](const std::string&, const TensorD& t) { b.push_back(&t); });
    bool same = a.size() == b.size();
    for (std::size_t k = 0; same && k < a.size(); ++k) same = bit_identical(*a[k], *b[k]);
    save_checkpoint(scratch / "acct_again.ckpt", back);
    same = same && file_bytes(scratch / "acct_again.ckpt") == bytes;
    if (!same) ++roundtrip_bad;
  }
  return {mismatches == 0 && roundtrip_bad == 0,
          fmt("5 random configs (floats:%s): breakdown != serialized %zu, round-trip not "
              "bit-exact %zu",
              sizes.c_str(), mismatches, roundtrip_bad)};
}

// Widens the FFN of the ablation so its parameter count is as close as
// possible to the hybrid's.
ModelConfig matched_ablation(ModelConfig hybrid) {
  ModelConfig off = hybrid;
  off.fusion.middle = MiddleMode::kOff;
  const std::size_t target = count_params(hybrid).total();
  const std::size_t per_unit = 2 * off.d_model * off.n_layers;
  const std::size_t gap = target - count_params(off).total();
  off.d_ffn += (gap + per_unit / 2) / per_unit;
  return off;
}

// Writes to stdout and the report file.
void table_out(const char* f, auto... args) {
  const std::string line = fmt(f, args...);
  std::fputs(line.c_str(), stdout);
  std::fflush(stdout);
  g_report << line << std::flush;
}

Outcome perm_compose_diagnostic() {
  ModelConfig hybrid;
  hybrid.vocab_size = 120;
  hybrid.d_model = 32;
  hybrid.n_heads = 4;
  hybrid.n_layers = 2;
  hybrid.d_ffn = 64;
  hybrid.fusion = {CombineMode::kConcatProject, MiddleMode::kGated};
  const ModelConfig off = matched_ablation(hybrid);
  TrainConfig t;
  t.task = TaskKind::kPermCompose;
  t.steps = 4000;
  t.batch = 64;
  t.seq_len = 2;
  t.adam.lr = 3e-3;

  table_out("perm_compose, %zu perms per sample, %zu steps, held-out acc on 512 samples\n",
            t.seq_len, t.steps);
  table_out("  %-6s %10s %8s %8s %8s %8s %8s %8s\n", "mode", "params", "seed1", "seed2", "seed3",
            "seed4", "seed5", "mean");
  double means[2] = {0, 0};
  const ModelConfig cfgs[2] = {off, hybrid};
  for (int m = 0; m < 2; ++m) {
    table_out("  %-6s %10zu", m == 0 ? "off" : "gated", count_params(cfgs[m]).total());
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      ModelConfig c = cfgs[m];
      c.seed = seed;
      TrainConfig tc = t;
      tc.seed = seed;
      const TrainResult r = train::run(init_model(c), tc);
      const EvalResult e = train::evaluate(r.params, t.task, 512, t.seq_len,
                                           train::data_seed(seed) + 1);
      means[m] += e.acc / 5.0;
      table_out(" %8.4f", e.acc);
    }
    table_out(" %8.4f\n", means[m]);
  }
  return {true, fmt("diagnostic only, table above; mean acc off %.4f vs gated %.4f (chance "
                    "%.4f), gated %s off",
                    means[0], means[1], 1.0 / 120.0, means[1] >= means[0] ? ">=" : "<")};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path scratch = fs::temp_directory_path() / "wuneng_acceptance";
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--scratch" && i + 1 < argc) scratch = argv[++i];
    else if (arg == "--only" && i + 1 < argc) only = std::atoi(argv[++i]);
    else {
      std::fprintf(stderr, "usage: %s [--scratch DIR] [--only N]\n", argv[0]);
      return 1;
    }
  }
  fs::create_directories(scratch);
  g_report.open(scratch / "acceptance_report.txt", std::ios::trunc);

  auto run = [&](int id, const char* name, auto&& fn) {
    if (only != 0 && only != id) return;
    try {
      report(id, name, fn());
    } catch (const std::exception& e) {
      report(id, name, {false, std::string("threw: ") + e.what()});
    }
  };
  run(1, "reduction to plain attention", reduction);
  run(2, "gradient suite", gradient_suite);
  run(3, "delta-rule invariants", delta_invariants);
  run(4, "causality", causality);
  run(5, "oracle equivalence", oracles);
  run(6, "initial loss anchor", init_anchor);
  run(7, "copy-task convergence", [&] { return copy_convergence(scratch); });
  run(8, "distillation losses", distill_examples);
  run(9, "parameter accounting", [&] { return accounting(scratch); });
  run(10, "perm_compose comparison", perm_compose_diagnostic);

  std::printf("%d failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
