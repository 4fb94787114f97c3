#include "wuneng/tasks.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "wuneng/error.hpp"

namespace wuneng {

std::string_view to_string(TaskKind k) {
  switch (k) {
    case TaskKind::kCopy:
      return "copy";
    case TaskKind::kAssocRecall:
      return "assoc_recall";
    case TaskKind::kPermCompose:
      return "perm_compose";
  }
  return "copy";
}

TaskKind parse_task(std::string_view s) {
  if (s == "copy") return TaskKind::kCopy;
  if (s == "assoc_recall") return TaskKind::kAssocRecall;
  if (s == "perm_compose") return TaskKind::kPermCompose;
  throw ConfigError("unknown task '" + std::string(s) +
                    "' (expected copy, assoc_recall or perm_compose)");
}

namespace tasks {

int perm_to_token(const Perm5& p) {
  int rank = 0;
  for (int i = 0; i < 5; ++i) {
    int smaller = 0;
    for (int j = i + 1; j < 5; ++j) smaller += p[j] < p[i] ? 1 : 0;
    int fact = 1;
    for (int f = 2; f <= 4 - i; ++f) fact *= f;
    rank += smaller * fact;
  }
  return rank;
}

Perm5 token_to_perm(int token) {
  if (token < 0 || token >= kPermCount) {
    throw ShapeError("token_to_perm: token " + std::to_string(token) + " outside [0, 120)");
  }
  std::vector<int> pool{0, 1, 2, 3, 4};
  Perm5 p{};
  for (int i = 0; i < 5; ++i) {
    int fact = 1;
    for (int f = 2; f <= 4 - i; ++f) fact *= f;
    const int idx = token / fact;
    token %= fact;
    p[i] = pool[static_cast<std::size_t>(idx)];
    pool.erase(pool.begin() + idx);
  }
  return p;
}

Perm5 compose(const Perm5& first, const Perm5& second) {
  Perm5 out{};
  for (int i = 0; i < 5; ++i) out[i] = second[first[i]];
  return out;
}

TaskSample gen_copy(Rng& rng, std::size_t seq_len, std::size_t vocab) {
  if (seq_len < 2 || seq_len % 2 != 0) {
    throw ConfigError("copy task needs an even seq_len >= 2, got " + std::to_string(seq_len));
  }
  if (vocab < 4) throw ConfigError("copy task needs vocab >= 4");
  const std::size_t half = seq_len / 2;
  const int delim = static_cast<int>(vocab - 1);
  std::vector<int> payload(half);
  for (auto& t : payload) t = static_cast<int>(rng.uniform_int(vocab - 1));
  std::vector<int> stream(payload);
  stream.push_back(delim);
  stream.insert(stream.end(), payload.begin(), payload.end());
  TaskSample s;
  s.input_ids.assign(stream.begin(), stream.begin() + static_cast<std::ptrdiff_t>(seq_len));
  s.target_ids.assign(stream.begin() + 1, stream.end());
  s.loss_mask.assign(seq_len, 0.0);
  for (std::size_t t = half; t < seq_len; ++t) s.loss_mask[t] = 1.0;
  return s;
}

TaskSample gen_assoc_recall(Rng& rng, std::size_t n_pairs, std::size_t vocab) {
  if (n_pairs == 0) throw ConfigError("assoc_recall needs at least one pair");
  if (vocab < 3 || vocab - 1 < n_pairs) {
    throw ConfigError("assoc_recall needs vocab - 1 >= n_pairs distinct keys");
  }
  const std::size_t symbols = vocab - 1;
  // Partial Fisher-Yates shuffle for distinct keys.
  std::vector<int> pool(symbols);
  std::iota(pool.begin(), pool.end(), 0);
  for (std::size_t i = 0; i < n_pairs; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(symbols - i));
    std::swap(pool[i], pool[j]);
  }
  TaskSample s;
  std::vector<int> values(n_pairs);
  for (std::size_t i = 0; i < n_pairs; ++i) {
    values[i] = static_cast<int>(rng.uniform_int(symbols));
    s.input_ids.push_back(pool[i]);
    s.input_ids.push_back(values[i]);
  }
  const std::size_t q = static_cast<std::size_t>(rng.uniform_int(n_pairs));
  s.input_ids.push_back(static_cast<int>(vocab - 1));
  s.input_ids.push_back(pool[q]);
  const std::size_t n = s.input_ids.size();
  s.target_ids.assign(s.input_ids.begin() + 1, s.input_ids.end());
  s.target_ids.push_back(values[q]);
  s.loss_mask.assign(n, 0.0);
  s.loss_mask[n - 1] = 1.0;
  return s;
}

TaskSample gen_perm_compose(Rng& rng, std::size_t n_perms) {
  if (n_perms == 0) throw ConfigError("perm_compose needs at least one permutation");
  TaskSample s;
  Perm5 acc{0, 1, 2, 3, 4};
  for (std::size_t i = 0; i < n_perms; ++i) {
    const int tok = static_cast<int>(rng.uniform_int(kPermCount));
    s.input_ids.push_back(tok);
    acc = compose(acc, token_to_perm(tok));
  }
  s.target_ids.assign(s.input_ids.begin() + 1, s.input_ids.end());
  s.target_ids.push_back(perm_to_token(acc));
  s.loss_mask.assign(n_perms, 0.0);
  s.loss_mask[n_perms - 1] = 1.0;
  return s;
}

void validate_task(TaskKind kind, std::size_t seq_len, std::size_t vocab) {
  switch (kind) {
    case TaskKind::kCopy:
      if (seq_len < 2 || seq_len % 2 != 0) throw ConfigError("copy task needs an even seq_len");
      if (vocab < 4) throw ConfigError("copy task needs vocab_size >= 4");
      break;
    case TaskKind::kAssocRecall:
      if (seq_len < 4 || seq_len % 2 != 0) {
        throw ConfigError("assoc_recall needs an even seq_len >= 4");
      }
      if (vocab < 3 || vocab - 1 < (seq_len - 2) / 2) {
        throw ConfigError("assoc_recall needs vocab_size - 1 >= (seq_len - 2) / 2");
      }
      break;
    case TaskKind::kPermCompose:
      if (seq_len < 1) throw ConfigError("perm_compose needs seq_len >= 1");
      if (vocab < static_cast<std::size_t>(kPermCount)) {
        throw ConfigError("perm_compose needs vocab_size >= 120");
      }
      break;
  }
}

TaskSample make_sample(TaskKind kind, Rng& rng, std::size_t seq_len, std::size_t vocab) {
  switch (kind) {
    case TaskKind::kCopy:
      return gen_copy(rng, seq_len, vocab);
    case TaskKind::kAssocRecall:
      return gen_assoc_recall(rng, (seq_len - 2) / 2, vocab);
    case TaskKind::kPermCompose:
      return gen_perm_compose(rng, seq_len);
  }
  return gen_copy(rng, seq_len, vocab);
}

}  // namespace tasks
}  // namespace wuneng
