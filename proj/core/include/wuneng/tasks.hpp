#pragma once

#include <array>
#include <cstddef>
#include <string_view>
#include <vector>

#include "wuneng/rng.hpp"

namespace wuneng {

/// One training sequence. Position t predicts target_ids[t]; positions with
/// loss_mask 0 contribute nothing to the loss.
struct TaskSample {
  std::vector<int> input_ids;
  std::vector<int> target_ids;
  std::vector<double> loss_mask;
};

enum class TaskKind { kCopy, kAssocRecall, kPermCompose };

std::string_view to_string(TaskKind k);
TaskKind parse_task(std::string_view s);

namespace tasks {

/// Permutation of {0..4}: perm[i] is the image of i.
using Perm5 = std::array<int, 5>;
inline constexpr int kPermCount = 120;

/// Lexicographic rank of a permutation; identity is 0.
int perm_to_token(const Perm5& p);
Perm5 token_to_perm(int token);
/// Apply `first`, then `second`: result[i] = second[first[i]].
Perm5 compose(const Perm5& first, const Perm5& second);

/// Stream payload(L) + delimiter + payload(L) with L = seq_len / 2, shifted
/// by one into input/target. The delimiter is vocab - 1 and payload tokens
/// are uniform on [0, vocab - 1). Only the copied span is scored.
TaskSample gen_copy(Rng& rng, std::size_t seq_len, std::size_t vocab);

/// k1 v1 ... kn vn delimiter q, where the query q is one of the (distinct)
/// keys; only the last position is scored, with the value paired with q.
/// Length 2 * n_pairs + 2.
TaskSample gen_assoc_recall(Rng& rng, std::size_t n_pairs, std::size_t vocab);

/// n_perms random S5 permutation tokens; the last position is scored with
/// the token of their left-to-right composition.
TaskSample gen_perm_compose(Rng& rng, std::size_t n_perms);

/// Dispatch on `kind` with the sequence length fixed to `seq_len`.
TaskSample make_sample(TaskKind kind, Rng& rng, std::size_t seq_len, std::size_t vocab);

/// Vocabulary a model needs for the task, given the requested size.
void validate_task(TaskKind kind, std::size_t seq_len, std::size_t vocab);

}  // namespace tasks
}  // namespace wuneng
