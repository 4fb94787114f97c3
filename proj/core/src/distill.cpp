#include "wuneng/distill.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "wuneng/error.hpp"

namespace wuneng::distill {
namespace {

std::vector<double> log_softmax(std::span<const double> z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - mx);
  const double lse = mx + std::log(s);
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] - lse;
  return out;
}

}  // namespace

double align_loss(const TensorD& h_teacher, const TensorD& h_student) {
  require_same_shape(h_teacher, h_student, "align_loss");
  const std::size_t d = h_teacher.cols();
  double total = 0.0;
  for (std::size_t r = 0; r < h_teacher.rows(); ++r) {
    auto a = h_teacher.row(r);
    auto b = h_student.row(r);
    double sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) sq += (a[j] - b[j]) * (a[j] - b[j]);
    total += std::sqrt(sq) / std::sqrt(static_cast<double>(d));
  }
  return total / static_cast<double>(h_teacher.rows());
}

double token_kl(const TensorD& teacher_logits, const TensorD& student_logits) {
  require_same_shape(teacher_logits, student_logits, "token_kl");
  double total = 0.0;
  for (std::size_t r = 0; r < teacher_logits.rows(); ++r) {
    const auto lt = log_softmax(teacher_logits.row(r));
    const auto ls = log_softmax(student_logits.row(r));
    double kl = 0.0;
    for (std::size_t j = 0; j < lt.size(); ++j) kl += std::exp(lt[j]) * (lt[j] - ls[j]);
    total += kl;
  }
  return total / static_cast<double>(teacher_logits.rows());
}

}  // namespace wuneng::distill
