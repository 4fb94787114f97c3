#pragma once

#include "wuneng/tensor.hpp"

namespace wuneng::distill {

/// Mean over positions of ||teacher_t - student_t||_2 / sqrt(d).
double align_loss(const TensorD& h_teacher, const TensorD& h_student);

/// Mean over positions of KL(softmax(teacher_t) || softmax(student_t)),
/// evaluated with log-softmax.
double token_kl(const TensorD& teacher_logits, const TensorD& student_logits);

}  // namespace wuneng::distill
