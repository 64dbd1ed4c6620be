#pragma once

#include <Eigen/Dense>

namespace ersft {

// Row-major so that per-context rows are contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Elementwise std::exp. Eigen's vectorized exp clamps its argument, so
/// exp(-inf) would come out as a denormal instead of 0.
Vector exact_exp(const Vector& v);

/// log(sum(exp(v))) without overflow. Returns -inf for an all -inf input.
double log_sum_exp(const Vector& v);

/// Numerically stable log-softmax of a logit vector.
Vector log_softmax(const Vector& logits);

Vector softmax(const Vector& logits);

}  // namespace ersft
