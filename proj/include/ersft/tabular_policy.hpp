#pragma once

#include <span>

#include "ersft/linalg.hpp"

namespace ersft {

/// Exact per-context action distributions; rows are contexts.
class TabularPolicy {
 public:
  TabularPolicy() = default;
  /// Validates that each row is a probability vector (sum within 1e-12).
  explicit TabularPolicy(Matrix probs);

  static TabularPolicy uniform(int n_contexts, int n_actions);

  int n_contexts() const { return static_cast<int>(probs_.rows()); }
  int n_actions() const { return static_cast<int>(probs_.cols()); }

  const Matrix& probs() const { return probs_; }
  double operator()(int s, int a) const { return probs_(s, a); }
  Vector row(int s) const { return probs_.row(s).transpose(); }

  /// True if every entry of row s is strictly positive.
  bool has_full_support(int s) const;
  bool has_full_support() const;

 private:
  Matrix probs_;
};

inline constexpr double kRowSumTolerance = 1e-12;

}  // namespace ersft
