#include "ersft/tabular_policy.hpp"

#include <cmath>

#include "ersft/error.hpp"

namespace ersft {

TabularPolicy::TabularPolicy(Matrix probs) : probs_(std::move(probs)) {
  if (probs_.rows() < 1 || probs_.cols() < 1) throw ParameterError("TabularPolicy: empty table");
  for (Eigen::Index s = 0; s < probs_.rows(); ++s) {
    if ((probs_.row(s).array() < 0.0).any() || !probs_.row(s).allFinite()) {
      throw ParameterError("TabularPolicy: row " + std::to_string(s) + " has invalid entries");
    }
    const double sum = probs_.row(s).sum();
    if (std::abs(sum - 1.0) > kRowSumTolerance) {
      throw ParameterError("TabularPolicy: row " + std::to_string(s) + " sums to " +
                           std::to_string(sum));
    }
  }
}

TabularPolicy TabularPolicy::uniform(int n_contexts, int n_actions) {
  return TabularPolicy(Matrix::Constant(n_contexts, n_actions, 1.0 / n_actions));
}

bool TabularPolicy::has_full_support(int s) const { return (probs_.row(s).array() > 0.0).all(); }

bool TabularPolicy::has_full_support() const { return (probs_.array() > 0.0).all(); }

}  // namespace ersft
