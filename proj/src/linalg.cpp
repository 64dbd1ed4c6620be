#include "ersft/linalg.hpp"

#include <cmath>
#include <limits>

namespace ersft {

Vector exact_exp(const Vector& v) {
  return v.unaryExpr([](double x) { return std::exp(x); });
}

double log_sum_exp(const Vector& v) {
  if (v.size() == 0) return -std::numeric_limits<double>::infinity();
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log(exact_exp(v.array() - m).sum());
}

Vector log_softmax(const Vector& logits) {
  return logits.array() - log_sum_exp(logits);
}

Vector softmax(const Vector& logits) {
  const double m = logits.maxCoeff();
  const Vector w = exact_exp(logits.array() - m);
  return w / w.sum();
}

}  // namespace ersft
