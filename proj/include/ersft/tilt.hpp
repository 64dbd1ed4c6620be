#pragma once

#include <span>

#include "ersft/bandit.hpp"
#include "ersft/linalg.hpp"
#include "ersft/tabular_policy.hpp"

namespace ersft {

/// pi(a|s) = base(a|s) exp(r(s,a)/lambda) / Z(s).
struct TiltResult {
  TabularPolicy policy;
  Vector partition;      // Z(s); may be +inf when log_partition > ~709
  Vector log_partition;  // log Z(s)
  double lambda = 1.0;
};

/// Exponential tilt of `base` by `rewards` at temperature `lambda`, computed in
/// the log domain. A zero base entry is accepted only with reward -inf (the
/// action is excluded); any other zero is a SupportError.
TiltResult exp_tilt(const TabularPolicy& base, const Matrix& rewards, double lambda);

/// Single-row tilt; returns the tilted row and writes log Z.
Vector exp_tilt_row(const Vector& base, const Vector& rewards, double lambda,
                    double* log_partition = nullptr);

struct PolicyValue {
  Vector per_context;  // V^pi(s)
  double expected = 0.0;  // E_{s~d0} V^pi(s)
};

/// Oracle value under the environment's true rewards.
PolicyValue policy_value(const SyntheticEnvironment& env, const TabularPolicy& policy);

/// sum_a pi(a) r(a) for one row.
double row_value(const Vector& pi, const Vector& rewards);

/// A^pi(s,a) = r*(s,a) - V^pi(s).
double advantage(const SyntheticEnvironment& env, const TabularPolicy& policy, int s, int a);

double tv_distance(const Vector& p, const Vector& q);

/// KL(p || q) with 0 log 0 = 0; SupportError if q = 0 where p > 0.
double kl_divergence(const Vector& p, const Vector& q);

/// KL(pi(.|s) || reference(.|s)), the constraint direction.
double kl_to_reference(const Vector& pi, const Vector& reference);
/// KL(target(.|s) || model(.|s)), the projection direction.
double kl_projection(const Vector& target, const Vector& model);

struct InvarianceReport {
  double shift_distance = 0.0;  // max-norm between tilt(r) and tilt(r + b(s))
  double scale_distance = 0.0;  // max-norm between tilt(r, lambda) and tilt(c r, c lambda)
  bool passed(double tol = 1e-10) const { return shift_distance <= tol && scale_distance <= tol; }
};

InvarianceReport invariance_check(const TabularPolicy& base, const Matrix& rewards, double lambda,
                                  const Vector& shift, double scale);

/// Z/Z* computed as sum_a pi*(a) exp(xi(a)/lambda), the expected noise weight
/// under the clean tilt.
double expected_noise_weight(const Vector& clean_tilt, const Vector& noise, double lambda);

}  // namespace ersft
