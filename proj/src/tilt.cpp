#include "ersft/tilt.hpp"

#include <cmath>
#include <limits>

#include "ersft/error.hpp"

namespace ersft {

Vector exp_tilt_row(const Vector& base, const Vector& rewards, double lambda,
                    double* log_partition) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ParameterError("lambda must be > 0");
  if (base.size() != rewards.size()) throw ParameterError("base/reward size mismatch");
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  Vector log_w(base.size());
  for (Eigen::Index a = 0; a < base.size(); ++a) {
    const double r = rewards[a];
    if (base[a] > 0.0) {
      if (std::isnan(r) || r == std::numeric_limits<double>::infinity()) {
        throw ParameterError("rewards must be finite");
      }
      log_w[a] = std::log(base[a]) + r / lambda;
    } else if (base[a] == 0.0 && r == kNegInf) {
      log_w[a] = kNegInf;
    } else {
      throw SupportError("tilting requires base support at every action with a finite reward");
    }
  }
  const double m = log_w.maxCoeff();
  if (m == kNegInf) throw SupportError("tilted row has no support");
  Vector w = exact_exp(log_w.array() - m);
  const double z = w.sum();
  if (log_partition) *log_partition = m + std::log(z);
  return w / z;
}

TiltResult exp_tilt(const TabularPolicy& base, const Matrix& rewards, double lambda) {
  if (rewards.rows() != base.n_contexts() || rewards.cols() != base.n_actions()) {
    throw ParameterError("reward matrix shape does not match policy");
  }
  Matrix tilted(rewards.rows(), rewards.cols());
  TiltResult out;
  out.lambda = lambda;
  out.log_partition.resize(rewards.rows());
  for (Eigen::Index s = 0; s < rewards.rows(); ++s) {
    double log_z = 0.0;
    tilted.row(s) =
        exp_tilt_row(base.row(static_cast<int>(s)), rewards.row(s).transpose(), lambda, &log_z)
            .transpose();
    out.log_partition[s] = log_z;
  }
  out.partition = out.log_partition.array().exp();
  out.policy = TabularPolicy(std::move(tilted));
  return out;
}

double row_value(const Vector& pi, const Vector& rewards) {
  // Excluded actions carry zero mass and possibly -inf rewards.
  double v = 0.0;
  for (Eigen::Index a = 0; a < pi.size(); ++a) {
    if (pi[a] > 0.0) v += pi[a] * rewards[a];
  }
  return v;
}

PolicyValue policy_value(const SyntheticEnvironment& env, const TabularPolicy& policy) {
  if (policy.n_contexts() != env.catalog.n_contexts || policy.n_actions() != env.catalog.n_actions) {
    throw ParameterError("policy shape does not match environment");
  }
  PolicyValue out;
  out.per_context = (policy.probs().cwiseProduct(env.true_reward)).rowwise().sum();
  out.expected = env.context_dist.dot(out.per_context);
  return out;
}

double advantage(const SyntheticEnvironment& env, const TabularPolicy& policy, int s, int a) {
  if (!env.catalog.contains(s, a)) throw ParameterError("advantage: ids out of range");
  return env.true_reward(s, a) - row_value(policy.row(s), env.true_reward.row(s).transpose());
}

double tv_distance(const Vector& p, const Vector& q) {
  if (p.size() != q.size()) throw ParameterError("tv_distance: size mismatch");
  return 0.5 * (p - q).cwiseAbs().sum();
}

double kl_divergence(const Vector& p, const Vector& q) {
  if (p.size() != q.size()) throw ParameterError("kl_divergence: size mismatch");
  double kl = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) throw SupportError("kl_divergence: q lacks support where p > 0");
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(kl, 0.0);
}

double kl_to_reference(const Vector& pi, const Vector& reference) {
  return kl_divergence(pi, reference);
}

double kl_projection(const Vector& target, const Vector& model) {
  return kl_divergence(target, model);
}

InvarianceReport invariance_check(const TabularPolicy& base, const Matrix& rewards, double lambda,
                                  const Vector& shift, double scale) {
  if (!(scale > 0.0)) throw ParameterError("scale must be > 0");
  if (shift.size() != rewards.rows()) throw ParameterError("shift needs one entry per context");
  const Matrix reference = exp_tilt(base, rewards, lambda).policy.probs();
  const Matrix shifted_rewards = rewards.colwise() + shift;
  const Matrix shifted = exp_tilt(base, shifted_rewards, lambda).policy.probs();
  const Matrix scaled = exp_tilt(base, scale * rewards, scale * lambda).policy.probs();
  return {(reference - shifted).cwiseAbs().maxCoeff(), (reference - scaled).cwiseAbs().maxCoeff()};
}

double expected_noise_weight(const Vector& clean_tilt, const Vector& noise, double lambda) {
  return clean_tilt.dot((noise / lambda).array().exp().matrix());
}

}  // namespace ersft
