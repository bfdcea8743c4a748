#include "concentra/entropy.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>

#include "concentra/error.hpp"
#include "concentra/numeric.hpp"

namespace concentra {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// q log(q / p) with 0 log 0 = 0; +inf when q > 0 = p.
double kl_term(double q, double p) {
  if (q <= 0.0) return 0.0;
  if (p <= 0.0) return kInf;
  return q * std::log(q / p);
}

}  // namespace

double relative_entropy_discrete(const DiscreteMeasure& nu, const DiscreteMeasure& mu) {
  if (!nu.same_space(mu)) throw InputError("relative entropy needs measures on the same space");
  KahanSum acc;
  for (std::size_t i = 0; i < nu.size(); ++i) {
    const double q = nu.weight(i);
    if (q <= 0.0) continue;
    const auto j = mu.find(nu, i);
    if (!j) return kInf;
    const double t = kl_term(q, mu.weight(*j));
    if (std::isinf(t)) return kInf;
    acc.add(t);
  }
  return std::max(0.0, acc.value());
}

double relative_entropy_vectors(std::span<const double> q, std::span<const double> p) {
  if (q.size() != p.size()) throw InputError("probability vectors differ in length");
  KahanSum acc;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double t = kl_term(q[i], p[i]);
    if (std::isinf(t)) return kInf;
    acc.add(t);
  }
  return std::max(0.0, acc.value());
}

double relative_entropy_gaussian(const GaussianMeasure& nu, const GaussianMeasure& mu) {
  if (nu.dim() != mu.dim()) throw InputError("Gaussian dimensions differ");
  const auto m = static_cast<double>(mu.dim());
  Eigen::LLT<Matrix> mu_chol(mu.cov());
  if (mu_chol.info() != Eigen::Success || mu_chol.matrixLLT().diagonal().minCoeff() <= 0.0)
    throw InputError("reference Gaussian covariance is singular");
  Eigen::LLT<Matrix> nu_chol(nu.cov());
  if (nu_chol.info() != Eigen::Success || nu_chol.matrixLLT().diagonal().minCoeff() <= 0.0) return kInf;

  const double logdet_mu = 2.0 * mu_chol.matrixLLT().diagonal().array().log().sum();
  const double logdet_nu = 2.0 * nu_chol.matrixLLT().diagonal().array().log().sum();
  const double trace = mu_chol.solve(nu.cov()).trace();
  const Vector diff = mu.mean() - nu.mean();
  const double quad = diff.dot(mu_chol.solve(diff));
  return std::max(0.0, 0.5 * (trace - m + quad + logdet_mu - logdet_nu));
}

double relative_entropy_joint(const JointLaw& q, const JointLaw& p) {
  if (!same_base(q, p)) throw InputError("joint laws live on different product spaces");
  return relative_entropy_vectors(q.probs, p.probs);
}

EntropyBreakdown chain_rule_decompose(const JointLaw& q, const JointLaw& p) {
  if (!same_base(q, p)) throw InputError("joint laws live on different product spaces");
  const std::size_t k = q.states();
  EntropyBreakdown out;

  std::vector<double> q_prev = marginal(q, 1), p_prev = marginal(p, 1);
  out.initial_term = relative_entropy_vectors(q_prev, p_prev);
  if (std::isinf(out.initial_term)) out.offending_step = 1;

  for (std::size_t step = 2; step <= q.n; ++step) {
    const std::vector<double> q_cur = step == q.n ? q.probs : marginal(q, step);
    const std::vector<double> p_cur = step == p.n ? p.probs : marginal(p, step);
    KahanSum term;
    bool infinite = false;
    for (std::size_t h = 0; h < q_prev.size() && !infinite; ++h) {
      const double qh = q_prev[h];
      if (qh <= 0.0) continue;
      const double ph = p_prev[h];
      if (ph <= 0.0) {
        infinite = true;
        break;
      }
      for (std::size_t x = 0; x < k; ++x) {
        const double qx = q_cur[h * k + x];
        if (qx <= 0.0) continue;
        const double px = p_cur[h * k + x];
        if (px <= 0.0) {
          infinite = true;
          break;
        }
        // qh * q(x|h) log(q(x|h) / p(x|h))
        term.add(qx * std::log((qx / qh) / (px / ph)));
      }
    }
    const double value = infinite ? kInf : std::max(0.0, term.value());
    if (infinite && !out.offending_step) out.offending_step = step;
    out.conditional_terms.push_back(value);
    q_prev = q_cur;
    p_prev = p_cur;
  }

  if (out.offending_step) {
    out.total = kInf;
  } else {
    KahanSum total;
    total.add(out.initial_term);
    for (double t : out.conditional_terms) total.add(t);
    out.total = total.value();
  }
  return out;
}

double breakdown_defect(const EntropyBreakdown& b) {
  if (std::isinf(b.total)) return 0.0;
  KahanSum acc;
  acc.add(b.initial_term);
  for (double t : b.conditional_terms) acc.add(t);
  return std::abs(b.total - acc.value());
}

}  // namespace concentra
