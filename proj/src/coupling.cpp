#include "concentra/coupling.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <span>

#include "concentra/entropy.hpp"
#include "concentra/error.hpp"
#include "concentra/numeric.hpp"
#include "concentra/transport.hpp"

namespace concentra {

namespace {

// One conditional law: support points (state indices or reals) and weights.
struct StepLaw {
  std::vector<double> points;
  std::vector<double> weights;
};

// A process as seen by the coupling: either Markov in its last state or
// dependent on the whole history word (finite spaces only).
struct Source {
  bool finite = false;
  SpacePtr space;
  std::size_t states = 0;
  std::function<StepLaw()> initial;
  std::function<StepLaw(double last)> conditional;
};

struct Atom {
  std::size_t hq = 0, hp = 0;  // history words (history-dependent sources)
  double xq = 0.0, yp = 0.0;   // last states
  double w = 0.0;
};

struct Cell {
  double xq, yp, mass;
};

std::vector<double> standard_quantiles(std::size_t count) {
  boost::math::normal_distribution<double> z;
  std::vector<double> q(count);
  for (std::size_t i = 0; i < count; ++i)
    q[i] = boost::math::quantile(z, (static_cast<double>(i) + 0.5) / static_cast<double>(count));
  return q;
}

StepLaw discretized_gaussian(double mean, double var, const std::vector<double>& z) {
  StepLaw law;
  const double sd = std::sqrt(var);
  law.points.reserve(z.size());
  for (double v : z) law.points.push_back(mean + sd * v);
  law.weights.assign(z.size(), 1.0 / static_cast<double>(z.size()));
  return law;
}

StepLaw tabular_row(const Vector& row) {
  StepLaw law;
  for (Eigen::Index j = 0; j < row.size(); ++j)
    if (row(j) > 0.0) {
      law.points.push_back(static_cast<double>(j));
      law.weights.push_back(row(j));
    }
  return law;
}

Source markov_source(const MarkovModel& m, const CouplingOptions& opt) {
  Source src;
  if (m.is_tabular()) {
    const TabularModel t = m.as_tabular();
    src.finite = true;
    src.space = t.space;
    src.states = t.values.size();
    src.initial = [t] { return tabular_row(t.initial); };
    src.conditional = [t](double last) {
      return tabular_row(t.transition.row(static_cast<Eigen::Index>(last)).transpose());
    };
    return src;
  }
  if (m.is_scalar_gaussian()) {
    const auto g = m.as_gaussian_kernel();
    const auto z = std::make_shared<const std::vector<double>>(standard_quantiles(opt.quantiles));
    src.initial = [g, z] { return discretized_gaussian(g.init_mean, g.init_var, *z); };
    src.conditional = [g, z](double last) { return discretized_gaussian(g.theta * last, g.sigma2, *z); };
    return src;
  }
  throw InputError("recursive coupling needs tabular or scalar Gaussian chains");
}

Source joint_source(const JointLaw& law, const std::vector<std::vector<double>>& prefixes) {
  Source src;
  src.finite = true;
  src.space = law.base;
  src.states = law.states();
  src.initial = [&prefixes] {
    StepLaw out;
    const auto& first = prefixes.front();
    for (std::size_t x = 0; x < first.size(); ++x)
      if (first[x] > 0.0) {
        out.points.push_back(static_cast<double>(x));
        out.weights.push_back(first[x]);
      }
    return out;
  };
  return src;
}

// Conditional of a joint law given a history word of length `len`.
StepLaw joint_conditional(const std::vector<std::vector<double>>& prefixes, std::size_t k, std::size_t word,
                          std::size_t len) {
  const auto& prev = prefixes[len - 1];
  const auto& cur = prefixes[len];
  const double mass = prev[word];
  if (!(mass > 0.0)) throw InternalError("coupled history has zero mass under its own law");
  StepLaw out;
  for (std::size_t x = 0; x < k; ++x) {
    const double v = cur[word * k + x];
    if (v > 0.0) {
      out.points.push_back(static_cast<double>(x));
      out.weights.push_back(v / mass);
    }
  }
  KahanSum total;
  for (double w : out.weights) total.add(w);
  for (double& w : out.weights) w /= total.value();
  return out;
}

// Optimal plan between two step laws; returns the cells and the cost
// sum mass * d^s.
double step_plan(const Source& src, const StepLaw& q, const StepLaw& p, double s, std::vector<Cell>* cells) {
  if (src.finite) {
    std::vector<std::size_t> qi(q.points.size()), pi(p.points.size());
    for (std::size_t i = 0; i < qi.size(); ++i) qi[i] = static_cast<std::size_t>(q.points[i]);
    for (std::size_t j = 0; j < pi.size(); ++j) pi[j] = static_cast<std::size_t>(p.points[j]);
    const auto mq = DiscreteMeasure::on_space(src.space, qi, q.weights);
    const auto mp = DiscreteMeasure::on_space(src.space, pi, p.weights);
    const WassersteinResult r = wasserstein_exact(mq, mp, s);
    if (cells) {
      const Matrix& w = r.plan.weights;
      for (Eigen::Index i = 0; i < w.rows(); ++i)
        for (Eigen::Index j = 0; j < w.cols(); ++j)
          if (w(i, j) > 0.0) cells->push_back({q.points[static_cast<std::size_t>(i)], p.points[static_cast<std::size_t>(j)], w(i, j)});
    }
    return r.plan.cost;
  }
  const auto mq = DiscreteMeasure::merged_on_line(q.points, q.weights);
  const auto mp = DiscreteMeasure::merged_on_line(p.points, p.weights);
  const auto qc = quantile_coupling(mq, mp);
  if (cells)
    for (const auto& c : qc) cells->push_back({mq.real(c.i), mp.real(c.j), c.mass});
  return std::max(0.0, quantile_cost(mq, mp, qc, s));
}

// Merges atoms with equal history words and last states within tol, drops
// negligible atoms, and renormalizes. Returns the dropped mass.
double compact(std::vector<Atom>& atoms, double tol, double drop_below) {
  std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) {
    if (a.hq != b.hq) return a.hq < b.hq;
    if (a.hp != b.hp) return a.hp < b.hp;
    if (a.xq != b.xq) return a.xq < b.xq;
    return a.yp < b.yp;
  });
  std::vector<Atom> merged;
  merged.reserve(atoms.size());
  for (const Atom& a : atoms) {
    if (!merged.empty()) {
      Atom& b = merged.back();
      if (a.hq == b.hq && a.hp == b.hp && std::abs(a.xq - b.xq) <= tol && std::abs(a.yp - b.yp) <= tol) {
        b.w += a.w;
        continue;
      }
    }
    merged.push_back(a);
  }
  double dropped = 0.0;
  KahanSum kept;
  std::vector<Atom> out;
  out.reserve(merged.size());
  for (const Atom& a : merged) {
    if (a.w < drop_below) {
      dropped += a.w;
    } else {
      kept.add(a.w);
      out.push_back(a);
    }
  }
  if (dropped > 0.0)
    for (Atom& a : out) a.w /= kept.value();
  atoms = std::move(out);
  return dropped;
}

CouplingBound run_coupling(const Source& sq, const Source& sp, std::size_t n, double s, const CouplingOptions& opt,
                           const std::vector<std::vector<double>>* q_prefixes,
                           const std::vector<std::vector<double>>* p_prefixes) {
  if (!(s >= 1.0 && s <= 2.0)) throw InputError("s must lie in [1, 2]");
  if (n == 0) throw InputError("n must be at least 1");
  CouplingBound out;
  out.s = s;
  const std::size_t k = sq.states;

  auto cond_q = [&](const Atom& a, std::size_t len) {
    return q_prefixes ? joint_conditional(*q_prefixes, k, a.hq, len) : sq.conditional(a.xq);
  };
  auto cond_p = [&](const Atom& a, std::size_t len) {
    return p_prefixes ? joint_conditional(*p_prefixes, k, a.hp, len) : sp.conditional(a.yp);
  };

  std::vector<Cell> cells;
  const double d1 = step_plan(sq, sq.initial(), sp.initial(), s, n > 1 ? &cells : nullptr);
  out.step_costs.push_back(d1);
  std::vector<Atom> atoms;
  for (const Cell& c : cells) {
    Atom a;
    a.xq = c.xq;
    a.yp = c.yp;
    a.w = c.mass;
    if (q_prefixes) {
      a.hq = static_cast<std::size_t>(c.xq);
      a.hp = static_cast<std::size_t>(c.yp);
    }
    atoms.push_back(a);
  }
  out.error_budget += compact(atoms, opt.merge_tol, opt.drop_below);
  out.peak_atoms = atoms.size();

  for (std::size_t step = 2; step <= n; ++step) {
    const bool last = step == n;
    KahanSum cost;
    std::vector<Atom> next;
    for (const Atom& a : atoms) {
      cells.clear();
      const double c = step_plan(sq, cond_q(a, step - 1), cond_p(a, step - 1), s, last ? nullptr : &cells);
      cost.add(a.w * c);
      if (last) continue;
      for (const Cell& cell : cells) {
        Atom b;
        b.xq = cell.xq;
        b.yp = cell.yp;
        b.w = a.w * cell.mass;
        if (q_prefixes) {
          b.hq = a.hq * k + static_cast<std::size_t>(cell.xq);
          b.hp = a.hp * k + static_cast<std::size_t>(cell.yp);
        }
        next.push_back(b);
        if (next.size() > opt.atom_budget)
          throw ResourceError("coupled history exceeds " + std::to_string(opt.atom_budget) +
                              " atoms at step " + std::to_string(step) + "; use a coarser resolution");
      }
    }
    out.step_costs.push_back(std::max(0.0, cost.value()));
    if (!last) {
      atoms = std::move(next);
      out.error_budget += compact(atoms, opt.merge_tol, opt.drop_below);
      out.peak_atoms = std::max(out.peak_atoms, atoms.size());
    }
  }
  KahanSum total;
  for (double d : out.step_costs) total.add(d);
  out.upper_bound = s == 1.0 ? total.value() : std::pow(total.value(), 1.0 / s);
  return out;
}

void check_same_space(const Source& a, const Source& b) {
  if (a.finite != b.finite) throw InputError("processes live on different state spaces");
  if (a.finite && !(a.space == b.space || *a.space == *b.space))
    throw InputError("processes live on different state spaces");
}

}  // namespace

CouplingBound recursive_coupling_bound(const MarkovModel& p, const MarkovModel& q, std::size_t n, double s,
                                       const CouplingOptions& opt) {
  const Source sp = markov_source(p, opt), sq = markov_source(q, opt);
  check_same_space(sq, sp);
  CouplingBound b = run_coupling(sq, sp, n, s, opt, nullptr, nullptr);
  b.method = sq.finite ? "exact LP per step on the finite state space"
                       : "monotone quantile coupling per step, " + std::to_string(opt.quantiles) + " quantiles";
  return b;
}

CouplingBound recursive_coupling_bound(const JointLaw& p, const JointLaw& q, double s, const CouplingOptions& opt) {
  if (!same_base(p, q)) throw InputError("joint laws live on different product spaces");
  std::vector<std::vector<double>> pp, qp;
  for (std::size_t m = 1; m <= p.n; ++m) {
    pp.push_back(marginal(p, m));
    qp.push_back(marginal(q, m));
  }
  const Source sp = joint_source(p, pp), sq = joint_source(q, qp);
  CouplingBound b = run_coupling(sq, sp, p.n, s, opt, &qp, &pp);
  b.method = "exact LP per step on history-dependent conditionals";
  return b;
}

double coupling_defect(const CouplingBound& b) {
  KahanSum total;
  for (double d : b.step_costs) total.add(d);
  return std::abs(std::pow(b.upper_bound, b.s) - total.value());
}

JointLaw tilt_joint_law(const JointLaw& p, std::span<const double> coefficients, double t) {
  if (coefficients.size() != p.n) throw InputError("one tilt coefficient per coordinate is required");
  const std::size_t k = p.states();
  std::vector<double> f(p.probs.size());
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t w = 0; w < f.size(); ++w) {
    const auto word = word_of(w, k, p.n);
    double v = 0.0;
    for (std::size_t j = 0; j < p.n; ++j) v += coefficients[j] * p.values[word[j]];
    f[w] = t * v;
    if (p.probs[w] > 0.0) peak = std::max(peak, f[w]);
  }
  std::vector<double> q(f.size());
  KahanSum total;
  for (std::size_t w = 0; w < f.size(); ++w) {
    q[w] = p.probs[w] > 0.0 ? p.probs[w] * std::exp(f[w] - peak) : 0.0;
    total.add(q[w]);
  }
  for (double& v : q) v /= total.value();
  return make_joint_law(p.base, p.n, std::move(q), p.values);
}

namespace {

AuditReport finish(AuditReport r, double tol) {
  r.tolerance = tol;
  r.worst_slack = -std::numeric_limits<double>::infinity();
  for (const auto& e : r.entries) r.worst_slack = std::max(r.worst_slack, e.slack);
  r.pass = r.worst_slack <= tol;
  return r;
}

double slack_of(double w, double ent, double alpha_n) {
  if (std::isinf(ent)) return -std::numeric_limits<double>::infinity();
  return w - std::sqrt(2.0 * ent / alpha_n);
}

// Dense exact solves are limited to joint supports of this many words.
constexpr std::size_t kExactWords = 256;

AuditEntry audit_tabular(const JointLaw& pj, const JointLaw& qj, double s, double alpha_n,
                         const CouplingOptions& copt, std::string label) {
  AuditEntry e;
  e.label = std::move(label);
  e.entropy = chain_rule_decompose(qj, pj).total;
  e.w_bound = recursive_coupling_bound(pj, qj, s, copt).upper_bound;
  if (pj.probs.size() <= kExactWords) {
    e.w = wasserstein_exact(joint_measure(qj, s), joint_measure(pj, s), s).value;
    e.w_method = "exact";
  } else {
    e.w = e.w_bound;
    e.w_method = "coupling bound";
  }
  e.slack = slack_of(e.w, e.entropy, alpha_n);
  return e;
}

}  // namespace

AuditReport transport_inequality_audit(const MarkovModel& p, double alpha_hyp, double s, double L_hyp,
                                       std::size_t n, const std::vector<MarkovModel>& perturbations,
                                       const AuditOptions& opt) {
  AuditReport r;
  r.alpha_n = ts_weak_alpha(alpha_hyp, L_hyp, s, n);
  const double alpha_n = r.alpha_n.value;

  if (p.is_tabular()) {
    const JointLaw pj = tabular_joint_law(p, n);
    if (perturbations.empty()) {
      std::vector<JointLaw> tilts;
      std::mt19937_64 rng(opt.seed);
      std::normal_distribution<double> normal;
      for (std::size_t i = 0; i < opt.random_perturbations; ++i) {
        std::vector<double> c(n);
        for (double& v : c) v = normal(rng);
        tilts.push_back(tilt_joint_law(pj, c, normal(rng)));
      }
      return transport_inequality_audit(p, alpha_hyp, s, L_hyp, n, tilts, opt);
    }
    for (std::size_t i = 0; i < perturbations.size(); ++i) {
      if (!perturbations[i].is_tabular()) throw InputError("perturbations of a tabular chain must be tabular");
      r.entries.push_back(audit_tabular(pj, tabular_joint_law(perturbations[i], n), s, alpha_n, opt.coupling,
                                        "model:" + std::to_string(i)));
    }
    return finish(std::move(r), opt.tolerance);
  }

  if (!p.is_scalar_gaussian()) throw InputError("audit supports tabular and scalar Gaussian chains");
  std::vector<MarkovModel> qs = perturbations;
  if (qs.empty()) {
    const auto g = p.as_gaussian_kernel();
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> shift(-2.0, 2.0);
    for (std::size_t i = 0; i < opt.random_perturbations; ++i) qs.push_back(p.with_initial(g.init_mean + shift(rng), g.init_var));
  }
  const GaussianMeasure pl = gaussian_chain_law(p, n);
  for (std::size_t i = 0; i < qs.size(); ++i) {
    if (!qs[i].is_scalar_gaussian()) throw InputError("perturbations of a Gaussian chain must be Gaussian chains");
    AuditEntry e;
    e.label = "model:" + std::to_string(i);
    e.entropy = gaussian_chain_breakdown(qs[i], p, n).total;
    e.w_bound = recursive_coupling_bound(p, qs[i], n, s, opt.coupling).upper_bound;
    if (s == 2.0) {
      e.w = wasserstein_gaussian_w2(gaussian_chain_law(qs[i], n), pl);
      e.w_method = "exact";
    } else {
      e.w = e.w_bound;
      e.w_method = "coupling bound";
    }
    e.slack = slack_of(e.w, e.entropy, alpha_n);
    r.entries.push_back(std::move(e));
  }
  return finish(std::move(r), opt.tolerance);
}

AuditReport transport_inequality_audit(const MarkovModel& p, double alpha_hyp, double s, double L_hyp,
                                       std::size_t n, const std::vector<JointLaw>& perturbations,
                                       const AuditOptions& opt) {
  if (!p.is_tabular()) throw InputError("joint-law perturbations need a tabular chain");
  if (perturbations.empty()) return transport_inequality_audit(p, alpha_hyp, s, L_hyp, n, std::vector<MarkovModel>{}, opt);
  AuditReport r;
  r.alpha_n = ts_weak_alpha(alpha_hyp, L_hyp, s, n);
  const JointLaw pj = tabular_joint_law(p, n);
  for (std::size_t i = 0; i < perturbations.size(); ++i)
    r.entries.push_back(audit_tabular(pj, perturbations[i], s, r.alpha_n.value, opt.coupling,
                                      "joint:" + std::to_string(i)));
  return finish(std::move(r), opt.tolerance);
}

}  // namespace concentra
