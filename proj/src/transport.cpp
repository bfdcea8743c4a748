#include "concentra/transport.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "concentra/error.hpp"
#include "concentra/lp.hpp"
#include "concentra/numeric.hpp"
#include "network_simplex.hpp"

namespace concentra {

namespace {

void check_transport_order(double s) {
  if (!(s >= 1.0 && s <= 2.0)) throw InputError("transport order s must lie in [1, 2]");
}

double plan_cost(const Matrix& flow, const Matrix& cost) {
  KahanSum acc;
  for (Eigen::Index j = 0; j < flow.cols(); ++j)
    for (Eigen::Index i = 0; i < flow.rows(); ++i)
      if (flow(i, j) != 0.0) acc.add(flow(i, j) * cost(i, j));
  return acc.value();
}

Matrix dense_transport_lp(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const Matrix& cost) {
  const auto m = static_cast<Eigen::Index>(mu.size());
  const auto n = static_cast<Eigen::Index>(nu.size());
  lp::Problem p;
  p.a = Matrix::Zero(m + n, m * n);
  p.b = Vector(m + n);
  p.c = Vector(m * n);
  p.kinds.assign(static_cast<std::size_t>(m + n), lp::RowKind::equal);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      p.a(i, i * n + j) = 1.0;
      p.a(m + j, i * n + j) = 1.0;
      p.c(i * n + j) = cost(i, j);
    }
    p.b(i) = mu.weight(static_cast<std::size_t>(i));
  }
  for (Eigen::Index j = 0; j < n; ++j) p.b(m + j) = nu.weight(static_cast<std::size_t>(j));
  const lp::Solution sol = lp::solve(p);
  if (sol.status != lp::Status::optimal)
    throw InternalError("dense transport LP failed: " + lp::to_string(sol.status) + " after " +
                        std::to_string(sol.pivots) + " pivots");
  Matrix flow(m, n);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) flow(i, j) = sol.x(i * n + j);
  return flow;
}

}  // namespace

double plan_defect(const TransportPlan& plan) {
  double worst = 0.0;
  const Matrix& w = plan.weights;
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    KahanSum row;
    for (Eigen::Index j = 0; j < w.cols(); ++j) row.add(w(i, j));
    worst = std::max(worst, std::abs(row.value() - plan.row_measure.weight(static_cast<std::size_t>(i))));
  }
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    KahanSum col;
    for (Eigen::Index i = 0; i < w.rows(); ++i) col.add(w(i, j));
    worst = std::max(worst, std::abs(col.value() - plan.col_measure.weight(static_cast<std::size_t>(j))));
  }
  if (w.size() > 0 && w.minCoeff() < 0.0) worst = std::max(worst, -w.minCoeff());
  const Matrix cost = ground_cost(plan.row_measure, plan.col_measure, plan.order);
  worst = std::max(worst, std::abs(plan_cost(w, cost) - plan.cost));
  return worst;
}

WassersteinResult wasserstein_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double s) {
  check_transport_order(s);
  const Matrix cost = ground_cost(mu, nu, s);
  const std::size_t m = mu.size(), n = nu.size();
  const std::size_t max_pivots = 20 * (m + n) * (m + n) + 1000;
  auto sol = detail::solve_transportation(mu.weights(), nu.weights(), cost, max_pivots);

  WassersteinResult out{0.0, TransportPlan{mu, nu, {}, 0.0, s}, sol.pivots, false};
  if (sol.converged) {
    out.plan.weights = std::move(sol.flow);
  } else if (m * n <= 4096) {
    out.plan.weights = dense_transport_lp(mu, nu, cost);
    out.used_fallback = true;
  } else {
    std::ostringstream dump;
    dump << "network simplex did not converge: pivots=" << sol.pivots
         << " degenerate=" << sol.degenerate_pivots
         << " last_reduced_cost=" << sol.last_reduced_cost << " size=" << m << "x" << n;
    throw InternalError(dump.str());
  }
  out.plan.cost = std::max(0.0, plan_cost(out.plan.weights, cost));
  out.value = s == 1.0 ? out.plan.cost : std::pow(out.plan.cost, 1.0 / s);
  return out;
}

std::vector<QuantileCell> quantile_coupling(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                            QuantileTie tie) {
  if (!mu.is_line() || !nu.is_line())
    throw InputError("quantile coupling needs measures on the real line");
  auto sorted = [](const DiscreteMeasure& m) {
    std::vector<std::size_t> idx(m.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return m.real(a) < m.real(b); });
    return idx;
  };
  const auto oa = sorted(mu), ob = sorted(nu);
  std::vector<QuantileCell> cells;
  cells.reserve(oa.size() + ob.size());
  std::size_t ia = 0, ib = 0;
  double ra = mu.weight(oa[0]), rb = nu.weight(ob[0]);
  while (ia < oa.size() && ib < ob.size()) {
    const double mass = std::min(ra, rb);
    if (mass > 0.0) cells.push_back({oa[ia], ob[ib], mass});
    ra -= mass;
    rb -= mass;
    bool step_a = false, step_b = false;
    switch (tie) {
      case QuantileTie::advance_smaller:
        step_a = ra <= rb;
        step_b = rb <= ra;
        break;
      case QuantileTie::advance_mu:
        step_a = ra <= rb;
        step_b = !step_a;
        break;
      case QuantileTie::advance_nu:
        step_b = rb <= ra;
        step_a = !step_b;
        break;
    }
    if (step_a && ++ia < oa.size()) ra = mu.weight(oa[ia]);
    if (step_b && ++ib < ob.size()) rb = nu.weight(ob[ib]);
  }
  return cells;
}

double quantile_cost(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                     const std::vector<QuantileCell>& cells, double s) {
  KahanSum acc;
  for (const auto& cell : cells) {
    const double d = std::abs(mu.real(cell.i) - nu.real(cell.j));
    acc.add(cell.mass * (s == 1.0 ? d : std::pow(d, s)));
  }
  return acc.value();
}

double wasserstein_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double s, QuantileTie tie) {
  check_transport_order(s);
  const double cost = std::max(0.0, quantile_cost(mu, nu, quantile_coupling(mu, nu, tie), s));
  return s == 1.0 ? cost : std::pow(cost, 1.0 / s);
}

double wasserstein_gaussian_w2(const GaussianMeasure& mu, const GaussianMeasure& nu) {
  if (mu.dim() != nu.dim()) throw InputError("Gaussian dimensions differ");
  const Matrix root = psd_sqrt(mu.cov());
  const Matrix cross = psd_sqrt(root * nu.cov() * root);
  const double bures = (mu.cov() + nu.cov() - 2.0 * cross).trace();
  const double shift = (mu.mean() - nu.mean()).squaredNorm();
  return std::sqrt(std::max(0.0, shift + bures));
}

namespace {

struct JointSupport {
  // (from_mu, index) per joint point.
  std::vector<std::pair<bool, std::size_t>> points;
  std::vector<std::size_t> mu_pos, nu_pos;
};

JointSupport joint_support(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  JointSupport js;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    js.mu_pos.push_back(js.points.size());
    js.points.push_back({true, i});
  }
  for (std::size_t j = 0; j < nu.size(); ++j) {
    if (auto i = mu.find(nu, j)) {
      js.nu_pos.push_back(js.mu_pos[*i]);
    } else {
      js.nu_pos.push_back(js.points.size());
      js.points.push_back({false, j});
    }
  }
  return js;
}

double joint_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                      std::pair<bool, std::size_t> a, std::pair<bool, std::size_t> b) {
  const DiscreteMeasure& ma = a.first ? mu : nu;
  const DiscreteMeasure& mb = b.first ? mu : nu;
  return ma.distance_to(a.second, mb, b.second);
}

}  // namespace

KantorovichDual kantorovich_dual_w1(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  if (!mu.same_space(nu)) throw InputError("measures live on different spaces");
  const JointSupport js = joint_support(mu, nu);
  const std::size_t k = js.points.size();
  if (k > kMaxDualSupport) throw InputError("kantorovich_dual_w1: joint support exceeds 48 points");

  Vector signed_mass = Vector::Zero(static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < mu.size(); ++i) signed_mass(js.mu_pos[i]) += mu.weight(i);
  for (std::size_t j = 0; j < nu.size(); ++j) signed_mass(js.nu_pos[j]) -= nu.weight(j);

  Vector f = Vector::Zero(static_cast<Eigen::Index>(k));
  if (k > 1) {
    // Shifting f by a constant leaves the objective unchanged, so f >= 0 is free.
    lp::Problem p;
    const auto rows = static_cast<Eigen::Index>(k * (k - 1));
    p.a = Matrix::Zero(rows, static_cast<Eigen::Index>(k));
    p.b = Vector(rows);
    p.c = -signed_mass;
    p.kinds.assign(static_cast<std::size_t>(rows), lp::RowKind::less_equal);
    Eigen::Index r = 0;
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b) {
        if (a == b) continue;
        p.a(r, static_cast<Eigen::Index>(a)) = 1.0;
        p.a(r, static_cast<Eigen::Index>(b)) = -1.0;
        p.b(r) = joint_distance(mu, nu, js.points[a], js.points[b]);
        ++r;
      }
    const lp::Solution sol = lp::solve(p);
    if (sol.status != lp::Status::optimal)
      throw InternalError("Kantorovich dual LP failed: " + lp::to_string(sol.status));
    f = sol.x;
    f.array() -= f.minCoeff();
  }

  KantorovichDual out;
  KahanSum value;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    out.potential_mu.push_back(f(js.mu_pos[i]));
    value.add(mu.weight(i) * f(js.mu_pos[i]));
  }
  for (std::size_t j = 0; j < nu.size(); ++j) {
    out.potential_nu.push_back(f(js.nu_pos[j]));
    value.add(-nu.weight(j) * f(js.nu_pos[j]));
  }
  out.value = value.value();
  return out;
}

double dual_defect(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const KantorovichDual& dual) {
  const JointSupport js = joint_support(mu, nu);
  std::vector<double> f(js.points.size(), 0.0);
  for (std::size_t i = 0; i < mu.size(); ++i) f[js.mu_pos[i]] = dual.potential_mu[i];
  for (std::size_t j = 0; j < nu.size(); ++j) f[js.nu_pos[j]] = dual.potential_nu[j];
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < f.size(); ++a)
    for (std::size_t b = 0; b < f.size(); ++b) {
      if (a == b) continue;
      worst = std::max(worst, std::abs(f[a] - f[b]) - joint_distance(mu, nu, js.points[a], js.points[b]));
    }
  return f.size() < 2 ? 0.0 : worst;
}

}  // namespace concentra
