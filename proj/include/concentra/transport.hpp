// transport.hpp - Wasserstein distances W_s, s in [1, 2].
//
//   wasserstein_exact       network simplex on the transportation polytope
//   wasserstein_1d          monotone (quantile) coupling on the real line
//   wasserstein_gaussian_w2 closed form between Gaussian laws
//   kantorovich_dual_w1     LP over 1-Lipschitz potentials

#pragma once

#include <cstddef>
#include <vector>

#include "concentra/measure.hpp"

namespace concentra {

struct TransportPlan {
  DiscreteMeasure row_measure;
  DiscreteMeasure col_measure;
  Matrix weights;
  double cost = 0.0;  // sum_ij weights_ij d(x_i, y_j)^order
  double order = 1.0;
};

// Largest deviation of a plan from its marginal and cost invariants.
double plan_defect(const TransportPlan& plan);

struct WassersteinResult {
  double value = 0.0;
  TransportPlan plan;
  std::size_t pivots = 0;
  bool used_fallback = false;
};

// Exact W_s between measures on a common space. Throws InputError for
// mismatched spaces and InternalError (with an iteration dump) if neither
// the network simplex nor the dense fallback converges.
WassersteinResult wasserstein_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double s);

enum class QuantileTie {
  advance_smaller,  // step the measure whose current atom has less mass left
  advance_mu,
  advance_nu,
};

struct QuantileCell {
  std::size_t i;  // index into mu's support
  std::size_t j;  // index into nu's support
  double mass;
};

// Monotone coupling of two measures on the real line, merging the two
// cumulative weight partitions.
std::vector<QuantileCell> quantile_coupling(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                            QuantileTie tie = QuantileTie::advance_smaller);

// sum over quantile cells of mass * |x_i - y_j|^s.
double quantile_cost(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                     const std::vector<QuantileCell>& cells, double s);

double wasserstein_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double s,
                      QuantileTie tie = QuantileTie::advance_smaller);

double wasserstein_gaussian_w2(const GaussianMeasure& mu, const GaussianMeasure& nu);

struct KantorovichDual {
  double value = 0.0;
  std::vector<double> potential_mu;  // f at mu's support points
  std::vector<double> potential_nu;  // f at nu's support points
};

// Largest joint support accepted by kantorovich_dual_w1.
inline constexpr std::size_t kMaxDualSupport = 48;

// max over 1-Lipschitz f of int f dmu - int f dnu, solved as an LP in the
// potential values on the joint support.
KantorovichDual kantorovich_dual_w1(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

// max |f(a) - f(b)| - d(a, b) over the joint support; <= 0 for feasible f.
double dual_defect(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const KantorovichDual& dual);

}  // namespace concentra
