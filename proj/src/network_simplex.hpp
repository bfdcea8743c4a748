// Transportation-problem network simplex (private to the transport module).

#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "concentra/measure.hpp"

namespace concentra::detail {

struct TransportationSolution {
  Matrix flow;
  std::size_t pivots = 0;
  bool converged = false;
  double last_reduced_cost = 0.0;
  std::size_t degenerate_pivots = 0;
};

// min sum c_ij x_ij over x >= 0 with row sums = supply and column sums =
// demand. Supplies and demands must be nonnegative with equal totals.
TransportationSolution solve_transportation(std::span<const double> supply,
                                            std::span<const double> demand, const Matrix& cost,
                                            std::size_t max_pivots);

}  // namespace concentra::detail
