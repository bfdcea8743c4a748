// lp.hpp - dense two-phase tableau simplex with Bland's rule.
//
// Small, exact-enough LP solver for problems up to a few thousand entries in
// the tableau. Used for the Kantorovich dual and as the fallback for
// degenerate transportation instances.

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "concentra/measure.hpp"

namespace concentra::lp {

enum class RowKind { less_equal, equal, greater_equal };

// minimize c^T x subject to A x (<=|=|>=) b row-wise, x >= 0.
struct Problem {
  Matrix a;
  Vector b;
  Vector c;
  std::vector<RowKind> kinds;
};

enum class Status { optimal, infeasible, unbounded, iteration_limit };

struct Solution {
  Status status = Status::iteration_limit;
  Vector x;
  double objective = 0.0;
  std::size_t pivots = 0;
};

Solution solve(const Problem& problem, std::size_t max_pivots = 200000);

std::string to_string(Status status);

}  // namespace concentra::lp
