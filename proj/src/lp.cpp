#include "concentra/lp.hpp"

#include <cmath>
#include <limits>

#include "concentra/error.hpp"

namespace concentra::lp {

namespace {

constexpr double kPivotTol = 1e-11;

class Tableau {
 public:
  // t_ holds [A | b] in rows 0..m-1 and the objective row at m.
  Tableau(Matrix t, std::vector<std::size_t> basis) : t_(std::move(t)), basis_(std::move(basis)) {}

  // Bland's-rule pivoting restricted to columns [0, active_cols).
  Status optimize(std::size_t active_cols, std::size_t max_pivots, std::size_t& pivots) {
    const auto m = static_cast<std::size_t>(t_.rows()) - 1;
    const auto rhs = static_cast<Eigen::Index>(t_.cols() - 1);
    const double scale = std::max(1.0, t_.row(m).head(active_cols).cwiseAbs().maxCoeff());
    while (true) {
      std::size_t enter = active_cols;
      for (std::size_t j = 0; j < active_cols; ++j)
        if (t_(m, j) < -kPivotTol * scale) {
          enter = j;
          break;
        }
      if (enter == active_cols) return Status::optimal;
      if (pivots >= max_pivots) return Status::iteration_limit;
      std::size_t leave = m;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < m; ++i) {
        const double a = t_(i, enter);
        if (a <= kPivotTol) continue;
        const double ratio = t_(i, rhs) / a;
        if (ratio < best - 1e-14 ||
            (std::abs(ratio - best) <= 1e-14 && leave < m && basis_[i] < basis_[leave])) {
          best = ratio;
          leave = i;
        }
      }
      if (leave == m) return Status::unbounded;
      pivot(leave, enter);
      ++pivots;
    }
  }

  void pivot(std::size_t row, std::size_t col) {
    t_.row(row) /= t_(row, col);
    for (Eigen::Index i = 0; i < t_.rows(); ++i) {
      if (static_cast<std::size_t>(i) == row) continue;
      const double f = t_(i, col);
      if (f != 0.0) t_.row(i) -= f * t_.row(row);
    }
    basis_[row] = col;
  }

  Matrix& t() { return t_; }
  std::vector<std::size_t>& basis() { return basis_; }

 private:
  Matrix t_;
  std::vector<std::size_t> basis_;
};

}  // namespace

std::string to_string(Status status) {
  switch (status) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::unbounded: return "unbounded";
    case Status::iteration_limit: return "iteration_limit";
  }
  return "unknown";
}

Solution solve(const Problem& problem, std::size_t max_pivots) {
  const auto m = static_cast<std::size_t>(problem.a.rows());
  const auto n = static_cast<std::size_t>(problem.a.cols());
  if (problem.b.size() != static_cast<Eigen::Index>(m) ||
      problem.c.size() != static_cast<Eigen::Index>(n) || problem.kinds.size() != m)
    throw InputError("lp::solve: inconsistent problem dimensions");

  // Flip rows with negative right-hand side so b >= 0.
  Matrix a = problem.a;
  Vector b = problem.b;
  std::vector<RowKind> kinds = problem.kinds;
  for (std::size_t i = 0; i < m; ++i) {
    if (b(i) < 0.0) {
      a.row(i) *= -1.0;
      b(i) = -b(i);
      if (kinds[i] == RowKind::less_equal) kinds[i] = RowKind::greater_equal;
      else if (kinds[i] == RowKind::greater_equal) kinds[i] = RowKind::less_equal;
    }
  }

  std::size_t slacks = 0, artificials = 0;
  for (RowKind k : kinds) {
    if (k != RowKind::equal) ++slacks;
    if (k != RowKind::less_equal) ++artificials;
  }
  const std::size_t structural = n + slacks;
  const std::size_t cols = structural + artificials + 1;
  Matrix t = Matrix::Zero(m + 1, cols);
  std::vector<std::size_t> basis(m);
  std::size_t next_slack = n, next_art = structural;
  for (std::size_t i = 0; i < m; ++i) {
    t.row(i).head(n) = a.row(i);
    t(i, cols - 1) = b(i);
    switch (kinds[i]) {
      case RowKind::less_equal:
        t(i, next_slack) = 1.0;
        basis[i] = next_slack++;
        break;
      case RowKind::greater_equal:
        t(i, next_slack++) = -1.0;
        t(i, next_art) = 1.0;
        basis[i] = next_art++;
        break;
      case RowKind::equal:
        t(i, next_art) = 1.0;
        basis[i] = next_art++;
        break;
    }
  }

  Solution sol;
  Tableau tab(std::move(t), std::move(basis));
  Matrix& tt = tab.t();

  if (artificials > 0) {
    // Phase one: minimize the sum of artificials.
    tt.row(m).setZero();
    for (std::size_t j = structural; j < structural + artificials; ++j) tt(m, j) = 1.0;
    for (std::size_t i = 0; i < m; ++i)
      if (tab.basis()[i] >= structural) tt.row(m) -= tt.row(i);
    Status st = tab.optimize(structural + artificials, max_pivots, sol.pivots);
    if (st == Status::iteration_limit) {
      sol.status = st;
      return sol;
    }
    const double infeas = -tt(m, cols - 1);
    if (infeas > 1e-9 * std::max(1.0, b.cwiseAbs().maxCoeff())) {
      sol.status = Status::infeasible;
      return sol;
    }
    // Drive zero-level artificials out of the basis where possible.
    for (std::size_t i = 0; i < m; ++i) {
      if (tab.basis()[i] < structural) continue;
      for (std::size_t j = 0; j < structural; ++j)
        if (std::abs(tt(i, j)) > kPivotTol) {
          tab.pivot(i, j);
          break;
        }
    }
  }

  // Phase two objective row in terms of the current basis.
  tt.row(m).setZero();
  tt.row(m).head(n) = problem.c.transpose();
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t bj = tab.basis()[i];
    if (bj < structural && tt(m, bj) != 0.0) tt.row(m) -= tt(m, bj) * tt.row(i);
  }
  // Rows whose basic variable is still artificial are redundant; neutralize them.
  for (std::size_t i = 0; i < m; ++i)
    if (tab.basis()[i] >= structural) tt.row(i).head(structural).setZero();

  Status st = tab.optimize(structural, max_pivots, sol.pivots);
  sol.status = st;
  if (st != Status::optimal) return sol;
  sol.x = Vector::Zero(n);
  for (std::size_t i = 0; i < m; ++i)
    if (tab.basis()[i] < n) sol.x(tab.basis()[i]) = std::max(0.0, tt(i, cols - 1));
  sol.objective = problem.c.dot(sol.x);
  return sol;
}

}  // namespace concentra::lp
