#include "network_simplex.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace concentra::detail {

namespace {

struct Arc {
  std::size_t i;
  std::size_t j;
  double flow;
};

// Spanning-tree basis over row nodes [0, m) and column nodes [m, m + n).
class TreeBasis {
 public:
  TreeBasis(std::size_t m, std::size_t n) : m_(m), n_(n), adj_(m + n) {}

  void rebuild(const std::vector<Arc>& arcs) {
    for (auto& a : adj_) a.clear();
    for (std::size_t k = 0; k < arcs.size(); ++k) {
      adj_[arcs[k].i].push_back({m_ + arcs[k].j, k});
      adj_[m_ + arcs[k].j].push_back({arcs[k].i, k});
    }
  }

  // u_i + v_j = c_ij on every basic arc, with u_0 = 0.
  void potentials(const std::vector<Arc>& arcs, const Matrix& cost, std::vector<double>& u,
                  std::vector<double>& v) {
    std::vector<char> seen(m_ + n_, 0);
    std::deque<std::size_t> queue{0};
    seen[0] = 1;
    u[0] = 0.0;
    while (!queue.empty()) {
      const std::size_t node = queue.front();
      queue.pop_front();
      for (auto [next, k] : adj_[node]) {
        if (seen[next]) continue;
        seen[next] = 1;
        const Arc& a = arcs[k];
        if (next >= m_) {
          v[a.j] = cost(a.i, a.j) - u[a.i];
        } else {
          u[a.i] = cost(a.i, a.j) - v[a.j];
        }
        queue.push_back(next);
      }
    }
  }

  // Arcs on the tree path from column node m + j to row node i, ordered from
  // the column end.
  std::vector<std::size_t> path(std::size_t j, std::size_t i) {
    const std::size_t start = m_ + j;
    std::vector<std::size_t> parent_arc(m_ + n_, kNone), parent(m_ + n_, kNone);
    std::vector<char> seen(m_ + n_, 0);
    std::deque<std::size_t> queue{start};
    seen[start] = 1;
    while (!queue.empty() && !seen[i]) {
      const std::size_t node = queue.front();
      queue.pop_front();
      for (auto [next, k] : adj_[node]) {
        if (seen[next]) continue;
        seen[next] = 1;
        parent[next] = node;
        parent_arc[next] = k;
        queue.push_back(next);
      }
    }
    std::vector<std::size_t> arcs;
    for (std::size_t node = i; node != start; node = parent[node]) arcs.push_back(parent_arc[node]);
    std::reverse(arcs.begin(), arcs.end());
    return arcs;
  }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  struct Edge {
    std::size_t next;
    std::size_t arc;
  };
  std::size_t m_, n_;
  std::vector<std::vector<Edge>> adj_;
};

}  // namespace

TransportationSolution solve_transportation(std::span<const double> supply,
                                            std::span<const double> demand, const Matrix& cost,
                                            std::size_t max_pivots) {
  TransportationSolution sol;
  sol.flow = Matrix::Zero(static_cast<Eigen::Index>(supply.size()),
                          static_cast<Eigen::Index>(demand.size()));
  std::vector<std::size_t> rows, cols;
  for (std::size_t i = 0; i < supply.size(); ++i)
    if (supply[i] > 0.0) rows.push_back(i);
  for (std::size_t j = 0; j < demand.size(); ++j)
    if (demand[j] > 0.0) cols.push_back(j);
  const std::size_t m = rows.size(), n = cols.size();
  if (m == 0 || n == 0) {
    sol.converged = true;
    return sol;
  }
  Matrix c(m, n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < m; ++i) c(i, j) = cost(rows[i], cols[j]);

  // North-west corner start: a staircase of m + n - 1 cells is a spanning tree.
  std::vector<Arc> arcs;
  arcs.reserve(m + n - 1);
  {
    std::size_t i = 0, j = 0;
    double ra = supply[rows[0]], rb = demand[cols[0]];
    for (std::size_t step = 0; step + 1 < m + n; ++step) {
      const double x = std::max(0.0, std::min(ra, rb));
      arcs.push_back({i, j, x});
      ra -= x;
      rb -= x;
      if (step + 2 == m + n) break;
      if (i + 1 == m) {
        rb = demand[cols[++j]];
      } else if (j + 1 == n) {
        ra = supply[rows[++i]];
      } else if (ra <= rb) {
        ra = supply[rows[++i]];
      } else {
        rb = demand[cols[++j]];
      }
    }
  }

  const double eps = 1e-12 * std::max(1.0, c.cwiseAbs().maxCoeff());
  TreeBasis tree(m, n);
  std::vector<double> u(m), v(n);
  std::size_t degenerate_streak = 0;
  const std::size_t bland_after = m + n;

  while (true) {
    tree.rebuild(arcs);
    tree.potentials(arcs, c, u, v);

    // Pricing: Dantzig's rule, switching to Bland's rule on long degenerate runs.
    const bool bland = degenerate_streak > bland_after;
    std::size_t ei = m, ej = n;
    double best = -eps;
    for (std::size_t i = 0; i < m && !(bland && ei < m); ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double rc = c(i, j) - u[i] - v[j];
        if (rc < best) {
          best = rc;
          ei = i;
          ej = j;
          if (bland) break;
        }
      }
    }
    sol.last_reduced_cost = best;
    if (ei == m) {
      sol.converged = true;
      break;
    }
    if (sol.pivots >= max_pivots) break;

    const std::vector<std::size_t> cycle = tree.path(ej, ei);
    // Arcs at even positions (0, 2, ...) lose flow, odd positions gain.
    double theta = std::numeric_limits<double>::infinity();
    std::size_t leave = arcs.size();
    for (std::size_t p = 0; p < cycle.size(); p += 2) {
      const Arc& a = arcs[cycle[p]];
      const double x = std::max(0.0, a.flow);
      const bool better = x < theta || (bland && x == theta && leave < arcs.size() &&
                                        a.i * n + a.j < arcs[leave].i * n + arcs[leave].j);
      if (better) {
        theta = x;
        leave = cycle[p];
      }
    }
    for (std::size_t p = 0; p < cycle.size(); ++p) {
      Arc& a = arcs[cycle[p]];
      a.flow += (p % 2 == 0) ? -theta : theta;
    }
    arcs[leave] = {ei, ej, theta};
    ++sol.pivots;
    if (theta <= 1e-15) {
      ++degenerate_streak;
      ++sol.degenerate_pivots;
    } else {
      degenerate_streak = 0;
    }
  }

  for (const Arc& a : arcs) sol.flow(rows[a.i], cols[a.j]) = std::max(0.0, a.flow);
  return sol;
}

}  // namespace concentra::detail
