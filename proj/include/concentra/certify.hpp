// certify.hpp - empirical checks of GC(kappa), T_s(alpha) and LSI(alpha).
//
// A check evaluates a slack (positive = violation) over a finite family of
// test objects and reports the worst one. A pass is only as strong as the
// family, so every certificate records the family and its size.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "concentra/measure.hpp"

namespace concentra {

enum class Inequality { gc, transport, lsi };

std::string to_string(Inequality k);

struct Certificate {
  Inequality inequality = Inequality::gc;
  double constant = 0.0;
  double order_s = 1.0;  // transport only
  double worst_slack = 0.0;
  bool pass = false;
  std::size_t search_size = 0;
  double tolerance = 1e-9;
  std::string family;

  // Witness: the extremal family member.
  std::size_t witness_index = 0;
  std::string witness_label;
  double witness_t = 0.0;                       // GC: tilt parameter
  std::vector<double> witness_values;           // GC: F on the support; LSI: f on the grid
  std::optional<DiscreteMeasure> witness_measure;  // transport: the perturbation nu

  double grid_h = 0.0;      // LSI only
  double allowance = 0.0;   // LSI only: tolerance = 1e-6 + allowance
};

// ---------------------------------------------------------------------------
// GC(kappa)

// 20 log-spaced points in [1e-2, 8], their negatives, and 0.
std::vector<double> default_t_grid();

// log E e^{t(F - EF)} - kappa t^2 / 2 under mu; exactly 0 at t = 0.
double gc_slack(const DiscreteMeasure& mu, std::span<const double> f, double kappa, double t);

struct TestFunction {
  std::string label;
  std::vector<double> values;  // on mu's support
};

// d(., x_j) for each support point, seeded McShane extensions
// min_j (v_j + d(., x_j)), and on supports <= 6 every vertex of the
// 1-Lipschitz polytope (normalized f(x_0) = 0).
std::vector<TestFunction> gc_default_family(const DiscreteMeasure& mu, std::size_t mcshane_count,
                                            std::uint64_t seed);

// Vertices of {f : f_0 = 0, |f_i - f_j| <= d_ij} from tight spanning trees.
std::vector<std::vector<double>> lipschitz_vertices(const Matrix& dist);

struct GcOptions {
  std::vector<double> t_grid;  // empty = default_t_grid()
  std::size_t mcshane_count = 64;
  std::uint64_t seed = 0;
  double tolerance = 1e-9;
  unsigned workers = 1;
};

Certificate check_gc(const DiscreteMeasure& mu, double kappa, const GcOptions& opt = {});
// Caller-supplied family; every member must be 1-Lipschitz on the support (1e-9).
Certificate check_gc(const DiscreteMeasure& mu, double kappa, const std::vector<TestFunction>& family,
                     const GcOptions& opt = {});

// ---------------------------------------------------------------------------
// T_s(alpha)

// W_s(nu, mu) - sqrt(2 Ent(nu | mu) / alpha).
double transport_slack(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double alpha, double s);

// Exponential tilts e^{tF} mu over the GC family and t grid, plus seeded
// random reweightings of mu.
std::vector<DiscreteMeasure> transport_default_family(const DiscreteMeasure& mu, std::uint64_t seed,
                                                      std::size_t reweightings = 32);

struct TransportOptions {
  double tolerance = 1e-9;
  unsigned workers = 1;
  std::string family_label = "custom";
};

Certificate check_transport(const DiscreteMeasure& mu, double alpha, double s,
                            const std::vector<DiscreteMeasure>& family, const TransportOptions& opt = {});
Certificate check_transport(const DiscreteMeasure& mu, double alpha, double s, std::uint64_t seed);

// ---------------------------------------------------------------------------
// LSI(alpha) on a uniform 1-D grid

struct GridDensity {
  double x0 = 0.0;
  double h = 1.0;
  std::vector<double> values;  // positive density samples at x0 + i h

  double x(std::size_t i) const { return x0 + h * static_cast<double>(i); }
  std::size_t size() const { return values.size(); }
};

// exp(-x^2 / 2) on [-half_width, half_width] with the given number of points.
GridDensity standard_gaussian_grid(double half_width = 8.0, std::size_t points = 2001);

// Ent(f^2) - (2 / alpha) int |f'|^2 with f scaled to int f^2 = 1. Central
// differences inside, one-sided second-order stencils at the ends.
double lsi_slack(const GridDensity& density, std::span<const double> f, double alpha);

std::vector<TestFunction> lsi_default_family(const GridDensity& density, std::uint64_t seed,
                                             std::size_t bumps = 16);

struct LsiOptions {
  double base_tolerance = 1e-6;
  double allowance_constant = 1.0;  // allowance = constant * h^2
  unsigned workers = 1;
};

Certificate check_lsi_grid(const GridDensity& density, double alpha, const std::vector<TestFunction>& family,
                           const LsiOptions& opt = {});
Certificate check_lsi_grid(const GridDensity& density, double alpha, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Replay and search

// Re-evaluates the witness of a GC or transport certificate against mu.
double replay(const Certificate& cert, const DiscreteMeasure& mu);
// Re-evaluates the witness of an LSI certificate.
double replay(const Certificate& cert, const GridDensity& density);

enum class Weaker { larger, smaller };

struct BestConstant {
  double value = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool degenerate = false;  // passed at both ends; value is the strong end
  std::vector<std::pair<double, bool>> trace;
};

// Bisection on a verdict that is monotone in the constant. `weaker` says
// which direction relaxes the inequality (GC: larger; T_s and LSI: smaller).
// Stops at relative bracket width 1e-4 and returns the midpoint.
BestConstant best_constant(const std::function<bool(double)>& passes, double lo, double hi, Weaker weaker,
                           double rel_width = 1e-4);

struct DualityReport {
  Certificate gc;
  Certificate t1;
  bool agree = false;
};

// GC(kappa) against T_1(1 / kappa) on the default families.
DualityReport check_bg_duality(const DiscreteMeasure& mu, double kappa, std::uint64_t seed);

}  // namespace concentra
