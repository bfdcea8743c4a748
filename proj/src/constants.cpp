#include "concentra/constants.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "concentra/error.hpp"
#include "concentra/numeric.hpp"

namespace concentra {

namespace {

constexpr double kE = std::numbers::e;

void require(bool ok, const char* what) {
  if (!ok) throw InputError(what);
}

void check_positive(double x, const char* name) {
  if (!(x > 0.0) || !std::isfinite(x)) throw InputError(std::string(name) + " must be positive and finite");
}

void check_nonneg(double x, const char* name) {
  if (!(x >= 0.0) || !std::isfinite(x)) throw InputError(std::string(name) + " must be nonnegative and finite");
}

void check_n(std::size_t n) { require(n >= 1, "n must be at least 1"); }

void check_order(double s) { require(s >= 1.0 && s <= 2.0, "s must lie in [1, 2]"); }

Regime compare(double x, double pivot) {
  if (x < pivot) return Regime::contractive;
  if (x == pivot) return Regime::critical;
  return Regime::expansive;
}

RegimeConstant make(double value, Regime r, double base, double dep, double s, std::size_t n,
                    const char* id) {
  if (!(value > 0.0) || !std::isfinite(value))
    throw InternalError(std::string(id) + " produced a non-positive or non-finite value");
  return RegimeConstant{value, r, base, dep, s, n, id};
}

// sum_{m=1}^n (sum_{k<m} r^k)^2
double squared_geometric_total(double r, std::size_t n) {
  KahanSum acc;
  for (std::size_t m = 1; m <= n; ++m) {
    const double g = geometric_sum(r, m);
    acc.add(g * g);
  }
  return acc.value();
}

// alpha / (n (n + 1) (e - 1))
double critical_lsi(double alpha, std::size_t n) {
  const double nn = static_cast<double>(n);
  return alpha / (nn * (nn + 1.0) * (kE - 1.0));
}

}  // namespace

std::string to_string(Regime r) {
  switch (r) {
    case Regime::contractive: return "contractive";
    case Regime::critical: return "critical";
    case Regime::expansive: return "expansive";
  }
  return "unknown";
}

double gc_markov_kappa(double kappa1, double L, std::size_t n) {
  check_positive(kappa1, "kappa1");
  check_nonneg(L, "L");
  check_n(n);
  return kappa1 * squared_geometric_total(L, n);
}

double gc_weak_kappa(double kappa1, double R, std::size_t n) {
  check_positive(kappa1, "kappa1");
  check_nonneg(R, "R");
  check_n(n);
  return kappa1 * squared_geometric_total(R, n);
}

double gc_weak_kappa_general(double kappa1, double M, std::size_t n) {
  check_positive(kappa1, "kappa1");
  if (M == 0.0) throw InputError("M = 0 makes the general form singular; use the R form with R = 0");
  check_positive(M, "M");
  check_n(n);
  const double log_value = std::log(kappa1) + 2.0 * static_cast<double>(n) * std::log1p(M) - 2.0 * std::log(M);
  return std::exp(log_value);
}

RegimeConstant ts_weak_alpha(double alpha, double R, double s, std::size_t n) {
  check_positive(alpha, "alpha");
  check_nonneg(R, "R");
  check_order(s);
  check_n(n);
  const double nn = static_cast<double>(n);
  const Regime regime = compare(R, 1.0);
  double value = 0.0;
  switch (regime) {
    case Regime::contractive: {
      const double gap = 1.0 - std::pow(R, 1.0 / s);
      value = (s == 2.0 ? 1.0 : std::pow(nn, 1.0 - 2.0 / s)) * gap * gap * alpha;
      break;
    }
    case Regime::critical:
      value = std::exp(2.0 / s - 2.0) * std::pow(nn + 1.0, -2.0 / s - 1.0) * alpha;
      break;
    case Regime::expansive: {
      const double log_inner = std::log(R - 1.0) - (s - 1.0) - nn * std::log(R);
      value = std::exp(2.0 / s * log_inner) * alpha / (nn + 1.0);
      break;
    }
  }
  return make(value, regime, alpha, R, s, n, "ts_weak_alpha");
}

RegimeConstant ts_markov_alpha(double alpha, double L, double s, std::size_t n) {
  RegimeConstant c = ts_weak_alpha(alpha, L, s, n);
  c.formula_id = "ts_markov_alpha";
  return c;
}

double ts_general_alpha(double alpha, double M, double s, std::size_t n) {
  check_positive(alpha, "alpha");
  if (M == 0.0) throw InputError("M = 0 makes the general form singular");
  check_positive(M, "M");
  check_order(s);
  check_n(n);
  const double nn = static_cast<double>(n);
  const double log_inner = (1.0 - s) * std::log(nn * kE) + std::log(M) - nn * std::log1p(M);
  return alpha * std::exp(2.0 / s * log_inner);
}

RegimeConstant lsi_markov_alpha(double alpha, double L, std::size_t n) {
  check_positive(alpha, "alpha");
  check_nonneg(L, "L");
  check_n(n);
  const double nn = static_cast<double>(n);
  const Regime regime = compare(L, alpha);
  double value = 0.0;
  switch (regime) {
    case Regime::contractive:
      value = (alpha - L) * (alpha - L) / alpha;
      break;
    case Regime::critical:
      value = critical_lsi(alpha, n);
      break;
    case Regime::expansive: {
      const double log_ratio = 2.0 * nn * (std::log(alpha) - std::log(L));
      value = std::exp(log_ratio) * (L * L - alpha * alpha) / (alpha * kE * (nn + 1.0));
      break;
    }
  }
  return make(value, regime, alpha, L, 2.0, n, "lsi_markov_alpha");
}

RegimeConstant lsi_weak_alpha(double alpha, double R, std::size_t n) {
  check_positive(alpha, "alpha");
  check_nonneg(R, "R");
  check_n(n);
  const double nn = static_cast<double>(n);
  const Regime regime = compare(R, alpha);
  double value = 0.0;
  switch (regime) {
    case Regime::contractive: {
      const double gap = std::sqrt(alpha) - std::sqrt(R);
      value = R == 0.0 ? alpha : gap * gap;
      break;
    }
    case Regime::critical:
      value = critical_lsi(alpha, n);
      break;
    case Regime::expansive: {
      const double log_ratio = nn * (std::log(alpha) - std::log(R));
      value = std::exp(log_ratio) * (R - alpha) / (kE * (nn + 1.0));
      break;
    }
  }
  return make(value, regime, alpha, R, 2.0, n, "lsi_weak_alpha");
}

RegimeConstant lsi_markov_kernel_alpha(double alpha, double kappa, std::size_t n) {
  RegimeConstant c = lsi_weak_alpha(alpha, kappa, n);
  c.formula_id = "lsi_markov_kernel_alpha";
  return c;
}

RegimeConstant contraction_noise_alpha(double alpha, double L, std::size_t n) {
  check_positive(alpha, "alpha");
  check_nonneg(L, "L");
  check_n(n);
  const double nn = static_cast<double>(n);
  const Regime regime = compare(L, 1.0);
  double value = 0.0;
  switch (regime) {
    case Regime::contractive:
      value = (1.0 - L) * (1.0 - L) * alpha;
      break;
    case Regime::critical:
      value = critical_lsi(alpha, n);
      break;
    case Regime::expansive:
      value = (L - 1.0) * alpha * std::exp(-nn * std::log(L)) / (kE * (nn + 1.0));
      break;
  }
  return make(value, regime, alpha, L, 2.0, n, "contraction_noise_alpha");
}

namespace {

void check_kappa_matrix(const Matrix& kappa, std::size_t n) {
  if (n < 2) return;
  if (kappa.rows() < static_cast<Eigen::Index>(n) || kappa.cols() < static_cast<Eigen::Index>(n))
    throw InputError("kappa matrix must be at least n x n");
  for (std::size_t j = 1; j < n; ++j)
    for (std::size_t k = 0; k < j; ++k) {
      const double v = kappa(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
      if (!(v >= 0.0) || !std::isfinite(v)) throw InputError("kappa entries must be nonnegative and finite");
    }
}

// kappa_{j,k} with 1-based indices.
double kap(const Matrix& kappa, std::size_t j, std::size_t k) {
  return kappa(static_cast<Eigen::Index>(j - 1), static_cast<Eigen::Index>(k - 1));
}

// 1 + sum_{k=0}^{n-2} prod_{m=k+1}^{n-1} (1 + K_m), K_m scaled by (1 + 1/eps).
// Accumulated from the right so each product is formed once.
double weak_lsi_bracket(double alpha, const Matrix& kappa, std::size_t n, double epsilon) {
  std::vector<double> base(n, 0.0);  // sum_{l=0}^{j-1} kappa_{n-l, n-j} / alpha
  for (std::size_t j = 1; j + 1 <= n; ++j) {
    KahanSum acc;
    for (std::size_t l = 0; l < j; ++l) acc.add(kap(kappa, n - l, n - j));
    base[j] = acc.value() / alpha;
  }
  const double scale = 1.0 + 1.0 / epsilon;
  KahanSum total;
  total.add(1.0);
  double prod = 1.0;
  for (std::size_t k = n - 1; k-- > 0;) {
    prod *= 1.0 + scale * base[k + 1];
    total.add(prod);
  }
  return total.value();
}

}  // namespace

double lsi_weak_alpha_general(double alpha, const Matrix& kappa, std::size_t n, double epsilon) {
  check_positive(alpha, "alpha");
  check_positive(epsilon, "epsilon");
  check_n(n);
  check_kappa_matrix(kappa, n);
  return alpha / (1.0 + epsilon) / weak_lsi_bracket(alpha, kappa, n, epsilon);
}

WeakLsiResult lsi_weak_alpha_general_auto(double alpha, const Matrix& kappa, std::size_t n) {
  check_positive(alpha, "alpha");
  check_n(n);
  check_kappa_matrix(kappa, n);
  auto f = [&](double log_eps) {
    const double eps = std::exp(log_eps);
    return alpha / (1.0 + eps) / weak_lsi_bracket(alpha, kappa, n, eps);
  };
  // No coupling: the bracket is n for every eps and the sup is the eps -> 0 limit.
  bool uncoupled = true;
  for (std::size_t j = 1; j < n; ++j)
    for (std::size_t k = 0; k < j; ++k)
      if (kappa(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) != 0.0) uncoupled = false;
  if (uncoupled) return {alpha / static_cast<double>(n), 0.0, false};

  constexpr double lo = -12.0, hi = 12.0;

  // Bracket check: sampled values must rise then fall (ties allowed).
  constexpr int kGrid = 241;
  std::vector<double> grid(kGrid);
  for (int i = 0; i < kGrid; ++i) grid[i] = f(lo + (hi - lo) * i / (kGrid - 1));
  int peak = static_cast<int>(std::max_element(grid.begin(), grid.end()) - grid.begin());
  bool unimodal = true;
  const double rel = 1e-12;
  for (int i = 1; i <= peak && unimodal; ++i)
    if (grid[i] < grid[i - 1] * (1.0 - rel)) unimodal = false;
  for (int i = peak + 1; i < kGrid && unimodal; ++i)
    if (grid[i] > grid[i - 1] * (1.0 + rel)) unimodal = false;

  WeakLsiResult out;
  if (!unimodal) {
    out.grid_fallback = true;
    out.value = grid[peak];
    out.epsilon = std::exp(lo + (hi - lo) * peak / (kGrid - 1));
    return out;
  }

  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 200; ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = f(x1);
    }
  }
  // Candidates: the search interior, both ends and the best grid point.
  double best_x = f1 >= f2 ? x1 : x2;
  double best = std::max(f1, f2);
  for (double x : {lo, hi, lo + (hi - lo) * peak / (kGrid - 1)}) {
    const double v = f(x);
    if (v > best) {
      best = v;
      best_x = x;
    }
  }
  out.value = best;
  out.epsilon = std::exp(best_x);
  return out;
}

ArmaLsi arma_lsi_alpha(const Matrix& A, const Matrix& B, double tol) {
  if (A.rows() != A.cols() || A.rows() == 0) throw InputError("A must be a nonempty square matrix");
  if (B.rows() != A.rows()) throw InputError("B must have as many rows as A");
  check_positive(tol, "tol");
  if (!A.allFinite() || !B.allFinite()) throw InputError("A and B must be finite");

  ArmaLsi out;
  const double b_norm = B.size() == 0 ? 0.0 : B.jacobiSvd().singularValues()(0);
  const double b_scale = std::max(1.0, b_norm);

  if (A.isZero(0.0)) {
    out.value = 1.0 / (b_scale * b_scale);
    out.series = 1.0;
    out.terms = 1;
    return out;
  }
  const double rho = A.eigenvalues().cwiseAbs().maxCoeff();
  out.spectral_radius = rho;
  if (rho >= 1.0)
    throw InputError("spectral radius of A must be < 1 (got " + std::to_string(rho) + ")");
  if (rho <= 1e-300)
    throw InputError("A is nonzero with spectral radius 0; the series rho^-j ||A^j||^2 is undefined");

  // t_j = ||A^j / rho^(j/2)||^2 = rho^-j ||A^j||^2.
  const double step = 1.0 / std::sqrt(rho);
  const Matrix As = A * step;
  Matrix P = Matrix::Identity(A.rows(), A.cols());
  KahanSum series;
  series.add(1.0);
  double prev_term = 1.0;
  double prev_ratio = std::numeric_limits<double>::quiet_NaN();
  int stable = 0;
  constexpr std::size_t kMaxTerms = 2000000;
  std::size_t j = 1;
  for (; j < kMaxTerms; ++j) {
    P = P * As;
    const double norm = P.jacobiSvd().singularValues()(0);
    const double term = norm * norm;
    series.add(term);
    if (term == 0.0) break;
    const double ratio = term / prev_term;
    if (std::isfinite(prev_ratio) && ratio < 1.0 && std::abs(ratio - prev_ratio) <= 1e-3 * ratio)
      ++stable;
    else
      stable = 0;
    prev_ratio = ratio;
    prev_term = term;
    if (stable >= 5) {
      const double tail = term * ratio / (1.0 - ratio);
      if (tail < tol * series.value()) {
        series.add(tail);
        break;
      }
    }
    if (!std::isfinite(series.value())) throw InternalError("ARMA series overflowed");
  }
  if (j >= kMaxTerms) throw InternalError("ARMA series did not converge within the term budget");
  out.series = series.value();
  out.terms = j + 1;
  const double lead = (1.0 - std::sqrt(rho)) / b_scale;
  out.value = lead * lead / (out.series * out.series);
  return out;
}

OuConstants ou_kappa(double rho, double tau, std::size_t n, double x) {
  check_positive(tau, "tau");
  check_n(n);
  if (!std::isfinite(rho) || !std::isfinite(x)) throw InputError("rho and x must be finite");
  OuConstants out;
  out.theta = std::exp(-rho * tau);
  out.sigma2 = rho == 0.0 ? tau : -std::expm1(-2.0 * rho * tau) / (2.0 * rho);
  if (!(out.sigma2 > 0.0) || !std::isfinite(out.sigma2) || !std::isfinite(out.theta))
    throw InputError("rho * tau out of range");

  KahanSum kappa;
  for (std::size_t j = 0; j < n; ++j) {
    KahanSum inner;
    double p = 1.0;
    for (std::size_t i = 0; i < n - j; ++i) {
      inner.add(p);
      p *= out.theta;
    }
    kappa.add(inner.value() * inner.value());
  }
  out.kappa_n = out.sigma2 * kappa.value();

  KahanSum mean;
  double p = out.theta;
  for (std::size_t i = 1; i <= n; ++i) {
    mean.add(p);
    p *= out.theta;
  }
  out.mean_Fn = x * mean.value();
  return out;
}

}  // namespace concentra
