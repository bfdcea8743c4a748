// constants.hpp - closed-form concentration, transportation and log-Sobolev
// constants for dependent sequences, with regime dispatch.
//
// Naming: kappa constants feed GC(kappa), alpha constants feed T_s(alpha) or
// LSI(alpha). Every function validates its inputs and throws InputError.

#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "concentra/measure.hpp"

namespace concentra {

enum class Regime { contractive, critical, expansive };

std::string to_string(Regime r);

struct RegimeConstant {
  double value = 0.0;
  Regime regime = Regime::contractive;
  double base = 0.0;        // alpha (or kappa1)
  double dependence = 0.0;  // L, R, M or kappa
  double order = 2.0;       // s where relevant
  std::size_t n = 1;
  std::string formula_id;
};

double gc_markov_kappa(double kappa1, double L, std::size_t n);
double gc_weak_kappa(double kappa1, double R, std::size_t n);
// kappa1 (1 + M)^(2n) / M^2; M = 0 is singular.
double gc_weak_kappa_general(double kappa1, double M, std::size_t n);

RegimeConstant ts_markov_alpha(double alpha, double L, double s, std::size_t n);
RegimeConstant ts_weak_alpha(double alpha, double R, double s, std::size_t n);
double ts_general_alpha(double alpha, double M, double s, std::size_t n);

RegimeConstant lsi_markov_alpha(double alpha, double L, std::size_t n);
RegimeConstant lsi_weak_alpha(double alpha, double R, std::size_t n);
RegimeConstant lsi_markov_kernel_alpha(double alpha, double kappa, std::size_t n);
RegimeConstant contraction_noise_alpha(double alpha, double L, std::size_t n);

struct WeakLsiResult {
  double value = 0.0;
  double epsilon = 0.0;
  bool grid_fallback = false;
};

// Coupling coefficients kappa_{j,k}, 1 <= k < j <= n (1-based), are stored in
// an n x n matrix at (j-1, k-1); entries on or above the diagonal are ignored.
// alpha_n(eps) for a fixed eps > 0.
double lsi_weak_alpha_general(double alpha, const Matrix& kappa, std::size_t n, double epsilon);
// sup over eps of alpha_n(eps): golden-section in log eps on [-12, 12] with a
// grid scan if the objective is not unimodal on the bracket. With every
// kappa zero the sup is the eps -> 0 limit alpha / n, reported with eps = 0.
WeakLsiResult lsi_weak_alpha_general_auto(double alpha, const Matrix& kappa, std::size_t n);

struct ArmaLsi {
  double value = 0.0;
  double spectral_radius = 0.0;
  double series = 0.0;  // sum_j rho^-j ||A^j||^2
  std::size_t terms = 0;
};

ArmaLsi arma_lsi_alpha(const Matrix& A, const Matrix& B, double tol = 1e-12);

struct OuConstants {
  double theta = 0.0;
  double sigma2 = 0.0;
  double kappa_n = 0.0;
  double mean_Fn = 0.0;
};

OuConstants ou_kappa(double rho, double tau, std::size_t n, double x);

}  // namespace concentra
