#include <doctest.h>

#include <cmath>

#include "concentra/constants.hpp"
#include "concentra/error.hpp"
#include "gen.hpp"
#include "oracles.hpp"

using namespace concentra;

TEST_CASE("gc kappa examples") {
  CHECK(gc_markov_kappa(1, 1, 3) == 14.0);
  CHECK(gc_markov_kappa(2.5, 0, 7) == doctest::Approx(17.5).epsilon(1e-15));
  CHECK(gc_markov_kappa(1.7, 0.3, 1) == 1.7);
  CHECK(gc_weak_kappa(2, 1, 2) == 10.0);
  CHECK(gc_weak_kappa(3, 0, 4) == 12.0);
  CHECK(gc_weak_kappa_general(1, 1, 2) == doctest::Approx(16.0).epsilon(1e-14));
  CHECK_THROWS_AS(gc_weak_kappa_general(1, 0, 2), InputError);
  CHECK_THROWS_AS(gc_markov_kappa(1, -0.1, 2), InputError);
  CHECK_THROWS_AS(gc_markov_kappa(1, 0.5, 0), InputError);
}

TEST_CASE("gc kappa matches nested sums") {
  gen::Rng rng(41);
  for (int rep = 0; rep < 300; ++rep) {
    const double k1 = rng.uniform(0.1, 3), L = rng.uniform(0, 2);
    const std::size_t n = rng.between(1, 40);
    CHECK(gc_markov_kappa(k1, L, n) == doctest::Approx(oracle::gc_nested_sum(k1, L, n)).epsilon(1e-12));
    CHECK(gc_weak_kappa(k1, L, n) == doctest::Approx(oracle::gc_nested_sum(k1, L, n)).epsilon(1e-12));
  }
}

TEST_CASE("gc constants are nondecreasing in n") {
  gen::Rng rng(42);
  for (int rep = 0; rep < 50; ++rep) {
    const double k1 = rng.uniform(0.1, 3), L = rng.uniform(0, 2), M = rng.uniform(0.1, 2);
    for (std::size_t n = 1; n < 30; ++n) {
      CHECK(gc_markov_kappa(k1, L, n + 1) >= gc_markov_kappa(k1, L, n));
      CHECK(gc_weak_kappa_general(k1, M, n + 1) >= gc_weak_kappa_general(k1, M, n));
    }
  }
}

TEST_CASE("transport constant examples") {
  CHECK(ts_markov_alpha(1, 0.25, 2, 1).value == 0.25);
  CHECK(ts_markov_alpha(1, 0.25, 2, 50).value == 0.25);
  CHECK(ts_markov_alpha(1, 2, 1, 3).value == doctest::Approx(1.0 / 256).epsilon(1e-14));
  CHECK(ts_markov_alpha(1, 2, 1, 3).regime == Regime::expansive);
  const double L = 0.36;
  CHECK(ts_markov_alpha(2, L, 2, 1).value == doctest::Approx(2 * std::pow(1 - std::sqrt(L), 2)).epsilon(1e-15));
  CHECK(ts_general_alpha(1, 1, 1, 2) == doctest::Approx(1.0 / 16).epsilon(1e-14));
  const auto crit = ts_weak_alpha(3, 1, 2, 1);
  CHECK(crit.regime == Regime::critical);
  CHECK(crit.value == doctest::Approx(3.0 / (4 * std::exp(1.0))).epsilon(1e-14));
}

TEST_CASE("transport constants match the displayed formulas") {
  gen::Rng rng(43);
  for (int rep = 0; rep < 300; ++rep) {
    const double alpha = rng.uniform(0.1, 5), s = rng.uniform(1, 2);
    const double L = rep % 3 == 0 ? rng.uniform(0, 0.99) : rep % 3 == 1 ? 1.0 : rng.uniform(1.01, 3);
    const std::size_t n = rng.between(1, 25);
    const double expect = oracle::ts_display(alpha, L, s, n);
    CHECK(ts_markov_alpha(alpha, L, s, n).value == doctest::Approx(expect).epsilon(1e-12));
    CHECK(ts_weak_alpha(alpha, L, s, n).value == ts_markov_alpha(alpha, L, s, n).value);
    CHECK(ts_weak_alpha(alpha, L, s, n).regime == ts_markov_alpha(alpha, L, s, n).regime);
  }
}

TEST_CASE("transport constant at s = 2 is exactly n-independent for L < 1") {
  for (double L : {0.0, 0.1, 0.25, 0.5, 0.9, 0.999}) {
    const double a1 = ts_markov_alpha(1.3, L, 2, 1).value;
    for (std::size_t n : {2u, 10u, 100u, 1000u, 100000u}) CHECK(ts_markov_alpha(1.3, L, 2, n).value == a1);
  }
}

TEST_CASE("general transport constant matches its product form") {
  gen::Rng rng(44);
  for (int rep = 0; rep < 100; ++rep) {
    const double alpha = rng.uniform(0.1, 5), M = rng.uniform(0.05, 3), s = rng.uniform(1, 2);
    const std::size_t n = rng.between(1, 20);
    const double direct =
        alpha * std::pow(std::pow(n * std::exp(1.0), 1 - s) * M / std::pow(1 + M, static_cast<double>(n)), 2 / s);
    CHECK(ts_general_alpha(alpha, M, s, n) == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("log-Sobolev constant examples") {
  CHECK(lsi_markov_alpha(2, 0, 5).value == 2.0);
  CHECK(lsi_markov_alpha(1, 1, 2).value == doctest::Approx(oracle::inv_6_e_minus_1).epsilon(1e-14));
  CHECK(lsi_markov_alpha(1, 2, 1).value == doctest::Approx(oracle::three_over_8e).epsilon(1e-14));
  CHECK(lsi_weak_alpha(3, 0, 4).value == 3.0);
  for (std::size_t n : {1u, 7u, 40u}) CHECK(lsi_weak_alpha(4, 1, n).value == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(lsi_markov_kernel_alpha(2, 0, 3).value == 2.0);
  CHECK(lsi_markov_kernel_alpha(1, 1, 3).value == doctest::Approx(oracle::inv_12_e_minus_1).epsilon(1e-14));
  CHECK(contraction_noise_alpha(2, 0, 3).value == 2.0);
  CHECK(contraction_noise_alpha(1, 1, 2).value == doctest::Approx(oracle::inv_6_e_minus_1).epsilon(1e-14));
  CHECK(contraction_noise_alpha(1, 2, 2).value == doctest::Approx(oracle::inv_12e).epsilon(1e-14));
}

TEST_CASE("kernel log-Sobolev constant equals the weak form") {
  gen::Rng rng(45);
  for (int rep = 0; rep < 50; ++rep) {
    const double alpha = rng.uniform(0.1, 4);
    const double kappa = rep % 5 == 0 ? alpha : rng.uniform(0, 8);
    const std::size_t n = rng.between(1, 30);
    CHECK(lsi_markov_kernel_alpha(alpha, kappa, n).value == lsi_weak_alpha(alpha, kappa, n).value);
  }
}

TEST_CASE("regime branches are positive and nonincreasing in n at and beyond the boundary") {
  gen::Rng rng(46);
  for (int rep = 0; rep < 60; ++rep) {
    const double alpha = rng.uniform(0.2, 3), s = rng.uniform(1, 2);
    const double over = rep % 2 == 0 ? 1.0 : rng.uniform(1.0, 3.0);
    for (std::size_t n = 1; n < 25; ++n) {
      const double L = over;
      CHECK(ts_markov_alpha(alpha, L, s, n).value > 0);
      CHECK(ts_markov_alpha(alpha, L, s, n + 1).value <= ts_markov_alpha(alpha, L, s, n).value);
      CHECK(contraction_noise_alpha(alpha, L, n + 1).value <= contraction_noise_alpha(alpha, L, n).value);
      CHECK(lsi_markov_alpha(alpha, alpha * over, n + 1).value <= lsi_markov_alpha(alpha, alpha * over, n).value);
      CHECK(lsi_weak_alpha(alpha, alpha * over, n + 1).value <= lsi_weak_alpha(alpha, alpha * over, n).value);
      CHECK(lsi_weak_alpha(alpha, alpha * over, n).value > 0);
    }
  }
}

TEST_CASE("log-Sobolev constants match their displays") {
  gen::Rng rng(47);
  const double e = std::exp(1.0);
  for (int rep = 0; rep < 200; ++rep) {
    const double a = rng.uniform(0.2, 4);
    const std::size_t n = rng.between(1, 20);
    const double nn = static_cast<double>(n);
    const double L = rep % 3 == 0 ? rng.uniform(0, a * 0.99) : rep % 3 == 1 ? a : rng.uniform(a * 1.01, 3 * a);
    double expect;
    if (L < a) expect = (a - L) * (a - L) / a;
    else if (L == a) expect = a / (nn * (nn + 1) * (e - 1));
    else expect = std::pow(a / L, 2 * nn) * (L * L - a * a) / (a * e * (nn + 1));
    CHECK(lsi_markov_alpha(a, L, n).value == doctest::Approx(expect).epsilon(1e-12));
    if (L < a) expect = std::pow(std::sqrt(a) - std::sqrt(L), 2);
    else if (L == a) expect = a / (nn * (nn + 1) * (e - 1));
    else expect = std::pow(a / L, nn) * (L - a) / (e * (nn + 1));
    CHECK(lsi_weak_alpha(a, L, n).value == doctest::Approx(expect).epsilon(1e-12));
    const double c = rep % 3 == 0 ? rng.uniform(0, 0.99) : rep % 3 == 1 ? 1.0 : rng.uniform(1.01, 3);
    if (c < 1) expect = (1 - c) * (1 - c) * a;
    else if (c == 1) expect = a / (nn * (nn + 1) * (e - 1));
    else expect = (c - 1) * a / (std::pow(c, nn) * e * (nn + 1));
    CHECK(contraction_noise_alpha(a, c, n).value == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("general weak log-Sobolev constant") {
  Matrix k = Matrix::Zero(2, 2);
  k(1, 0) = 3.0;
  CHECK(lsi_weak_alpha_general(3.0, k, 2, 1.0) == doctest::Approx(3.0 / 8).epsilon(1e-14));
  CHECK(lsi_weak_alpha_general(2.0, Matrix::Zero(1, 1), 1, 0.5) == doctest::Approx(2.0 / 1.5).epsilon(1e-15));
  const auto one = lsi_weak_alpha_general_auto(2.0, Matrix::Zero(1, 1), 1);
  CHECK(one.value == doctest::Approx(2.0).epsilon(1e-5));
  const auto zero = lsi_weak_alpha_general_auto(2.0, Matrix::Zero(4, 4), 4);
  CHECK(zero.value == doctest::Approx(0.5).epsilon(1e-5));
  Matrix neg = Matrix::Zero(2, 2);
  neg(1, 0) = -1;
  CHECK_THROWS_AS(lsi_weak_alpha_general(1, neg, 2, 1), InputError);
}

TEST_CASE("general weak log-Sobolev constant matches the direct display") {
  gen::Rng rng(48);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = rng.between(1, 7);
    Matrix k = Matrix::Zero(n, n);
    for (std::size_t j = 1; j < n; ++j)
      for (std::size_t i = 0; i < j; ++i) k(j, i) = rng.uniform(0, 1.5);
    const double alpha = rng.uniform(0.3, 3), eps = std::exp(rng.uniform(-4, 4));
    CHECK(lsi_weak_alpha_general(alpha, k, n, eps) ==
          doctest::Approx(oracle::lsi_general_display(alpha, k, n, eps)).epsilon(1e-12));
  }
}

TEST_CASE("auto epsilon dominates a fixed grid") {
  gen::Rng rng(49);
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t n = rng.between(1, 6);
    Matrix k = Matrix::Zero(n, n);
    for (std::size_t j = 1; j < n; ++j)
      for (std::size_t i = 0; i < j; ++i) k(j, i) = rng.uniform(0, 2);
    const double alpha = rng.uniform(0.3, 3);
    const auto best = lsi_weak_alpha_general_auto(alpha, k, n);
    for (int g = 0; g < 20; ++g) {
      const double eps = std::exp(-6.0 + 12.0 * g / 19.0);
      CHECK(best.value >= lsi_weak_alpha_general(alpha, k, n, eps) * (1 - 1e-12));
    }
  }
}

TEST_CASE("ARMA log-Sobolev constant") {
  const auto zero = arma_lsi_alpha(Matrix::Zero(2, 2), Matrix::Identity(2, 2));
  CHECK(zero.value == 1.0);
  const double c = 0.49;
  const auto diag = arma_lsi_alpha(c * Matrix::Identity(2, 2), Matrix::Identity(2, 2));
  CHECK(diag.spectral_radius == doctest::Approx(c).epsilon(1e-14));
  CHECK(diag.series == doctest::Approx(1 / (1 - c)).epsilon(1e-10));
  CHECK(diag.value == doctest::Approx(std::pow(1 - std::sqrt(c), 2) * std::pow(1 - c, 2)).epsilon(1e-10));
  Matrix nil(2, 2);
  nil << 0, 1, 0, 0;
  CHECK_THROWS_AS(arma_lsi_alpha(nil, Matrix::Identity(2, 2)), InputError);
  CHECK_THROWS_AS(arma_lsi_alpha(1.2 * Matrix::Identity(2, 2), Matrix::Identity(2, 2)), InputError);
  const auto scaled = arma_lsi_alpha(c * Matrix::Identity(2, 2), 3 * Matrix::Identity(2, 2));
  CHECK(scaled.value == doctest::Approx(diag.value / 9).epsilon(1e-10));
}

TEST_CASE("OU constants") {
  const auto z = ou_kappa(0, 1, 1, 0);
  CHECK(z.theta == 1.0);
  CHECK(z.sigma2 == 1.0);
  CHECK(z.kappa_n == 1.0);
  CHECK(z.mean_Fn == 0.0);
  const auto h = ou_kappa(std::log(2.0), 1, 2, 1);
  CHECK(h.theta == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(h.sigma2 == doctest::Approx(oracle::three_over_8ln2).epsilon(1e-14));
  CHECK(h.kappa_n == doctest::Approx(3.25 * h.sigma2).epsilon(1e-14));
  CHECK(h.mean_Fn == doctest::Approx(0.75).epsilon(1e-15));
  const auto big = ou_kappa(50, 1, 6, 0);
  CHECK(big.kappa_n == doctest::Approx(6 * big.sigma2).epsilon(1e-12));
}

TEST_CASE("OU kappa equals the Markov GC constant") {
  for (double theta : {0.5, 1.0, 1.5}) {
    const double tau = 0.7, rho = -std::log(theta) / tau;
    for (std::size_t n = 1; n <= 20; ++n) {
      const auto o = ou_kappa(rho, tau, n, 0.3);
      const double g = gc_markov_kappa(o.sigma2, o.theta, n);
      CHECK(std::abs(o.kappa_n - g) <= 1e-12 * g);
      CHECK(o.kappa_n == doctest::Approx(oracle::ou_nested_sum(o.theta, o.sigma2, n)).epsilon(1e-12));
    }
  }
}
