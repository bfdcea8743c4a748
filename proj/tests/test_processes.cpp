#include <doctest.h>

#include <cmath>

#include "concentra/constants.hpp"
#include "concentra/error.hpp"
#include "concentra/processes.hpp"
#include "gen.hpp"
#include "oracles.hpp"

using namespace concentra;

namespace {

double column_mean(const SamplePaths& p, std::size_t step) {
  double s = 0;
  for (std::size_t i = 0; i < p.paths; ++i) s += p.at(i, step);
  return s / static_cast<double>(p.paths);
}

double column_var(const SamplePaths& p, std::size_t step) {
  const double m = column_mean(p, step);
  double s = 0;
  for (std::size_t i = 0; i < p.paths; ++i) s += (p.at(i, step) - m) * (p.at(i, step) - m);
  return s / static_cast<double>(p.paths - 1);
}

}  // namespace

TEST_CASE("OU transition law") {
  const auto a = ou_transition(1.7, 0.0, 2.0);
  CHECK(a.mean()(0) == 1.7);
  CHECK(a.cov()(0, 0) == 2.0);
  CHECK(ou_transition(0.0, 3.0, 0.4).mean()(0) == 0.0);
  const auto b = ou_transition(2.0, std::log(2.0), 1.0);
  CHECK(b.mean()(0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(b.cov()(0, 0) == doctest::Approx(oracle::three_over_8ln2).epsilon(1e-14));
}

TEST_CASE("simulation is reproducible across runs and worker counts") {
  for (const auto& model : {MarkovModel::ou(0.8, 0.5, 1.0), MarkovModel::gaussian_kernel(0.6, 2.0),
                            MarkovModel::arma((Matrix(2, 2) << 0.5, 0.1, 0.0, 0.3).finished(), Matrix::Identity(2, 2))}) {
    const auto a = simulate_joint(model, 6, 257, 99, 1);
    const auto b = simulate_joint(model, 6, 257, 99, 4);
    const auto c = simulate_joint(model, 6, 257, 99, 3);
    CHECK(a.values == b.values);
    CHECK(a.values == c.values);
    const auto d = simulate_joint(model, 6, 257, 100, 1);
    CHECK(a.values != d.values);
  }
  gen::Rng rng(3);
  const auto tab = rng.tabular(rng.space(4));
  CHECK(simulate_joint(tab, 5, 300, 7, 1).state_index == simulate_joint(tab, 5, 300, 7, 2).state_index);
}

TEST_CASE("absorbing tabular chain repeats its start") {
  auto sp = gen::line_space({0.0, 1.0, 2.0});
  Vector init = Vector::Zero(3);
  init(2) = 1.0;
  const auto m = MarkovModel::tabular(sp, {}, init, Matrix::Identity(3, 3));
  const auto p = simulate_joint(m, 5, 100, 1);
  for (std::size_t i = 0; i < p.paths; ++i)
    for (std::size_t k = 0; k < 5; ++k) CHECK(p.state_index[i * 5 + k] == 2u);
}

TEST_CASE("independent Gaussian columns are uncorrelated") {
  const std::size_t N = 100000;
  const auto p = simulate_joint(MarkovModel::gaussian_kernel(0.0, 1.5), 4, N, 5);
  for (std::size_t k = 1; k + 1 < 4; ++k) {
    const double ma = column_mean(p, k), mb = column_mean(p, k + 1);
    double cov = 0;
    for (std::size_t i = 0; i < N; ++i) cov += (p.at(i, k) - ma) * (p.at(i, k + 1) - mb);
    cov /= static_cast<double>(N);
    const double corr = cov / std::sqrt(column_var(p, k) * column_var(p, k + 1));
    CHECK(std::abs(corr) < 3.0 / std::sqrt(static_cast<double>(N)));
  }
}

TEST_CASE("Gaussian chain variance recursion") {
  const std::size_t N = 100000;
  // Start from delta_0: the first step is N(0, 1), the second N(0, 1 + 1/4).
  const auto p = simulate_joint(MarkovModel::gaussian_kernel(0.5, 1.0, 0.0), 2, N, 8);
  const double m = column_mean(p, 1), v = column_var(p, 1);
  CHECK(std::abs(m) < 3 * std::sqrt(1.25 / N));
  CHECK(std::abs(v - 1.25) < 3 * 1.25 * std::sqrt(2.0 / (N - 1)));
  const auto law = gaussian_chain_law(MarkovModel::gaussian_kernel(0.5, 1.0, 0.0), 2);
  CHECK(law.cov()(1, 1) == doctest::Approx(1.25).epsilon(1e-15));
  CHECK(law.cov()(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("tabular joint law matches simulated frequencies") {
  gen::Rng rng(4);
  const auto m = rng.tabular(rng.space(2));
  const auto law = tabular_joint_law(m, 3);
  const std::size_t N = 200000;
  const auto p = simulate_joint(m, 3, N, 2);
  std::vector<double> freq(8, 0.0);
  for (std::size_t i = 0; i < N; ++i)
    freq[p.state_index[i * 3] * 4 + p.state_index[i * 3 + 1] * 2 + p.state_index[i * 3 + 2]] += 1.0 / N;
  for (std::size_t w = 0; w < 8; ++w)
    CHECK(std::abs(freq[w] - law.probs[w]) < 4 * std::sqrt(law.probs[w] * (1 - law.probs[w]) / N) + 1e-12);
}

TEST_CASE("kernel Lipschitz estimate") {
  for (double theta : {0.0, 0.3, 1.0, 1.7})
    for (double s : {1.0, 1.4, 2.0})
      CHECK(kernel_lipschitz_estimate(MarkovModel::gaussian_kernel(theta, 0.8), {{0.0, 1.0}, {-2.0, 3.5}}, s) ==
            doctest::Approx(theta).epsilon(1e-12));
  CHECK(kernel_lipschitz_estimate(MarkovModel::ou(std::log(2.0), 1.0, 0.0), {{0.0, 1.0}}, 1.0) ==
        doctest::Approx(0.5).epsilon(1e-12));
  auto sp = gen::line_space({0.0, 1.0, 3.0});
  Matrix same(3, 3);
  same << 0.2, 0.3, 0.5, 0.2, 0.3, 0.5, 0.2, 0.3, 0.5;
  const auto flat = MarkovModel::tabular(sp, {}, Vector::Constant(3, 1.0 / 3), same);
  CHECK(kernel_lipschitz_estimate(flat, {}, 1.0) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("Gauss-Hermite rule integrates polynomials") {
  const auto [x, w] = gauss_hermite(20);
  double m0 = 0, m2 = 0, m4 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    m0 += w[i];
    m2 += w[i] * x[i] * x[i];
    m4 += w[i] * std::pow(x[i], 4);
  }
  const double sp = std::sqrt(std::acos(-1.0));
  CHECK(m0 == doctest::Approx(sp).epsilon(1e-13));
  CHECK(m2 == doctest::Approx(sp / 2).epsilon(1e-13));
  CHECK(m4 == doctest::Approx(3 * sp / 4).epsilon(1e-13));
}

TEST_CASE("quadrature MGF reports divergence instead of a wrong value") {
  const auto m = MarkovModel::gaussian_kernel(1.5, 0.5);
  const auto g = gaussian_kernel_gradient(m);
  CHECK_THROWS_AS(lambda_mgf_estimate(g.as_function(), m, {Vector::Constant(1, 3.0)}, {Vector::Constant(1, -1.0)}),
                  InputError);
}

TEST_CASE("regularity estimators on Gaussian kernels") {
  for (double theta : {0.0, 0.4, 1.0, 1.5}) {
    for (double sigma2 : {0.5, 1.0, 2.0}) {
      const auto m = MarkovModel::gaussian_kernel(theta, sigma2);
      const auto g = gaussian_kernel_gradient(m);
      std::vector<Vector> probes{Vector::Constant(1, -1.0), Vector::Constant(1, 0.0), Vector::Constant(1, 2.5)};
      const double exact = theta * theta / sigma2;
      const auto ms = ms_estimate(g.as_function(), m, 2.0, probes);
      CHECK(ms.value == doctest::Approx(exact).epsilon(1e-10).scale(1));
      std::vector<Vector> sgrid;
      for (double s : {-2.0, -0.5, 0.3, 1.0, 3.0}) sgrid.push_back(Vector::Constant(1, s));
      const auto closed = lambda_mgf_estimate(g, m, sgrid, probes);
      // Quadrature stays on s |grad| of a few standard deviations, where Gauss-Hermite converges.
      std::vector<Vector> qgrid;
      for (double s : {-1.0, -0.5, 0.3, 1.0}) qgrid.push_back(Vector::Constant(1, s));
      const auto quad = lambda_mgf_estimate(g.as_function(), m, qgrid, probes);
      CHECK(closed.kappa_hat == doctest::Approx(exact).epsilon(1e-12).scale(1));
      CHECK(quad.kappa_hat == doctest::Approx(exact).epsilon(1e-9).scale(1));
      // sqrt(M_2 sigma^2) = sqrt(kappa sigma^2) = theta
      const double lip = kernel_lipschitz_estimate(m, {{0.0, 1.0}}, 2.0);
      CHECK(std::abs(std::sqrt(ms.value * sigma2) - lip) < 1e-9);
      CHECK(std::abs(std::sqrt(closed.kappa_hat * sigma2) - lip) < 1e-9);
      // L = theta / sigma^2 and alpha = 1 / sigma^2 give L^2 / alpha = kappa
      const double L = theta / sigma2, alpha = 1 / sigma2;
      CHECK(L * L / alpha == doctest::Approx(closed.kappa_hat).epsilon(1e-12).scale(1));
    }
  }
}

TEST_CASE("estimators vanish for kernels that ignore the state") {
  const auto m = MarkovModel::gaussian_kernel(0.0, 1.0);
  KernelGradient zero = [](const Vector& x, const Vector&) { return Vector::Zero(x.size()).eval(); };
  std::vector<Vector> probes{Vector::Constant(1, 0.5)};
  CHECK(ms_estimate(zero, m, 1.5, probes).value == 0.0);
  CHECK(lambda_mgf_estimate(zero, m, {Vector::Constant(1, 1.0)}, probes).kappa_hat == 0.0);
}

TEST_CASE("ARMA joint covariance") {
  const Matrix one = arma_joint_covariance(Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, 1.0), 2);
  CHECK(one(0, 0) == doctest::Approx(1.0));
  CHECK(one(0, 1) == doctest::Approx(0.5));
  CHECK(one(1, 1) == doctest::Approx(1.25));
  const Matrix b = (Matrix(2, 2) << 1, 0.5, 0, 2).finished();
  const Matrix z = arma_joint_covariance(Matrix::Zero(2, 2), b, 3);
  CHECK(z.block(0, 0, 2, 2).isApprox(Matrix::Identity(2, 2)));
  CHECK(z.block(2, 2, 2, 2).isApprox(b * b.transpose()));
  CHECK(z.block(0, 2, 2, 2).norm() == 0.0);
  CHECK(arma_joint_covariance(b, b, 1).isApprox(Matrix::Identity(2, 2)));
  gen::Rng rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    const Eigen::Index d = 2 + rep % 2;
    Matrix A(d, d), B(d, d);
    for (Eigen::Index i = 0; i < A.size(); ++i) A(i) = rng.normal(), B(i) = rng.normal();
    A *= rng.uniform(0.1, 0.95) / A.eigenvalues().cwiseAbs().maxCoeff();
    const Matrix c = arma_joint_covariance(A, B, rng.between(1, 10));
    CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(c).eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("Gaussian chain entropy breakdown") {
  const auto p = MarkovModel::gaussian_kernel(0.5, 1.0);
  const auto q = p.with_initial(1.0, 1.0);
  const auto b = gaussian_chain_breakdown(q, p, 3);
  // Only the initial law differs.
  CHECK(b.initial_term == doctest::Approx(0.5).epsilon(1e-14));
  for (double t : b.conditional_terms) CHECK(t == doctest::Approx(0.0).scale(1));
  CHECK(b.total == doctest::Approx(relative_entropy_gaussian(gaussian_chain_law(q, 3), gaussian_chain_law(p, 3)))
                       .epsilon(1e-12));
}
