// processes.hpp - Markov, ARMA and Ornstein-Uhlenbeck models, sequential path
// simulation, and estimators for kernel regularity constants.
//
// Gaussian chains start from N(theta * x0, sigma2) (one kernel step from x0)
// unless an explicit initial law is given.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "concentra/entropy.hpp"
#include "concentra/joint_law.hpp"
#include "concentra/measure.hpp"

namespace concentra {

enum class ModelKind { tabular, ou, gaussian_kernel, arma, contraction_noise };

std::string to_string(ModelKind k);

struct TabularModel {
  SpacePtr space;
  std::vector<double> values;  // real value per state
  Vector initial;
  Matrix transition;  // row x is p(. | x)
};

struct OuModel {
  double rho = 0.0;
  double tau = 1.0;
  double x0 = 0.0;
};

// p(. | x) = N(theta x, sigma2).
struct GaussianKernelModel {
  double theta = 0.0;
  double sigma2 = 1.0;
  double init_mean = 0.0;
  double init_var = 1.0;
};

// Z_0 ~ N(0, I), Z_{j+1} = A Z_j + B Y_{j+1}.
struct ArmaModel {
  Matrix A;
  Matrix B;
};

// Z_{j+1} = map(Z_j) + Y_{j+1}, Y ~ N(0, noise_cov), Z_1 ~ N(init_mean, noise_cov).
struct ContractionNoiseModel {
  std::function<Vector(const Vector&)> map;
  double lipschitz = 0.0;  // declared bound on the map
  Matrix noise_cov;
  Vector init_mean;
  std::optional<Matrix> linear;  // set when map is x -> linear * x
};

class MarkovModel {
 public:
  static MarkovModel tabular(SpacePtr space, std::vector<double> values, Vector initial, Matrix transition);
  // Real states on the line.
  static MarkovModel tabular_on_line(std::vector<double> states, Vector initial, Matrix transition);
  static MarkovModel ou(double rho, double tau, double x0);
  static MarkovModel gaussian_kernel(double theta, double sigma2, double x0 = 0.0);
  static MarkovModel gaussian_kernel_with_init(double theta, double sigma2, double init_mean, double init_var);
  static MarkovModel arma(Matrix A, Matrix B);
  static MarkovModel contraction_noise(std::function<Vector(const Vector&)> map, double lipschitz,
                                       Matrix noise_cov, Vector init_mean);
  static MarkovModel linear_contraction_noise(Matrix A, double lipschitz, Matrix noise_cov, Vector init_mean);

  ModelKind kind() const { return kind_; }
  std::size_t dim() const;
  bool is_tabular() const { return kind_ == ModelKind::tabular; }
  // ou and gaussian_kernel models are scalar Gaussian chains.
  bool is_scalar_gaussian() const { return kind_ == ModelKind::ou || kind_ == ModelKind::gaussian_kernel; }

  const TabularModel& as_tabular() const;
  const ArmaModel& as_arma() const;
  const ContractionNoiseModel& as_contraction() const;
  const OuModel& as_ou() const;
  // Scalar Gaussian view; ou models are converted with theta = e^(-rho tau).
  GaussianKernelModel as_gaussian_kernel() const;

  // Same model with the scalar Gaussian initial law replaced.
  MarkovModel with_initial(double mean, double var) const;
  // Same tabular model with a new initial vector.
  MarkovModel with_initial(Vector initial) const;

 private:
  ModelKind kind_ = ModelKind::gaussian_kernel;
  std::variant<TabularModel, OuModel, GaussianKernelModel, ArmaModel, ContractionNoiseModel> data_;
};

// N(theta x, sigma2) with theta = e^(-rho tau), sigma2 = (1 - theta^2)/(2 rho), tau at rho = 0.
GaussianMeasure ou_transition(double x, double rho, double tau);

// Kernel law p(. | x) of a scalar Gaussian chain.
GaussianMeasure kernel_law(const MarkovModel& model, double x);

// Joint law of the first n steps of a tabular chain.
JointLaw tabular_joint_law(const MarkovModel& model, std::size_t n);

// Mean and covariance of (X_1, ..., X_n) for a scalar Gaussian chain.
GaussianMeasure gaussian_chain_law(const MarkovModel& model, std::size_t n);

// Covariance of (Z_0, ..., Z_{n-1}) stacked, Z_0 ~ N(0, I).
Matrix arma_joint_covariance(const Matrix& A, const Matrix& B, std::size_t n);

struct SamplePaths {
  std::size_t paths = 0;
  std::size_t steps = 0;
  std::size_t dim = 1;
  std::uint64_t seed = 0;
  std::vector<double> values;             // paths x steps x dim, row-major
  std::vector<std::uint32_t> state_index;  // tabular models only

  double at(std::size_t path, std::size_t step, std::size_t comp = 0) const {
    return values[(path * steps + step) * dim + comp];
  }
};

// Paths are independent and seeded per path, so output does not depend on workers.
SamplePaths simulate_joint(const MarkovModel& model, std::size_t n, std::size_t paths, std::uint64_t seed,
                           unsigned workers = 1);

// max over pairs of W_s(p(. | x), p(. | y)) / d(x, y). Tabular pairs are
// given by state values; an empty list probes every pair of states.
double kernel_lipschitz_estimate(const MarkovModel& model, const std::vector<std::pair<double, double>>& probes,
                                 double s);

// Gradient of u(x, y) = -log p(y | x) in x, evaluated at (x, y).
using KernelGradient = std::function<Vector(const Vector& x, const Vector& y)>;

// d u / d x = gx * x + gy * y + g0.
struct AffineGradient {
  Matrix gx;
  Matrix gy;
  Vector g0;
  KernelGradient as_function() const;
};

// The exact gradient of u for a scalar Gaussian chain: -theta (y - theta x) / sigma2.
AffineGradient gaussian_kernel_gradient(const MarkovModel& model);

struct QuadratureSpec {
  std::size_t nodes = 64;  // Gauss-Hermite order, checked against twice this
  double divergence_tol = 1e-8;
};

struct MsEstimate {
  double value = 0.0;
  std::vector<double> probe;  // maximizing history state
};

// sup over probed states x of int ||grad_x u(x, y)||_{s'}^2 p(dy | x), with
// 1/s + 1/s' = 1 (max norm at s = 1).
MsEstimate ms_estimate(const KernelGradient& gradient, const MarkovModel& model, double s,
                       const std::vector<Vector>& probes, const QuadratureSpec& quad = {});

struct LambdaEstimate {
  double kappa_hat = 0.0;
  Vector worst_s;
  Vector worst_x;
};

// max over s in the grid and probed x of 2 log Lambda(s | x) / ||s||^2,
// Lambda(s | x) = int exp(<s, grad_x u(x, y)>) p(dy | x).
LambdaEstimate lambda_mgf_estimate(const KernelGradient& gradient, const MarkovModel& model,
                                   const std::vector<Vector>& s_grid, const std::vector<Vector>& probes,
                                   const QuadratureSpec& quad = {});
// Closed form for affine gradients under Gaussian kernels (any dimension).
LambdaEstimate lambda_mgf_estimate(const AffineGradient& gradient, const MarkovModel& model,
                                   const std::vector<Vector>& s_grid, const std::vector<Vector>& probes);

// Gauss-Hermite nodes and weights for the weight e^(-x^2) (Golub-Welsch).
std::pair<std::vector<double>, std::vector<double>> gauss_hermite(std::size_t order);

// Ent(Q^(n) | P^(n)) split by step for two scalar Gaussian chains.
EntropyBreakdown gaussian_chain_breakdown(const MarkovModel& q, const MarkovModel& p, std::size_t n);

}  // namespace concentra
