#include "concentra/processes.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include "concentra/constants.hpp"
#include "concentra/error.hpp"
#include "concentra/numeric.hpp"
#include "concentra/transport.hpp"

namespace concentra {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw InputError(what);
}

// Probability vector check: nonnegative, sum 1 within 1e-12; returns it renormalized.
Vector checked_probabilities(const Vector& v, const std::string& what) {
  require(v.size() > 0, what + " is empty");
  require(v.allFinite() && v.minCoeff() >= 0.0, what + " has negative or non-finite entries");
  const double sum = v.sum();
  require(std::abs(sum - 1.0) <= 1e-12, what + " does not sum to 1 (got " + std::to_string(sum) + ")");
  return v / sum;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 path_engine(std::uint64_t seed, std::size_t path) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(splitmix64(path) >> 32)};
  return std::mt19937_64(seq);
}

std::size_t sample_index(const double* probs, std::size_t k, double u) {
  double acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  // Round-off fallback: the last state carrying mass.
  for (std::size_t i = k; i-- > 0;)
    if (probs[i] > 0.0) return i;
  return k - 1;
}

Matrix factor_of(const Matrix& cov) { return psd_sqrt(cov); }

// Dual-norm ||v||_{s'}, 1/s + 1/s' = 1.
double dual_norm(const Vector& v, double s) {
  if (s == 1.0) return v.cwiseAbs().maxCoeff();
  const double sp = s / (s - 1.0);
  const double peak = v.cwiseAbs().maxCoeff();
  if (peak == 0.0) return 0.0;
  KahanSum acc;
  for (Eigen::Index i = 0; i < v.size(); ++i) acc.add(std::pow(std::abs(v(i)) / peak, sp));
  return peak * std::pow(acc.value(), 1.0 / sp);
}

// Kernel p(. | x) as a Gaussian (mean, cov) for the Gaussian model kinds.
std::pair<Vector, Matrix> gaussian_kernel_at(const MarkovModel& model, const Vector& x) {
  switch (model.kind()) {
    case ModelKind::ou:
    case ModelKind::gaussian_kernel: {
      const auto g = model.as_gaussian_kernel();
      return {Vector::Constant(1, g.theta * x(0)), Matrix::Constant(1, 1, g.sigma2)};
    }
    case ModelKind::arma: {
      const auto& a = model.as_arma();
      return {a.A * x, a.B * a.B.transpose()};
    }
    case ModelKind::contraction_noise: {
      const auto& c = model.as_contraction();
      return {c.map(x), c.noise_cov};
    }
    case ModelKind::tabular: break;
  }
  throw InputError("model has no Gaussian kernel");
}

std::vector<Vector> default_probes(const MarkovModel& model) {
  std::vector<Vector> probes;
  if (model.is_tabular()) {
    for (double v : model.as_tabular().values) probes.push_back(Vector::Constant(1, v));
    return probes;
  }
  const auto m = static_cast<Eigen::Index>(model.dim());
  probes.push_back(Vector::Zero(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    for (double c : {-2.0, -1.0, 1.0, 2.0}) {
      Vector e = Vector::Zero(m);
      e(i) = c;
      probes.push_back(e);
    }
  }
  return probes;
}

std::size_t tabular_state_of(const TabularModel& t, double value) {
  for (std::size_t i = 0; i < t.values.size(); ++i)
    if (t.values[i] == value) return i;
  throw InputError("probe " + std::to_string(value) + " is not a state of the tabular model");
}

// Quadrature of g(y) against p(dy | x): nodes y and weights w summing to 1.
struct Rule {
  std::vector<Vector> y;
  std::vector<double> w;
};

Rule kernel_rule(const MarkovModel& model, const Vector& x, std::size_t order) {
  Rule rule;
  if (model.is_tabular()) {
    const auto& t = model.as_tabular();
    const std::size_t i = tabular_state_of(t, x(0));
    for (std::size_t j = 0; j < t.values.size(); ++j) {
      const double w = t.transition(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (w <= 0.0) continue;
      rule.y.push_back(Vector::Constant(1, t.values[j]));
      rule.w.push_back(w);
    }
    return rule;
  }
  const auto [mean, cov] = gaussian_kernel_at(model, x);
  const auto m = static_cast<std::size_t>(mean.size());
  if (m > 2) throw InputError("quadrature for non-affine gradients is limited to dimension <= 2");
  const auto [nodes, weights] = gauss_hermite(order);
  const Matrix root = factor_of(cov) * std::sqrt(2.0);
  const double norm = std::pow(std::numbers::pi, -0.5 * static_cast<double>(m));
  const std::size_t total = m == 1 ? order : order * order;
  for (std::size_t c = 0; c < total; ++c) {
    Vector xi(static_cast<Eigen::Index>(m));
    double w = norm;
    std::size_t rem = c;
    for (std::size_t d = 0; d < m; ++d) {
      const std::size_t k = rem % order;
      rem /= order;
      xi(static_cast<Eigen::Index>(d)) = nodes[k];
      w *= weights[k];
    }
    if (w == 0.0) continue;
    rule.y.push_back(mean + root * xi);
    rule.w.push_back(w);
  }
  return rule;
}

}  // namespace

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::tabular: return "tabular";
    case ModelKind::ou: return "ou";
    case ModelKind::gaussian_kernel: return "gaussian_kernel";
    case ModelKind::arma: return "arma";
    case ModelKind::contraction_noise: return "contraction_noise";
  }
  return "unknown";
}

MarkovModel MarkovModel::tabular(SpacePtr space, std::vector<double> values, Vector initial, Matrix transition) {
  require(static_cast<bool>(space), "tabular model needs a state space");
  const auto k = static_cast<Eigen::Index>(space->size());
  if (values.empty())
    for (Eigen::Index i = 0; i < k; ++i) values.push_back(static_cast<double>(i));
  require(static_cast<Eigen::Index>(values.size()) == k, "tabular model needs one value per state");
  require(initial.size() == k, "initial vector length does not match the state space");
  require(transition.rows() == k && transition.cols() == k, "transition matrix must be |X| x |X|");
  TabularModel t;
  t.space = std::move(space);
  t.values = std::move(values);
  t.initial = checked_probabilities(initial, "initial vector");
  t.transition = transition;
  for (Eigen::Index i = 0; i < k; ++i)
    t.transition.row(i) = checked_probabilities(transition.row(i).transpose(),
                                                "transition row " + std::to_string(i)).transpose();
  MarkovModel m;
  m.kind_ = ModelKind::tabular;
  m.data_ = std::move(t);
  return m;
}

MarkovModel MarkovModel::tabular_on_line(std::vector<double> states, Vector initial, Matrix transition) {
  auto space = std::make_shared<const FiniteMetricSpace>(FiniteMetricSpace::from_line(states));
  return tabular(std::move(space), std::move(states), std::move(initial), std::move(transition));
}

MarkovModel MarkovModel::ou(double rho, double tau, double x0) {
  require(tau > 0.0 && std::isfinite(tau), "ou model needs tau > 0");
  require(std::isfinite(rho) && std::isfinite(x0), "ou parameters must be finite");
  ou_kappa(rho, tau, 1, x0);  // validates rho * tau
  MarkovModel m;
  m.kind_ = ModelKind::ou;
  m.data_ = OuModel{rho, tau, x0};
  return m;
}

MarkovModel MarkovModel::gaussian_kernel(double theta, double sigma2, double x0) {
  return gaussian_kernel_with_init(theta, sigma2, theta * x0, sigma2);
}

MarkovModel MarkovModel::gaussian_kernel_with_init(double theta, double sigma2, double init_mean, double init_var) {
  require(std::isfinite(theta), "theta must be finite");
  require(sigma2 > 0.0 && std::isfinite(sigma2), "sigma2 must be positive");
  require(init_var > 0.0 && std::isfinite(init_var) && std::isfinite(init_mean), "initial law must be a nondegenerate Gaussian");
  MarkovModel m;
  m.kind_ = ModelKind::gaussian_kernel;
  m.data_ = GaussianKernelModel{theta, sigma2, init_mean, init_var};
  return m;
}

MarkovModel MarkovModel::arma(Matrix A, Matrix B) {
  require(A.rows() == A.cols() && A.rows() > 0, "A must be a nonempty square matrix");
  require(B.rows() == A.rows() && B.cols() == A.cols(), "B must match the dimension of A");
  require(A.allFinite() && B.allFinite(), "A and B must be finite");
  MarkovModel m;
  m.kind_ = ModelKind::arma;
  m.data_ = ArmaModel{std::move(A), std::move(B)};
  return m;
}

MarkovModel MarkovModel::contraction_noise(std::function<Vector(const Vector&)> map, double lipschitz,
                                           Matrix noise_cov, Vector init_mean) {
  require(static_cast<bool>(map), "contraction model needs a map");
  require(lipschitz >= 0.0 && std::isfinite(lipschitz), "declared Lipschitz bound must be nonnegative");
  require(noise_cov.rows() == noise_cov.cols() && noise_cov.rows() == init_mean.size() && init_mean.size() > 0,
          "noise covariance and initial mean dimensions differ");
  GaussianMeasure(init_mean, noise_cov);  // validates symmetry and PSD
  MarkovModel m;
  m.kind_ = ModelKind::contraction_noise;
  m.data_ = ContractionNoiseModel{std::move(map), lipschitz, std::move(noise_cov), std::move(init_mean), std::nullopt};
  return m;
}

MarkovModel MarkovModel::linear_contraction_noise(Matrix A, double lipschitz, Matrix noise_cov, Vector init_mean) {
  require(A.rows() == A.cols() && A.rows() == init_mean.size(), "map matrix dimension mismatch");
  const double op_norm = A.jacobiSvd().singularValues()(0);
  require(op_norm <= lipschitz * (1.0 + 1e-12) + 1e-300,
          "declared Lipschitz bound is below the operator norm of the map");
  Matrix copy = A;
  MarkovModel m = contraction_noise([copy](const Vector& x) -> Vector { return copy * x; }, lipschitz,
                                    std::move(noise_cov), std::move(init_mean));
  std::get<ContractionNoiseModel>(m.data_).linear = std::move(A);
  return m;
}

std::size_t MarkovModel::dim() const {
  switch (kind_) {
    case ModelKind::arma: return static_cast<std::size_t>(as_arma().A.rows());
    case ModelKind::contraction_noise: return static_cast<std::size_t>(as_contraction().init_mean.size());
    default: return 1;
  }
}

const TabularModel& MarkovModel::as_tabular() const {
  if (kind_ != ModelKind::tabular) throw InputError("model is not tabular");
  return std::get<TabularModel>(data_);
}

const ArmaModel& MarkovModel::as_arma() const {
  if (kind_ != ModelKind::arma) throw InputError("model is not arma");
  return std::get<ArmaModel>(data_);
}

const ContractionNoiseModel& MarkovModel::as_contraction() const {
  if (kind_ != ModelKind::contraction_noise) throw InputError("model is not contraction_noise");
  return std::get<ContractionNoiseModel>(data_);
}

const OuModel& MarkovModel::as_ou() const {
  if (kind_ != ModelKind::ou) throw InputError("model is not ou");
  return std::get<OuModel>(data_);
}

GaussianKernelModel MarkovModel::as_gaussian_kernel() const {
  if (kind_ == ModelKind::gaussian_kernel) return std::get<GaussianKernelModel>(data_);
  if (kind_ == ModelKind::ou) {
    const auto& o = std::get<OuModel>(data_);
    const OuConstants c = ou_kappa(o.rho, o.tau, 1, o.x0);
    return GaussianKernelModel{c.theta, c.sigma2, c.theta * o.x0, c.sigma2};
  }
  throw InputError("model is not a scalar Gaussian chain");
}

MarkovModel MarkovModel::with_initial(double mean, double var) const {
  const auto g = as_gaussian_kernel();
  return gaussian_kernel_with_init(g.theta, g.sigma2, mean, var);
}

MarkovModel MarkovModel::with_initial(Vector initial) const {
  const auto& t = as_tabular();
  return tabular(t.space, t.values, std::move(initial), t.transition);
}

GaussianMeasure ou_transition(double x, double rho, double tau) {
  const OuConstants c = ou_kappa(rho, tau, 1, x);
  return GaussianMeasure::scalar(c.theta * x, c.sigma2);
}

GaussianMeasure kernel_law(const MarkovModel& model, double x) {
  const auto g = model.as_gaussian_kernel();
  return GaussianMeasure::scalar(g.theta * x, g.sigma2);
}

JointLaw tabular_joint_law(const MarkovModel& model, std::size_t n) {
  const auto& t = model.as_tabular();
  require(n >= 1, "n must be at least 1");
  const std::size_t k = t.values.size();
  std::size_t words = 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (words > kMaxSupport / k) throw InputError("joint law exceeds the dense size cap");
    words *= k;
  }
  std::vector<double> probs(t.initial.data(), t.initial.data() + k);
  for (std::size_t step = 1; step < n; ++step) {
    std::vector<double> next(probs.size() * k);
    for (std::size_t h = 0; h < probs.size(); ++h) {
      const std::size_t last = h % k;
      for (std::size_t x = 0; x < k; ++x)
        next[h * k + x] = probs[h] * t.transition(static_cast<Eigen::Index>(last), static_cast<Eigen::Index>(x));
    }
    probs = std::move(next);
  }
  return make_joint_law(t.space, n, std::move(probs), t.values);
}

GaussianMeasure gaussian_chain_law(const MarkovModel& model, std::size_t n) {
  require(n >= 1, "n must be at least 1");
  const auto g = model.as_gaussian_kernel();
  const auto nn = static_cast<Eigen::Index>(n);
  Vector mean(nn);
  Vector var(nn);
  mean(0) = g.init_mean;
  var(0) = g.init_var;
  for (Eigen::Index k = 1; k < nn; ++k) {
    mean(k) = g.theta * mean(k - 1);
    var(k) = g.theta * g.theta * var(k - 1) + g.sigma2;
  }
  Matrix cov(nn, nn);
  for (Eigen::Index i = 0; i < nn; ++i) {
    cov(i, i) = var(i);
    double f = 1.0;
    for (Eigen::Index j = i + 1; j < nn; ++j) {
      f *= g.theta;
      cov(i, j) = cov(j, i) = f * var(i);
    }
  }
  return GaussianMeasure(mean, cov);
}

Matrix arma_joint_covariance(const Matrix& A, const Matrix& B, std::size_t n) {
  require(A.rows() == A.cols() && B.rows() == A.rows(), "A and B dimensions differ");
  require(n >= 1, "n must be at least 1");
  const Eigen::Index m = A.rows();
  const auto nn = static_cast<Eigen::Index>(n);
  std::vector<Matrix> sigma(n);
  sigma[0] = Matrix::Identity(m, m);
  const Matrix bbt = B * B.transpose();
  for (std::size_t j = 1; j < n; ++j) sigma[j] = A * sigma[j - 1] * A.transpose() + bbt;
  Matrix cov = Matrix::Zero(nn * m, nn * m);
  for (Eigen::Index j = 0; j < nn; ++j) {
    Matrix block = sigma[static_cast<std::size_t>(j)];
    for (Eigen::Index i = j; i < nn; ++i) {
      cov.block(i * m, j * m, m, m) = block;
      cov.block(j * m, i * m, m, m) = block.transpose();
      block = A * block;
    }
  }
  return 0.5 * (cov + cov.transpose());
}

SamplePaths simulate_joint(const MarkovModel& model, std::size_t n, std::size_t paths, std::uint64_t seed,
                           unsigned workers) {
  require(n >= 1 && paths >= 1, "simulate_joint needs n >= 1 and at least one path");
  SamplePaths out;
  out.paths = paths;
  out.steps = n;
  out.dim = model.dim();
  out.seed = seed;
  out.values.assign(paths * n * out.dim, 0.0);
  if (model.is_tabular()) out.state_index.assign(paths * n, 0);

  const std::size_t m = out.dim;
  auto run = [&](std::size_t begin, std::size_t end) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (std::size_t p = begin; p < end; ++p) {
      auto engine = path_engine(seed, p);
      double* row = out.values.data() + p * n * m;
      switch (model.kind()) {
        case ModelKind::tabular: {
          const auto& t = model.as_tabular();
          const std::size_t k = t.values.size();
          const Matrix tr = t.transition.transpose();  // column x holds p(. | x) contiguously
          std::size_t state = sample_index(t.initial.data(), k, uniform(engine));
          for (std::size_t step = 0; step < n; ++step) {
            if (step > 0) state = sample_index(tr.col(static_cast<Eigen::Index>(state)).data(), k, uniform(engine));
            row[step] = t.values[state];
            out.state_index[p * n + step] = static_cast<std::uint32_t>(state);
          }
          break;
        }
        case ModelKind::ou:
        case ModelKind::gaussian_kernel: {
          const auto g = model.as_gaussian_kernel();
          const double sd = std::sqrt(g.sigma2);
          double x = g.init_mean + std::sqrt(g.init_var) * normal(engine);
          row[0] = x;
          for (std::size_t step = 1; step < n; ++step) {
            x = g.theta * x + sd * normal(engine);
            row[step] = x;
          }
          break;
        }
        case ModelKind::arma: {
          const auto& a = model.as_arma();
          Vector z(static_cast<Eigen::Index>(m)), y(static_cast<Eigen::Index>(m));
          for (std::size_t c = 0; c < m; ++c) z(static_cast<Eigen::Index>(c)) = normal(engine);
          for (std::size_t step = 0; step < n; ++step) {
            if (step > 0) {
              for (std::size_t c = 0; c < m; ++c) y(static_cast<Eigen::Index>(c)) = normal(engine);
              z = a.A * z + a.B * y;
            }
            std::copy(z.data(), z.data() + m, row + step * m);
          }
          break;
        }
        case ModelKind::contraction_noise: {
          const auto& c = model.as_contraction();
          const Matrix root = factor_of(c.noise_cov);
          Vector y(static_cast<Eigen::Index>(m));
          auto draw = [&] {
            for (std::size_t i = 0; i < m; ++i) y(static_cast<Eigen::Index>(i)) = normal(engine);
            return Vector(root * y);
          };
          Vector z = c.init_mean + draw();
          for (std::size_t step = 0; step < n; ++step) {
            if (step > 0) z = c.map(z) + draw();
            std::copy(z.data(), z.data() + m, row + step * m);
          }
          break;
        }
      }
    }
  };

  const std::size_t w = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(1, paths));
  if (w == 1) {
    run(0, paths);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (paths + w - 1) / w;
    for (std::size_t i = 0; i < w; ++i) {
      const std::size_t b = i * chunk, e = std::min(paths, b + chunk);
      if (b < e) pool.emplace_back(run, b, e);
    }
    for (auto& t : pool) t.join();
  }
  return out;
}

double kernel_lipschitz_estimate(const MarkovModel& model, const std::vector<std::pair<double, double>>& probes,
                                 double s) {
  require(s >= 1.0 && s <= 2.0, "s must lie in [1, 2]");
  double best = 0.0;
  bool any = false;
  if (model.is_scalar_gaussian()) {
    std::vector<std::pair<double, double>> pairs = probes;
    if (pairs.empty()) pairs = {{0.0, 1.0}, {-1.0, 2.0}, {0.5, -3.0}};
    for (auto [x, y] : pairs) {
      if (x == y) continue;
      any = true;
      // Equal-variance Gaussians: translation is optimal for every s >= 1, so
      // W_s equals W_2 from the closed form.
      const double w = wasserstein_gaussian_w2(kernel_law(model, x), kernel_law(model, y));
      best = std::max(best, w / std::abs(x - y));
    }
  } else if (model.is_tabular()) {
    const auto& t = model.as_tabular();
    const std::size_t k = t.values.size();
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    if (probes.empty()) {
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j) pairs.push_back({i, j});
    } else {
      for (auto [x, y] : probes) pairs.push_back({tabular_state_of(t, x), tabular_state_of(t, y)});
    }
    std::vector<std::size_t> support(k);
    for (std::size_t i = 0; i < k; ++i) support[i] = i;
    for (auto [i, j] : pairs) {
      const double d = (*t.space)(i, j);
      if (i == j || d == 0.0) continue;
      any = true;
      auto row = [&](std::size_t r) {
        std::vector<double> w(k);
        for (std::size_t c = 0; c < k; ++c) w[c] = t.transition(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        return DiscreteMeasure::on_space(t.space, support, std::move(w));
      };
      best = std::max(best, wasserstein_exact(row(i), row(j), s).value / d);
    }
  } else {
    throw InputError("kernel_lipschitz_estimate needs a one-dimensional or tabular kernel");
  }
  if (!any) throw InputError("every probe pair is coincident");
  return best;
}

KernelGradient AffineGradient::as_function() const {
  AffineGradient g = *this;
  return [g](const Vector& x, const Vector& y) -> Vector { return g.gx * x + g.gy * y + g.g0; };
}

AffineGradient gaussian_kernel_gradient(const MarkovModel& model) {
  const auto g = model.as_gaussian_kernel();
  AffineGradient out;
  out.gx = Matrix::Constant(1, 1, g.theta * g.theta / g.sigma2);
  out.gy = Matrix::Constant(1, 1, -g.theta / g.sigma2);
  out.g0 = Vector::Zero(1);
  return out;
}

std::pair<std::vector<double>, std::vector<double>> gauss_hermite(std::size_t order) {
  require(order >= 1 && order <= 512, "Gauss-Hermite order must lie in [1, 512]");
  const auto n = static_cast<Eigen::Index>(order);
  Matrix jacobi = Matrix::Zero(n, n);
  for (Eigen::Index k = 1; k < n; ++k) jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(0.5 * static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Matrix> eig(jacobi);
  std::vector<double> nodes(order), weights(order);
  const double sqrt_pi = std::sqrt(std::numbers::pi);
  for (Eigen::Index k = 0; k < n; ++k) {
    nodes[static_cast<std::size_t>(k)] = eig.eigenvalues()(k);
    const double v = eig.eigenvectors()(0, k);
    weights[static_cast<std::size_t>(k)] = sqrt_pi * v * v;
  }
  return {nodes, weights};
}

MsEstimate ms_estimate(const KernelGradient& gradient, const MarkovModel& model, double s,
                       const std::vector<Vector>& probes, const QuadratureSpec& quad) {
  require(s >= 1.0 && s <= 2.0, "s must lie in [1, 2]");
  require(static_cast<bool>(gradient), "gradient function is empty");
  const std::vector<Vector> xs = probes.empty() ? default_probes(model) : probes;
  MsEstimate out;
  out.value = -1.0;
  for (const Vector& x : xs) {
    require(static_cast<std::size_t>(x.size()) == model.dim(), "probe dimension does not match the model");
    auto integrate = [&](std::size_t order) {
      const Rule rule = kernel_rule(model, x, order);
      KahanSum acc;
      for (std::size_t i = 0; i < rule.y.size(); ++i) {
        const double norm = dual_norm(gradient(x, rule.y[i]), s);
        acc.add(rule.w[i] * norm * norm);
      }
      return acc.value();
    };
    double value = integrate(quad.nodes);
    if (!model.is_tabular()) {
      const double fine = integrate(2 * quad.nodes);
      if (!std::isfinite(fine) || std::abs(fine - value) > quad.divergence_tol * std::max(1.0, std::abs(fine)))
        throw InputError("M_s quadrature does not settle under node doubling (non-integrable growth?)");
      value = fine;
    }
    if (value > out.value) {
      out.value = value;
      out.probe.assign(x.data(), x.data() + x.size());
    }
  }
  return out;
}

LambdaEstimate lambda_mgf_estimate(const KernelGradient& gradient, const MarkovModel& model,
                                   const std::vector<Vector>& s_grid, const std::vector<Vector>& probes,
                                   const QuadratureSpec& quad) {
  require(static_cast<bool>(gradient), "gradient function is empty");
  require(!s_grid.empty(), "s grid is empty");
  const std::vector<Vector> xs = probes.empty() ? default_probes(model) : probes;
  LambdaEstimate out;
  out.kappa_hat = -std::numeric_limits<double>::infinity();
  for (const Vector& x : xs) {
    require(static_cast<std::size_t>(x.size()) == model.dim(), "probe dimension does not match the model");
    const Rule coarse = kernel_rule(model, x, quad.nodes);
    const Rule fine = model.is_tabular() ? coarse : kernel_rule(model, x, 2 * quad.nodes);
    std::vector<Vector> g_coarse, g_fine;
    for (const auto& y : coarse.y) g_coarse.push_back(gradient(x, y));
    for (const auto& y : fine.y) g_fine.push_back(gradient(x, y));
    // Divide by the rule's own mass so a state-free gradient gives exactly 0.
    const double mass_coarse = log_sum_exp(std::vector<double>(coarse.w.size(), 0.0), coarse.w);
    const double mass_fine = log_sum_exp(std::vector<double>(fine.w.size(), 0.0), fine.w);
    for (const Vector& s : s_grid) {
      const double norm2 = s.squaredNorm();
      if (norm2 == 0.0) continue;
      auto log_lambda = [&](const Rule& rule, const std::vector<Vector>& g) {
        std::vector<double> a(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) a[i] = s.dot(g[i]);
        return log_sum_exp(a, rule.w);
      };
      const double lc = log_lambda(coarse, g_coarse) - mass_coarse;
      const double lf = log_lambda(fine, g_fine) - mass_fine;
      if (!std::isfinite(lf) || std::abs(lf - lc) > quad.divergence_tol * std::max(1.0, std::abs(lf))) {
        std::ostringstream os;
        os << "MGF diverges at s = [" << s.transpose() << "], x = [" << x.transpose() << "]";
        throw InputError(os.str());
      }
      const double k = 2.0 * lf / norm2;
      if (k > out.kappa_hat) {
        out.kappa_hat = k;
        out.worst_s = s;
        out.worst_x = x;
      }
    }
  }
  if (!std::isfinite(out.kappa_hat)) throw InputError("s grid has no nonzero point");
  return out;
}

LambdaEstimate lambda_mgf_estimate(const AffineGradient& gradient, const MarkovModel& model,
                                   const std::vector<Vector>& s_grid, const std::vector<Vector>& probes) {
  require(!s_grid.empty(), "s grid is empty");
  if (model.is_tabular()) return lambda_mgf_estimate(gradient.as_function(), model, s_grid, probes);
  const std::vector<Vector> xs = probes.empty() ? default_probes(model) : probes;
  LambdaEstimate out;
  out.kappa_hat = -std::numeric_limits<double>::infinity();
  for (const Vector& x : xs) {
    const auto [mean, cov] = gaussian_kernel_at(model, x);
    // <s, g> is Gaussian: mean s^T(gx x + gy m + g0), variance s^T gy C gy^T s.
    const Vector g_mean = gradient.gx * x + gradient.gy * mean + gradient.g0;
    const Matrix g_cov = gradient.gy * cov * gradient.gy.transpose();
    for (const Vector& s : s_grid) {
      const double norm2 = s.squaredNorm();
      if (norm2 == 0.0) continue;
      const double log_lambda = s.dot(g_mean) + 0.5 * s.dot(g_cov * s);
      const double k = 2.0 * log_lambda / norm2;
      if (k > out.kappa_hat) {
        out.kappa_hat = k;
        out.worst_s = s;
        out.worst_x = x;
      }
    }
  }
  if (!std::isfinite(out.kappa_hat)) throw InputError("s grid has no nonzero point");
  return out;
}

EntropyBreakdown gaussian_chain_breakdown(const MarkovModel& q, const MarkovModel& p, std::size_t n) {
  require(n >= 1, "n must be at least 1");
  const auto gq = q.as_gaussian_kernel();
  const auto gp = p.as_gaussian_kernel();
  EntropyBreakdown out;
  out.initial_term = relative_entropy_gaussian(GaussianMeasure::scalar(gq.init_mean, gq.init_var),
                                               GaussianMeasure::scalar(gp.init_mean, gp.init_var));
  const double ratio = gq.sigma2 / gp.sigma2;
  const double var_part = 0.5 * (ratio - 1.0 - std::log(ratio));
  const double dtheta = gq.theta - gp.theta;
  double mean = gq.init_mean, var = gq.init_var;
  for (std::size_t k = 2; k <= n; ++k) {
    // E_Q KL(N(theta_q x, s_q) | N(theta_p x, s_p)) with x = X_{k-1} under Q.
    const double second_moment = mean * mean + var;
    out.conditional_terms.push_back(std::max(0.0, var_part + dtheta * dtheta * second_moment / (2.0 * gp.sigma2)));
    mean = gq.theta * mean;
    var = gq.theta * gq.theta * var + gq.sigma2;
  }
  KahanSum total;
  total.add(out.initial_term);
  for (double t : out.conditional_terms) total.add(t);
  out.total = total.value();
  return out;
}

}  // namespace concentra
