#include "concentra/measure.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "concentra/error.hpp"
#include "concentra/numeric.hpp"

namespace concentra {

namespace {

constexpr double kMetricTol = 1e-12;

void check_order(double s) {
  if (!(s >= 1.0) || !std::isfinite(s)) throw InputError("order s must lie in [1, inf)");
}

}  // namespace

// ---------------------------------------------------------------------------
// FiniteMetricSpace

FiniteMetricSpace::FiniteMetricSpace(std::vector<std::string> labels, Matrix dist)
    : labels_(std::move(labels)), dist_(std::move(dist)) {
  const std::size_t n = labels_.size();
  if (n == 0) throw InputError("metric space needs at least one point");
  if (n > kMaxSupport) throw InputError("metric space exceeds 4096 points");
  if (static_cast<std::size_t>(dist_.rows()) != n || static_cast<std::size_t>(dist_.cols()) != n)
    throw InputError("distance matrix shape does not match label count");
  {
    std::vector<std::string> sorted = labels_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw InputError("metric space labels must be distinct");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (dist_(i, i) != 0.0) throw InputError("distance matrix diagonal must be exactly zero");
    for (std::size_t j = 0; j < n; ++j) {
      const double d = dist_(i, j);
      if (!std::isfinite(d) || d < 0.0) throw InputError("distances must be finite and nonnegative");
      if (dist_(i, j) != dist_(j, i)) throw InputError("distance matrix must be symmetric");
    }
  }
  auto violates = [&](std::size_t i, std::size_t j, std::size_t k) {
    return dist_(i, j) > dist_(i, k) + dist_(k, j) + kMetricTol;
  };
  if (n <= 512) {
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
          if (violates(i, j, k)) {
            std::ostringstream msg;
            msg << "triangle inequality fails for (" << labels_[i] << ", " << labels_[j] << ") via "
                << labels_[k];
            throw InputError(msg.str());
          }
  } else {
    std::mt19937_64 rng(0x5eed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (int t = 0; t < 1'000'000; ++t) {
      const std::size_t i = pick(rng), j = pick(rng), k = pick(rng);
      if (violates(i, j, k)) throw InputError("triangle inequality fails on a sampled triple");
    }
  }
}

FiniteMetricSpace::FiniteMetricSpace(Trusted, std::vector<std::string> labels, Matrix dist)
    : labels_(std::move(labels)), dist_(std::move(dist)) {}

std::optional<std::size_t> FiniteMetricSpace::index_of(std::string_view label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i] == label) return i;
  return std::nullopt;
}

bool FiniteMetricSpace::operator==(const FiniteMetricSpace& other) const {
  return labels_ == other.labels_ && dist_ == other.dist_;
}

FiniteMetricSpace FiniteMetricSpace::from_line(std::span<const double> points) {
  const std::size_t n = points.size();
  std::vector<std::string> labels;
  labels.reserve(n);
  for (double x : points) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    labels.push_back(os.str());
  }
  Matrix d(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) d(i, j) = std::abs(points[i] - points[j]);
  return FiniteMetricSpace(std::move(labels), std::move(d));
}

// ---------------------------------------------------------------------------
// product metrics

double lp_combine(std::span<const double> distances, double s) {
  check_order(s);
  double peak = 0.0;
  for (double d : distances) peak = std::max(peak, d);
  if (peak == 0.0) return 0.0;
  if (s == 1.0) return compensated_sum(distances);
  KahanSum acc;
  for (double d : distances) acc.add(std::pow(d / peak, s));
  return peak * std::pow(acc.value(), 1.0 / s);
}

double RealSpace::distance(std::span<const double> a, std::span<const double> b) const {
  if (dim == 1) return std::abs(a[0] - b[0]);
  std::vector<double> diff(dim);
  for (std::size_t k = 0; k < dim; ++k) diff[k] = std::abs(a[k] - b[k]);
  return lp_combine(diff, p);
}

double product_distance(const FiniteMetricSpace& base, std::span<const std::size_t> x,
                        std::span<const std::size_t> y, double s) {
  if (x.size() != y.size()) throw InputError("product_distance: tuple lengths differ");
  std::vector<double> d(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (x[j] >= base.size() || y[j] >= base.size())
      throw InputError("product_distance: point index out of range");
    d[j] = base(x[j], y[j]);
  }
  return lp_combine(d, s);
}

double product_distance(std::span<const double> x, std::span<const double> y, double s) {
  if (x.size() != y.size()) throw InputError("product_distance: tuple lengths differ");
  std::vector<double> d(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) d[j] = std::abs(x[j] - y[j]);
  return lp_combine(d, s);
}

ProductSpace::ProductSpace(SpacePtr base, std::size_t factors, double order)
    : base_(std::move(base)), factors_(factors), order_(order) {
  if (factors_ == 0) throw InputError("product space needs at least one factor");
  check_order(order_);
}

double ProductSpace::distance(std::span<const std::size_t> x,
                              std::span<const std::size_t> y) const {
  if (!base_) throw InputError("index tuples need a finite base space");
  if (x.size() != factors_ || y.size() != factors_)
    throw InputError("tuple length does not match the number of factors");
  return product_distance(*base_, x, y, order_);
}

double ProductSpace::distance(std::span<const double> x, std::span<const double> y) const {
  if (base_) throw InputError("real tuples need the real-line base");
  if (x.size() != factors_ || y.size() != factors_)
    throw InputError("tuple length does not match the number of factors");
  return product_distance(x, y, order_);
}

std::vector<std::size_t> ProductSpace::tuple_of(std::size_t index) const {
  const std::size_t k = base_->size();
  std::vector<std::size_t> t(factors_);
  for (std::size_t j = factors_; j-- > 0;) {
    t[j] = index % k;
    index /= k;
  }
  return t;
}

std::size_t ProductSpace::index_of(std::span<const std::size_t> tuple) const {
  const std::size_t k = base_->size();
  std::size_t idx = 0;
  for (std::size_t v : tuple) idx = idx * k + v;
  return idx;
}

FiniteMetricSpace ProductSpace::materialize() const {
  if (!base_) throw InputError("cannot materialize a product of the real line");
  double count = std::pow(static_cast<double>(base_->size()), static_cast<double>(factors_));
  if (count > static_cast<double>(kMaxSupport))
    throw InputError("materialized product space exceeds 4096 points");
  const auto n = static_cast<std::size_t>(count);
  std::vector<std::vector<std::size_t>> tuples(n);
  std::vector<std::string> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    tuples[i] = tuple_of(i);
    std::string label;
    for (std::size_t j = 0; j < factors_; ++j) {
      if (j) label += '|';
      label += base_->labels()[tuples[i][j]];
    }
    labels[i] = std::move(label);
  }
  Matrix d(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    d(i, i) = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) d(i, j) = d(j, i) = distance(tuples[i], tuples[j]);
  }
  return FiniteMetricSpace(FiniteMetricSpace::Trusted{}, std::move(labels), std::move(d));
}

// ---------------------------------------------------------------------------
// DiscreteMeasure

std::vector<double> normalize_weights(std::vector<double> weights) {
  if (weights.empty()) throw InputError("a measure needs at least one support point");
  for (double& w : weights) {
    if (!std::isfinite(w)) throw InputError("weights must be finite");
    if (w < 0.0) {
      if (w < -1e-15) throw InputError("weights must be nonnegative");
      w = 0.0;
    }
  }
  const double total = compensated_sum(weights);
  if (std::abs(total - 1.0) > kWeightSumSlack) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "weights sum to " << total << ", not 1";
    throw InputError(msg.str());
  }
  for (double& w : weights) w /= total;
  return weights;
}

DiscreteMeasure DiscreteMeasure::on_space(SpacePtr space, std::vector<std::size_t> points,
                                          std::vector<double> weights) {
  if (!space) throw InputError("finite measure needs a metric space");
  if (points.size() != weights.size()) throw InputError("support and weights differ in length");
  DiscreteMeasure m;
  m.space_ = std::move(space);
  m.indices_ = std::move(points);
  m.weights_ = normalize_weights(std::move(weights));
  m.validate_support();
  return m;
}

DiscreteMeasure DiscreteMeasure::on_line(std::vector<double> points, std::vector<double> weights) {
  return on_reals(RealSpace{1, 2.0}, std::move(points), std::move(weights));
}

DiscreteMeasure DiscreteMeasure::on_reals(RealSpace space, std::vector<double> points,
                                          std::vector<double> weights) {
  if (space.dim == 0) throw InputError("real space dimension must be positive");
  check_order(space.p);
  if (points.size() != weights.size() * space.dim)
    throw InputError("support and weights differ in length");
  DiscreteMeasure m;
  m.real_ = space;
  m.coords_ = std::move(points);
  m.weights_ = normalize_weights(std::move(weights));
  m.validate_support();
  return m;
}

DiscreteMeasure DiscreteMeasure::merged_on_line(std::span<const double> points,
                                                std::span<const double> weights) {
  if (points.size() != weights.size()) throw InputError("support and weights differ in length");
  std::map<double, KahanSum> acc;
  for (std::size_t i = 0; i < points.size(); ++i) acc[points[i]].add(weights[i]);
  std::vector<double> xs, ws;
  xs.reserve(acc.size());
  ws.reserve(acc.size());
  for (const auto& [x, w] : acc) {
    xs.push_back(x);
    ws.push_back(w.value());
  }
  return on_line(std::move(xs), std::move(ws));
}

void DiscreteMeasure::validate_support() const {
  if (size() > kMaxSupport) throw InputError("support exceeds 4096 points");
  if (space_) {
    std::vector<std::size_t> sorted = indices_;
    for (std::size_t idx : sorted)
      if (idx >= space_->size()) throw InputError("support index outside the metric space");
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw InputError("support points must be pairwise distinct");
    return;
  }
  for (double c : coords_)
    if (!std::isfinite(c)) throw InputError("support coordinates must be finite");
  std::vector<std::span<const double>> pts;
  pts.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) pts.push_back(point(i));
  std::sort(pts.begin(), pts.end(), [](auto a, auto b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
  });
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (std::equal(pts[i].begin(), pts[i].end(), pts[i - 1].begin()))
      throw InputError("support points must be pairwise distinct");
}

std::span<const double> DiscreteMeasure::point(std::size_t i) const {
  return std::span<const double>(coords_).subspan(i * real_.dim, real_.dim);
}

bool DiscreteMeasure::same_space(const DiscreteMeasure& other) const {
  if (static_cast<bool>(space_) != static_cast<bool>(other.space_)) return false;
  if (space_) return space_ == other.space_ || *space_ == *other.space_;
  return real_ == other.real_;
}

double DiscreteMeasure::distance_to(std::size_t i, const DiscreteMeasure& other,
                                    std::size_t j) const {
  if (space_) return (*space_)(indices_[i], other.indices_[j]);
  return real_.distance(point(i), other.point(j));
}

std::optional<std::size_t> DiscreteMeasure::find(const DiscreteMeasure& other,
                                                 std::size_t j) const {
  for (std::size_t i = 0; i < size(); ++i) {
    if (space_) {
      if (indices_[i] == other.indices_[j]) return i;
    } else {
      auto a = point(i), b = other.point(j);
      if (std::equal(a.begin(), a.end(), b.begin())) return i;
    }
  }
  return std::nullopt;
}

DiscreteMeasure DiscreteMeasure::reweighted(std::vector<double> weights) const {
  if (weights.size() != size()) throw InputError("reweighting changes the support size");
  DiscreteMeasure m = *this;
  m.weights_ = normalize_weights(std::move(weights));
  return m;
}

Matrix ground_cost(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double s) {
  check_order(s);
  if (!mu.same_space(nu)) throw InputError("measures live on different spaces");
  Matrix c(mu.size(), nu.size());
  for (std::size_t i = 0; i < mu.size(); ++i)
    for (std::size_t j = 0; j < nu.size(); ++j) {
      const double d = mu.distance_to(i, nu, j);
      c(i, j) = s == 1.0 ? d : std::pow(d, s);
    }
  return c;
}

Matrix support_distances(const DiscreteMeasure& mu) { return ground_cost(mu, mu, 1.0); }

DiscreteMeasure empirical_measure(std::span<const double> samples) {
  if (samples.empty()) throw InputError("empirical_measure: no samples");
  std::vector<double> order;
  std::map<double, std::size_t> counts;
  for (double x : samples) {
    auto [it, inserted] = counts.try_emplace(x, 0);
    if (inserted) order.push_back(x);
    ++it->second;
  }
  const auto total = static_cast<double>(samples.size());
  std::vector<double> weights;
  weights.reserve(order.size());
  for (double x : order) weights.push_back(static_cast<double>(counts[x]) / total);
  return DiscreteMeasure::on_line(std::move(order), std::move(weights));
}

DiscreteMeasure empirical_measure(SpacePtr space, std::span<const std::size_t> samples) {
  if (samples.empty()) throw InputError("empirical_measure: no samples");
  std::vector<std::size_t> order;
  std::map<std::size_t, std::size_t> counts;
  for (std::size_t x : samples) {
    auto [it, inserted] = counts.try_emplace(x, 0);
    if (inserted) order.push_back(x);
    ++it->second;
  }
  const auto total = static_cast<double>(samples.size());
  std::vector<double> weights;
  weights.reserve(order.size());
  for (std::size_t x : order) weights.push_back(static_cast<double>(counts[x]) / total);
  return DiscreteMeasure::on_space(std::move(space), std::move(order), std::move(weights));
}

double moment_order_s(const DiscreteMeasure& mu, std::size_t x0, double s) {
  check_order(s);
  if (!mu.on_finite_space()) throw InputError("moment_order_s: index center needs a finite space");
  if (x0 >= mu.space()->size()) throw InputError("moment_order_s: center outside the space");
  KahanSum acc;
  for (std::size_t i = 0; i < mu.size(); ++i)
    acc.add(mu.weight(i) * std::pow((*mu.space())(x0, mu.index(i)), s));
  return acc.value();
}

double moment_order_s(const DiscreteMeasure& mu, std::span<const double> x0, double s) {
  check_order(s);
  if (mu.on_finite_space() || x0.size() != mu.real_space().dim)
    throw InputError("moment_order_s: center is not in the measure's space");
  KahanSum acc;
  for (std::size_t i = 0; i < mu.size(); ++i)
    acc.add(mu.weight(i) * std::pow(mu.real_space().distance(x0, mu.point(i)), s));
  return acc.value();
}

// ---------------------------------------------------------------------------
// GaussianMeasure

GaussianMeasure::GaussianMeasure(Vector mean, Matrix cov) : mean_(std::move(mean)), cov_(std::move(cov)) {
  const auto m = mean_.size();
  if (m == 0) throw InputError("Gaussian dimension must be positive");
  if (cov_.rows() != m || cov_.cols() != m) throw InputError("covariance shape does not match mean");
  if (!mean_.allFinite() || !cov_.allFinite()) throw InputError("Gaussian parameters must be finite");
  if ((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw InputError("covariance must be symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov_, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-12)
    throw InputError("covariance must be positive semidefinite");
}

GaussianMeasure GaussianMeasure::scalar(double mean, double variance) {
  return GaussianMeasure(Vector::Constant(1, mean), Matrix::Constant(1, 1, variance));
}

Matrix psd_sqrt(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (a + a.transpose()));
  Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace concentra
