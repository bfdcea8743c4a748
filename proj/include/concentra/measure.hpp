// measure.hpp - metric spaces, product metrics and probability measures.
//
// Two kinds of ground space are supported:
//   * FiniteMetricSpace: labelled points with a dense distance matrix.
//   * RealSpace: R^m with an l^p metric. Dimension one is the real line;
//     R^n with the l^s metric is the product metric d^(s) over the line.
//
// Every value here is immutable after construction.

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace concentra {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Largest support handled by the dense exact solvers.
inline constexpr std::size_t kMaxSupport = 4096;

// Weights whose total is within this of one are renormalized; others rejected.
inline constexpr double kWeightSumSlack = 1e-9;

class FiniteMetricSpace {
 public:
  // Validates symmetry, zero diagonal, nonnegativity and the triangle
  // inequality (absolute tolerance 1e-12). Spaces above 512 points have the
  // triangle inequality spot-checked on a fixed pseudo-random set of triples.
  FiniteMetricSpace(std::vector<std::string> labels, Matrix dist);

  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const Matrix& dist() const { return dist_; }
  double operator()(std::size_t i, std::size_t j) const { return dist_(i, j); }
  std::optional<std::size_t> index_of(std::string_view label) const;

  bool operator==(const FiniteMetricSpace& other) const;

  // Points x_i on the real line with d = |x_i - x_j|.
  static FiniteMetricSpace from_line(std::span<const double> points);

 private:
  struct Trusted {};
  FiniteMetricSpace(Trusted, std::vector<std::string> labels, Matrix dist);
  friend class ProductSpace;

  std::vector<std::string> labels_;
  Matrix dist_;
};

using SpacePtr = std::shared_ptr<const FiniteMetricSpace>;

// R^dim with the l^p metric, p in [1, inf).
struct RealSpace {
  std::size_t dim = 1;
  double p = 2.0;

  double distance(std::span<const double> a, std::span<const double> b) const;
  bool operator==(const RealSpace&) const = default;
};

// (sum_j d_j^s)^(1/s), evaluated with max-scaling so it is monotone in s.
double lp_combine(std::span<const double> distances, double s);

// d^(s) between index tuples of a finite space.
double product_distance(const FiniteMetricSpace& base, std::span<const std::size_t> x,
                        std::span<const std::size_t> y, double s);

// d^(s) between tuples of reals (base space = real line).
double product_distance(std::span<const double> x, std::span<const double> y, double s);

// X^n equipped with d^(s).
class ProductSpace {
 public:
  // base == nullptr means the real line.
  ProductSpace(SpacePtr base, std::size_t factors, double order);

  const SpacePtr& base() const { return base_; }
  std::size_t factors() const { return factors_; }
  double order() const { return order_; }

  double distance(std::span<const std::size_t> x, std::span<const std::size_t> y) const;
  double distance(std::span<const double> x, std::span<const double> y) const;

  // Dense |X|^n-point space with lexicographic (first factor most significant)
  // point order. Requires a finite base and |X|^n <= kMaxSupport.
  FiniteMetricSpace materialize() const;
  std::vector<std::size_t> tuple_of(std::size_t index) const;
  std::size_t index_of(std::span<const std::size_t> tuple) const;

 private:
  SpacePtr base_;
  std::size_t factors_;
  double order_;
};

class DiscreteMeasure {
 public:
  static DiscreteMeasure on_space(SpacePtr space, std::vector<std::size_t> points,
                                  std::vector<double> weights);
  static DiscreteMeasure on_line(std::vector<double> points, std::vector<double> weights);
  // points holds support.size() * space.dim coordinates, row-major.
  static DiscreteMeasure on_reals(RealSpace space, std::vector<double> points,
                                  std::vector<double> weights);

  // Like on_line but sums the weights of repeated points instead of rejecting.
  static DiscreteMeasure merged_on_line(std::span<const double> points,
                                        std::span<const double> weights);

  bool on_finite_space() const { return static_cast<bool>(space_); }
  const SpacePtr& space() const { return space_; }
  const RealSpace& real_space() const { return real_; }
  bool is_line() const { return !space_ && real_.dim == 1; }

  std::size_t size() const { return weights_.size(); }
  std::span<const double> weights() const { return weights_; }
  double weight(std::size_t i) const { return weights_[i]; }

  std::size_t index(std::size_t i) const { return indices_[i]; }
  std::span<const std::size_t> indices() const { return indices_; }
  std::span<const double> point(std::size_t i) const;
  double real(std::size_t i) const { return coords_[i * real_.dim]; }
  std::span<const double> coordinates() const { return coords_; }

  bool same_space(const DiscreteMeasure& other) const;
  // Distance between support point i of *this and support point j of other.
  double distance_to(std::size_t i, const DiscreteMeasure& other, std::size_t j) const;
  // Position of other's j-th support point in *this, if present.
  std::optional<std::size_t> find(const DiscreteMeasure& other, std::size_t j) const;

  // Same support, new weights (validated and normalized as on construction).
  DiscreteMeasure reweighted(std::vector<double> weights) const;

 private:
  DiscreteMeasure() = default;
  void validate_support() const;

  SpacePtr space_;
  RealSpace real_;
  std::vector<std::size_t> indices_;
  std::vector<double> coords_;
  std::vector<double> weights_;
};

// Validates nonnegativity, renormalizes sums within kWeightSumSlack of one,
// and throws InputError otherwise.
std::vector<double> normalize_weights(std::vector<double> weights);

// Matrix of d(x_i, y_j)^s between the supports of mu and nu.
Matrix ground_cost(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double s);

// Distances among the support points of mu.
Matrix support_distances(const DiscreteMeasure& mu);

DiscreteMeasure empirical_measure(std::span<const double> samples);
DiscreteMeasure empirical_measure(SpacePtr space, std::span<const std::size_t> samples);

double moment_order_s(const DiscreteMeasure& mu, std::size_t x0, double s);
double moment_order_s(const DiscreteMeasure& mu, std::span<const double> x0, double s);

class GaussianMeasure {
 public:
  // Covariance must be symmetric (1e-12) with eigenvalues >= -1e-12.
  GaussianMeasure(Vector mean, Matrix cov);
  static GaussianMeasure scalar(double mean, double variance);

  std::size_t dim() const { return static_cast<std::size_t>(mean_.size()); }
  const Vector& mean() const { return mean_; }
  const Matrix& cov() const { return cov_; }

 private:
  Vector mean_;
  Matrix cov_;
};

// Symmetric PSD square root via eigendecomposition (negative round-off clipped).
Matrix psd_sqrt(const Matrix& a);

}  // namespace concentra
