#include "concentra/joint_law.hpp"

#include <cmath>

#include "concentra/error.hpp"

namespace concentra {

namespace {

std::size_t checked_power(std::size_t k, std::size_t n) {
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (total > kMaxSupport / std::max<std::size_t>(k, 1))
      throw InputError("joint law exceeds " + std::to_string(kMaxSupport) + " words");
    total *= k;
  }
  return total;
}

}  // namespace

JointLaw make_joint_law(SpacePtr base, std::size_t n, std::vector<double> probs, std::vector<double> values) {
  if (!base) throw InputError("joint law needs a state space");
  if (n == 0) throw InputError("joint law needs n >= 1");
  const std::size_t k = base->size();
  const std::size_t words = checked_power(k, n);
  if (probs.size() != words)
    throw InputError("joint law has " + std::to_string(probs.size()) + " entries, expected " +
                     std::to_string(words));
  if (values.empty()) {
    values.resize(k);
    for (std::size_t i = 0; i < k; ++i) values[i] = static_cast<double>(i);
  }
  if (values.size() != k) throw InputError("one real value per state is required");
  JointLaw law;
  law.base = std::move(base);
  law.values = std::move(values);
  law.n = n;
  law.probs = normalize_weights(std::move(probs));
  return law;
}

JointLaw make_joint_law_on_line(std::vector<double> states, std::size_t n, std::vector<double> probs) {
  auto base = std::make_shared<const FiniteMetricSpace>(FiniteMetricSpace::from_line(states));
  return make_joint_law(std::move(base), n, std::move(probs), std::move(states));
}

std::vector<double> marginal(const JointLaw& law, std::size_t m) {
  if (m == 0 || m > law.n) throw InputError("marginal order out of range");
  const std::size_t k = law.states();
  std::size_t tail = 1;
  for (std::size_t i = m; i < law.n; ++i) tail *= k;
  std::vector<double> out(law.probs.size() / tail, 0.0);
  for (std::size_t w = 0; w < out.size(); ++w) {
    double acc = 0.0;
    for (std::size_t t = 0; t < tail; ++t) acc += law.probs[w * tail + t];
    out[w] = acc;
  }
  return out;
}

DiscreteMeasure joint_measure(const JointLaw& law, double s) {
  ProductSpace product(law.base, law.n, s);
  auto space = std::make_shared<const FiniteMetricSpace>(product.materialize());
  std::vector<std::size_t> points(law.probs.size());
  for (std::size_t i = 0; i < points.size(); ++i) points[i] = i;
  return DiscreteMeasure::on_space(std::move(space), std::move(points), law.probs);
}

std::vector<std::size_t> word_of(std::size_t index, std::size_t states, std::size_t n) {
  std::vector<std::size_t> digits(n);
  for (std::size_t i = n; i-- > 0;) {
    digits[i] = index % states;
    index /= states;
  }
  return digits;
}

bool same_base(const JointLaw& a, const JointLaw& b) {
  return a.n == b.n && (a.base == b.base || *a.base == *b.base);
}

}  // namespace concentra
