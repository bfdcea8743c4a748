#include <doctest.h>

#include <cmath>
#include <limits>

#include "concentra/entropy.hpp"
#include "concentra/error.hpp"
#include "gen.hpp"
#include "oracles.hpp"

using namespace concentra;

TEST_CASE("discrete relative entropy examples") {
  const auto mu = DiscreteMeasure::on_line({0.0, 1.0}, {0.5, 0.5});
  const auto nu = DiscreteMeasure::on_line({0.0, 1.0}, {0.25, 0.75});
  CHECK(relative_entropy_discrete(mu, mu) == 0.0);
  CHECK(relative_entropy_discrete(nu, mu) == doctest::Approx(oracle::kl_bern_34_12).epsilon(1e-15));
  const auto delta = DiscreteMeasure::on_line({2.0}, {1.0});
  CHECK(std::isinf(relative_entropy_discrete(delta, mu)));
  const auto zero_at_a = DiscreteMeasure::on_line({0.0, 1.0}, {0.0, 1.0});
  const auto at_a = DiscreteMeasure::on_line({0.0}, {1.0});
  CHECK(std::isinf(relative_entropy_discrete(at_a, zero_at_a)));
  // nu supported inside mu's support, listed in another order
  const auto sub = DiscreteMeasure::on_line({1.0}, {1.0});
  CHECK(relative_entropy_discrete(sub, mu) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("gaussian relative entropy examples") {
  const auto a = GaussianMeasure::scalar(0.0, 1.0);
  CHECK(relative_entropy_gaussian(a, a) == doctest::Approx(0.0));
  CHECK(relative_entropy_gaussian(GaussianMeasure::scalar(0.0, 2.0), a) ==
        doctest::Approx(oracle::kl_gauss_var2_var1).epsilon(1e-14));
  const double c = 1.3, s2 = 0.7;
  CHECK(relative_entropy_gaussian(GaussianMeasure::scalar(c, s2), GaussianMeasure::scalar(0.0, s2)) ==
        doctest::Approx(c * c / (2 * s2)).epsilon(1e-14));
  CHECK_THROWS_AS(relative_entropy_gaussian(a, GaussianMeasure::scalar(0.0, 0.0)), InputError);
  CHECK(std::isinf(relative_entropy_gaussian(GaussianMeasure::scalar(0.0, 0.0), a)));
}

TEST_CASE("gaussian relative entropy against a discretized grid") {
  // Riemann sums of the two densities on +-8 sigma, normalized on the grid.
  auto discretized = [](double m1, double v1, double m0, double v0) {
    const double sd = std::sqrt(std::max(v0, v1)), lo = std::min(m0, m1) - 8 * sd, hi = std::max(m0, m1) + 8 * sd;
    const int k = 4001;
    std::vector<double> x(k), q(k), p(k);
    for (int i = 0; i < k; ++i) {
      x[i] = lo + (hi - lo) * i / (k - 1);
      q[i] = std::exp(-(x[i] - m1) * (x[i] - m1) / (2 * v1));
      p[i] = std::exp(-(x[i] - m0) * (x[i] - m0) / (2 * v0));
    }
    double sq = 0, sp = 0;
    for (int i = 0; i < k; ++i) sq += q[i], sp += p[i];
    for (int i = 0; i < k; ++i) q[i] /= sq, p[i] /= sp;
    return relative_entropy_discrete(DiscreteMeasure::on_line(x, q), DiscreteMeasure::on_line(x, p));
  };
  CHECK(discretized(0, 2, 0, 1) == doctest::Approx(oracle::kl_gauss_var2_var1).epsilon(0.01));
  CHECK(discretized(1.5, 1, 0, 1) == doctest::Approx(1.125).epsilon(0.01));
}

TEST_CASE("chain rule hand example") {
  gen::Rng rng(1);
  auto sp = gen::line_space({0.0, 1.0});
  // P uniform i.i.d., Q = uniform first coordinate then Bernoulli(3/4).
  const auto p = make_joint_law(sp, 2, {0.25, 0.25, 0.25, 0.25});
  const auto q = make_joint_law(sp, 2, {0.125, 0.375, 0.125, 0.375});
  const auto b = chain_rule_decompose(q, p);
  CHECK(b.total == doctest::Approx(oracle::kl_bern_34_12).epsilon(1e-14));
  CHECK(b.initial_term == doctest::Approx(0.0));
  REQUIRE(b.conditional_terms.size() == 1u);
  CHECK(b.conditional_terms[0] == doctest::Approx(oracle::kl_bern_34_12).epsilon(1e-14));
  const auto same = chain_rule_decompose(p, p);
  CHECK(same.total == 0.0);
  const auto one = chain_rule_decompose(make_joint_law(sp, 1, {0.25, 0.75}), make_joint_law(sp, 1, {0.5, 0.5}));
  CHECK(one.total == one.initial_term);
  CHECK(one.conditional_terms.empty());
}

TEST_CASE("chain rule decomposition identity and nonnegativity") {
  gen::Rng rng(31);
  auto sp = gen::line_space({0.0, 1.0});
  for (int rep = 0; rep < 200; ++rep) {
    const auto q = rng.joint(sp, 3), p = rng.joint(sp, 3);
    const double direct = relative_entropy_joint(q, p);
    CHECK(direct == doctest::Approx(oracle::kl_direct(q.probs, p.probs)).epsilon(1e-12));
    const auto b = chain_rule_decompose(q, p);
    CHECK(std::abs(direct - b.total) < 1e-10);
    CHECK(breakdown_defect(b) < 1e-10);
    CHECK(b.initial_term >= 0.0);
    for (double t : b.conditional_terms) CHECK(t >= 0.0);
  }
}

TEST_CASE("chain rule on sparse laws and infinite entropy") {
  gen::Rng rng(32);
  auto sp = rng.space(3);
  for (int rep = 0; rep < 100; ++rep) {
    const auto q = rng.joint(sp, 3, true), p = rng.joint(sp, 3, true);
    const double direct = relative_entropy_joint(q, p);
    const auto b = chain_rule_decompose(q, p);
    if (std::isinf(direct)) {
      CHECK(std::isinf(b.total));
      CHECK(b.offending_step.has_value());
    } else {
      CHECK(std::abs(direct - b.total) < 1e-10);
    }
  }
}

TEST_CASE("marginalizing never increases entropy") {
  gen::Rng rng(33);
  auto sp = rng.space(3);
  for (int rep = 0; rep < 100; ++rep) {
    const auto q = rng.joint(sp, 3), p = rng.joint(sp, 3);
    const double full = relative_entropy_joint(q, p);
    for (std::size_t m = 1; m < 3; ++m)
      CHECK(relative_entropy_vectors(marginal(q, m), marginal(p, m)) <= full + 1e-12);
  }
}
