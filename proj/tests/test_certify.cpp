#include <doctest.h>

#include <cmath>

#include "concentra/certify.hpp"
#include "concentra/error.hpp"
#include "concentra/joint_law.hpp"
#include "concentra/transport.hpp"
#include "gen.hpp"
#include "oracles.hpp"

using namespace concentra;

namespace {

DiscreteMeasure two_point() { return DiscreteMeasure::on_line({0.0, 1.0}, {0.5, 0.5}); }

// log cosh(t/2) - kappa t^2 / 2, the GC slack of d(., a) under the two-point law.
double two_point_slack(double kappa, double t) { return std::log(std::cosh(t / 2)) - kappa * t * t / 2; }

}  // namespace

TEST_CASE("default t grid") {
  const auto g = default_t_grid();
  CHECK(g.size() == 41u);
  CHECK(std::count(g.begin(), g.end(), 0.0) == 1);
  CHECK(*std::max_element(g.begin(), g.end()) == doctest::Approx(8.0));
  CHECK(*std::min_element(g.begin(), g.end()) == doctest::Approx(-8.0));
}

TEST_CASE("GC slack is zero at t = 0") {
  gen::Rng rng(51);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t k = rng.between(1, 9);
    const auto mu = DiscreteMeasure::on_line(rng.distinct_points(k), rng.weights(k));
    std::vector<double> f(k);
    for (auto& v : f) v = rng.normal() * 100;
    CHECK(gc_slack(mu, f, rng.uniform(0.01, 3), 0.0) == 0.0);
  }
}

TEST_CASE("GC two-point examples against the scalar oracle") {
  const auto mu = two_point();
  const auto pass = check_gc(mu, 1.0);
  CHECK(pass.pass);
  double oracle_worst = -1e300;
  for (double t : default_t_grid())
    if (t != 0.0) oracle_worst = std::max(oracle_worst, two_point_slack(1.0, t));
  CHECK(pass.worst_slack == doctest::Approx(oracle_worst).epsilon(1e-12));

  const auto fail = check_gc(mu, 0.2);
  CHECK(!fail.pass);
  double best_t = 0, best = -1e300;
  for (double t : default_t_grid())
    if (two_point_slack(0.2, t) > best) best = two_point_slack(0.2, t), best_t = t;
  CHECK(fail.worst_slack == doctest::Approx(best).epsilon(1e-12));
  CHECK(std::abs(std::abs(fail.witness_t) - std::abs(best_t)) < 1e-12);
  CHECK(std::abs(fail.witness_t) > 0.5);
  CHECK(std::abs(fail.witness_t) < 2.0);
}

TEST_CASE("GC on a point mass") {
  const auto delta = DiscreteMeasure::on_line({3.0}, {1.0});
  const auto c = check_gc(delta, 0.5);
  CHECK(c.pass);
  CHECK(c.worst_slack < 0);
  const auto g = default_t_grid();
  double tmin = 1e300;
  for (double t : g)
    if (t != 0.0) tmin = std::min(tmin, std::abs(t));
  CHECK(c.worst_slack == doctest::Approx(-0.5 * tmin * tmin / 2).epsilon(1e-12));
}

TEST_CASE("custom GC families must be 1-Lipschitz") {
  const auto mu = two_point();
  CHECK_THROWS_AS(check_gc(mu, 1.0, std::vector<TestFunction>{{"steep", {0.0, 2.0}}}), InputError);
  CHECK_NOTHROW(check_gc(mu, 1.0, std::vector<TestFunction>{{"id", {0.0, 1.0}}}));
}

TEST_CASE("Lipschitz polytope vertices") {
  Matrix d(3, 3);
  d << 0, 1, 2, 1, 0, 1, 2, 1, 0;
  const auto v = lipschitz_vertices(d);
  CHECK(!v.empty());
  for (const auto& f : v) {
    CHECK(f[0] == 0.0);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) CHECK(std::abs(f[i] - f[j]) <= d(i, j) + 1e-12);
  }
  // On a path 0 - 1 - 2 the extreme functions are the +-1 slopes on each edge.
  CHECK(v.size() == 4u);
}

TEST_CASE("transport examples") {
  const auto mu = two_point();
  const auto nu = DiscreteMeasure::on_line({0.0, 1.0}, {0.25, 0.75});
  CHECK(transport_slack(mu, nu, 4.0, 1.0) == doctest::Approx(oracle::t1_slack_alpha4).epsilon(1e-12));
  CHECK(transport_slack(mu, nu, 5.0, 1.0) == doctest::Approx(oracle::t1_slack_alpha5).epsilon(1e-12));
  const auto self = check_transport(mu, 1.0, 2.0, {mu});
  CHECK(self.pass);
  CHECK(self.worst_slack == 0.0);
  CHECK(check_transport(mu, 4.0, 1.0, {nu}).pass);
  const auto f = check_transport(mu, 5.0, 1.0, {nu});
  CHECK(!f.pass);
  REQUIRE(f.witness_measure.has_value());
  CHECK(replay(f, mu) == doctest::Approx(f.worst_slack).epsilon(1e-12));
}

TEST_CASE("passing T_s implies passing T_r for r < s") {
  gen::Rng rng(52);
  for (int rep = 0; rep < 12; ++rep) {
    auto sp = rng.space(rng.between(2, 5));
    std::vector<std::size_t> idx(sp->size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    const auto mu = DiscreteMeasure::on_space(sp, idx, rng.weights(idx.size()));
    const auto family = transport_default_family(mu, rep, 8);
    for (double alpha : {0.05, 0.2, 1.0, 4.0, 16.0}) {
      const auto strong = check_transport(mu, alpha, 2.0, family);
      const auto mid = check_transport(mu, alpha, 1.5, family);
      const auto weak = check_transport(mu, alpha, 1.0, family);
      CHECK(weak.worst_slack <= mid.worst_slack + 1e-10);
      CHECK(mid.worst_slack <= strong.worst_slack + 1e-10);
      if (strong.pass) CHECK(weak.pass);
    }
  }
}

TEST_CASE("certificates replay to their worst slack") {
  gen::Rng rng(53);
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t k = rng.between(2, 6);
    const auto mu = DiscreteMeasure::on_line(rng.distinct_points(k), rng.weights(k));
    GcOptions o;
    o.seed = rep;
    const auto g = check_gc(mu, rng.uniform(0.05, 2), o);
    CHECK(std::abs(replay(g, mu) - g.worst_slack) <= 1e-9);
    const auto t = check_transport(mu, rng.uniform(0.5, 8), rng.uniform(1, 2), rep);
    CHECK(std::abs(replay(t, mu) - t.worst_slack) <= 1e-9);
  }
  const auto grid = standard_gaussian_grid(8, 801);
  const auto l = check_lsi_grid(grid, 1.2, 3);
  CHECK(std::abs(replay(l, grid) - l.worst_slack) <= 1e-9);
}

TEST_CASE("GC verdicts are deterministic across worker counts") {
  gen::Rng rng(54);
  auto sp = rng.space(5);
  const auto mu = DiscreteMeasure::on_space(sp, {0, 1, 2, 3, 4}, rng.weights(5));
  GcOptions a, b;
  a.workers = 1;
  b.workers = 3;
  const auto ca = check_gc(mu, 0.3, a), cb = check_gc(mu, 0.3, b);
  CHECK(ca.worst_slack == cb.worst_slack);
  CHECK(ca.witness_index == cb.witness_index);
  CHECK(ca.search_size == cb.search_size);
}

TEST_CASE("LSI slack of a constant is exactly zero") {
  const auto grid = standard_gaussian_grid(6, 301);
  std::vector<double> c(grid.size(), 2.5);
  CHECK(lsi_slack(grid, c, 1.0) == 0.0);
}

TEST_CASE("LSI examples on the Gaussian grid") {
  const auto grid = standard_gaussian_grid();
  const auto pass = check_lsi_grid(grid, 1.0, 0);
  CHECK(pass.pass);
  CHECK(pass.grid_h == doctest::Approx(16.0 / 2000));
  CHECK(check_lsi_grid(grid, 1.2, 0).pass == false);
  // exponential family e^{t x / 2}: slack tends to 0 as t shrinks
  std::vector<double> f(grid.size());
  double prev = 1e300;
  for (double t : {1.0, 0.5, 0.25, 0.1}) {
    for (std::size_t i = 0; i < grid.size(); ++i) f[i] = std::exp(t * grid.x(i) / 2);
    const double s = std::abs(lsi_slack(grid, f, 1.0));
    CHECK(s < 1e-4);
    CHECK(s <= prev + 1e-12);
    prev = s;
  }
  // at alpha = 1.2 the same witness has slack (t^2/2)(1 - 1/1.2) up to discretization
  for (std::size_t i = 0; i < grid.size(); ++i) f[i] = std::exp(grid.x(i) / 2);
  CHECK(lsi_slack(grid, f, 1.2) == doctest::Approx(0.5 * (1 - 1 / 1.2)).epsilon(1e-3));
}

TEST_CASE("best constant search") {
  const auto mu = two_point();
  const auto b = best_constant([&](double k) { return check_gc(mu, k).pass; }, 0.01, 4.0, Weaker::larger);
  CHECK(b.value == doctest::Approx(0.25).epsilon(1e-3));
  CHECK(!b.degenerate);
  // monotone trace: passing constants are all weaker than failing ones
  for (const auto& [v1, ok1] : b.trace)
    for (const auto& [v2, ok2] : b.trace)
      if (ok1 && !ok2) CHECK(v1 > v2);
  const auto delta = DiscreteMeasure::on_line({0.0}, {1.0});
  const auto d = best_constant([&](double k) { return check_gc(delta, k).pass; }, 0.01, 4.0, Weaker::larger);
  CHECK(d.degenerate);
  CHECK(d.value == 0.01);
  CHECK_THROWS_AS(best_constant([](double) { return false; }, 0.1, 1.0, Weaker::larger), InputError);
}

TEST_CASE("best GC constant of a discretized Gaussian with linear witnesses") {
  const auto grid = standard_gaussian_grid(8, 801);
  double total = 0;
  for (double v : grid.values) total += v;
  std::vector<double> x(grid.size()), w(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) x[i] = grid.x(i), w[i] = grid.values[i] / total;
  const auto mu = DiscreteMeasure::on_line(x, w);
  const std::vector<TestFunction> linear{{"x", x}};
  GcOptions o;
  o.t_grid.clear();
  for (int i = -20; i <= 20; ++i) o.t_grid.push_back(0.1 * i);
  const auto b = best_constant([&](double k) { return check_gc(mu, k, linear, o).pass; }, 0.1, 4.0, Weaker::larger);
  CHECK(b.value == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("GC and T1 duality") {
  const auto delta = DiscreteMeasure::on_line({0.0}, {1.0});
  CHECK(check_bg_duality(delta, 0.3, 0).agree);
  const auto mu = two_point();
  const auto ok = check_bg_duality(mu, 0.25, 0);
  CHECK(ok.gc.pass);
  CHECK(ok.t1.pass);
  CHECK(ok.agree);
  const auto bad = check_bg_duality(mu, 0.2, 0);
  CHECK(!bad.gc.pass);
  CHECK(!bad.t1.pass);
  CHECK(bad.agree);
}

TEST_CASE("product of two-point laws") {
  auto sp = gen::line_space({0.0, 1.0});
  for (std::size_t n = 1; n <= 3; ++n) {
    std::vector<double> p(std::size_t(1) << n, 1.0 / static_cast<double>(std::size_t(1) << n));
    const auto mu = joint_measure(make_joint_law(sp, n, p), 1.0);
    CHECK(check_gc(mu, 0.25 * static_cast<double>(n)).pass);
  }
}
