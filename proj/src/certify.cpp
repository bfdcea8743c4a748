#include "concentra/certify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include "concentra/entropy.hpp"
#include "concentra/error.hpp"
#include "concentra/numeric.hpp"
#include "concentra/transport.hpp"

namespace concentra {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Runs fn(i) for i in [0, count) over up to `workers` threads.
template <class Fn>
void parallel_for(std::size_t count, unsigned workers, Fn fn) {
  const std::size_t w = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(1, count));
  if (w == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(w);
  for (std::size_t k = 0; k < w; ++k) {
    pool.emplace_back([&, k] {
      try {
        for (std::size_t i = k; i < count; i += w) fn(i);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct Scored {
  double slack = kNegInf;
  double t = 0.0;
};

// Worst entry, lowest index on ties.
std::size_t argmax(const std::vector<Scored>& s) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < s.size(); ++i)
    if (s[i].slack > s[best].slack) best = i;
  return best;
}

void check_positive(double x, const char* name) {
  if (!(x > 0.0) || !std::isfinite(x)) throw InputError(std::string(name) + " must be positive and finite");
}

void prufer_decode(const std::vector<std::size_t>& seq, std::size_t k,
                   std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  std::vector<std::size_t> degree(k, 1);
  for (std::size_t x : seq) ++degree[x];
  edges.clear();
  for (std::size_t x : seq) {
    for (std::size_t leaf = 0; leaf < k; ++leaf) {
      if (degree[leaf] == 1) {
        edges.push_back({leaf, x});
        --degree[leaf];
        --degree[x];
        break;
      }
    }
  }
  std::size_t u = k, v = k;
  for (std::size_t i = 0; i < k; ++i) {
    if (degree[i] == 1) {
      if (u == k) u = i;
      else v = i;
    }
  }
  edges.push_back({u, v});
}

}  // namespace

std::string to_string(Inequality k) {
  switch (k) {
    case Inequality::gc: return "GC";
    case Inequality::transport: return "T_s";
    case Inequality::lsi: return "LSI";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// GC

std::vector<double> default_t_grid() {
  std::vector<double> grid;
  constexpr int kSide = 20;
  const double lo = std::log(1e-2), hi = std::log(8.0);
  std::vector<double> pos;
  for (int i = 0; i < kSide; ++i) pos.push_back(std::exp(lo + (hi - lo) * i / (kSide - 1)));
  pos.back() = 8.0;
  for (auto it = pos.rbegin(); it != pos.rend(); ++it) grid.push_back(-*it);
  grid.push_back(0.0);
  for (double t : pos) grid.push_back(t);
  return grid;
}

double gc_slack(const DiscreteMeasure& mu, std::span<const double> f, double kappa, double t) {
  if (f.size() != mu.size()) throw InputError("test function length does not match the support");
  const auto w = mu.weights();
  KahanSum total, first;
  for (std::size_t i = 0; i < w.size(); ++i) {
    total.add(w[i]);
    first.add(w[i] * f[i]);
  }
  const double mean = first.value() / total.value();
  std::vector<double> a(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) a[i] = t * (f[i] - mean);
  return log_sum_exp(a, w) - std::log(total.value()) - 0.5 * kappa * t * t;
}

std::vector<std::vector<double>> lipschitz_vertices(const Matrix& dist) {
  const auto k = static_cast<std::size_t>(dist.rows());
  if (k == 0) return {};
  if (k == 1) return {{0.0}};
  if (k > 6) throw InputError("vertex enumeration is limited to 6 points");

  std::vector<std::vector<double>> out;
  std::vector<std::size_t> seq(k - 2, 0);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(k);
  while (true) {
    prufer_decode(seq, k, edges);
    for (auto& a : adj) a.clear();
    for (std::size_t e = 0; e < edges.size(); ++e) {
      adj[edges[e].first].push_back({edges[e].second, e});
      adj[edges[e].second].push_back({edges[e].first, e});
    }
    for (std::size_t mask = 0; mask < (std::size_t{1} << (k - 1)); ++mask) {
      // Orientation bit e: sign of f(child) - f(parent) along tree edge e.
      std::vector<double> f(k, 0.0);
      std::vector<char> seen(k, 0);
      std::vector<std::size_t> stack{0};
      seen[0] = 1;
      while (!stack.empty()) {
        const std::size_t u = stack.back();
        stack.pop_back();
        for (auto [v, e] : adj[u]) {
          if (seen[v]) continue;
          seen[v] = 1;
          const double sign = (mask >> e) & 1U ? 1.0 : -1.0;
          f[v] = f[u] + sign * dist(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v));
          stack.push_back(v);
        }
      }
      bool feasible = true;
      for (std::size_t i = 0; i < k && feasible; ++i)
        for (std::size_t j = i + 1; j < k; ++j)
          if (std::abs(f[i] - f[j]) > dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) + 1e-12) {
            feasible = false;
            break;
          }
      if (feasible) out.push_back(std::move(f));
    }
    // Next Prufer sequence.
    std::size_t pos = 0;
    while (pos < seq.size() && ++seq[pos] == k) seq[pos++] = 0;
    if (pos == seq.size()) break;
  }
  std::sort(out.begin(), out.end());
  auto close = [](const std::vector<double>& a, const std::vector<double>& b) {
    for (std::size_t i = 0; i < a.size(); ++i)
      if (std::abs(a[i] - b[i]) > 1e-12) return false;
    return true;
  };
  out.erase(std::unique(out.begin(), out.end(), close), out.end());
  return out;
}

std::vector<TestFunction> gc_default_family(const DiscreteMeasure& mu, std::size_t mcshane_count,
                                            std::uint64_t seed) {
  const Matrix d = support_distances(mu);
  const std::size_t k = mu.size();
  std::vector<TestFunction> family;
  for (std::size_t j = 0; j < k; ++j) {
    TestFunction f{"distance:" + std::to_string(j), std::vector<double>(k)};
    for (std::size_t i = 0; i < k; ++i) f.values[i] = d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    family.push_back(std::move(f));
  }
  const double diam = d.size() ? d.maxCoeff() : 0.0;
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t m = 0; m < mcshane_count; ++m) {
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t anchors = std::uniform_int_distribution<std::size_t>(1, k)(rng);
    std::uniform_real_distribution<double> value(0.0, std::max(diam, 1e-300));
    std::vector<double> v(anchors);
    for (double& x : v) x = value(rng);
    TestFunction f{"mcshane:" + std::to_string(m), std::vector<double>(k)};
    for (std::size_t i = 0; i < k; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < anchors; ++a)
        best = std::min(best, v[a] + d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(order[a])));
      f.values[i] = best;
    }
    family.push_back(std::move(f));
  }
  if (k <= 6) {
    const auto vertices = lipschitz_vertices(d);
    for (std::size_t i = 0; i < vertices.size(); ++i)
      family.push_back({"vertex:" + std::to_string(i), vertices[i]});
  }
  return family;
}

Certificate check_gc(const DiscreteMeasure& mu, double kappa, const std::vector<TestFunction>& family,
                     const GcOptions& opt) {
  check_positive(kappa, "kappa");
  if (family.empty()) throw InputError("GC test family is empty");
  const std::vector<double> grid = opt.t_grid.empty() ? default_t_grid() : opt.t_grid;
  if (std::none_of(grid.begin(), grid.end(), [](double t) { return t != 0.0; }))
    throw InputError("t grid needs a nonzero point");
  const Matrix d = support_distances(mu);
  const std::size_t k = mu.size();
  for (const auto& f : family) {
    if (f.values.size() != k) throw InputError("test function " + f.label + " has the wrong length");
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = i + 1; j < k; ++j)
        if (std::abs(f.values[i] - f.values[j]) > d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) + 1e-9)
          throw InputError("test function " + f.label + " is not 1-Lipschitz");
  }

  std::vector<Scored> scores(family.size());
  parallel_for(family.size(), opt.workers, [&](std::size_t m) {
    Scored s;
    for (double t : grid) {
      const double slack = gc_slack(mu, family[m].values, kappa, t);
      if (t == 0.0) {
        if (slack != 0.0) throw InternalError("GC slack at t = 0 is not exactly zero");
        continue;
      }
      if (slack > s.slack) {
        s.slack = slack;
        s.t = t;
      }
    }
    scores[m] = s;
  });

  const std::size_t w = argmax(scores);
  Certificate c;
  c.inequality = Inequality::gc;
  c.constant = kappa;
  c.worst_slack = scores[w].slack;
  c.tolerance = opt.tolerance;
  c.pass = c.worst_slack <= opt.tolerance;
  c.search_size = family.size() * grid.size();
  c.family = std::to_string(family.size()) + " Lipschitz functions x " + std::to_string(grid.size()) + " t values";
  c.witness_index = w;
  c.witness_label = family[w].label;
  c.witness_t = scores[w].t;
  c.witness_values = family[w].values;
  return c;
}

Certificate check_gc(const DiscreteMeasure& mu, double kappa, const GcOptions& opt) {
  check_positive(kappa, "kappa");
  return check_gc(mu, kappa, gc_default_family(mu, opt.mcshane_count, opt.seed), opt);
}

// ---------------------------------------------------------------------------
// Transport

double transport_slack(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double alpha, double s) {
  check_positive(alpha, "alpha");
  const double ent = relative_entropy_discrete(nu, mu);
  if (std::isinf(ent)) return kNegInf;
  const double w = (mu.is_line() && nu.is_line()) ? wasserstein_1d(nu, mu, s) : wasserstein_exact(nu, mu, s).value;
  return w - std::sqrt(2.0 * ent / alpha);
}

std::vector<DiscreteMeasure> transport_default_family(const DiscreteMeasure& mu, std::uint64_t seed,
                                                      std::size_t reweightings) {
  std::vector<DiscreteMeasure> family{mu};
  const auto base = mu.weights();
  const std::size_t k = mu.size();
  const auto functions = gc_default_family(mu, 16, seed);
  for (const auto& f : functions) {
    for (double t : default_t_grid()) {
      if (t == 0.0) continue;
      const double peak = t * *std::max_element(f.values.begin(), f.values.end());
      const double low = t * *std::min_element(f.values.begin(), f.values.end());
      std::vector<double> w(k);
      KahanSum total;
      for (std::size_t i = 0; i < k; ++i) {
        w[i] = base[i] * std::exp(t * f.values[i] - std::max(peak, low));
        total.add(w[i]);
      }
      if (!(total.value() > 0.0)) continue;
      for (double& x : w) x /= total.value();
      family.push_back(mu.reweighted(std::move(w)));
    }
  }
  std::mt19937_64 rng(seed ^ 0x5eedULL);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> spread(0.05, 2.0);
  for (std::size_t r = 0; r < reweightings; ++r) {
    const double sd = spread(rng);
    std::vector<double> w(k);
    KahanSum total;
    for (std::size_t i = 0; i < k; ++i) {
      w[i] = base[i] * std::exp(sd * normal(rng));
      total.add(w[i]);
    }
    for (double& x : w) x /= total.value();
    family.push_back(mu.reweighted(std::move(w)));
  }
  return family;
}

Certificate check_transport(const DiscreteMeasure& mu, double alpha, double s,
                            const std::vector<DiscreteMeasure>& family, const TransportOptions& opt) {
  check_positive(alpha, "alpha");
  if (!(s >= 1.0 && s <= 2.0)) throw InputError("s must lie in [1, 2]");
  if (family.empty()) throw InputError("perturbation family is empty");
  for (const auto& nu : family)
    if (!nu.same_space(mu)) throw InputError("perturbation lives on a different space");

  std::vector<Scored> scores(family.size());
  parallel_for(family.size(), opt.workers,
               [&](std::size_t m) { scores[m].slack = transport_slack(mu, family[m], alpha, s); });
  const std::size_t w = argmax(scores);
  Certificate c;
  c.inequality = Inequality::transport;
  c.constant = alpha;
  c.order_s = s;
  c.worst_slack = scores[w].slack;
  c.tolerance = opt.tolerance;
  c.pass = c.worst_slack <= opt.tolerance;
  c.search_size = family.size();
  c.family = opt.family_label + " (" + std::to_string(family.size()) + " measures)";
  c.witness_index = w;
  c.witness_label = "perturbation:" + std::to_string(w);
  c.witness_measure = family[w];
  return c;
}

Certificate check_transport(const DiscreteMeasure& mu, double alpha, double s, std::uint64_t seed) {
  TransportOptions opt;
  opt.family_label = "exponential tilts and random reweightings";
  return check_transport(mu, alpha, s, transport_default_family(mu, seed), opt);
}

// ---------------------------------------------------------------------------
// LSI

GridDensity standard_gaussian_grid(double half_width, std::size_t points) {
  if (points < 3 || !(half_width > 0.0)) throw InputError("grid needs >= 3 points and positive width");
  GridDensity g;
  g.x0 = -half_width;
  g.h = 2.0 * half_width / static_cast<double>(points - 1);
  g.values.resize(points);
  for (std::size_t i = 0; i < points; ++i) {
    const double x = g.x(i);
    g.values[i] = std::exp(-0.5 * x * x);
  }
  return g;
}

namespace {

void check_grid(const GridDensity& g) {
  if (g.size() < 3) throw InputError("LSI grid needs at least 3 points");
  if (!(g.h > 0.0) || !std::isfinite(g.h)) throw InputError("grid spacing must be positive");
  for (double v : g.values)
    if (!(v > 0.0) || !std::isfinite(v)) throw InputError("density values must be positive and finite");
}

}  // namespace

double lsi_slack(const GridDensity& density, std::span<const double> f, double alpha) {
  check_positive(alpha, "alpha");
  check_grid(density);
  const std::size_t n = density.size();
  if (f.size() != n) throw InputError("test function length does not match the grid");
  if (std::all_of(f.begin(), f.end(), [&](double v) { return v == f[0]; })) return 0.0;

  KahanSum mass;
  for (double v : density.values) mass.add(v);
  std::vector<double> mu(n);
  for (std::size_t i = 0; i < n; ++i) mu[i] = density.values[i] / mass.value();

  KahanSum second;
  for (std::size_t i = 0; i < n; ++i) second.add(mu[i] * f[i] * f[i]);
  const double scale = 1.0 / std::sqrt(second.value());
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = f[i] * scale;

  KahanSum ent, energy;
  const double h2 = 2.0 * density.h;
  for (std::size_t i = 0; i < n; ++i) {
    const double g2 = g[i] * g[i];
    if (g2 > 0.0) ent.add(mu[i] * g2 * std::log(g2));
    double grad;
    if (i == 0)
      grad = (-3.0 * g[0] + 4.0 * g[1] - g[2]) / h2;
    else if (i + 1 == n)
      grad = (3.0 * g[n - 1] - 4.0 * g[n - 2] + g[n - 3]) / h2;
    else
      grad = (g[i + 1] - g[i - 1]) / h2;
    energy.add(mu[i] * grad * grad);
  }
  return ent.value() - 2.0 / alpha * energy.value();
}

std::vector<TestFunction> lsi_default_family(const GridDensity& density, std::uint64_t seed, std::size_t bumps) {
  check_grid(density);
  const std::size_t n = density.size();
  // Standardize coordinates by the discretized mean and deviation.
  KahanSum mass, first;
  for (std::size_t i = 0; i < n; ++i) {
    mass.add(density.values[i]);
    first.add(density.values[i] * density.x(i));
  }
  const double mean = first.value() / mass.value();
  KahanSum second;
  for (std::size_t i = 0; i < n; ++i) second.add(density.values[i] * (density.x(i) - mean) * (density.x(i) - mean));
  const double sd = std::sqrt(second.value() / mass.value());
  std::vector<double> u(n);
  for (std::size_t i = 0; i < n; ++i) u[i] = (density.x(i) - mean) / sd;

  std::vector<TestFunction> family;
  auto add = [&](std::string label, auto fn) {
    TestFunction f{std::move(label), std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) f.values[i] = fn(u[i]);
    family.push_back(std::move(f));
  };
  add("constant", [](double) { return 1.0; });
  for (int p = 1; p <= 4; ++p) add("power:" + std::to_string(p), [p](double x) { return std::pow(x, p); });
  add("1+x", [](double x) { return 1.0 + x; });
  add("1+x^2", [](double x) { return 1.0 + x * x; });
  for (double t : {0.25, 0.5, 1.0, 1.5, 2.0})
    for (double sign : {1.0, -1.0}) {
      const double tt = sign * t;
      add("exp:" + std::to_string(tt), [tt](double x) { return std::exp(0.5 * tt * x); });
    }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  for (int p = 0; p < 8; ++p) {
    double c[5];
    for (double& v : c) v = normal(rng);
    add("poly:" + std::to_string(p), [c](double x) { return c[0] + x * (c[1] + x * (c[2] + x * (c[3] + x * c[4]))); });
  }
  std::uniform_real_distribution<double> offset(0.5, 1.5), center(-3.0, 3.0), width(0.3, 2.0);
  for (std::size_t b = 0; b < bumps; ++b) {
    const double base = offset(rng);
    double amp[3], ctr[3], wid[3];
    for (int j = 0; j < 3; ++j) {
      amp[j] = normal(rng);
      ctr[j] = center(rng);
      wid[j] = width(rng);
    }
    add("bump:" + std::to_string(b), [=](double x) {
      double v = base;
      for (int j = 0; j < 3; ++j) v += amp[j] * std::exp(-0.5 * (x - ctr[j]) * (x - ctr[j]) / (wid[j] * wid[j]));
      return v;
    });
  }
  return family;
}

Certificate check_lsi_grid(const GridDensity& density, double alpha, const std::vector<TestFunction>& family,
                           const LsiOptions& opt) {
  check_positive(alpha, "alpha");
  check_grid(density);
  if (family.empty()) throw InputError("LSI test family is empty");
  std::vector<Scored> scores(family.size());
  parallel_for(family.size(), opt.workers,
               [&](std::size_t m) { scores[m].slack = lsi_slack(density, family[m].values, alpha); });
  const std::size_t w = argmax(scores);
  Certificate c;
  c.inequality = Inequality::lsi;
  c.constant = alpha;
  c.order_s = 2.0;
  c.worst_slack = scores[w].slack;
  c.grid_h = density.h;
  c.allowance = opt.allowance_constant * density.h * density.h;
  c.tolerance = opt.base_tolerance + c.allowance;
  c.pass = c.worst_slack <= c.tolerance;
  c.search_size = family.size();
  c.family = std::to_string(family.size()) + " grid test functions";
  c.witness_index = w;
  c.witness_label = family[w].label;
  c.witness_values = family[w].values;
  return c;
}

Certificate check_lsi_grid(const GridDensity& density, double alpha, std::uint64_t seed) {
  return check_lsi_grid(density, alpha, lsi_default_family(density, seed));
}

// ---------------------------------------------------------------------------

double replay(const Certificate& cert, const DiscreteMeasure& mu) {
  switch (cert.inequality) {
    case Inequality::gc: return gc_slack(mu, cert.witness_values, cert.constant, cert.witness_t);
    case Inequality::transport:
      if (!cert.witness_measure) throw InputError("transport certificate has no witness measure");
      return transport_slack(mu, *cert.witness_measure, cert.constant, cert.order_s);
    case Inequality::lsi: break;
  }
  throw InputError("LSI certificates replay against a grid density");
}

double replay(const Certificate& cert, const GridDensity& density) {
  if (cert.inequality != Inequality::lsi) throw InputError("not an LSI certificate");
  return lsi_slack(density, cert.witness_values, cert.constant);
}

BestConstant best_constant(const std::function<bool(double)>& passes, double lo, double hi, Weaker weaker,
                           double rel_width) {
  if (!(lo > 0.0) || !(hi > lo) || !std::isfinite(hi)) throw InputError("bracket must satisfy 0 < lo < hi");
  BestConstant out;
  const double weak = weaker == Weaker::smaller ? lo : hi;
  const double strong = weaker == Weaker::smaller ? hi : lo;
  const bool weak_ok = passes(weak);
  out.trace.push_back({weak, weak_ok});
  if (!weak_ok) throw InputError("checker fails at the weak end of the bracket");
  const bool strong_ok = passes(strong);
  out.trace.push_back({strong, strong_ok});
  if (strong_ok) {
    out.value = strong;
    out.lo = lo;
    out.hi = hi;
    out.degenerate = true;
    return out;
  }
  double a = lo, b = hi;
  while (b - a > rel_width * 0.5 * (a + b)) {
    const double mid = 0.5 * (a + b);
    const bool ok = passes(mid);
    out.trace.push_back({mid, ok});
    // Passing moves the weak-side endpoint inward.
    if (ok == (weaker == Weaker::smaller)) a = mid;
    else b = mid;
  }
  // Every passing constant must be weaker than every failing one.
  for (const auto& [x, ok] : out.trace)
    for (const auto& [y, ok2] : out.trace)
      if (ok && !ok2 && (weaker == Weaker::smaller ? x > y : x < y))
        throw InternalError("verdict is not monotone in the constant");
  out.lo = a;
  out.hi = b;
  out.value = 0.5 * (a + b);
  return out;
}

DualityReport check_bg_duality(const DiscreteMeasure& mu, double kappa, std::uint64_t seed) {
  check_positive(kappa, "kappa");
  DualityReport r;
  GcOptions opt;
  opt.seed = seed;
  r.gc = check_gc(mu, kappa, opt);
  r.t1 = check_transport(mu, 1.0 / kappa, 1.0, seed);
  r.agree = r.gc.pass == r.t1.pass;
  return r;
}

}  // namespace concentra
