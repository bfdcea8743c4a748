#include "cli.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>

#include "concentra/certify.hpp"
#include "concentra/constants.hpp"
#include "concentra/coupling.hpp"
#include "concentra/entropy.hpp"
#include "concentra/error.hpp"
#include "concentra/numeric.hpp"
#include "concentra/processes.hpp"
#include "concentra/transport.hpp"
#include "json_io.hpp"

namespace concentra::cli {

using io::json;

namespace {

// --- output -----------------------------------------------------------------

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_cell(const json& v) {
  if (v.is_null()) return "";
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
  if (v.is_number()) return format_number(v.get<double>());
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  if (s.find_first_of(",\"\n") != std::string::npos) {
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  }
  return s;
}

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<json>> rows;
};

struct Result {
  json body = json::object();
  Table table;
  int code = kExitOk;
};

struct Common {
  std::uint64_t seed = 0;
  std::size_t samples = 0;
  double tol = 0.0;
  unsigned workers = 1;
  std::string format = "csv";
  std::string out;
  CLI::Option* samples_opt = nullptr;
  CLI::Option* tol_opt = nullptr;

  bool has_samples() const { return samples_opt && samples_opt->count() > 0; }
  bool has_tol() const { return tol_opt && tol_opt->count() > 0; }
  double tol_or(double fallback) const { return has_tol() ? tol : fallback; }
};

void render(std::ostream& os, const json& config, const Result& r, const std::string& format) {
  if (format == "json") {
    json j;
    j["config"] = config;
    for (auto it = r.body.begin(); it != r.body.end(); ++it) j[it.key()] = it.value();
    os << j.dump(2) << "\n";
    return;
  }
  os << "# config: " << config.dump() << "\n";
  for (std::size_t i = 0; i < r.table.columns.size(); ++i) os << (i ? "," : "") << r.table.columns[i];
  os << "\n";
  for (const auto& row : r.table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_cell(row[i]);
    os << "\n";
  }
}

// Numeric flags recorded only when given, so the echoed config is exact.
struct Params {
  std::map<std::string, double> values;
  std::map<std::string, CLI::Option*> opts;

  void add(CLI::App* app, const std::string& name, const std::string& help) {
    opts[name] = app->add_option("--" + name, values[name], help);
  }
  bool has(const std::string& name) const {
    auto it = opts.find(name);
    return it != opts.end() && it->second->count() > 0;
  }
  double get(const std::string& name) const {
    if (!has(name)) throw InputError("--" + name + " is required here");
    return values.at(name);
  }
  double get_or(const std::string& name, double fallback) const { return has(name) ? values.at(name) : fallback; }
  void echo(json& config) const {
    for (const auto& [name, opt] : opts)
      if (opt->count() > 0) config[name] = values.at(name);
  }
};

Matrix parse_matrix_arg(const std::string& text, const char* what) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error&) {
    j = io::read_json_file(text);
  }
  return io::to_matrix(j, what);
}

DiscreteMeasure require_discrete(io::AnyMeasure m, const char* what) {
  if (!std::holds_alternative<DiscreteMeasure>(m)) throw InputError(std::string(what) + " must be a discrete measure");
  return std::get<DiscreteMeasure>(std::move(m));
}

// --- constants --------------------------------------------------------------

struct FormulaInputs {
  const Params& p;
  std::size_t n;
  std::optional<std::string> epsilon;
  std::optional<std::string> kappa_matrix, A, B;
};

struct FormulaRow {
  json inputs = json::object();
  std::string regime;
  double value = 0.0;
  json extra = json::object();
};

std::string regime_vs(double x, double pivot) {
  return to_string(x < pivot ? Regime::contractive : x == pivot ? Regime::critical : Regime::expansive);
}

FormulaRow from_regime(const RegimeConstant& c) {
  FormulaRow r;
  r.regime = to_string(c.regime);
  r.value = c.value;
  return r;
}

using FormulaFn = std::function<FormulaRow(const FormulaInputs&)>;

struct Formula {
  std::string id;
  std::vector<std::string> aliases;
  std::vector<std::string> params;
  bool uses_n = true;
  FormulaFn eval;
};

const std::vector<Formula>& formulas() {
  static const std::vector<Formula> table = {
      {"gc_markov_kappa", {"thm1.1"}, {"kappa1", "L"}, true,
       [](const FormulaInputs& in) {
         FormulaRow r;
         r.value = gc_markov_kappa(in.p.get("kappa1"), in.p.get("L"), in.n);
         r.regime = regime_vs(in.p.get("L"), 1.0);
         return r;
       }},
      {"gc_weak_kappa", {"thm3.1"}, {"kappa1", "R"}, true,
       [](const FormulaInputs& in) {
         FormulaRow r;
         r.value = gc_weak_kappa(in.p.get("kappa1"), in.p.get("R"), in.n);
         r.regime = regime_vs(in.p.get("R"), 1.0);
         return r;
       }},
      {"gc_weak_kappa_general", {"thm3.1-general"}, {"kappa1", "M"}, true,
       [](const FormulaInputs& in) {
         FormulaRow r;
         r.value = gc_weak_kappa_general(in.p.get("kappa1"), in.p.get("M"), in.n);
         r.regime = "general";
         return r;
       }},
      {"ts_markov_alpha", {"thm1.2"}, {"alpha", "L", "s"}, true,
       [](const FormulaInputs& in) { return from_regime(ts_markov_alpha(in.p.get("alpha"), in.p.get("L"), in.p.get("s"), in.n)); }},
      {"ts_weak_alpha", {"thm2.1"}, {"alpha", "R", "s"}, true,
       [](const FormulaInputs& in) { return from_regime(ts_weak_alpha(in.p.get("alpha"), in.p.get("R"), in.p.get("s"), in.n)); }},
      {"ts_general_alpha", {"thm2.1-general"}, {"alpha", "M", "s"}, true,
       [](const FormulaInputs& in) {
         FormulaRow r;
         r.value = ts_general_alpha(in.p.get("alpha"), in.p.get("M"), in.p.get("s"), in.n);
         r.regime = "general";
         return r;
       }},
      {"lsi_markov_alpha", {"thm1.3"}, {"alpha", "L"}, true,
       [](const FormulaInputs& in) { return from_regime(lsi_markov_alpha(in.p.get("alpha"), in.p.get("L"), in.n)); }},
      {"lsi_weak_alpha", {"thm5.1"}, {"alpha", "R"}, true,
       [](const FormulaInputs& in) { return from_regime(lsi_weak_alpha(in.p.get("alpha"), in.p.get("R"), in.n)); }},
      {"lsi_weak_alpha_general", {"thm5.1-general"}, {"alpha"}, true,
       [](const FormulaInputs& in) {
         if (!in.kappa_matrix) throw InputError("--kappa-matrix is required here");
         const Matrix k = parse_matrix_arg(*in.kappa_matrix, "kappa matrix");
         FormulaRow r;
         r.regime = "general";
         const std::string eps = in.epsilon.value_or("auto");
         if (eps == "auto") {
           const WeakLsiResult w = lsi_weak_alpha_general_auto(in.p.get("alpha"), k, in.n);
           r.value = w.value;
           r.extra["epsilon"] = w.epsilon;
           r.extra["grid_fallback"] = w.grid_fallback;
         } else {
           double e = 0.0;
           try {
             e = std::stod(eps);
           } catch (const std::exception&) {
             throw InputError("--epsilon must be a number or \"auto\"");
           }
           r.value = lsi_weak_alpha_general(in.p.get("alpha"), k, in.n, e);
           r.extra["epsilon"] = e;
         }
         r.inputs["kappa_matrix"] = io::from_matrix(k);
         return r;
       }},
      {"lsi_markov_kernel_alpha", {"cor6.1"}, {"alpha", "kappa"}, true,
       [](const FormulaInputs& in) { return from_regime(lsi_markov_kernel_alpha(in.p.get("alpha"), in.p.get("kappa"), in.n)); }},
      {"contraction_noise_alpha", {"prop4.1"}, {"alpha", "L"}, true,
       [](const FormulaInputs& in) { return from_regime(contraction_noise_alpha(in.p.get("alpha"), in.p.get("L"), in.n)); }},
      {"arma_lsi_alpha", {"prop4.2"}, {}, false,
       [](const FormulaInputs& in) {
         if (!in.A) throw InputError("--A is required here");
         const Matrix A = parse_matrix_arg(*in.A, "A");
         const Matrix B = in.B ? parse_matrix_arg(*in.B, "B") : Matrix::Identity(A.rows(), A.cols());
         const ArmaLsi a = arma_lsi_alpha(A, B, in.p.get_or("series-tol", 1e-12));
         FormulaRow r;
         r.value = a.value;
         r.regime = "contractive";
         r.inputs["A"] = io::from_matrix(A);
         r.inputs["B"] = io::from_matrix(B);
         r.extra["spectral_radius"] = a.spectral_radius;
         r.extra["series"] = a.series;
         r.extra["terms"] = a.terms;
         return r;
       }},
      {"ou_kappa", {"ex6.3"}, {"rho", "tau", "x"}, true,
       [](const FormulaInputs& in) {
         const OuConstants o = ou_kappa(in.p.get("rho"), in.p.get("tau"), in.n, in.p.get_or("x", 0.0));
         FormulaRow r;
         r.value = o.kappa_n;
         r.regime = regime_vs(o.theta, 1.0);
         r.extra["theta"] = o.theta;
         r.extra["sigma2"] = o.sigma2;
         r.extra["mean_Fn"] = o.mean_Fn;
         return r;
       }},
  };
  return table;
}

const Formula& find_formula(const std::string& name) {
  for (const auto& f : formulas()) {
    if (f.id == name) return f;
    for (const auto& a : f.aliases)
      if (a == name) return f;
  }
  throw InputError("unknown formula \"" + name + "\"");
}

std::string inputs_text(const json& inputs) {
  std::string s;
  for (auto it = inputs.begin(); it != inputs.end(); ++it) {
    if (!s.empty()) s += ";";
    s += it.key() + "=" + (it.value().is_number_float() ? format_number(it.value().get<double>()) : it.value().dump());
  }
  return s;
}

// --- verify-ou --------------------------------------------------------------

Result verify_ou(double rho, double tau, std::size_t n, double x, const Common& c, json& config) {
  Result r;
  r.table.columns = {"check", "s", "value", "reference", "error", "bound", "pass"};
  const OuConstants o = ou_kappa(rho, tau, n, x);
  const double direct = gc_markov_kappa(o.sigma2, o.theta, n);
  const double rel = std::abs(o.kappa_n - direct) / std::abs(direct);
  const double rel_tol = c.tol_or(1e-12);
  bool all = rel <= rel_tol;
  r.table.rows.push_back({"kappa_identity", nullptr, o.kappa_n, direct, rel, rel_tol, rel <= rel_tol});
  r.body["theta"] = o.theta;
  r.body["sigma2"] = o.sigma2;
  r.body["kappa_n"] = o.kappa_n;
  r.body["mean_Fn"] = o.mean_Fn;
  r.body["kappa_direct"] = direct;
  r.body["kappa_relative_error"] = rel;

  const std::size_t samples = c.has_samples() ? c.samples : 100000;
  config["samples"] = samples;
  json mgf = json::array();
  if (samples > 0) {
    const SamplePaths paths = simulate_joint(MarkovModel::ou(rho, tau, x), n, samples, c.seed, c.workers);
    std::vector<double> f(samples);
    for (std::size_t p = 0; p < samples; ++p) {
      KahanSum s;
      for (std::size_t k = 0; k < n; ++k) s.add(paths.at(p, k));
      f[p] = s.value();
    }
    for (double s : {-1.0, -0.5, -0.25, 0.25, 0.5, 1.0}) {
      // log-mean of e^{s F} with a shift for range, and its delta-method error.
      double shift = -std::numeric_limits<double>::infinity();
      for (double v : f) shift = std::max(shift, s * v);
      KahanSum m1, m2;
      for (double v : f) {
        const double e = std::exp(s * v - shift);
        m1.add(e);
        m2.add(e * e);
      }
      const double N = static_cast<double>(samples);
      const double mean = m1.value() / N;
      const double var = std::max(0.0, m2.value() / N - mean * mean) * N / std::max(1.0, N - 1.0);
      const double se = std::sqrt(var / N) / mean;
      const double empirical = shift + std::log(mean);
      const double exact = s * o.mean_Fn + 0.5 * s * s * o.kappa_n;
      const double err = std::abs(empirical - exact);
      const bool ok = err <= 3.0 * se;
      all = all && ok;
      r.table.rows.push_back({"mgf", s, empirical, exact, err, 3.0 * se, ok});
      mgf.push_back({{"s", s}, {"empirical", empirical}, {"exact", exact}, {"std_error", se}, {"pass", ok}});
    }
  }
  r.body["mgf"] = std::move(mgf);
  r.body["pass"] = all;
  r.code = all ? kExitOk : kExitFailed;
  return r;
}

// --- verify-arma ------------------------------------------------------------

double spectral_radius(const Matrix& a) { return a.eigenvalues().cwiseAbs().maxCoeff(); }

Result verify_arma(const std::vector<std::pair<Matrix, Matrix>>& instances, std::size_t n_max, double tol) {
  Result r;
  r.table.columns = {"instance", "dim", "spectral_radius", "alpha", "min_inverse_lambda_max", "worst_n", "pass"};
  bool all = true;
  json rows = json::array();
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& [A, B] = instances[i];
    const ArmaLsi a = arma_lsi_alpha(A, B);
    double best = std::numeric_limits<double>::infinity();
    std::size_t worst_n = 1;
    for (std::size_t n = 1; n <= n_max; ++n) {
      const Matrix cov = arma_joint_covariance(A, B, n);
      const double lmax = Eigen::SelfAdjointEigenSolver<Matrix>(cov, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
      if (1.0 / lmax < best) {
        best = 1.0 / lmax;
        worst_n = n;
      }
    }
    const bool ok = a.value <= best + tol;
    all = all && ok;
    r.table.rows.push_back({i, A.rows(), a.spectral_radius, a.value, best, worst_n, ok});
    rows.push_back({{"instance", i},
                    {"A", io::from_matrix(A)},
                    {"B", io::from_matrix(B)},
                    {"spectral_radius", a.spectral_radius},
                    {"alpha", a.value},
                    {"min_inverse_lambda_max", best},
                    {"worst_n", worst_n},
                    {"pass", ok}});
  }
  r.body["instances"] = std::move(rows);
  r.body["pass"] = all;
  r.code = all ? kExitOk : kExitFailed;
  return r;
}

std::vector<std::pair<Matrix, Matrix>> random_arma_instances(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> radius(0.2, 0.9);
  std::vector<std::pair<Matrix, Matrix>> out;
  while (out.size() < count) {
    const Eigen::Index d = out.size() % 2 == 0 ? 2 : 3;
    Matrix A(d, d);
    for (Eigen::Index i = 0; i < A.size(); ++i) A(i) = normal(rng);
    const double rho = spectral_radius(A);
    if (!(rho > 1e-8)) continue;
    A *= radius(rng) / rho;
    out.emplace_back(A, Matrix::Identity(d, d));
  }
  return out;
}

// --- certify ----------------------------------------------------------------

void certificate_table(Result& r, const Certificate& cert) {
  r.table.columns = {"inequality", "constant", "s", "worst_slack", "pass", "search_size", "tolerance", "family",
                     "witness_label", "witness_t"};
  r.table.rows.push_back({to_string(cert.inequality), cert.constant, cert.order_s, cert.worst_slack, cert.pass,
                          cert.search_size, cert.tolerance, cert.family, cert.witness_label, cert.witness_t});
}

std::string verdict_line(const Certificate& cert) {
  std::ostringstream os;
  os << (cert.pass ? "PASS " : "FAIL ") << to_string(cert.inequality) << "(" << format_number(cert.constant) << ")";
  if (cert.inequality == Inequality::transport) os << " s=" << format_number(cert.order_s);
  os << " worst_slack=" << format_number(cert.worst_slack) << " over " << cert.search_size << " members; witness "
     << cert.witness_label;
  if (cert.inequality == Inequality::gc) os << " at t=" << format_number(cert.witness_t);
  return os.str();
}

// --- logging ----------------------------------------------------------------

void setup_logging() {
  auto logger = spdlog::get("concentra");
  if (!logger) {
    logger = spdlog::stderr_color_mt("concentra");
    spdlog::set_default_logger(logger);
  }
  const char* env = std::getenv("CONCENTRA_LOG");
  spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  setup_logging();

  CLI::App app{"Wasserstein distances, relative entropies and concentration constants for dependent sequences",
               "concentra"};
  app.require_subcommand(1);
  Common common;
  Params params;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", common.seed, "random seed (default 0)");
    sub->add_option("--samples", common.samples, "Monte Carlo sample or path count");
    sub->add_option("--tol", common.tol, "pass tolerance");
    sub->add_option("--workers", common.workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--format", common.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--out", common.out, "output file (default stdout)");
  };

  // constants
  auto* constants = app.add_subcommand("constants", "evaluate closed-form constants");
  std::vector<std::string> formula_names;
  std::vector<std::size_t> ns;
  std::optional<std::string> epsilon, kappa_matrix, mat_a, mat_b;
  constants->add_option("--formula", formula_names, "formula id or alias (repeatable, comma separated)")
      ->required()
      ->delimiter(',');
  constants->add_option("--n", ns, "sequence lengths (repeatable, comma separated)")->delimiter(',');
  for (const char* name : {"kappa1", "alpha", "L", "R", "M", "kappa", "s", "rho", "tau", "x", "series-tol"})
    params.add(constants, name, std::string("parameter ") + name);
  constants->add_option("--epsilon", epsilon, "epsilon for the general weak LSI constant, or auto");
  constants->add_option("--kappa-matrix", kappa_matrix, "coupling matrix as inline JSON or a JSON file");
  constants->add_option("--A", mat_a, "ARMA matrix A as inline JSON or a JSON file");
  constants->add_option("--B", mat_b, "ARMA matrix B as inline JSON or a JSON file (default identity)");
  add_common(constants);

  // wasserstein
  auto* wass = app.add_subcommand("wasserstein", "W_s between two measures");
  std::string mu_path, nu_path;
  double order_s = 1.0;
  wass->add_option("--mu", mu_path, "measure JSON")->required();
  wass->add_option("--nu", nu_path, "measure JSON")->required();
  wass->add_option("--s", order_s, "order s in [1, 2]");
  add_common(wass);

  // entropy
  auto* ent = app.add_subcommand("entropy", "relative entropy Ent(nu | mu)");
  std::size_t ent_n = 0;
  ent->add_option("--nu", nu_path, "measure, joint law or model JSON")->required();
  ent->add_option("--mu", mu_path, "measure, joint law or model JSON")->required();
  ent->add_option("--n", ent_n, "sequence length when comparing models");
  add_common(ent);

  // certify
  auto* cert = app.add_subcommand("certify", "empirically certify GC, T_s or LSI");
  std::string kind = "gc", density_path, replay_path;
  std::vector<double> best;
  Params cparams;
  cert->add_option("--kind", kind, "gc, transport, lsi or duality")
      ->check(CLI::IsMember({"gc", "transport", "lsi", "duality"}));
  cert->add_option("--mu", mu_path, "measure JSON (gc, transport, duality)");
  cert->add_option("--density", density_path, "grid density JSON (lsi; default standard Gaussian)");
  cert->add_option("--replay", replay_path, "re-evaluate the witness of a certificate JSON");
  cert->add_option("--best", best, "bisect the best constant in [lo, hi]")->expected(2)->delimiter(',');
  for (const char* name : {"kappa", "alpha", "s"}) cparams.add(cert, name, std::string("parameter ") + name);
  add_common(cert);

  // simulate
  auto* sim = app.add_subcommand("simulate", "simulate sample paths");
  std::string model_path;
  std::size_t sim_n = 1;
  sim->add_option("--model", model_path, "model JSON")->required();
  sim->add_option("--n", sim_n, "steps per path")->required();
  add_common(sim);

  // couple
  auto* couple = app.add_subcommand("couple", "recursive coupling bound and transport audit");
  std::string p_path;
  std::vector<std::string> q_paths;
  std::size_t couple_n = 0, quantiles = 128, atom_budget = 500000;
  Params aparams;
  couple->add_option("--p", p_path, "reference model or joint law JSON")->required();
  couple->add_option("--q", q_paths, "perturbed model or joint law JSON (repeatable)");
  couple->add_option("--n", couple_n, "sequence length (models only)");
  couple->add_option("--s", order_s, "order s in [1, 2]");
  couple->add_option("--quantiles", quantiles, "quantiles per continuous kernel");
  couple->add_option("--atom-budget", atom_budget, "largest coupled history");
  aparams.add(couple, "alpha", "audit: T_s constant of the kernels");
  aparams.add(couple, "L", "audit: dependence coefficient");
  add_common(couple);

  // verify-ou
  auto* vou = app.add_subcommand("verify-ou", "OU constant identity and MGF check");
  double rho = 1.0, tau = 0.5, xstart = 0.0;
  std::size_t ou_n = 5;
  vou->add_option("--rho", rho, "mean reversion rate");
  vou->add_option("--tau", tau, "sampling interval");
  vou->add_option("--n", ou_n, "number of observations");
  vou->add_option("--x", xstart, "starting point");
  add_common(vou);

  // verify-arma
  auto* varma = app.add_subcommand("verify-arma", "ARMA LSI constant against exact Gaussian constants");
  std::size_t arma_n = 10, instances = 50;
  varma->add_option("--model", model_path, "ARMA model JSON (default: seeded random instances)");
  varma->add_option("--n", arma_n, "largest sequence length");
  varma->add_option("--instances", instances, "random instance count");
  add_common(varma);

  std::vector<const char*> argv{"concentra"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return kExitInput;
  }

  CLI::App* sub = app.get_subcommands().front();
  common.samples_opt = sub->get_option("--samples");
  common.tol_opt = sub->get_option("--tol");
  json config;
  config["command"] = sub->get_name();
  config["seed"] = common.seed;
  if (common.has_samples()) config["samples"] = common.samples;
  if (common.has_tol()) config["tol"] = common.tol;
  config["workers"] = common.workers;
  config["format"] = common.format;
  config["out"] = common.out.empty() ? json(nullptr) : json(common.out);
  spdlog::debug("running {}", sub->get_name());

  Result result;
  try {
    const std::string name = sub->get_name();
    if (name == "constants") {
      params.echo(config);
      if (ns.empty()) ns.push_back(1);
      config["formula"] = formula_names;
      config["n"] = ns;
      if (epsilon) config["epsilon"] = *epsilon;
      if (kappa_matrix) config["kappa_matrix"] = *kappa_matrix;
      if (mat_a) config["A"] = *mat_a;
      if (mat_b) config["B"] = *mat_b;
      result.table.columns = {"formula_id", "inputs", "regime", "value"};
      json rows = json::array();
      for (const auto& fname : formula_names) {
        const Formula& f = find_formula(fname);
        const std::vector<std::size_t> lengths = f.uses_n ? ns : std::vector<std::size_t>{0};
        for (std::size_t n : lengths) {
          FormulaInputs in{params, n, epsilon, kappa_matrix, mat_a, mat_b};
          FormulaRow row = f.eval(in);
          json inputs = json::object();
          for (const auto& pname : f.params)
            if (params.has(pname)) inputs[pname] = params.values.at(pname);
          if (f.id == "ou_kappa") inputs["x"] = params.get_or("x", 0.0);
          if (f.id == "lsi_weak_alpha_general") inputs["epsilon"] = row.extra.at("epsilon");
          if (f.uses_n) inputs["n"] = n;
          result.table.rows.push_back({f.id, inputs_text(inputs), row.regime, row.value});
          for (auto it = row.inputs.begin(); it != row.inputs.end(); ++it) inputs[it.key()] = it.value();
          json jr = {{"formula_id", f.id}, {"inputs", inputs}, {"regime", row.regime}, {"value", io::number(row.value)}};
          for (auto it = row.extra.begin(); it != row.extra.end(); ++it) jr[it.key()] = it.value();
          rows.push_back(std::move(jr));
        }
      }
      result.body["rows"] = std::move(rows);
    } else if (name == "wasserstein") {
      config["mu"] = mu_path;
      config["nu"] = nu_path;
      config["s"] = order_s;
      const auto mu = io::read_measure(io::read_json_file(mu_path));
      const auto nu = io::read_measure(io::read_json_file(nu_path));
      double w = 0.0;
      std::optional<WassersteinResult> exact;
      if (std::holds_alternative<GaussianMeasure>(mu) || std::holds_alternative<GaussianMeasure>(nu)) {
        if (!std::holds_alternative<GaussianMeasure>(mu) || !std::holds_alternative<GaussianMeasure>(nu))
          throw InputError("Gaussian measures can only be compared with Gaussian measures");
        if (order_s != 2.0) throw InputError("the Gaussian closed form needs --s 2");
        w = wasserstein_gaussian_w2(std::get<GaussianMeasure>(mu), std::get<GaussianMeasure>(nu));
      } else {
        const auto& a = std::get<DiscreteMeasure>(mu);
        const auto& b = std::get<DiscreteMeasure>(nu);
        if (a.is_line() && b.is_line() && static_cast<double>(a.size()) * static_cast<double>(b.size()) > 1e6) {
          w = wasserstein_1d(a, b, order_s);
        } else {
          exact = wasserstein_exact(a, b, order_s);
          w = exact->value;
        }
      }
      result.body = io::write_transport(w, order_s, exact ? &exact->plan : nullptr);
      result.table.columns = {"w", "s"};
      result.table.rows.push_back({w, order_s});
    } else if (name == "entropy") {
      config["nu"] = nu_path;
      config["mu"] = mu_path;
      if (ent_n) config["n"] = ent_n;
      const json jn = io::read_json_file(nu_path), jm = io::read_json_file(mu_path);
      std::optional<EntropyBreakdown> breakdown;
      double value = 0.0;
      if (io::is_joint_law(jn) || io::is_model(jn)) {
        if (io::is_model(jn) && io::is_model(jm) && io::read_model(jn).is_scalar_gaussian()) {
          if (ent_n == 0) throw InputError("--n is required when comparing Gaussian chains");
          breakdown = gaussian_chain_breakdown(io::read_model(jn), io::read_model(jm), ent_n);
        } else {
          auto to_joint = [&](const json& j, std::size_t n) {
            if (io::is_joint_law(j)) return io::read_joint_law(j);
            const MarkovModel m = io::read_model(j);
            if (!m.is_tabular()) throw InputError("only tabular models have joint tables");
            if (n == 0) throw InputError("--n is required for a model without a joint law partner");
            return tabular_joint_law(m, n);
          };
          std::size_t n = ent_n;
          if (n == 0 && io::is_joint_law(jn)) n = io::read_joint_law(jn).n;
          if (n == 0 && io::is_joint_law(jm)) n = io::read_joint_law(jm).n;
          breakdown = chain_rule_decompose(to_joint(jn, n), to_joint(jm, n));
        }
        value = breakdown->total;
        result.body = io::write_breakdown(*breakdown);
        result.table.columns = {"term", "step", "value"};
        result.table.rows.push_back({"total", nullptr, breakdown->total});
        result.table.rows.push_back({"initial", 1, breakdown->initial_term});
        for (std::size_t k = 0; k < breakdown->conditional_terms.size(); ++k)
          result.table.rows.push_back({"conditional", k + 2, breakdown->conditional_terms[k]});
      } else {
        const auto nu = io::read_measure(jn), mu = io::read_measure(jm);
        if (std::holds_alternative<GaussianMeasure>(nu) && std::holds_alternative<GaussianMeasure>(mu))
          value = relative_entropy_gaussian(std::get<GaussianMeasure>(nu), std::get<GaussianMeasure>(mu));
        else
          value = relative_entropy_discrete(require_discrete(nu, "nu"), require_discrete(mu, "mu"));
        result.body["ent"] = io::number(value);
        result.table.columns = {"ent"};
        result.table.rows.push_back({value});
      }
      spdlog::debug("entropy {}", value);
    } else if (name == "certify") {
      cparams.echo(config);
      config["kind"] = kind;
      if (!mu_path.empty()) config["mu"] = mu_path;
      if (!density_path.empty()) config["density"] = density_path;
      if (!replay_path.empty()) config["replay"] = replay_path;
      if (!best.empty()) config["best"] = best;

      GridDensity density;
      std::optional<DiscreteMeasure> mu;
      if (kind == "lsi") {
        density = density_path.empty() ? standard_gaussian_grid() : io::read_grid(io::read_json_file(density_path));
      } else {
        if (mu_path.empty()) throw InputError("--mu is required for --kind " + kind);
        mu = require_discrete(io::read_measure(io::read_json_file(mu_path)), "mu");
      }
      const double s = cparams.get_or("s", 1.0);
      auto run_check = [&](double constant) -> Certificate {
        if (kind == "gc") {
          GcOptions o;
          o.seed = common.seed;
          o.workers = common.workers;
          o.tolerance = common.tol_or(o.tolerance);
          return check_gc(*mu, constant, o);
        }
        if (kind == "transport") {
          TransportOptions o;
          o.workers = common.workers;
          o.tolerance = common.tol_or(o.tolerance);
          o.family_label = "exponential tilts and random reweightings";
          return check_transport(*mu, constant, s, transport_default_family(*mu, common.seed), o);
        }
        LsiOptions o;
        o.workers = common.workers;
        o.base_tolerance = common.tol_or(o.base_tolerance);
        return check_lsi_grid(density, constant, lsi_default_family(density, common.seed), o);
      };

      if (!replay_path.empty()) {
        const Certificate c = io::read_certificate(io::read_json_file(replay_path));
        const double slack = c.inequality == Inequality::lsi ? replay(c, density) : replay(c, *mu);
        const bool pass = slack <= c.tolerance + c.allowance;
        result.body["replayed_slack"] = io::number(slack);
        result.body["recorded_slack"] = io::number(c.worst_slack);
        result.body["pass"] = pass;
        result.table.columns = {"inequality", "constant", "recorded_slack", "replayed_slack", "pass"};
        result.table.rows.push_back({to_string(c.inequality), c.constant, c.worst_slack, slack, pass});
        result.code = pass ? kExitOk : kExitFailed;
      } else if (kind == "duality") {
        const DualityReport d = check_bg_duality(*mu, cparams.get("kappa"), common.seed);
        result.body["gc"] = io::write_certificate(d.gc);
        result.body["t1"] = io::write_certificate(d.t1);
        result.body["agree"] = d.agree;
        result.table.columns = {"gc_pass", "gc_worst_slack", "t1_pass", "t1_worst_slack", "agree"};
        result.table.rows.push_back({d.gc.pass, d.gc.worst_slack, d.t1.pass, d.t1.worst_slack, d.agree});
        err << verdict_line(d.gc) << "\n" << verdict_line(d.t1) << "\n";
        result.code = d.agree ? kExitOk : kExitFailed;
      } else if (!best.empty()) {
        const Weaker weaker = kind == "gc" ? Weaker::larger : Weaker::smaller;
        const BestConstant b = best_constant([&](double v) { return run_check(v).pass; }, best[0], best[1], weaker);
        result.body["best"] = b.value;
        result.body["lo"] = b.lo;
        result.body["hi"] = b.hi;
        result.body["degenerate"] = b.degenerate;
        json trace = json::array();
        for (const auto& [v, ok] : b.trace) trace.push_back({{"constant", v}, {"pass", ok}});
        result.body["trace"] = std::move(trace);
        result.table.columns = {"inequality", "best", "lo", "hi", "degenerate"};
        result.table.rows.push_back({kind, b.value, b.lo, b.hi, b.degenerate});
      } else {
        const double constant = kind == "gc" ? cparams.get("kappa") : cparams.get("alpha");
        const Certificate c = run_check(constant);
        result.body = io::write_certificate(c);
        certificate_table(result, c);
        err << verdict_line(c) << "\n";
        result.code = c.pass ? kExitOk : kExitFailed;
      }
    } else if (name == "simulate") {
      config["model"] = model_path;
      config["n"] = sim_n;
      const std::size_t paths = common.has_samples() ? common.samples : 1000;
      config["samples"] = paths;
      const MarkovModel m = io::read_model(io::read_json_file(model_path));
      const SamplePaths sp = simulate_joint(m, sim_n, paths, common.seed, common.workers);
      result.table.columns = {"path"};
      for (std::size_t k = 0; k < sp.steps; ++k)
        for (std::size_t c = 0; c < sp.dim; ++c)
          result.table.columns.push_back(sp.dim == 1 ? "x" + std::to_string(k + 1)
                                                     : "x" + std::to_string(k + 1) + "_" + std::to_string(c + 1));
      json all = json::array();
      for (std::size_t p = 0; p < sp.paths; ++p) {
        std::vector<json> row{p};
        json jp = json::array();
        for (std::size_t k = 0; k < sp.steps; ++k)
          for (std::size_t c = 0; c < sp.dim; ++c) {
            row.push_back(sp.at(p, k, c));
            jp.push_back(sp.at(p, k, c));
          }
        result.table.rows.push_back(std::move(row));
        all.push_back(std::move(jp));
      }
      result.body["model"] = io::write_model(m);
      result.body["paths"] = std::move(all);
    } else if (name == "couple") {
      config["p"] = p_path;
      config["q"] = q_paths;
      config["s"] = order_s;
      config["quantiles"] = quantiles;
      config["atom_budget"] = atom_budget;
      if (couple_n) config["n"] = couple_n;
      aparams.echo(config);
      CouplingOptions copt;
      copt.quantiles = quantiles;
      copt.atom_budget = atom_budget;
      const json jp = io::read_json_file(p_path);
      const bool audit = aparams.has("alpha") || aparams.has("L");
      if (audit) {
        const MarkovModel p = io::read_model(jp);
        if (couple_n == 0) throw InputError("--n is required");
        AuditOptions aopt;
        aopt.tolerance = common.tol_or(aopt.tolerance);
        aopt.coupling = copt;
        aopt.seed = common.seed;
        std::vector<MarkovModel> models;
        std::vector<JointLaw> laws;
        for (const auto& path : q_paths) {
          const json jq = io::read_json_file(path);
          if (io::is_joint_law(jq)) laws.push_back(io::read_joint_law(jq));
          else models.push_back(io::read_model(jq));
        }
        if (!models.empty() && !laws.empty()) throw InputError("mixing model and joint-law perturbations is not supported");
        const AuditReport rep = laws.empty()
                                    ? transport_inequality_audit(p, aparams.get("alpha"), order_s, aparams.get("L"), couple_n, models, aopt)
                                    : transport_inequality_audit(p, aparams.get("alpha"), order_s, aparams.get("L"), couple_n, laws, aopt);
        result.body = io::write_audit(rep);
        result.table.columns = {"label", "w", "w_method", "w_bound", "entropy", "slack", "alpha_n"};
        for (const auto& e : rep.entries)
          result.table.rows.push_back({e.label, e.w, e.w_method, e.w_bound, e.entropy, e.slack, rep.alpha_n.value});
        result.code = rep.pass ? kExitOk : kExitFailed;
      } else {
        if (q_paths.size() != 1) throw InputError("exactly one --q is required for a coupling bound");
        const json jq = io::read_json_file(q_paths.front());
        CouplingBound b;
        if (io::is_joint_law(jp) || io::is_joint_law(jq)) {
          if (!io::is_joint_law(jp) || !io::is_joint_law(jq)) throw InputError("both sides must be joint laws");
          b = recursive_coupling_bound(io::read_joint_law(jp), io::read_joint_law(jq), order_s, copt);
        } else {
          if (couple_n == 0) throw InputError("--n is required");
          b = recursive_coupling_bound(io::read_model(jp), io::read_model(jq), couple_n, order_s, copt);
        }
        result.body = io::write_coupling(b);
        result.table.columns = {"step", "d_k"};
        for (std::size_t k = 0; k < b.step_costs.size(); ++k) result.table.rows.push_back({k + 1, b.step_costs[k]});
        result.table.rows.push_back({"upper_bound", b.upper_bound});
        result.table.rows.push_back({"error_budget", b.error_budget});
      }
    } else if (name == "verify-ou") {
      config["rho"] = rho;
      config["tau"] = tau;
      config["n"] = ou_n;
      config["x"] = xstart;
      result = verify_ou(rho, tau, ou_n, xstart, common, config);
    } else if (name == "verify-arma") {
      config["n"] = arma_n;
      std::vector<std::pair<Matrix, Matrix>> inst;
      if (!model_path.empty()) {
        config["model"] = model_path;
        const MarkovModel m = io::read_model(io::read_json_file(model_path));
        if (m.kind() != ModelKind::arma) throw InputError("verify-arma needs an arma model");
        inst.emplace_back(m.as_arma().A, m.as_arma().B);
      } else {
        config["instances"] = instances;
        inst = random_arma_instances(instances, common.seed);
      }
      const double tol = common.tol_or(1e-9);
      config["tol"] = tol;
      result = verify_arma(inst, arma_n, tol);
    }
  } catch (const InputError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const json::exception& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ResourceError& e) {
    err << "resource error: " << e.what() << "\n";
    return kExitInternal;
  } catch (const InternalError& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }

  if (common.out.empty()) {
    render(out, config, result, common.format);
  } else {
    std::ofstream file(common.out);
    if (!file) {
      err << "input error: cannot write " << common.out << "\n";
      return kExitInput;
    }
    render(file, config, result, common.format);
  }
  return result.code;
}

}  // namespace concentra::cli
