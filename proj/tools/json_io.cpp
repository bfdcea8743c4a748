#include "json_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "concentra/error.hpp"

namespace concentra::io {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw InputError(msg); }

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) fail(std::string("missing field \"") + key + "\"");
  return j.at(key);
}

std::vector<double> to_doubles(const json& j, const char* what) {
  if (!j.is_array()) fail(std::string(what) + " must be an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) out.push_back(get_number(v, what));
  return out;
}

std::size_t to_count(const json& j, const char* what) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) {
    if (j.is_number_float() && std::floor(j.get<double>()) == j.get<double>() && j.get<double>() >= 0.0)
      return static_cast<std::size_t>(j.get<double>());
    fail(std::string(what) + " must be a nonnegative integer");
  }
  const auto v = j.get<long long>();
  if (v < 0) fail(std::string(what) + " must be a nonnegative integer");
  return static_cast<std::size_t>(v);
}

std::string type_of(const json& j) {
  if (!j.is_object()) fail("expected a JSON object");
  if (!j.contains("type") || !j.at("type").is_string()) fail("missing string field \"type\"");
  return j.at("type").get<std::string>();
}

}  // namespace

json number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double get_number(const json& j, const char* what) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  fail(std::string(what) + " must be a number");
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail(path + ": " + e.what());
  }
}

Matrix to_matrix(const json& j, const char* what) {
  if (!j.is_array() || j.empty()) fail(std::string(what) + " must be a nonempty array of rows");
  const std::size_t rows = j.size();
  const std::size_t cols = j.at(0).is_array() ? j.at(0).size() : 0;
  if (cols == 0) fail(std::string(what) + " rows must be nonempty arrays");
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = to_doubles(j.at(r), what);
    if (row.size() != cols) fail(std::string(what) + " is ragged");
    for (std::size_t c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
  }
  return m;
}

Vector to_vector(const json& j, const char* what) {
  const auto v = to_doubles(j, what);
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json from_matrix(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(number(m(r, c)));
    out.push_back(std::move(row));
  }
  return out;
}

json from_vector(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number(v(i)));
  return out;
}

// --- spaces and measures ----------------------------------------------------

SpacePtr read_space(const json& j) {
  if (type_of(j) != "finite") fail("a metric space must have type \"finite\"");
  const auto& labels = field(j, "labels");
  if (!labels.is_array()) fail("labels must be an array of strings");
  std::vector<std::string> names;
  for (const auto& l : labels) {
    if (!l.is_string()) fail("labels must be strings");
    names.push_back(l.get<std::string>());
  }
  return std::make_shared<const FiniteMetricSpace>(std::move(names), to_matrix(field(j, "dist"), "dist"));
}

json write_space(const FiniteMetricSpace& space) {
  json j;
  j["type"] = "finite";
  j["labels"] = space.labels();
  j["dist"] = from_matrix(space.dist());
  return j;
}

AnyMeasure read_measure(const json& j) {
  const std::string type = type_of(j);
  if (type == "finite") {
    SpacePtr space = read_space(j);
    std::vector<std::size_t> idx(space->size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::vector<double> w(idx.size(), 1.0 / static_cast<double>(idx.size()));
    return DiscreteMeasure::on_space(space, std::move(idx), std::move(w));
  }
  if (type == "gaussian") {
    const Vector mean = to_vector(field(j, "mean"), "mean");
    return GaussianMeasure(mean, to_matrix(field(j, "cov"), "cov"));
  }
  if (type != "discrete") fail("unknown measure type \"" + type + "\"");
  const auto& support = field(j, "support");
  std::vector<double> weights = to_doubles(field(j, "weights"), "weights");
  if (!support.is_array() || support.size() != weights.size())
    fail("support and weights must be arrays of equal length");
  if (j.contains("space")) {
    SpacePtr space = read_space(j.at("space"));
    std::vector<std::size_t> idx;
    for (const auto& p : support) {
      if (p.is_string()) {
        const auto k = space->index_of(p.get<std::string>());
        if (!k) fail("support label \"" + p.get<std::string>() + "\" is not in the space");
        idx.push_back(*k);
      } else {
        const std::size_t k = to_count(p, "support index");
        if (k >= space->size()) fail("support index out of range");
        idx.push_back(k);
      }
    }
    return DiscreteMeasure::on_space(space, std::move(idx), std::move(weights));
  }
  if (!support.empty() && support.at(0).is_array()) {
    RealSpace rs;
    rs.dim = support.at(0).size();
    if (j.contains("p")) rs.p = get_number(j.at("p"), "p");
    std::vector<double> coords;
    for (const auto& p : support) {
      const auto v = to_doubles(p, "support point");
      if (v.size() != rs.dim) fail("support points must share one dimension");
      coords.insert(coords.end(), v.begin(), v.end());
    }
    return DiscreteMeasure::on_reals(rs, std::move(coords), std::move(weights));
  }
  return DiscreteMeasure::on_line(to_doubles(support, "support"), std::move(weights));
}

json write_measure(const DiscreteMeasure& mu) {
  json j;
  j["type"] = "discrete";
  json support = json::array();
  if (mu.on_finite_space()) {
    j["space"] = write_space(*mu.space());
    for (std::size_t i = 0; i < mu.size(); ++i) support.push_back(mu.space()->labels()[mu.index(i)]);
  } else if (mu.is_line()) {
    for (std::size_t i = 0; i < mu.size(); ++i) support.push_back(mu.real(i));
  } else {
    j["p"] = mu.real_space().p;
    for (std::size_t i = 0; i < mu.size(); ++i) {
      const auto pt = mu.point(i);
      support.push_back(std::vector<double>(pt.begin(), pt.end()));
    }
  }
  j["support"] = std::move(support);
  j["weights"] = std::vector<double>(mu.weights().begin(), mu.weights().end());
  return j;
}

json write_measure(const GaussianMeasure& mu) {
  json j;
  j["type"] = "gaussian";
  j["mean"] = from_vector(mu.mean());
  j["cov"] = from_matrix(mu.cov());
  return j;
}

// --- joint laws and models --------------------------------------------------

bool is_joint_law(const json& j) { return j.is_object() && j.value("type", "") == "joint"; }
bool is_model(const json& j) { return j.is_object() && j.contains("kind"); }

JointLaw read_joint_law(const json& j) {
  if (type_of(j) != "joint") fail("a joint law must have type \"joint\"");
  const std::size_t n = to_count(field(j, "n"), "n");
  std::vector<double> probs = to_doubles(field(j, "probs"), "probs");
  if (j.contains("states")) return make_joint_law_on_line(to_doubles(j.at("states"), "states"), n, std::move(probs));
  std::vector<double> values;
  if (j.contains("values")) values = to_doubles(j.at("values"), "values");
  return make_joint_law(read_space(field(j, "space")), n, std::move(probs), std::move(values));
}

json write_joint_law(const JointLaw& law) {
  json j;
  j["type"] = "joint";
  j["space"] = write_space(*law.base);
  j["values"] = law.values;
  j["n"] = law.n;
  j["probs"] = law.probs;
  return j;
}

MarkovModel read_model(const json& j) {
  if (!is_model(j)) fail("a model needs a \"kind\" field");
  const std::string kind = j.at("kind").get<std::string>();
  auto num = [&](const char* key, double fallback) {
    return j.contains(key) ? get_number(j.at(key), key) : fallback;
  };
  if (kind == "ou") return MarkovModel::ou(get_number(field(j, "rho"), "rho"), get_number(field(j, "tau"), "tau"), num("x0", 0.0));
  if (kind == "gaussian_kernel") {
    const double theta = get_number(field(j, "theta"), "theta");
    const double sigma2 = num("sigma2", 1.0);
    if (j.contains("init_mean") || j.contains("init_var"))
      return MarkovModel::gaussian_kernel_with_init(theta, sigma2, num("init_mean", 0.0), num("init_var", sigma2));
    return MarkovModel::gaussian_kernel(theta, sigma2, num("x0", 0.0));
  }
  if (kind == "tabular") {
    Vector initial = to_vector(field(j, "initial"), "initial");
    Matrix transition = to_matrix(field(j, "transition"), "transition");
    if (j.contains("states"))
      return MarkovModel::tabular_on_line(to_doubles(j.at("states"), "states"), std::move(initial), std::move(transition));
    std::vector<double> values;
    if (j.contains("values")) values = to_doubles(j.at("values"), "values");
    return MarkovModel::tabular(read_space(field(j, "space")), std::move(values), std::move(initial),
                                std::move(transition));
  }
  if (kind == "arma") return MarkovModel::arma(to_matrix(field(j, "A"), "A"), to_matrix(field(j, "B"), "B"));
  if (kind == "contraction_noise") {
    return MarkovModel::linear_contraction_noise(to_matrix(field(j, "A"), "A"), get_number(field(j, "lipschitz"), "lipschitz"),
                                                 to_matrix(field(j, "noise_cov"), "noise_cov"),
                                                 to_vector(field(j, "init_mean"), "init_mean"));
  }
  fail("unknown model kind \"" + kind + "\"");
}

json write_model(const MarkovModel& m) {
  json j;
  j["kind"] = to_string(m.kind());
  switch (m.kind()) {
    case ModelKind::ou: {
      const auto& o = m.as_ou();
      j["rho"] = o.rho;
      j["tau"] = o.tau;
      j["x0"] = o.x0;
      break;
    }
    case ModelKind::gaussian_kernel: {
      const auto g = m.as_gaussian_kernel();
      j["theta"] = g.theta;
      j["sigma2"] = g.sigma2;
      j["init_mean"] = g.init_mean;
      j["init_var"] = g.init_var;
      break;
    }
    case ModelKind::tabular: {
      const auto& t = m.as_tabular();
      j["space"] = write_space(*t.space);
      j["values"] = t.values;
      j["initial"] = from_vector(t.initial);
      j["transition"] = from_matrix(t.transition);
      break;
    }
    case ModelKind::arma: {
      const auto& a = m.as_arma();
      j["A"] = from_matrix(a.A);
      j["B"] = from_matrix(a.B);
      break;
    }
    case ModelKind::contraction_noise: {
      const auto& c = m.as_contraction();
      if (!c.linear) fail("only linear contraction models can be serialized");
      j["A"] = from_matrix(*c.linear);
      j["lipschitz"] = c.lipschitz;
      j["noise_cov"] = from_matrix(c.noise_cov);
      j["init_mean"] = from_vector(c.init_mean);
      break;
    }
  }
  return j;
}

GridDensity read_grid(const json& j) {
  if (type_of(j) != "grid") fail("a grid density must have type \"grid\"");
  GridDensity g;
  g.x0 = get_number(field(j, "x0"), "x0");
  g.h = get_number(field(j, "h"), "h");
  g.values = to_doubles(field(j, "values"), "values");
  if (!(g.h > 0.0)) fail("grid spacing h must be positive");
  if (g.values.size() < 3) fail("a grid density needs at least 3 points");
  for (double v : g.values)
    if (!(v > 0.0) || !std::isfinite(v)) fail("grid density values must be positive and finite");
  return g;
}

json write_grid(const GridDensity& g) {
  json j;
  j["type"] = "grid";
  j["x0"] = g.x0;
  j["h"] = g.h;
  j["values"] = g.values;
  return j;
}

// --- results ----------------------------------------------------------------

json write_transport(double w, double s, const TransportPlan* plan) {
  json j;
  j["w"] = number(w);
  j["s"] = s;
  if (plan == nullptr || static_cast<double>(plan->weights.size()) > 1e6) {
    j["plan"] = nullptr;
  } else {
    json p;
    p["mu"] = write_measure(plan->row_measure);
    p["nu"] = write_measure(plan->col_measure);
    p["weights"] = from_matrix(plan->weights);
    p["cost"] = plan->cost;
    j["plan"] = std::move(p);
  }
  return j;
}

json write_breakdown(const EntropyBreakdown& b) {
  json j;
  j["total"] = number(b.total);
  j["initial"] = number(b.initial_term);
  json c = json::array();
  for (double v : b.conditional_terms) c.push_back(number(v));
  j["conditional"] = std::move(c);
  if (b.offending_step) j["offending_step"] = *b.offending_step;
  return j;
}

json write_certificate(const Certificate& c) {
  json j;
  j["inequality"] = c.inequality == Inequality::gc ? "gc" : c.inequality == Inequality::transport ? "transport" : "lsi";
  j["constant"] = number(c.constant);
  j["order_s"] = c.order_s;
  j["worst_slack"] = number(c.worst_slack);
  j["pass"] = c.pass;
  j["search_size"] = c.search_size;
  j["tolerance"] = c.tolerance;
  j["family"] = c.family;
  j["witness_index"] = c.witness_index;
  j["witness_label"] = c.witness_label;
  j["witness_t"] = c.witness_t;
  json wv = json::array();
  for (double v : c.witness_values) wv.push_back(number(v));
  j["witness_values"] = std::move(wv);
  j["witness_measure"] = c.witness_measure ? write_measure(*c.witness_measure) : json(nullptr);
  j["grid_h"] = c.grid_h;
  j["allowance"] = c.allowance;
  return j;
}

Certificate read_certificate(const json& j) {
  Certificate c;
  const std::string kind = field(j, "inequality").get<std::string>();
  if (kind == "gc" || kind == "GC") c.inequality = Inequality::gc;
  else if (kind == "transport" || kind == "T_s") c.inequality = Inequality::transport;
  else if (kind == "lsi" || kind == "LSI") c.inequality = Inequality::lsi;
  else fail("unknown inequality \"" + kind + "\"");
  c.constant = get_number(field(j, "constant"), "constant");
  c.order_s = get_number(field(j, "order_s"), "order_s");
  c.worst_slack = get_number(field(j, "worst_slack"), "worst_slack");
  c.pass = field(j, "pass").get<bool>();
  c.search_size = to_count(field(j, "search_size"), "search_size");
  c.tolerance = get_number(field(j, "tolerance"), "tolerance");
  c.family = field(j, "family").get<std::string>();
  c.witness_index = to_count(field(j, "witness_index"), "witness_index");
  c.witness_label = field(j, "witness_label").get<std::string>();
  c.witness_t = get_number(field(j, "witness_t"), "witness_t");
  c.witness_values = to_doubles(field(j, "witness_values"), "witness_values");
  const auto& wm = field(j, "witness_measure");
  if (!wm.is_null()) {
    auto m = read_measure(wm);
    if (!std::holds_alternative<DiscreteMeasure>(m)) fail("witness_measure must be discrete");
    c.witness_measure = std::get<DiscreteMeasure>(std::move(m));
  }
  c.grid_h = get_number(field(j, "grid_h"), "grid_h");
  c.allowance = get_number(field(j, "allowance"), "allowance");
  return c;
}

json write_coupling(const CouplingBound& b) {
  json j;
  j["upper_bound"] = b.upper_bound;
  j["s"] = b.s;
  j["step_costs"] = b.step_costs;
  j["method"] = b.method;
  j["error_budget"] = b.error_budget;
  j["peak_atoms"] = b.peak_atoms;
  return j;
}

json write_audit(const AuditReport& r) {
  json j;
  j["alpha_n"] = r.alpha_n.value;
  j["regime"] = to_string(r.alpha_n.regime);
  json entries = json::array();
  for (const auto& e : r.entries) {
    json x;
    x["label"] = e.label;
    x["w"] = number(e.w);
    x["w_method"] = e.w_method;
    x["w_bound"] = number(e.w_bound);
    x["entropy"] = number(e.entropy);
    x["slack"] = number(e.slack);
    entries.push_back(std::move(x));
  }
  j["entries"] = std::move(entries);
  j["worst_slack"] = number(r.worst_slack);
  j["tolerance"] = r.tolerance;
  j["pass"] = r.pass;
  return j;
}

}  // namespace concentra::io
