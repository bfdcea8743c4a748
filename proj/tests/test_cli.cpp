#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run call(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = concentra::cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("concentra_cli_" + std::to_string(std::rand()) + "_" +
                                        std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string write(const std::string& name, const std::string& text) const {
    const fs::path p = path / name;
    std::ofstream(p) << text;
    return p.string();
  }
};

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> v;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) v.push_back(l);
  return v;
}

std::vector<std::string> fields(const std::string& row) {
  std::vector<std::string> v;
  std::istringstream in(row);
  for (std::string f; std::getline(in, f, ',');) v.push_back(f);
  return v;
}

json body(const Run& r) { return json::parse(r.out); }

const char* kTwoPoint = R"({"type":"discrete","support":[0,1],"weights":[0.5,0.5]})";
const char* kSkewed = R"({"type":"discrete","support":[0,1],"weights":[0.25,0.75]})";

}  // namespace

TEST_CASE("constants example row") {
  const auto r = call({"constants", "--formula", "thm1.1", "--kappa1", "1", "--L", "1", "--n", "3"});
  REQUIRE(r.code == 0);
  const auto ls = lines(r.out);
  REQUIRE(ls.size() == 3u);
  CHECK(ls[0].rfind("# config: ", 0) == 0);
  CHECK(ls[1] == "formula_id,inputs,regime,value");
  const auto f = fields(ls[2]);
  REQUIRE(f.size() == 4u);
  CHECK(f[2] == "critical");
  CHECK(std::stod(f[3]) == 14.0);
  // echoed config is valid JSON and carries the defaults
  const json cfg = json::parse(ls[0].substr(10));
  CHECK(cfg["seed"] == 0);
  CHECK(cfg["command"] == "constants");
}

TEST_CASE("constants accept canonical ids and several lengths") {
  const auto r = call({"constants", "--formula", "gc_markov_kappa", "--kappa1", "1", "--L", "0.5", "--n", "1,2,3",
                       "--format", "json"});
  REQUIRE(r.code == 0);
  const json j = body(r);
  REQUIRE(j["rows"].size() == 3u);
  CHECK(j["rows"][0]["value"].get<double>() == doctest::Approx(1.0));
  CHECK(j["rows"][1]["value"].get<double>() == doctest::Approx(1 + 2.25));
  CHECK(j["config"]["n"].size() == 3u);
}

TEST_CASE("CSV values carry 17 significant digits") {
  const auto r = call({"constants", "--formula", "gc_markov_kappa", "--kappa1", "0.1", "--L", "0.3", "--n", "7"});
  REQUIRE(r.code == 0);
  const std::string v = fields(lines(r.out)[2])[3];
  const double parsed = std::stod(v);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", parsed);
  CHECK(v == buf);
}

TEST_CASE("verify-ou analytic mode") {
  const auto r = call({"verify-ou", "--rho", "0", "--tau", "1", "--n", "1", "--samples", "0", "--format", "json"});
  CHECK(r.code == 0);
  const json j = body(r);
  CHECK(j["kappa_n"].get<double>() == 1.0);
}

TEST_CASE("wasserstein of a measure with itself") {
  TempDir d;
  const auto a = d.write("a.json", kTwoPoint);
  const auto r = call({"wasserstein", "--mu", a, "--nu", a, "--s", "2", "--format", "json"});
  REQUIRE(r.code == 0);
  CHECK(body(r)["w"].get<double>() == 0.0);
  const auto g = d.write("g.json", R"({"type":"gaussian","mean":[0],"cov":[[1]]})");
  const auto h = d.write("h.json", R"({"type":"gaussian","mean":[1.5],"cov":[[1]]})");
  const auto rg = call({"wasserstein", "--mu", g, "--nu", h, "--s", "2", "--format", "json"});
  REQUIRE(rg.code == 0);
  CHECK(body(rg)["w"].get<double>() == doctest::Approx(1.5));
  CHECK(call({"wasserstein", "--mu", g, "--nu", h, "--s", "1"}).code == 2);
}

TEST_CASE("exit codes") {
  TempDir d;
  const auto a = d.write("a.json", kTwoPoint);
  CHECK(call({"certify", "--kind", "gc", "--mu", a, "--kappa", "1"}).code == 0);
  const auto fail = call({"certify", "--kind", "gc", "--mu", a, "--kappa", "0.2"});
  CHECK(fail.code == 1);
  CHECK(!fail.err.empty());
  CHECK(call({"constants", "--no-such-flag"}).code == 2);
  CHECK(call({"no-such-command"}).code == 2);
  CHECK(call({}).code == 2);
  CHECK(call({"wasserstein", "--mu", (d.path / "missing.json").string(), "--nu", a}).code == 2);
  const auto bad = d.write("bad.json", "{not json");
  CHECK(call({"wasserstein", "--mu", bad, "--nu", a}).code == 2);
  CHECK(call({"constants", "--formula", "gc_markov_kappa", "--kappa1", "-1", "--L", "1"}).code == 2);
  CHECK(call({"--help"}).code == 0);
}

TEST_CASE("certificates round-trip through replay") {
  TempDir d;
  const auto a = d.write("a.json", kTwoPoint);
  for (const auto& kappa : {"0.2", "1"}) {
    const auto c = call({"certify", "--kind", "gc", "--mu", a, "--kappa", kappa, "--format", "json"});
    REQUIRE((c.code == 0 || c.code == 1));
    json cert = body(c);
    cert.erase("config");
    const auto path = d.write("cert.json", cert.dump());
    const auto r = call({"certify", "--kind", "gc", "--mu", a, "--replay", path, "--format", "json"});
    CHECK(r.code == c.code);
    const json j = body(r);
    CHECK(std::abs(j["replayed_slack"].get<double>() - j["recorded_slack"].get<double>()) <= 1e-9);
  }
  const auto t = call({"certify", "--kind", "transport", "--mu", a, "--alpha", "2", "--s", "1", "--format", "json"});
  json cert = body(t);
  const auto path = d.write("t.json", cert.dump());
  const auto r = call({"certify", "--kind", "transport", "--mu", a, "--replay", path, "--format", "json"});
  CHECK(std::abs(body(r)["replayed_slack"].get<double>() - cert["worst_slack"].get<double>()) <= 1e-9);
}

TEST_CASE("duality and best constant") {
  TempDir d;
  const auto a = d.write("a.json", kTwoPoint);
  CHECK(call({"certify", "--kind", "duality", "--mu", a, "--kappa", "0.25"}).code == 0);
  const auto b = call({"certify", "--kind", "gc", "--mu", a, "--best", "0.01,4", "--format", "json"});
  REQUIRE(b.code == 0);
  CHECK(body(b)["best"].get<double>() == doctest::Approx(0.25).epsilon(1e-3));
}

TEST_CASE("entropy on measures and joint laws") {
  TempDir d;
  const auto a = d.write("a.json", kTwoPoint), b = d.write("b.json", kSkewed);
  const auto r = call({"entropy", "--nu", b, "--mu", a, "--format", "json"});
  REQUIRE(r.code == 0);
  CHECK(body(r)["ent"].get<double>() == doctest::Approx(0.130812035941137).epsilon(1e-14));
  const auto p = d.write("p.json", R"({"type":"joint","states":[0,1],"n":2,"probs":[0.25,0.25,0.25,0.25]})");
  const auto q = d.write("q.json", R"({"type":"joint","states":[0,1],"n":2,"probs":[0.125,0.375,0.125,0.375]})");
  const auto j = call({"entropy", "--nu", q, "--mu", p, "--format", "json"});
  REQUIRE(j.code == 0);
  const json jb = body(j);
  CHECK(jb["total"].get<double>() == doctest::Approx(0.130812035941137).epsilon(1e-13));
  CHECK(jb["conditional"].size() == 1u);
}

TEST_CASE("simulate echoes a model that simulates identically") {
  TempDir d;
  const auto m = d.write("m.json", R"({"kind":"ou","rho":1,"tau":0.5,"x0":0})");
  const auto a = call({"simulate", "--model", m, "--n", "4", "--samples", "20", "--seed", "3", "--format", "json"});
  REQUIRE(a.code == 0);
  const json ja = body(a);
  CHECK(ja["paths"].size() == 20u);
  const auto m2 = d.write("m2.json", ja["model"].dump());
  const auto b = call({"simulate", "--model", m2, "--n", "4", "--samples", "20", "--seed", "3", "--format", "json"});
  REQUIRE(b.code == 0);
  CHECK(body(b)["paths"] == ja["paths"]);
  const auto w = call({"simulate", "--model", m, "--n", "4", "--samples", "20", "--seed", "3", "--workers", "3",
                       "--format", "json"});
  CHECK(body(w)["paths"] == ja["paths"]);
  const auto csv = call({"simulate", "--model", m, "--n", "2", "--samples", "5"});
  const auto ls = lines(csv.out);
  REQUIRE(ls.size() == 7u);
  CHECK(ls[1] == "path,x1,x2");
}

TEST_CASE("couple and audit") {
  TempDir d;
  const auto p = d.write("p.json", R"({"kind":"gaussian_kernel","theta":0.5,"sigma2":1})");
  const auto q = d.write("q.json", R"({"kind":"gaussian_kernel","theta":0.5,"sigma2":1,"init_mean":1,"init_var":1})");
  const auto b = call({"couple", "--p", p, "--q", q, "--n", "3", "--s", "2", "--format", "json"});
  REQUIRE(b.code == 0);
  CHECK(body(b)["upper_bound"].get<double>() == doctest::Approx(std::sqrt(1 + 0.25 + 0.0625)).epsilon(1e-6));
  const auto a = call({"couple", "--p", p, "--q", q, "--n", "3", "--s", "2", "--alpha", "1", "--L", "0.25"});
  CHECK(a.code == 0);
  CHECK(call({"couple", "--p", p, "--q", q, "--n", "3", "--atom-budget", "10"}).code == 3);
}

TEST_CASE("verify-arma passes on seeded instances") {
  const auto r = call({"verify-arma", "--n", "10", "--instances", "10"});
  CHECK(r.code == 0);
}

TEST_CASE("--out writes the same bytes as stdout") {
  TempDir d;
  const std::string target = (d.path / "o.csv").string();
  const std::vector<std::string> base{"constants", "--formula", "thm1.1", "--kappa1", "1", "--L", "1", "--n", "3"};
  auto with_out = base;
  with_out.push_back("--out");
  with_out.push_back(target);
  const auto r = call(with_out);
  REQUIRE(r.code == 0);
  CHECK(r.out.empty());
  std::ifstream in(target);
  std::stringstream file;
  file << in.rdbuf();
  // the echoed config differs only in the out field
  const auto a = lines(file.str()), b = lines(call(base).out);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 1; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("the installed binary honours the exit-code contract") {
  TempDir d;
  const auto a = d.write("a.json", kTwoPoint);
  const std::string bin = CONCENTRA_BIN;
  auto sh = [&](const std::string& args) {
    const int status = std::system((bin + " " + args + " > /dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
  };
  CHECK(sh("constants --formula thm1.1 --kappa1 1 --L 1 --n 3") == 0);
  CHECK(sh("certify --kind gc --mu " + a + " --kappa 0.2") == 1);
  CHECK(sh("constants --bogus") == 2);
  CHECK(sh("wasserstein --mu " + a + " --nu " + a + " --s 2") == 0);
}
