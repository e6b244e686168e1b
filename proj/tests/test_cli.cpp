#include "seqbayes/config.hpp"
#include "seqbayes/experiments.hpp"
#include "seqbayes/model_io.hpp"
#include "seqbayes/report.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace seqbayes;
using namespace seqbayes::cli;
namespace fs = std::filesystem;

namespace {

std::string scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / "seqbayes_test_cli" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const std::string& path, const std::string& text) { std::ofstream(path, std::ios::binary) << text; }

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + SEQBAYES_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string two_point_model() {
  using Q = Rational;
  FiniteSpace theta({"a", "b"}), inputs({"x"}), labels({"0", "1"});
  std::vector<Dist<Q>> table{Dist<Q>(labels, {Q(3, 4), Q(1, 4)}), Dist<Q>(labels, {Q(1, 4), Q(3, 4)})};
  SupervisedModel<Q> m(theta, Dist<Q>(theta, {Q(1, 2), Q(1, 2)}), inputs, labels, table);
  return io::to_json(m).dump();
}

}  // namespace

TEST_CASE("config syntax errors carry line and column") {
  try {
    parse_config("{\n  \"family\": \"gp\",\n  \"operation\" \"compare\"\n}", "cfg.json");
    FAIL("expected a parse error");
  } catch (const ConfigParseError& e) {
    CHECK(std::string(e.what()).find("cfg.json:3:") == 0);
  }
}

TEST_CASE("config structure: unknown keys and types are parse errors, bad values are validation errors") {
  CHECK_THROWS_AS(parse_config(R"({"family":"gp","operation":"compare","sed":1})"), ConfigParseError);
  CHECK_THROWS_AS(parse_config(R"({"family":"gp","operation":"compare","seed":"1"})"), ConfigParseError);
  CHECK_THROWS_AS(parse_config(R"({"family":"gp","operation":"compare","seed":-1})"), ConfigParseError);
  CHECK_THROWS_AS(parse_config(R"({"operation":"compare"})"), ConfigParseError);
  CHECK_THROWS_AS(parse_config(R"([1,2])"), ConfigParseError);
  CHECK_THROWS_AS(parse_config(R"({"family":"gp","operation":"compare","params":[]})"), ConfigParseError);
  CHECK_THROWS_AS(parse_config(R"({"family":"bogus","operation":"x"})"), ConfigValidationError);
  CHECK_THROWS_AS(parse_config(R"({"family":"gp","operation":"x","tolerance":-1})"), ConfigValidationError);

  auto c = parse_config(R"({"family":"finite","operation":"batch-online","seed":7,"params":{"models":2}})");
  CHECK(c.seed == 7u);
  CHECK(c.output == ".");
  CHECK(c.params["models"] == 2);
}

TEST_CASE("run_experiment rejects unknown params, unknown operations and missing seeds") {
  const std::string dir = scratch("reject");
  auto cfg = [&](const std::string& params, const std::string& extra = ",\"seed\":1") {
    return parse_config(R"({"family":"finite","operation":"batch-online","output":")" + dir + "\"" + extra +
                        ",\"params\":" + params + "}");
  };
  CHECK_THROWS_AS(run_experiment(cfg(R"({"modles":3})")), ConfigParseError);
  CHECK_THROWS_AS(run_experiment(cfg(R"({"models":"3"})")), ConfigParseError);
  CHECK_THROWS_AS(run_experiment(cfg(R"({"models":0})")), ConfigValidationError);
  CHECK_THROWS_AS(run_experiment(cfg(R"({"models":3})", "")), ConfigValidationError);
  auto bad_op = parse_config(R"({"family":"dp","operation":"nope","output":")" + dir + "\"}");
  CHECK_THROWS_AS(run_experiment(bad_op), ConfigValidationError);
}

TEST_CASE("CSV writer: header, CRLF, quoting, round-trip doubles") {
  CsvWriter w({"name", "value"});
  w.cell("a,b").cell(0.1);
  w.end_row();
  w.cell("say \"hi\"").cell(1.0 / 3.0);
  w.end_row();
  const std::string s = w.str();
  CHECK(s == "name,value\r\n\"a,b\",0.10000000000000001\r\n\"say \"\"hi\"\"\",0.33333333333333331\r\n");
  CHECK(w.rows() == 2);
  CHECK(std::stod("0.33333333333333331") == 1.0 / 3.0);

  CsvWriter short_row({"a", "b"});
  short_row.cell(1);
  CHECK_THROWS_AS(short_row.end_row(), std::logic_error);
  CHECK_THROWS_AS(CsvWriter(std::vector<std::string>{}), std::invalid_argument);
}

TEST_CASE("finite batch-online run is deterministic and passes") {
  const std::string a = scratch("det_a"), b = scratch("det_b");
  auto run = [](const std::string& dir) {
    return run_experiment(parse_config(R"({"family":"finite","operation":"batch-online","seed":11,"output":")" + dir +
                                       R"(","params":{"models":10}})"));
  };
  auto ra = run(a);
  auto rb = run(b);
  CHECK(exit_code(ra) == kExitOk);
  auto ja = json::parse(slurp(a + "/report.json")), jb = json::parse(slurp(b + "/report.json"));
  ja["config"].erase("output");
  jb["config"].erase("output");
  CHECK(ja == jb);
  CHECK(slurp(a + "/finite_batch_online.csv") == slurp(b + "/finite_batch_online.csv"));
  CHECK(fs::exists(a + "/timing.json"));
  auto report = json::parse(slurp(a + "/report.json"));
  for (const char* key : {"tool", "version", "platform", "rng", "command", "config", "checks", "metrics", "outputs", "seed"})
    CHECK(report.contains(key));
  CHECK_FALSE(report.contains("timing"));
}

TEST_CASE("finite predict from a model file") {
  const std::string dir = scratch("predict");
  spit(dir + "/model.json", two_point_model());
  json doc{{"family", "finite"},
           {"operation", "predict"},
           {"output", dir},
           {"params", {{"model", dir + "/model.json"}, {"train", json::array({json::array({"x", "1"})})}, {"test", {"x"}}}}};
  auto rep = run_experiment(config_from_json(doc));
  CHECK(rep.checks_passed());
  // posterior (1/4, 3/4); P(y = 1) = 1/4 * 1/4 + 3/4 * 3/4
  CHECK(slurp(dir + "/predictive.csv") == "y1,probability\r\n0,3/8\r\n1,5/8\r\n");
}

TEST_CASE("dp posterior on labels: alpha = (1,1,1), y = 2") {
  const std::string dir = scratch("dp");
  json doc{{"family", "dp"},
           {"operation", "posterior"},
           {"output", dir},
           {"params",
            {{"atoms", {{{"location", "1"}, {"weight", 1}}, {{"location", "2"}, {"weight", 1}}, {{"location", "3"}, {"weight", 1}}}},
             {"observations", {"2"}},
             {"cells", {{"1"}, {"2"}, {"3"}}}}}};
  auto rep = run_experiment(config_from_json(doc));
  CHECK(rep.checks_passed());
  auto csv = slurp(dir + "/dp_projection.csv");
  CHECK(csv.find("0,1,") != std::string::npos);
  CHECK(csv.find("1,2,") != std::string::npos);
  CHECK(csv.find("2,1,") != std::string::npos);
}

TEST_CASE("gp predict: one noisy observation at the test point") {
  const std::string dir = scratch("gp");
  json doc{{"family", "gp"},
           {"operation", "predict"},
           {"output", dir},
           {"params", {{"length_scale", 1.0}, {"signal_var", 1.0}, {"noise_var", 1.0}, {"train", {{0.0, 2.0}}}, {"test", {0.0}}}}};
  auto rep = run_experiment(config_from_json(doc));
  CHECK(rep.checks_passed());
  // k = 1, noise 1: mean 1 * 2 / 2, variance 1 - 1 / 2
  auto csv = slurp(dir + "/gp_predictive.csv");
  REQUIRE(csv.rfind("x,mean,variance\r\n0,", 0) == 0);
  std::stringstream row(csv.substr(csv.find('\n') + 1));
  std::string x, mean, var;
  std::getline(row, x, ',');
  std::getline(row, mean, ',');
  std::getline(row, var, '\r');
  CHECK(std::stod(mean) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::stod(var) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("CLI exit codes") {
  const std::string dir = scratch("exit");
  spit(dir + "/syntax.json", "{\"family\": \"gp\",, }");
  spit(dir + "/unknown_key.json", R"({"family":"gp","operation":"compare","seed":1,"colour":1})");
  spit(dir + "/bad_type.json", R"({"family":"gp","operation":"compare","seed":1,"params":{"instances":"x"}})");
  spit(dir + "/missing.json", R"({"family":"gp"})");
  spit(dir + "/family.json", R"({"family":"spline","operation":"compare"})");
  spit(dir + "/no_seed.json", R"({"family":"gp","operation":"compare","params":{"instances":2}})");
  spit(dir + "/bad_value.json", R"({"family":"gp","operation":"compare","seed":1,"params":{"instances":0}})");
  spit(dir + "/ok.json", R"({"family":"gp","operation":"compare","seed":1,"output":")" + dir +
                             R"(/ok","params":{"instances":2,"max_n":5,"max_m":3}})");
  spit(dir + "/fail.json", R"({"family":"gp","operation":"compare","seed":1,"output":")" + dir +
                               R"(/fail","params":{"instances":2,"max_n":5,"max_m":3,"cov_tolerance":-1}})");

  CHECK(run_cli("run " + dir + "/syntax.json") == kExitParse);
  CHECK(run_cli("run " + dir + "/unknown_key.json") == kExitParse);
  CHECK(run_cli("run " + dir + "/bad_type.json") == kExitParse);
  CHECK(run_cli("run " + dir + "/missing.json") == kExitParse);
  CHECK(run_cli("run " + dir + "/absent.json") == kExitParse);
  CHECK(run_cli("run " + dir + "/family.json") == kExitValidation);
  CHECK(run_cli("run " + dir + "/no_seed.json") == kExitValidation);
  CHECK(run_cli("run " + dir + "/bad_value.json") == kExitValidation);
  CHECK(run_cli("run " + dir + "/ok.json") == kExitOk);
  CHECK(run_cli("run " + dir + "/fail.json") == kExitCheckFailed);
  CHECK(run_cli("--bogus") == kExitParse);
  CHECK(run_cli("") == kExitParse);
  CHECK(run_cli("gp compare --param instances=2 --param max_n=5 --out " + dir + "/flags") == kExitValidation);
  CHECK(run_cli("gp compare --seed 3 --param instances=2 --param max_n=5 --out " + dir + "/flags") == kExitOk);
  CHECK(run_cli("dp posterior --params '{\"base\":{\"kind\":\"cauchy\"}}' --out " + dir + "/dp") == kExitValidation);
  CHECK(run_cli("ddp sample --seed 1 --param inputs=[0,1] --param alpha=-1 --out " + dir + "/ddp") == kExitValidation);
  CHECK(run_cli("ddp sample --seed 1 --param inputs=[0,1] --out " + dir + "/ddp") == kExitOk);
  CHECK(fs::exists(dir + "/ddp/ddp_sample.csv"));
}
