#include <stdexcept>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "labeleff/cli.hpp"
#include "labeleff/harness.hpp"
#include "labeleff/results_io.hpp"

namespace fs = std::filesystem;
using namespace labeleff;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome call(std::vector<std::string> args) {
  args.insert(args.begin(), "labeleff");
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path tmp(const std::string& name) {
  const fs::path dir = LABELEFF_TEST_TMPDIR;
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  const auto out = tmp("usage.csv").string();
  CHECK(call({}).code == 2);
  CHECK(call({"simulate", "--experts", "5", "--out", out}).code == 2);
  CHECK(call({"simulate", "--env", "gap", "--kappa", "2", "--n", "10", "--experts", "3", "--out", out})
            .code == 2);
  CHECK(call({"simulate", "--n", "10", "--experts", "5", "--eta", "0", "--out", out}).code == 2);
  CHECK(call({"simulate", "--n", "10", "--experts", "5", "--eta", "-1", "--out", out}).code == 2);
  CHECK(call({"simulate", "--n", "10", "--experts", "4", "--out", out}).code == 2);
  CHECK(call({"simulate", "--n", "10", "--experts", "5", "--eta", "inf", "--out", out}).code == 2);
  CHECK(call({"simulate", "--n", "10", "--experts", "5", "--strategy", "nope", "--out", out}).code == 2);
  CHECK(call({"simulate", "--n", "10", "--experts", "5"}).code == 2);
  CHECK(call({"qstar", "--etas", "1", "--grid", "1"}).code == 2);
  CHECK(call({"qstar", "--etas", "1,-2"}).code == 2);
  CHECK(call({"verify", "--suite", "bogus"}).code == 2);
  CHECK(call({"verify", "--max-n", "9"}).code == 2);
  CHECK(call({"enumerate", "--experts", "5"}).code == 2);
  const auto bad = call({"simulate", "--n", "10", "--experts", "5", "--eta", "zero", "--out", out});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("error:") != std::string::npos);
}

TEST_CASE("qstar subcommand") {
  const auto zeros = call({"qstar", "--etas", "9", "--grid", "5"});
  REQUIRE(zeros.code == 0);
  CHECK(zeros.out == "x,eta,q_star\n0,9,0\n0.25,9,0\n0.5,9,0\n0.75,9,0\n1,9,0\n");

  const auto path = tmp("qstar.csv");
  const auto wrote = call({"qstar", "--etas", "0.5,2", "--grid", "33", "--out", path.string()});
  REQUIRE(wrote.code == 0);
  const auto text = slurp(path);
  CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 2 * 33);
}

TEST_CASE("verify subcommand") {
  const auto ok = call({"verify", "--suite", "perfect", "--max-n", "3", "--max-experts", "3"});
  CHECK(ok.code == 0);
  CHECK(ok.out.find("PASS suite=perfect") != std::string::npos);
  CHECK(ok.out.find("FAIL") == std::string::npos);
  const auto general =
      call({"verify", "--suite", "general", "--max-n", "2", "--max-experts", "2", "--etas", "1"});
  CHECK(general.code == 0);
  CHECK(general.out.find("strategy=qstar ") != std::string::npos);
  CHECK(general.out.find("strategy=qstar-upper") != std::string::npos);
}

TEST_CASE("enumerate subcommand") {
  CHECK(call({"enumerate", "--experts", "2", "--n", "1", "--perfect", "--count"}).out == "6\n");
  CHECK(call({"enumerate", "--experts", "2", "--n", "2", "--count"}).out == "64\n");
  const auto listing = call({"enumerate", "--experts", "1", "--n", "1", "--perfect"});
  CHECK(listing.out == "1 1\n0 0\n\n1 1\n1 1\n");
}

TEST_CASE("simulate is reproducible and its summary survives a round trip") {
  const auto a = tmp("sim_a.csv");
  const auto b = tmp("sim_b.csv");
  const std::vector<std::string> common{"simulate", "--n",    "300", "--experts", "9",
                                        "--runs",   "4",      "--seed", "11",   "--kappa",
                                        "1.5",      "--stride", "10"};
  auto args_a = common;
  args_a.insert(args_a.end(), {"--out", a.string()});
  auto args_b = common;
  args_b.insert(args_b.end(), {"--out", b.string(), "--threads", "2"});
  const auto ra = call(args_a);
  const auto rb = call(args_b);
  REQUIRE(ra.code == 0);
  REQUIRE(rb.code == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(ra.out == rb.out);

  const auto meta = nlohmann::json::parse(slurp(tmp("sim_a.meta.json")));
  CHECK(meta["runs"] == 4);
  CHECK(meta["environment"]["kappa"] == 1.5);

  ExperimentConfig config;
  config.environment = ThresholdEnvConfig{0.5, 1.5, 9, 0};
  config.horizon = 300;
  config.num_experts = 9;
  config.runs = 4;
  config.base_seed = 11;
  config.record_stride = 10;
  std::ifstream in(a, std::ios::binary);
  const auto series = read_results_csv(in);
  CHECK(summary_line(config, series) + "\n" == ra.out);
}

TEST_CASE("simulate reads JSON configs and flags override them") {
  const auto cfg = tmp("config.json");
  {
    std::ofstream f(cfg);
    f << R"({"env": "gap", "n": 200, "experts": 4, "runs": 2, "delta": 0.3, "seed": 5})";
  }
  const auto out = tmp("from_config.csv");
  REQUIRE(call({"simulate", "--config", cfg.string(), "--out", out.string()}).code == 0);
  const auto meta = nlohmann::json::parse(slurp(tmp("from_config.meta.json")));
  CHECK(meta["environment"]["kind"] == "gap");
  CHECK(meta["runs"] == 2);

  const auto over = tmp("override.csv");
  REQUIRE(call({"simulate", "--config", cfg.string(), "--runs", "3", "--out", over.string()}).code == 0);
  CHECK(nlohmann::json::parse(slurp(tmp("override.meta.json")))["runs"] == 3);
}

TEST_CASE("simulate on a scripted file") {
  const auto script = tmp("script.txt");
  {
    std::ofstream f(script);
    f << "3 3\n1 110\n0 010\n1 111\n";
  }
  const auto out = tmp("scripted.csv");
  const auto r = call({"simulate", "--env", "scripted", "--file", script.string(), "--strategy",
                       "majority", "--eta", "inf", "--runs", "5", "--out", out.string()});
  REQUIRE(r.code == 0);
  std::ifstream in(out, std::ios::binary);
  const auto series = read_results_csv(in);
  CHECK(series.t.back() == 3);
  CHECK_FALSE(series.has(Metric::OptimalLoss));
  CHECK(series.has(Metric::RegretBest));

  CHECK(call({"simulate", "--env", "scripted", "--out", out.string()}).code == 2);
  CHECK(call({"simulate", "--env", "scripted", "--file", tmp("missing.txt").string(), "--out",
              out.string()})
            .code == 2);
}
