#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "gpsgld/diagnostics.hpp"
#include "gpsgld/workbench.hpp"
#include "support/test_data.hpp"

using namespace gpsgld;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("gpsgld_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p);
  out << content;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(GPSGLD_CLI_PATH) + " " + args + " > " +
                          log.string() + " 2>&1";
  return std::system(cmd.c_str());
}

}  // namespace

TEST_CASE("load_dataset: hand-standardized 3-row file") {
  const fs::path dir = temp_dir("load3");
  write_file(dir / "d.csv", "1,10\n2,20\n3,60\n");
  const auto [data, scaler] = load_dataset(dir / "d.csv");
  CHECK(data.n() == 3);
  CHECK(data.d() == 1);
  // Column (1,2,3): mean 2, sample std 1 -> standardized (-1, 0, 1).
  CHECK(data.X(0, 0) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(data.X(1, 0) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(data.X(2, 0) == doctest::Approx(1.0).epsilon(1e-14));
  // y = (10,20,60): mean 30, sample std sqrt(700).
  const double sd = std::sqrt(700.0);
  CHECK(data.y[0] == doctest::Approx(-20.0 / sd).epsilon(1e-14));
  CHECK(data.y[2] == doctest::Approx(30.0 / sd).epsilon(1e-14));
  CHECK(scaler.y_mean == doctest::Approx(30.0));
  CHECK(scaler.y_std == doctest::Approx(sd));
}

TEST_CASE("load_dataset: header detection makes headered files identical") {
  const fs::path dir = temp_dir("header");
  write_file(dir / "with.csv", "a,b,label\n1,4,7\n2,5,8\n3,6,10\n");
  write_file(dir / "without.csv", "1,4,7\n2,5,8\n3,6,10\n");
  const auto [with_h, s1] = load_dataset(dir / "with.csv");
  const auto [without_h, s2] = load_dataset(dir / "without.csv");
  CHECK((with_h.X - without_h.X).cwiseAbs().maxCoeff() == 0.0);
  CHECK((with_h.y - without_h.y).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("load_dataset: parse errors carry line numbers") {
  const fs::path dir = temp_dir("parse");
  write_file(dir / "ragged.csv", "1,2,3\n4,5\n6,7,8\n");
  CHECK_THROWS_WITH_AS(load_dataset(dir / "ragged.csv"),
                       doctest::Contains(":2:"), std::invalid_argument);
  write_file(dir / "nonnum.csv", "1,2,3\n4,oops,6\n7,8,9\n");
  CHECK_THROWS_WITH_AS(load_dataset(dir / "nonnum.csv"),
                       doctest::Contains(":2:"), std::invalid_argument);
  write_file(dir / "tiny.csv", "1,2\n");
  CHECK_THROWS_AS(load_dataset(dir / "tiny.csv"), std::invalid_argument);
  CHECK_THROWS_AS(load_dataset(dir / "missing.csv"), std::invalid_argument);
}

TEST_CASE("load_dataset: the committed concrete-shaped file") {
  const fs::path file = fs::path(GPSGLD_DATA_DIR) / "concrete_like.csv";
  const auto [data, scaler] = load_dataset(file);
  CHECK(data.n() == 1030);
  CHECK(data.d() == 8);
}

TEST_CASE("config: unknown keys and all violations reported at once") {
  using nlohmann::json;
  const json good = ExperimentConfig{}.to_json();
  CHECK_NOTHROW(ExperimentConfig::from_json(good));

  json bad = good;
  bad["sgld"]["misspelled_knob"] = 1;
  bad["typo_section"] = json::object();
  try {
    ExperimentConfig::from_json(bad);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.problems.size() == 2);
  }

  ExperimentConfig invalid;
  invalid.solver.epsilon = -1.0;
  invalid.sgld.gamma = 2.0;
  invalid.mh.proposal_scale = -0.5;
  try {
    invalid.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.problems.size() >= 3);
  }
}

TEST_CASE("config: json round trip preserves every field") {
  ExperimentConfig cfg;
  cfg.dataset.path = "somewhere.csv";
  cfg.priors.tau = {2.0, 3.0};
  cfg.solver.q = 0.25;
  cfg.sgld.total_iters = 123;
  cfg.run.seed = 987654321;
  const ExperimentConfig back = ExperimentConfig::from_json(cfg.to_json());
  CHECK(back.to_json() == cfg.to_json());
}

TEST_CASE("chain csv: round trip reproduces the diagnostics") {
  const fs::path dir = temp_dir("roundtrip");
  SampleChain chain;
  RngStream rng(5);
  for (int t = 0; t < 400; ++t) {
    chain.samples.push_back(Vector3(rng.normal(), 0.5 * rng.normal() - 1.0,
                                    0.1 * rng.normal()));
    chain.step_sizes.push_back(1e-3 / (1.0 + t));
  }
  chain.frozen_at = 150;
  chain.burn_in = 150;
  write_chain_csv(dir / "c.csv", chain, false);
  const SampleChain back = read_chain_csv(dir / "c.csv");
  REQUIRE(back.size() == chain.size());
  REQUIRE(back.frozen_at.has_value());
  CHECK(*back.frozen_at == 150);
  for (long t = 0; t < chain.size(); ++t) {
    CHECK((back.samples[t] - chain.samples[t]).norm() == 0.0);
    CHECK(back.step_sizes[t] == chain.step_sizes[t]);
  }
  // identical diagnostics on both copies
  for (int p = 0; p < 3; ++p) {
    std::vector<double> a, b;
    for (long t = 0; t < chain.size(); ++t) {
      a.push_back(chain.samples[t][p]);
      b.push_back(back.samples[t][p]);
    }
    CHECK(effective_sample_size(a).value == effective_sample_size(b).value);
    const RunningSummary ra = running_summary(a), rb = running_summary(b);
    CHECK(ra.mean == rb.mean);
    CHECK(ra.stddev == rb.stddev);
  }
}

TEST_CASE("cli: sgld chains, diagnose, manifest, deterministic reproducibility") {
  const fs::path dir = temp_dir("cli");
  const fs::path data_file = fs::path(GPSGLD_DATA_DIR) / "concrete_like.csv";
  const std::string common =
      " --dataset " + data_file.string() + " --subset 60 --iters 40" +
      " --init-mode value --init -0.5 -0.5 -1.5 --num-chains 2 --workers 2" +
      " --variance-batch 10 --eps-start 1e-3 --eps-end 1e-4 --seed 7 --deterministic";

  const fs::path out1 = dir / "run1";
  REQUIRE(run_cli("sample-sgld --output " + out1.string() + common,
                  dir / "log1.txt") == 0);
  CHECK(fs::exists(out1 / "chain_sgld_0.csv"));
  CHECK(fs::exists(out1 / "chain_sgld_1.csv"));
  CHECK(fs::exists(out1 / "manifest_sample-sgld.json"));
  CHECK(fs::exists(out1 / "config_resolved.json"));

  // bit-identical rerun with the same seed in deterministic mode
  const fs::path out2 = dir / "run2";
  REQUIRE(run_cli("sample-sgld --output " + out2.string() + common,
                  dir / "log2.txt") == 0);
  CHECK(read_file(out1 / "chain_sgld_0.csv") == read_file(out2 / "chain_sgld_0.csv"));
  CHECK(read_file(out1 / "chain_sgld_1.csv") == read_file(out2 / "chain_sgld_1.csv"));

  // diagnose on two copies of the same chain: PSRF exactly 1 everywhere
  const fs::path dout = dir / "diag";
  REQUIRE(run_cli("diagnose --output " + dout.string() + " --diagnose-chain " +
                      (out1 / "chain_sgld_0.csv").string() + " --diagnose-chain " +
                      (out1 / "chain_sgld_0.csv").string() + " --psrf-stride 10",
                  dir / "log3.txt") == 0);
  std::ifstream diag(dout / "diagnostics.csv");
  std::string line;
  std::getline(diag, line);  // header
  int psrf_rows = 0;
  while (std::getline(diag, line)) {
    if (line.find("psrf_") == std::string::npos) continue;
    ++psrf_rows;
    const auto comma = line.rfind(',');
    CHECK(std::stod(line.substr(comma + 1)) == 1.0);
  }
  CHECK(psrf_rows > 0);
}

TEST_CASE("cli: condition sweep artifact") {
  const fs::path dir = temp_dir("sweep");
  const fs::path data_file = fs::path(GPSGLD_DATA_DIR) / "concrete_like.csv";
  REQUIRE(run_cli("condition-sweep --output " + dir.string() + " --dataset " +
                      data_file.string() + " --subset 40 --sweep-draws 5 --seed 3",
                  dir / "log.txt") == 0);
  std::ifstream csv(dir / "condition_sweep.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "draw_index,sigma,tau,lambda,kappa");
  int rows = 0;
  std::string line;
  while (std::getline(csv, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 5);
}

TEST_CASE("cli: config validation failures exit with the config category") {
  const fs::path dir = temp_dir("badcfg");
  write_file(dir / "bad.json", "{\"sgld\": {\"gamma\": 2.0}}");
  const int rc = run_cli("sample-sgld --config " + (dir / "bad.json").string(),
                         dir / "log.txt");
  CHECK(WEXITSTATUS(rc) == 2);
  const std::string log = read_file(dir / "log.txt");
  CHECK(log.find("gamma") != std::string::npos);
}
