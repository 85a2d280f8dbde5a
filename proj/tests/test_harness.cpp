#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

#include "gibbsflow/cli.hpp"
#include "gibbsflow/errors.hpp"
#include "gibbsflow/harness.hpp"

using namespace gibbsflow;

namespace {

int run(std::vector<std::string> args, std::string* out_text = nullptr) {
  args.insert(args.begin(), "gibbsflow");
  std::ostringstream out, err;
  const int code = cli_main(args, out, err);
  if (out_text) *out_text = out.str();
  return code;
}

}  // namespace

TEST_CASE("config JSON round trip") {
  ExperimentConfig c = default_config("focusing-invariance");
  c.seed = 18446744073709551557ull;
  c.observables = {"abs2_alpha_1", "renormalized_mass"};
  c.canonical.epsilon_ladder = {0.3, 0.15};
  const Json j = to_json(c);
  const ExperimentConfig back = config_from_json(j);
  CHECK(to_json(back).dump() == j.dump());
  CHECK(back.seed == c.seed);

  const auto path = std::filesystem::temp_directory_path() / "gf_unit_config.json";
  save_config(c, path.string());
  CHECK(to_json(load_config(path.string())).dump() == j.dump());
  std::filesystem::remove(path);
}

TEST_CASE("config validation") {
  Json j = to_json(default_config("invariance"));
  j["no_such_key"] = 1;
  CHECK_THROWS_AS(config_from_json(j), InvalidArgument);
  ExperimentConfig c;
  c.observables = {"bogus"};
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  CHECK(parse_seed("42") == 42u);
  CHECK_THROWS_AS(parse_seed("-3"), InvalidArgument);
  CHECK_THROWS_AS(default_config("nothing"), InvalidArgument);
  CHECK(std::isfinite(default_config("invariance").theta_value()));
}

TEST_CASE("z-score conventions") {
  CHECK(combined_z(1.0, 0.0, 1.0, 0.0) == 0.0);
  CHECK(combined_z(0.0, 3.0, 5.0, 4.0) == doctest::Approx(1.0));
}

TEST_CASE("pure linear flow leaves intensities pathwise unchanged") {
  ExperimentConfig c;
  c.basis.modes = 12;
  c.measure.kind = "gaussian";
  c.measure.cut_mode = 0;
  c.measure.lambda_cut = 2.0;
  c.n_samples = 200;
  c.flow.dt = 0.01;
  c.serial = true;
  c.observables = {"abs2_alpha_1"};
  const auto csv = std::filesystem::temp_directory_path() / "gf_unit_ensemble.csv";
  c.csv_path = csv.string();
  const InvarianceReport r = run_invariance(c);
  REQUIRE(r.observables.size() == 1);
  CHECK(std::abs(r.observables[0].z) < 1e-6);

  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header == "sample,log_weight,j,lambda_j,re_alpha_j,im_alpha_j");
  Index rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == 200 * 12);
  in.close();
  std::filesystem::remove(csv);
}

TEST_CASE("small defocusing invariance run is reproducible") {
  ExperimentConfig c;
  c.basis.modes = 16;
  c.measure.cut_mode = 8;
  c.n_samples = 300;
  c.flow.dt = 0.01;
  c.flow.T = 0.5;
  c.flow.negative_control_samples = 16;
  c.serial = true;
  const InvarianceReport a = run_invariance(c);
  const InvarianceReport b = run_invariance(c);
  CHECK(a.to_json().dump() == b.to_json().dump());
  CHECK(a.conservation_ok);
  CHECK(a.negative_control.flagged);
}

TEST_CASE("CLI basics") {
  CHECK(run({"--help"}) == kExitPass);
  CHECK(run({"spectrum", "--frobnicate"}) == kExitUsage);
  CHECK(run({}) == kExitUsage);

  std::string csv;
  REQUIRE(run({"spectrum", "--s", "2", "--modes", "20"}, &csv) == kExitPass);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "j,lambda_j");
  int rows = 0;
  double first = 0.0;
  while (std::getline(in, line)) {
    if (rows == 0) first = std::stod(line.substr(line.find(',') + 1));
    ++rows;
  }
  CHECK(rows == 20);
  CHECK(first == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("CLI flow exit status follows the conservation check") {
  std::string csv;
  CHECK(run({"flow", "--modes", "16", "--cut-mode", "6", "--dt", "0.005", "--T", "0.2"}, &csv) ==
        kExitPass);
  CHECK(csv.rfind("t,H,M_low,hnorm_theta", 0) == 0);
  CHECK(run({"flow", "--modes", "16", "--cut-mode", "6", "--dt", "0.005", "--T", "0.2",
             "--conservation-tol", "1e-300"}) == kExitExperimentFail);
}
