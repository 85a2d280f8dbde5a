#ifndef GIBBSFLOW_CONFIG_HPP
#define GIBBSFLOW_CONFIG_HPP

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"

#include "gibbsflow/spectral.hpp"

namespace gibbsflow {

using Json = nlohmann::ordered_json;

struct BasisConfig {
  double s = 2.0;
  Index modes = 32;
  Index grid_points = 2048;
  double half_extent = 12.0;
};

// The cut is Lambda = lambda_{cut_mode} when cut_mode > 0 (1-based), so
// that it lands exactly on an eigenvalue; otherwise lambda_cut is used.
struct MeasureConfig {
  std::string kind = "defocusing";
  Index cut_mode = 20;
  double lambda_cut = 0.0;
  // Focusing mass cutoff; when mass_cut <= 0 it is mass_cut_std times the
  // standard deviation of M_{<=cut} under mu_0.
  double mass_cut = 0.0;
  double mass_cut_std = 2.0;
};

struct FlowSettings {
  double dt = 0.005;
  double T = 1.0;
  std::string integrator = "interaction_rk4";
  double conservation_tol = 1e-6;
  int sign = 1;                        // used for the Gaussian measure only
  double negative_control_factor = 100.0;
  Index negative_control_samples = 256;
};

struct MomentConfig {
  Index n_samples = 100000;
  Index increment_mode = 10;           // Cauchy increments over (lambda_k, lambda_J]
};

struct TailConfig {
  Index n_samples = 20000;
  Index thresholds = 6;
  Index min_events = 50;
  // High-frequency tails on a deeper basis: cut lambda_base vs factor * it.
  Index high_modes = 64;
  double high_half_extent = 16.0;
  double base_cut = 16.0;
  double factor = 4.0;
};

struct CanonicalConfig {
  double m = 0.0;
  double epsilon_std = 0.2;                          // eps in units of std(M)
  std::vector<double> epsilon_ladder{0.4, 0.2, 0.1};
  Index proposals = 200000;
  Index n_conditioned = 10000;
  Index histogram_samples = 100000;
  Index bins = 40;
  Index tightness_cut_mode = 16;
  Index tightness_samples = 100000;
};

struct ExperimentConfig {
  std::string name = "invariance";
  BasisConfig basis;
  MeasureConfig measure;
  FlowSettings flow;
  MomentConfig moments;
  TailConfig tails;
  CanonicalConfig canonical;
  Index n_samples = 40000;
  std::uint64_t seed = 20240601;
  // H^theta index; NaN picks the default for s.
  double theta = std::numeric_limits<double>::quiet_NaN();
  // Subset of the five default observables by name; empty means all.
  std::vector<std::string> observables;
  bool serial = false;
  unsigned threads = 0;                // 0 means every hardware thread
  std::string report_path;
  std::string csv_path;

  /// Throws InvalidArgument if the fields are inconsistent.
  void validate() const;
  unsigned worker_count() const;
  double theta_value() const;
};

Json to_json(const ExperimentConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const Json& json);
ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& config, const std::string& path);

/// Decimal u64 as used for seeds in config files.
std::uint64_t parse_seed(const std::string& text);

}  // namespace gibbsflow

#endif  // GIBBSFLOW_CONFIG_HPP
