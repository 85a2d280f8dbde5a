#ifndef GIBBSFLOW_HARNESS_HPP
#define GIBBSFLOW_HARNESS_HPP

#include <string>
#include <vector>

#include "gibbsflow/canonical.hpp"
#include "gibbsflow/config.hpp"
#include "gibbsflow/dynamics.hpp"
#include "gibbsflow/measures.hpp"

namespace gibbsflow {

std::string code_version();

/// Builds the basis, or loads it from $GIBBSFLOW_CACHE_DIR when set (and
/// stores it there after a build).
BasisPtr load_or_build_basis(const BasisConfig& config);

/// Lambda for the measure section: lambda_{cut_mode} or lambda_cut.
double resolve_cut(const MeasureConfig& measure, const SpectralBasis& basis);

/// Measure spec for the config, with the focusing mass cutoff resolved.
MeasureSpec resolve_measure(const ExperimentConfig& config,
                            const SpectralBasis& basis);

struct ObservableComparison {
  std::string name;
  double mean_t0 = 0.0;
  double se_t0 = 0.0;
  double mean_T = 0.0;
  double se_T = 0.0;
  double z = 0.0;     // (mean_T - mean_t0) / sqrt(se_t0^2 + se_T^2)
  bool passed = false;
};

struct NegativeControl {
  bool ran = false;
  double dt = 0.0;
  Index samples = 0;
  double max_hamiltonian_drift = 0.0;
  double max_mass_drift = 0.0;
  Index blowups = 0;
  bool flagged = false;   // must be true: the broken run trips the check
};

struct InvarianceReport {
  std::vector<ObservableComparison> observables;
  Index n_samples = 0;
  double effective_sample_size = 0.0;
  double max_hamiltonian_drift = 0.0;
  double max_mass_drift = 0.0;
  Index blowups = 0;
  bool conservation_ok = false;
  NegativeControl negative_control;

  bool statistics_ok() const;
  bool passed() const;
  Json to_json() const;
};

/// z-score with 0/0 read as 0 (pathwise identical statistics).
double combined_z(double mean_t0, double se_t0, double mean_T, double se_T);

/// Evolves every sample of the weighted ensemble with the kernel and
/// compares weighted observables at t = 0 and t = T with the same weights.
/// Trajectories whose relative H or M drift exceeds cfg.conservation_tol
/// (or that blow up) mark the report invalid.
InvarianceReport compare_under_flow(const WeightedEnsemble& ensemble,
                                    const std::vector<Observable>& observables,
                                    const FlowKernel& kernel,
                                    const FlowConfig& cfg, unsigned threads);

/// Same flow with dt multiplied by `factor` (capped at |T|) and the
/// stability guard disabled, on the first `samples` members.
NegativeControl broken_flow_control(const WeightedEnsemble& ensemble,
                                    const FlowKernel& kernel,
                                    const FlowConfig& cfg, double factor,
                                    Index samples, unsigned threads);

InvarianceReport run_invariance(const ExperimentConfig& config);

struct TestResult {
  std::string name;
  bool passed = false;
  Json details;
};

struct SuiteReport {
  std::string suite;
  std::vector<TestResult> tests;

  bool passed() const;
  const TestResult& find(const std::string& name) const;
};

SuiteReport to_suite(const InvarianceReport& report, const std::string& prefix = "");

/// Exact Gaussian identities and the H^theta moment bounds.
SuiteReport run_moment_suite(const ExperimentConfig& config);

/// Tail probability fits: the H^theta tail and the steepening of the
/// high-frequency mass and L^4 tails as the cut grows.
SuiteReport run_tail_suite(const ExperimentConfig& config);

/// Canonical checks: the inverted density of M against Monte Carlo, then
/// invariance of the window-conditioned, reweighted ensemble.
SuiteReport run_canonical_suite(const ExperimentConfig& config);

/// Report document: suite name, code version, seed, config echo, per-test
/// results and the overall verdict. Deterministic for a fixed config.
Json report_json(const ExperimentConfig& config, const SuiteReport& suite);

/// Writes the report to config.report_path when set.
void write_report(const ExperimentConfig& config, const Json& report);

/// Default configuration of each experiment family.
ExperimentConfig default_config(const std::string& experiment);

}  // namespace gibbsflow

#endif  // GIBBSFLOW_HARNESS_HPP
