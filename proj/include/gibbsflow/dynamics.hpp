#ifndef GIBBSFLOW_DYNAMICS_HPP
#define GIBBSFLOW_DYNAMICS_HPP

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "gibbsflow/fields.hpp"

namespace gibbsflow {

/// State of the truncated flow
///   i du/dt = h u + sign Q(|Q u|^2 Q u),  Q = chi(h / cut).
/// sign = +1 is defocusing, -1 focusing.
struct FlowState {
  FieldCoeffs u;
  double t = 0.0;
  double lambda_cut = 0.0;
  int sign = 1;
  CutoffProfile profile;
};

enum class Integrator { interaction_rk4, picard_oracle };

std::string to_string(Integrator integrator);
Integrator integrator_from_string(const std::string& name);

struct FlowConfig {
  double dt = 1e-3;
  double T = 1.0;   // signed horizon; T < 0 runs backwards
  Integrator integrator = Integrator::interaction_rk4;
  double conservation_tol = 1e-8;
  // dt * lambda_max(active block) <= 0.5. Disabled only for negative
  // controls that need a deliberately bad step.
  bool enforce_stability_guard = true;
  // Abort once ||u||_{L^2} exceeds this multiple of its initial value.
  double blowup_factor = 1e3;

  void validate() const;
};

/// Precomputed pieces of the flow at one cut: the dressed quadrature and the
/// active low block. Reusable across trajectories and threads.
class FlowKernel {
 public:
  FlowKernel(BasisPtr basis, double cut, int sign,
             const CutoffProfile& profile = {});

  const BasisPtr& basis() const { return quadrature_->basis(); }
  double cut() const { return quadrature_->cut(); }
  int sign() const { return sign_; }
  Index active_modes() const { return quadrature_->active_modes(); }
  const CutoffQuadrature& quadrature() const { return *quadrature_; }

  /// sign * Q(|Q u|^2 Q u) in coefficients; zero beyond the active block.
  void nonlinear(const Eigen::Ref<const Eigen::VectorXcd>& alpha,
                 Eigen::VectorXcd& out) const;

  /// sum_{lambda_j <= cut} lambda_j |alpha_j|^2 + sign ||Q u||^4 / 2.
  double hamiltonian(const Eigen::Ref<const Eigen::VectorXcd>& alpha) const;
  /// sum_{lambda_j <= cut} |alpha_j|^2.
  double mass_low(const Eigen::Ref<const Eigen::VectorXcd>& alpha) const;

 private:
  std::shared_ptr<const CutoffQuadrature> quadrature_;
  int sign_;
};

/// sign * Q(|Q u|^2 Q u) as a field; supported on lambda_j < cut.
FieldCoeffs nonlinear_term(const FieldCoeffs& u, double cut, int sign,
                           const CutoffProfile& profile = {});

double hamiltonian(const FlowState& state);
double mass_low(const FlowState& state);

struct TrajectoryPoint {
  double t = 0.0;
  double hamiltonian = 0.0;
  double mass_low = 0.0;
  double hnorm_theta = 0.0;
  Eigen::VectorXd amplitudes;   // |alpha_j|, filled when requested
};

struct Trajectory {
  double theta = 0.0;
  std::vector<TrajectoryPoint> points;

  /// max_t |H(t) - H(0)| / max(|H(0)|, tiny), same for the mass.
  double hamiltonian_drift() const;
  double mass_drift() const;
};

struct TrajectoryOptions {
  Index every = 0;   // record every k-th step; 0 records only the end points
  double theta = 0.0;
  bool amplitudes = false;
};

/// Advances the state by cfg.T. High modes (lambda_j >= cut, where chi
/// vanishes) rotate exactly, alpha_j(t) = exp(-i t lambda_j) alpha_j(0);
/// the active block follows interaction-picture RK4 (or the Picard oracle
/// step by step). Throws BlowupDetected on non-finite or runaway norms.
FlowState evolve(const FlowState& state, const FlowConfig& cfg,
                 Trajectory* trajectory = nullptr,
                 const TrajectoryOptions& options = {});

/// Same with a prebuilt kernel (must match the state's cut and sign).
FlowState evolve(const FlowState& state, const FlowConfig& cfg,
                 const FlowKernel& kernel, Trajectory* trajectory = nullptr,
                 const TrajectoryOptions& options = {});

struct PicardOptions {
  double theta = 0.0;
  Index subintervals = 64;   // tau nodes on [0, delta]
  double tol = 1e-12;
  Index max_iter = 60;
};

/// u(delta) from the fixed point of the Duhamel map
///   u(t) = e^{-ith} f - i sign int_0^t e^{-i(t-tau)h} Q(|Q u|^2 Q u) dtau
/// on a Simpson tau grid, iterated from the free evolution. Needs
/// delta (1 + ||f||_{H^theta}^3) <= 1; throws ContractionFailure if the
/// iterates have not settled within max_iter.
FieldCoeffs picard_local_solve(const FieldCoeffs& f, double delta, double cut,
                               int sign, const PicardOptions& options = {},
                               const CutoffProfile& profile = {});

/// CSV with columns t,H,M_low,hnorm_theta and optional abs_alpha_j.
void write_trajectory_csv(const Trajectory& trajectory, std::ostream& out);
void write_trajectory_csv(const Trajectory& trajectory, const std::string& path);

/// Default H^theta index: (1/2 - 1/s) - 1/4 for s <= 2, the midpoint of
/// (1/2 (1/2 - 1/s), 1/2 - 1/s) for s > 2.
double default_theta(double s);

}  // namespace gibbsflow

#endif  // GIBBSFLOW_DYNAMICS_HPP
