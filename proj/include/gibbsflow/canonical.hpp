#ifndef GIBBSFLOW_CANONICAL_HPP
#define GIBBSFLOW_CANONICAL_HPP

#include <memory>

#include "gibbsflow/measures.hpp"

namespace gibbsflow {

/// Window conditioning m - eps < M(u) < m + eps, with the cylinder cut used
/// by the projected density.
struct CanonicalSpec {
  double m = 0.0;
  double epsilon = 0.1;
  double lambda_cut = 0.0;

  /// eps > 0; for s > 2 also m > -sum_j 1/lambda_j (finite-J stand-in for
  /// m > -Tr[h^{-1}]).
  void validate(const SpectralBasis& basis) const;
};

/// Lower edge of the support of M at finite truncation, -sum_j 1/lambda_j.
double mass_support_edge(const SpectralBasis& basis);

/// Standard deviation of M_{<=J} under mu_0, sqrt(sum_j lambda_j^{-2}).
double mass_std(const SpectralBasis& basis);

/// Weyl-law estimate of sum_{j > J} lambda_j^{-2}, the part of the infinite
/// product dropped by truncating at J modes.
double truncation_tail(const SpectralBasis& basis);

/// phi(s) = prod_j exp(-i s / lambda_j) / (1 - i s / lambda_j) over the
/// given eigenvalues, evaluated in log space.
Eigen::VectorXcd characteristic_function(
    const Eigen::Ref<const Eigen::VectorXd>& lambdas,
    const Eigen::Ref<const Eigen::VectorXd>& s_points);

/// Characteristic function of M_{>cut} under mu_0 over retained modes
/// lambda_j > cut (cut = 0: every mode, the law of M itself). Needs at least
/// two modes above the cut.
Eigen::VectorXcd characteristic_function(
    const SpectralBasis& basis, double cut,
    const Eigen::Ref<const Eigen::VectorXd>& s_points);

struct InversionOptions {
  double tol = 1e-8;       // target for the truncated |s| > S integral
  double s_max = 2.0e4;    // largest admissible S
  // Admit one or two modes; the s-tail is then closed analytically.
  bool allow_few_modes = false;
};

struct DensityCurve {
  Eigen::VectorXd x;
  Eigen::VectorXd f;
  Eigen::VectorXd imag_residue;
  double s_range = 0.0;      // S
  double s_step = 0.0;       // ds
  double tail_bound = 0.0;   // bound on the dropped |s| > S contribution
  double truncation_tail = 0.0;

  /// Trapezoidal integral of f over x.
  double integral() const;
};

/// Density of sum_j (|alpha_j|^2 - 1/lambda_j) for independent
/// |alpha_j|^2 ~ Exp(lambda_j), by trapezoidal Fourier inversion on
/// [-S, S]. The step is fixed at construction from the x range that will be
/// queried, so evaluation outside [x_lo, x_hi] may alias.
class MassDensity {
 public:
  MassDensity(Eigen::VectorXd lambdas, double x_lo, double x_hi,
              const InversionOptions& options = {});

  /// Density of M_{>cut} for the basis.
  static MassDensity above(const SpectralBasis& basis, double cut, double x_lo,
                           double x_hi, const InversionOptions& options = {});
  /// Density of M_{<=cut} for the basis.
  static MassDensity below(const SpectralBasis& basis, double cut, double x_lo,
                           double x_hi, const InversionOptions& options = {});

  double operator()(double x) const { return evaluate(x).real(); }
  /// Real part is the density; the imaginary part is inversion residue.
  Complex evaluate(double x) const;

  DensityCurve curve(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  double s_range() const { return s_range_; }
  double s_step() const { return s_step_; }
  double tail_bound() const { return tail_bound_; }
  double support_edge() const { return -shift_; }
  const Eigen::VectorXd& lambdas() const { return lambdas_; }

 private:
  Eigen::VectorXd lambdas_;
  double shift_ = 0.0;         // sum 1/lambda_j
  double s_range_ = 0.0;
  double s_step_ = 0.0;
  double tail_bound_ = 0.0;
  bool closure_ = false;       // S capped at S_max, tail closed analytically
  Eigen::VectorXd s_nodes_;    // 0, ds, ..., S
  Eigen::VectorXcd phi_pos_;   // phi(s_k)
  Eigen::VectorXcd phi_neg_;   // phi(-s_k)

  Complex tail_correction(double x) const;
};

/// Density curve of M_{>cut} on the given abscissae.
DensityCurve density_by_inversion(const SpectralBasis& basis, double cut,
                                  const Eigen::Ref<const Eigen::VectorXd>& x,
                                  const InversionOptions& options = {});

/// f_0(m), the density of M at m. Throws InversionAccuracyError if the
/// value is not positive beyond the inversion tolerance.
double f0_at(const SpectralBasis& basis, double m,
             const InversionOptions& options = {});

/// Radon-Nikodym factor of the cylinder projection of mu_0^m against
/// mu_0^{<=cut}: f_cut(m - M_{<=cut}(u)) / f_0(m).
class CylinderDensity {
 public:
  CylinderDensity(const BasisPtr& basis, double cut, double m,
                  const InversionOptions& options = {});

  double operator()(const FieldCoeffs& u_low) const;
  double f0m() const { return f0m_; }
  double cut() const { return cut_; }
  double m() const { return m_; }
  const MassDensity& high_density() const { return *f_high_; }

 private:
  double cut_;
  double m_;
  double f0m_;
  std::unique_ptr<MassDensity> f_high_;
};

/// One-shot f_cut(m - M_{<=cut}(u)) / f_0(m).
double cylinder_density(const FieldCoeffs& u_low, double cut, double m);

struct ConditionedEnsemble {
  WeightedEnsemble ensemble;
  Index proposals = 0;
  double acceptance = 0.0;
  double acceptance_se = 0.0;
};

/// Rejection sampling of mu_0^{m,eps}: mu_0 draws over every retained mode
/// (proposal i uses stream i), kept iff |M_{<=J}(u) - m| < eps. Stops after
/// n acceptances or max_proposals (default 1000 n) proposals.
ConditionedEnsemble sample_conditioned(const BasisPtr& basis,
                                       const CanonicalSpec& spec, Index n,
                                       std::uint64_t seed,
                                       Index max_proposals = 0,
                                       unsigned threads = 1);

/// Fixed-budget variant for acceptance-rate studies: exactly `proposals`
/// draws, keeping whatever lands in the window.
ConditionedEnsemble sample_conditioned_budget(const BasisPtr& basis,
                                              const CanonicalSpec& spec,
                                              Index proposals,
                                              std::uint64_t seed,
                                              unsigned threads = 1);

/// Adds -/+ (1/2)||u||_{L^4}^4 (sign +1 defocusing, -1 focusing) to every
/// log weight. With a quadrature the dressed ||Q_cut u||^4 is used instead,
/// which is the weight conserved by the truncated flow at that cut.
WeightedEnsemble canonical_gibbs_reweight(
    const WeightedEnsemble& ens, int sign,
    const CutoffQuadrature* quadrature = nullptr);

}  // namespace gibbsflow

#endif  // GIBBSFLOW_CANONICAL_HPP
