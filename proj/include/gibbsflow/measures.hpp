#ifndef GIBBSFLOW_MEASURES_HPP
#define GIBBSFLOW_MEASURES_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "gibbsflow/fields.hpp"
#include "gibbsflow/random.hpp"
#include "gibbsflow/stats.hpp"

namespace gibbsflow {

enum class MeasureKind { gaussian, gibbs_defocusing, gibbs_focusing };

std::string to_string(MeasureKind kind);
MeasureKind measure_kind_from_string(const std::string& name);

/// Which finite-cut measure to sample. Focusing measures carry the mass
/// cutoff m, read as ||P_{<=cut} u||^2 < m for s > 2 and as
/// |M_{<=cut}(u)| < m for s <= 2.
struct MeasureSpec {
  MeasureKind kind = MeasureKind::gaussian;
  double lambda_cut = 0.0;
  double mass_cut = 0.0;
  // Admit focusing measures with s <= 8/5, where integrability of the
  // weight is not known. Exploration only.
  bool experimental_focusing = false;

  static MeasureSpec gaussian(double cut);
  static MeasureSpec defocusing(double cut);
  static MeasureSpec focusing(double cut, double mass_cut);

  /// +1 defocusing, -1 focusing, 0 gaussian.
  int sign() const;

  /// Throws InvalidArgument on an inconsistent spec for this basis.
  void validate(const SpectralBasis& basis) const;
};

/// Gaussian draws with log Radon-Nikodym weights against mu_0.
struct WeightedEnsemble {
  std::vector<FieldCoeffs> samples;
  Eigen::VectorXd log_weights;
  std::uint64_t seed = 0;
  MeasureSpec spec;

  Index size() const { return log_weights.size(); }

  /// Self-normalised weights summing to 1; throws DegenerateEnsemble if no
  /// weight is finite.
  Eigen::VectorXd normalized_weights() const;

  /// (sum w)^2 / sum w^2.
  double effective_sample_size() const;

  /// Mean of exp(log_weight) with its standard error: the partition
  /// function estimate when the samples come from mu_0.
  stats::MeanSe partition() const;
};

/// One mu_0^{<=cut} draw: alpha_j = (xi + i eta) / sqrt(2 lambda_j) for
/// lambda_j <= cut, zero above. Variates come from stream `stream` of `seed`.
FieldCoeffs sample_gaussian(const BasisPtr& basis, double cut,
                            std::uint64_t seed, std::uint64_t stream = 0);

/// sum_{lambda_j <= cut} (|alpha_j|^2 - 1/lambda_j).
double renormalized_mass(const FieldCoeffs& u, double cut);

/// sum_{lambda_j > cut} (|alpha_j|^2 - 1/lambda_j) over the retained modes.
double renormalized_mass_high(const FieldCoeffs& u, double cut);

/// log G_cut(P_{<=cut} u): -||Q u||^4/2 defocusing, +||Q u||^4/2 focusing
/// inside the mass cutoff and -inf outside, 0 for the Gaussian measure.
double gibbs_log_weight(const FieldCoeffs& u, const MeasureSpec& spec,
                        const CutoffQuadrature& quadrature);
double gibbs_log_weight(const FieldCoeffs& u, const MeasureSpec& spec,
                        const CutoffProfile& profile = {});

struct SamplingOptions {
  unsigned threads = 1;
  CutoffProfile profile;
};

/// n independent mu_0^{<=cut} draws (sample i uses stream i) with their
/// Gibbs log weights.
WeightedEnsemble build_ensemble(const BasisPtr& basis, const MeasureSpec& spec,
                                Index n_samples, std::uint64_t seed,
                                const SamplingOptions& options = {});

/// Exact rejection sampler for the defocusing measure (weights <= 1).
/// Accepted draws carry log weight 0; `acceptance` estimates Z.
struct RejectionResult {
  WeightedEnsemble ensemble;
  Index proposals = 0;
  double acceptance = 0.0;
};
RejectionResult sample_defocusing_exact(const BasisPtr& basis, double cut,
                                        Index n_accept, std::uint64_t seed,
                                        Index max_proposals = 0,
                                        const SamplingOptions& options = {});

/// A named scalar function of a field.
struct Observable {
  std::string name;
  std::function<double(const FieldCoeffs&)> evaluate;
};

/// |alpha_j|^2 for the 0-based mode j.
Observable mode_intensity(Index mode);
/// ||u||_{H^theta}^2.
Observable hnorm_squared(double theta);
/// ||Q_cut u||_{L^4}^4 on the given quadrature.
Observable cutoff_quartic(std::shared_ptr<const CutoffQuadrature> quadrature);
/// M_{<=cut}(u).
Observable renormalized_mass_observable(double cut);
/// Re(alpha_a conj(alpha_b)).
Observable mode_correlation(Index a, Index b);

/// |alpha_1|^2, ||u||^2_{H^theta}, ||Q u||^4_{L^4}, M_{<=cut}, Re(alpha_1 conj alpha_2).
std::vector<Observable> default_observables(const BasisPtr& basis, double cut,
                                            double theta,
                                            const CutoffProfile& profile = {});

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Self-normalised estimate sum F w / sum w with the delta-method error
/// sqrt(sum wn^2 (F - est)^2), wn the normalised weights.
Estimate estimate_weighted(const Eigen::Ref<const Eigen::VectorXd>& log_weights,
                           const Eigen::Ref<const Eigen::VectorXd>& values);
Estimate estimate_observable(const WeightedEnsemble& ens, const Observable& f);

/// Statistics whose tails are probed under mu_0.
struct TailStatistic {
  enum class Kind { hnorm, l4_high, mass_high };
  Kind kind = Kind::hnorm;
  double theta = 0.0;   // hnorm: ||P_{<=cut} u||_{H^theta}
  std::string name() const;
};

/// Values of the statistic over n mu_0 draws. hnorm draws modes up to
/// `cut`; the high-frequency statistics draw every retained mode and look
/// at lambda_j > cut (|M_{>cut}| and ||P_{>cut} u||_{L^4}).
Eigen::VectorXd sample_statistic(const BasisPtr& basis, double cut,
                                 const TailStatistic& statistic, Index n,
                                 std::uint64_t seed, unsigned threads = 1);

/// Monte Carlo P(statistic > threshold) with binomial SE.
Estimate tail_probability(const BasisPtr& basis, double cut,
                          const TailStatistic& statistic, double threshold,
                          Index n, std::uint64_t seed, unsigned threads = 1);

/// Fraction of entries above threshold with binomial SE.
Estimate exceedance(const Eigen::Ref<const Eigen::VectorXd>& values,
                    double threshold);

/// Long-format CSV: sample,log_weight,j,lambda_j,re_alpha_j,im_alpha_j.
void write_ensemble_csv(const WeightedEnsemble& ens, std::ostream& out);

}  // namespace gibbsflow

#endif  // GIBBSFLOW_MEASURES_HPP
