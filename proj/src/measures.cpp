#include "gibbsflow/measures.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "gibbsflow/errors.hpp"
#include "gibbsflow/parallel.hpp"

namespace gibbsflow {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kFocusingMinS = 8.0 / 5.0;
}  // namespace

std::string to_string(MeasureKind kind) {
  switch (kind) {
    case MeasureKind::gaussian: return "gaussian";
    case MeasureKind::gibbs_defocusing: return "defocusing";
    case MeasureKind::gibbs_focusing: return "focusing";
  }
  return "unknown";
}

MeasureKind measure_kind_from_string(const std::string& name) {
  if (name == "gaussian") return MeasureKind::gaussian;
  if (name == "defocusing" || name == "gibbs_defocusing") return MeasureKind::gibbs_defocusing;
  if (name == "focusing" || name == "gibbs_focusing") return MeasureKind::gibbs_focusing;
  throw InvalidArgument("unknown measure '" + name + "'");
}

MeasureSpec MeasureSpec::gaussian(double cut) {
  return {MeasureKind::gaussian, cut, 0.0, false};
}

MeasureSpec MeasureSpec::defocusing(double cut) {
  return {MeasureKind::gibbs_defocusing, cut, 0.0, false};
}

MeasureSpec MeasureSpec::focusing(double cut, double mass_cut) {
  return {MeasureKind::gibbs_focusing, cut, mass_cut, false};
}

int MeasureSpec::sign() const {
  switch (kind) {
    case MeasureKind::gaussian: return 0;
    case MeasureKind::gibbs_defocusing: return 1;
    case MeasureKind::gibbs_focusing: return -1;
  }
  return 0;
}

void MeasureSpec::validate(const SpectralBasis& basis) const {
  if (!(lambda_cut >= basis.lambda(0))) {
    throw InvalidArgument("measure cut must be >= lambda_1");
  }
  if (kind == MeasureKind::gibbs_focusing) {
    if (!(mass_cut > 0.0)) throw InvalidArgument("focusing measure needs m > 0");
    if (basis.s() <= kFocusingMinS && !experimental_focusing) {
      throw InvalidArgument(
          "focusing measures require s > 8/5 (set experimental_focusing to "
          "override)");
    }
  }
}

Eigen::VectorXd WeightedEnsemble::normalized_weights() const {
  if (size() == 0) throw DegenerateEnsemble("empty ensemble");
  const double top = log_weights.maxCoeff();
  if (!std::isfinite(top)) {
    throw DegenerateEnsemble("every sample violates the measure's cutoff");
  }
  Eigen::VectorXd w = (log_weights.array() - top).exp().matrix();
  return w / w.sum();
}

double WeightedEnsemble::effective_sample_size() const {
  const Eigen::VectorXd w = normalized_weights();
  return 1.0 / w.squaredNorm();
}

stats::MeanSe WeightedEnsemble::partition() const {
  const Eigen::VectorXd w = log_weights.array().exp().matrix();
  return stats::mean_se(w);
}

FieldCoeffs sample_gaussian(const BasisPtr& basis, double cut,
                            std::uint64_t seed, std::uint64_t stream) {
  RandomStream rng(seed, stream);
  Eigen::VectorXcd alpha = Eigen::VectorXcd::Zero(basis->n_modes());
  const Index keep = basis->modes_below(cut);
  for (Index j = 0; j < keep; ++j) {
    const double xi = rng.normal();
    const double eta = rng.normal();
    alpha(j) = Complex(xi, eta) / std::sqrt(2.0 * basis->lambda(j));
  }
  return {basis, std::move(alpha)};
}

double renormalized_mass(const FieldCoeffs& u, double cut) {
  const Index keep = u.basis->modes_below(cut);
  return (u.alpha.head(keep).array().abs2() -
          u.lambdas().head(keep).array().inverse())
      .sum();
}

double renormalized_mass_high(const FieldCoeffs& u, double cut) {
  const Index keep = u.basis->modes_below(cut);
  const Index rest = u.size() - keep;
  return (u.alpha.tail(rest).array().abs2() -
          u.lambdas().tail(rest).array().inverse())
      .sum();
}

double gibbs_log_weight(const FieldCoeffs& u, const MeasureSpec& spec,
                        const CutoffQuadrature& quadrature) {
  if (spec.kind == MeasureKind::gaussian) return 0.0;
  const FieldCoeffs low = project_low(u, spec.lambda_cut);
  const double half_quartic = 0.5 * quadrature.quartic_norm(low.alpha);
  if (spec.kind == MeasureKind::gibbs_defocusing) return -half_quartic;

  const bool supercritical = u.basis->s() > 2.0;
  const double mass = supercritical ? low.alpha.squaredNorm()
                                    : std::abs(renormalized_mass(low, spec.lambda_cut));
  return mass < spec.mass_cut ? half_quartic : kNegInf;
}

double gibbs_log_weight(const FieldCoeffs& u, const MeasureSpec& spec,
                        const CutoffProfile& profile) {
  if (spec.kind == MeasureKind::gaussian) return 0.0;
  const CutoffQuadrature quadrature(u.basis, spec.lambda_cut, profile);
  return gibbs_log_weight(u, spec, quadrature);
}

WeightedEnsemble build_ensemble(const BasisPtr& basis, const MeasureSpec& spec,
                                Index n_samples, std::uint64_t seed,
                                const SamplingOptions& options) {
  if (n_samples < 1) throw InvalidArgument("ensemble needs n >= 1");
  spec.validate(*basis);
  WeightedEnsemble ens;
  ens.seed = seed;
  ens.spec = spec;
  ens.samples.resize(static_cast<std::size_t>(n_samples));
  ens.log_weights.resize(n_samples);
  std::unique_ptr<CutoffQuadrature> quadrature;
  if (spec.kind != MeasureKind::gaussian) {
    quadrature = std::make_unique<CutoffQuadrature>(basis, spec.lambda_cut,
                                                    options.profile);
  }
  parallel_for(n_samples, options.threads, [&](std::int64_t i) {
    auto& u = ens.samples[static_cast<std::size_t>(i)];
    u = sample_gaussian(basis, spec.lambda_cut, seed, static_cast<std::uint64_t>(i));
    ens.log_weights(i) = quadrature ? gibbs_log_weight(u, spec, *quadrature) : 0.0;
  });
  return ens;
}

RejectionResult sample_defocusing_exact(const BasisPtr& basis, double cut,
                                        Index n_accept, std::uint64_t seed,
                                        Index max_proposals,
                                        const SamplingOptions& options) {
  const MeasureSpec spec = MeasureSpec::defocusing(cut);
  spec.validate(*basis);
  if (max_proposals <= 0) max_proposals = 1000 * n_accept;
  const CutoffQuadrature quadrature(basis, cut, options.profile);
  RejectionResult out;
  out.ensemble.seed = seed;
  out.ensemble.spec = spec;
  // Proposal i uses stream 2i for the field and 2i+1 for the coin.
  for (Index i = 0; i < max_proposals && static_cast<Index>(out.ensemble.samples.size()) < n_accept; ++i) {
    const auto stream = static_cast<std::uint64_t>(i);
    FieldCoeffs u = sample_gaussian(basis, cut, seed, 2 * stream);
    const double logw = gibbs_log_weight(u, spec, quadrature);
    RandomStream coin(seed, 2 * stream + 1);
    ++out.proposals;
    if (std::log(coin.uniform()) < logw) out.ensemble.samples.push_back(std::move(u));
  }
  out.ensemble.log_weights =
      Eigen::VectorXd::Zero(static_cast<Index>(out.ensemble.samples.size()));
  out.acceptance = static_cast<double>(out.ensemble.samples.size()) /
                   static_cast<double>(out.proposals);
  return out;
}

Observable mode_intensity(Index mode) {
  return {"abs2_alpha_" + std::to_string(mode + 1),
          [mode](const FieldCoeffs& u) { return std::norm(u.alpha(mode)); }};
}

Observable hnorm_squared(double theta) {
  return {"hnorm2_theta",
          [theta](const FieldCoeffs& u) {
            const double n = sobolev_norm(u, theta);
            return n * n;
          }};
}

Observable cutoff_quartic(std::shared_ptr<const CutoffQuadrature> quadrature) {
  return {"l4_cut_quartic",
          [q = std::move(quadrature)](const FieldCoeffs& u) {
            return q->quartic_norm(u.alpha);
          }};
}

Observable renormalized_mass_observable(double cut) {
  return {"renormalized_mass",
          [cut](const FieldCoeffs& u) { return renormalized_mass(u, cut); }};
}

Observable mode_correlation(Index a, Index b) {
  return {"re_alpha_" + std::to_string(a + 1) + "_conj_alpha_" + std::to_string(b + 1),
          [a, b](const FieldCoeffs& u) {
            return (u.alpha(a) * std::conj(u.alpha(b))).real();
          }};
}

std::vector<Observable> default_observables(const BasisPtr& basis, double cut,
                                            double theta,
                                            const CutoffProfile& profile) {
  auto quadrature = std::make_shared<const CutoffQuadrature>(basis, cut, profile);
  return {mode_intensity(0), hnorm_squared(theta), cutoff_quartic(quadrature),
          renormalized_mass_observable(cut), mode_correlation(0, 1)};
}

Estimate estimate_weighted(const Eigen::Ref<const Eigen::VectorXd>& log_weights,
                           const Eigen::Ref<const Eigen::VectorXd>& values) {
  if (log_weights.size() != values.size()) {
    throw DimensionError("estimate: weights/values length mismatch");
  }
  if (values.size() == 0) throw DegenerateEnsemble("empty ensemble");
  const double top = log_weights.maxCoeff();
  if (!std::isfinite(top)) {
    throw DegenerateEnsemble("every sample has zero weight");
  }
  Eigen::ArrayXd w = (log_weights.array() - top).exp();
  w /= w.sum();
  Estimate e;
  // Zero-weight samples may carry non-finite values; mask them out.
  for (Index i = 0; i < values.size(); ++i) {
    if (w(i) > 0.0) e.value += w(i) * values(i);
  }
  double var = 0.0;
  for (Index i = 0; i < values.size(); ++i) {
    if (w(i) > 0.0) var += w(i) * w(i) * (values(i) - e.value) * (values(i) - e.value);
  }
  e.std_error = std::sqrt(var);
  return e;
}

Estimate estimate_observable(const WeightedEnsemble& ens, const Observable& f) {
  Eigen::VectorXd values(ens.size());
  for (Index i = 0; i < ens.size(); ++i) {
    values(i) = f.evaluate(ens.samples[static_cast<std::size_t>(i)]);
  }
  return estimate_weighted(ens.log_weights, values);
}

std::string TailStatistic::name() const {
  switch (kind) {
    case Kind::hnorm: return "hnorm";
    case Kind::l4_high: return "l4_high";
    case Kind::mass_high: return "mass_high";
  }
  return "unknown";
}

Eigen::VectorXd sample_statistic(const BasisPtr& basis, double cut,
                                 const TailStatistic& statistic, Index n,
                                 std::uint64_t seed, unsigned threads) {
  if (n < 1) throw InvalidArgument("sample_statistic needs n >= 1");
  Eigen::VectorXd values(n);
  const Index low = basis->modes_below(cut);
  std::unique_ptr<ProductQuadrature> rule;
  if (statistic.kind == TailStatistic::Kind::l4_high) {
    rule = std::make_unique<ProductQuadrature>(
        make_product_quadrature(*basis, basis->n_modes(), 8.0));
  }
  const double draw_cut = statistic.kind == TailStatistic::Kind::hnorm
                              ? cut
                              : basis->lambda_max();
  parallel_for(n, threads, [&](std::int64_t i) {
    const FieldCoeffs u =
        sample_gaussian(basis, draw_cut, seed, static_cast<std::uint64_t>(i));
    switch (statistic.kind) {
      case TailStatistic::Kind::hnorm:
        values(i) = sobolev_norm(u, statistic.theta);
        break;
      case TailStatistic::Kind::mass_high:
        values(i) = std::abs(renormalized_mass_high(u, cut));
        break;
      case TailStatistic::Kind::l4_high: {
        Eigen::VectorXcd high = u.alpha;
        high.head(low).setZero();
        const Eigen::ArrayXd re = (rule->modes * high.real()).array();
        const Eigen::ArrayXd im = (rule->modes * high.imag()).array();
        const double l4 = (rule->weights.array() *
                           (re.square() + im.square()).square()).sum();
        values(i) = std::pow(l4, 0.25);
        break;
      }
    }
  });
  return values;
}

Estimate exceedance(const Eigen::Ref<const Eigen::VectorXd>& values,
                    double threshold) {
  const auto n = static_cast<double>(values.size());
  const double hits = static_cast<double>((values.array() > threshold).count());
  const double p = hits / n;
  return {p, std::sqrt(p * (1.0 - p) / n)};
}

Estimate tail_probability(const BasisPtr& basis, double cut,
                          const TailStatistic& statistic, double threshold,
                          Index n, std::uint64_t seed, unsigned threads) {
  return exceedance(sample_statistic(basis, cut, statistic, n, seed, threads),
                    threshold);
}

void write_ensemble_csv(const WeightedEnsemble& ens, std::ostream& out) {
  out << "sample,log_weight,j,lambda_j,re_alpha_j,im_alpha_j\n" << std::setprecision(17);
  for (Index i = 0; i < ens.size(); ++i) {
    const FieldCoeffs& u = ens.samples[static_cast<std::size_t>(i)];
    for (Index j = 0; j < u.size(); ++j) {
      out << i << ',' << ens.log_weights(i) << ',' << (j + 1) << ',' << u.basis->lambda(j)
          << ',' << u.alpha(j).real() << ',' << u.alpha(j).imag() << '\n';
    }
  }
}

}  // namespace gibbsflow
