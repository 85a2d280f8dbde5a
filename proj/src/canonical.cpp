#include "gibbsflow/canonical.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "gibbsflow/errors.hpp"
#include "gibbsflow/parallel.hpp"

namespace gibbsflow {

namespace {

constexpr double kPi = std::numbers::pi;
const Complex kI(0.0, 1.0);

Eigen::VectorXd modes_above(const SpectralBasis& basis, double cut) {
  const Index keep = basis.modes_below(cut);
  return basis.eigenvalues().tail(basis.n_modes() - keep);
}

Eigen::VectorXd modes_at_or_below(const SpectralBasis& basis, double cut) {
  return basis.eigenvalues().head(basis.modes_below(cut));
}

}  // namespace

void CanonicalSpec::validate(const SpectralBasis& basis) const {
  if (!(epsilon > 0.0)) throw InvalidArgument("canonical window needs eps > 0");
  if (basis.s() > 2.0 && !(m > mass_support_edge(basis))) {
    throw InvalidArgument("for s > 2 the target mass must exceed -sum 1/lambda_j");
  }
}

double mass_support_edge(const SpectralBasis& basis) {
  return -basis.eigenvalues().array().inverse().sum();
}

double mass_std(const SpectralBasis& basis) {
  return std::sqrt(basis.eigenvalues().array().pow(-2.0).sum());
}

double truncation_tail(const SpectralBasis& basis) {
  // Weyl: N(lambda) ~ c lambda^a, a = 1/2 + 1/s, so
  // sum_{j>J} lambda_j^{-2} ~ int_{lambda_J}^inf lambda^{-2} dN
  //                        = N(lambda_J) a / ((2 - a) lambda_J^2).
  const double a = 0.5 + 1.0 / basis.s();
  const double top = basis.lambda_max();
  const double n_top = weyl_count(basis.potential(), basis.grid(), top);
  return n_top * a / ((2.0 - a) * top * top);
}

Eigen::VectorXcd characteristic_function(
    const Eigen::Ref<const Eigen::VectorXd>& lambdas,
    const Eigen::Ref<const Eigen::VectorXd>& s_points) {
  Eigen::VectorXcd out(s_points.size());
  for (Index k = 0; k < s_points.size(); ++k) {
    const double s = s_points(k);
    Complex log_phi = 0.0;
    for (Index j = 0; j < lambdas.size(); ++j) {
      const double r = s / lambdas(j);
      log_phi += -kI * r - std::log(1.0 - kI * r);
    }
    out(k) = std::exp(log_phi);
  }
  return out;
}

Eigen::VectorXcd characteristic_function(
    const SpectralBasis& basis, double cut,
    const Eigen::Ref<const Eigen::VectorXd>& s_points) {
  const Eigen::VectorXd lambdas = modes_above(basis, cut);
  if (lambdas.size() < 2) {
    throw NonIntegrableCharacteristic(
        "fewer than two retained modes above the cut; phi is not integrable");
  }
  return characteristic_function(lambdas, s_points);
}

double DensityCurve::integral() const {
  if (x.size() < 2) return 0.0;
  double total = 0.0;
  for (Index i = 1; i < x.size(); ++i) {
    total += 0.5 * (x(i) - x(i - 1)) * (f(i) + f(i - 1));
  }
  return total;
}

MassDensity::MassDensity(Eigen::VectorXd lambdas, double x_lo, double x_hi,
                         const InversionOptions& options)
    : lambdas_(std::move(lambdas)) {
  const Index k = lambdas_.size();
  if (k == 0) throw NonIntegrableCharacteristic("no modes to invert");
  if (k < 2 && !options.allow_few_modes) {
    throw NonIntegrableCharacteristic("fewer than two modes; phi not integrable");
  }
  std::sort(lambdas_.data(), lambdas_.data() + k);
  shift_ = lambdas_.array().inverse().sum();

  // |phi(s)| <= prod_{i<m} lambda_i / s, so the dropped tail of
  // (1/pi) int_S^inf |phi| is at most prod lambda_i / (pi (m-1) S^{m-1}).
  double best_s = std::numeric_limits<double>::infinity();
  double log_prod = std::log(lambdas_(0));
  for (Index m = 2; m <= std::min<Index>(k, 64); ++m) {
    log_prod += std::log(lambdas_(m - 1));
    const double md = static_cast<double>(m - 1);
    const double s = std::exp((log_prod - std::log(kPi * md * options.tol)) / md);
    best_s = std::min(best_s, s);
  }
  if (best_s <= options.s_max) {
    s_range_ = best_s;
    tail_bound_ = options.tol;
  } else {
    // Cap S and close the tail analytically. The closure leaves a remainder
    // of relative size ~ (k / (S y))^3 with y the distance to the edge.
    s_range_ = options.s_max;
    closure_ = true;
    double raw = std::numeric_limits<double>::infinity();
    log_prod = std::log(lambdas_(0));
    if (k == 1) raw = lambdas_(0) / (kPi * s_range_);
    for (Index m = 2; m <= std::min<Index>(k, 64); ++m) {
      log_prod += std::log(lambdas_(m - 1));
      const double md = static_cast<double>(m - 1);
      raw = std::min(raw, std::exp(log_prod - md * std::log(s_range_)) / (kPi * md));
    }
    tail_bound_ = raw;
    const double y_ref = std::max(x_lo + shift_, 1e-12);
    const double closed =
        raw * std::pow(static_cast<double>(k) / (s_range_ * y_ref), 3.0);
    if (closed > options.tol && !options.allow_few_modes) {
      throw InversionAccuracyError("inversion tail bound needs S = " +
                                   std::to_string(best_s) + " > S_max");
    }
  }

  // Aliasing: the trapezoid sum sees f(x + 2 pi n / ds). The law lives on
  // (-shift, inf) with an exponential right tail of rate lambda_min.
  const double sigma = std::sqrt(lambdas_.array().pow(-2.0).sum());
  const double right_extent =
      10.0 * sigma + (-std::log(options.tol) + 10.0 + static_cast<double>(std::min<Index>(k, 10))) /
                         lambdas_(0);
  const double period = std::max(right_extent - x_lo, x_hi + shift_) + 1.0;
  const double xmax = std::max({std::abs(x_lo), std::abs(x_hi), 1e-3});
  double ds = std::min(kPi / (4.0 * xmax), 2.0 * kPi / period);
  const auto n_steps = static_cast<Index>(std::ceil(s_range_ / ds));
  s_step_ = s_range_ / static_cast<double>(n_steps);

  s_nodes_ = Eigen::VectorXd::LinSpaced(n_steps + 1, 0.0, s_range_);
  phi_pos_ = characteristic_function(lambdas_, s_nodes_);
  phi_neg_ = characteristic_function(lambdas_, -s_nodes_);
}

MassDensity MassDensity::above(const SpectralBasis& basis, double cut,
                               double x_lo, double x_hi,
                               const InversionOptions& options) {
  return MassDensity(modes_above(basis, cut), x_lo, x_hi, options);
}

MassDensity MassDensity::below(const SpectralBasis& basis, double cut,
                               double x_lo, double x_hi,
                               const InversionOptions& options) {
  return MassDensity(modes_at_or_below(basis, cut), x_lo, x_hi, options);
}

Complex MassDensity::tail_correction(double x) const {
  // phi(s) = exp(-i s c) R(s), R = prod 1 / (1 - i s / lambda). Repeated
  // integration by parts on int_S^inf exp(-i s y) R(s) ds with y = x + c,
  // plus the Euler-Maclaurin end correction of the truncated trapezoid.
  const double S = s_range_;
  const double y = x + shift_;
  Complex log_r = 0.0, d1 = 0.0, d1p = 0.0;
  for (Index j = 0; j < lambdas_.size(); ++j) {
    const Complex denom = 1.0 - kI * S / lambdas_(j);
    log_r -= std::log(denom);
    d1 += (kI / lambdas_(j)) / denom;
    d1p -= (1.0 / (lambdas_(j) * lambdas_(j))) / (denom * denom);
  }
  const Complex r = std::exp(log_r);
  const Complex phase = std::exp(-kI * S * x) * std::exp(-kI * S * shift_);
  const Complex g_end = phase * r;   // exp(-i S x) phi(S)

  // d/ds [exp(-i s x) phi(s)] at s = S; the s = -S end is its conjugate.
  const Complex g_prime = g_end * (-kI * y + d1);
  const double em = -(s_step_ * s_step_ / 12.0) * 2.0 * g_prime.real();

  double tail = 0.0;
  if (std::abs(y) * S > 20.0) {
    const Complex iy = kI * y;
    const Complex r1 = r * d1;
    const Complex r2 = r * (d1 * d1 + d1p);
    const Complex upper =
        std::exp(-kI * S * y) * (r / iy + r1 / (iy * iy) + r2 / (iy * iy * iy));
    tail = 2.0 * upper.real();
  }
  return {em + tail, 0.0};
}

Complex MassDensity::evaluate(double x) const {
  const Index n = s_nodes_.size();
  const Complex step = std::exp(-kI * s_step_ * x);
  Complex z = 1.0;
  Complex sum = phi_pos_(0);
  for (Index k = 1; k < n; ++k) {
    // Recompute the rotation exactly every 1024 steps to bound drift.
    if ((k & 1023) == 0) {
      z = std::exp(-kI * s_nodes_(k) * x);
    } else {
      z *= step;
    }
    const double w = (k == n - 1) ? 0.5 : 1.0;
    sum += w * (z * phi_pos_(k) + std::conj(z) * phi_neg_(k));
  }
  Complex f = sum * s_step_;
  // Tail closure matters only when phi decays slowly.
  if (closure_) f += tail_correction(x);
  return f / (2.0 * kPi);
}

DensityCurve MassDensity::curve(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  DensityCurve c;
  c.x = x;
  c.f.resize(x.size());
  c.imag_residue.resize(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    const Complex v = evaluate(x(i));
    c.f(i) = v.real();
    c.imag_residue(i) = std::abs(v.imag());
  }
  c.s_range = s_range_;
  c.s_step = s_step_;
  c.tail_bound = tail_bound_;
  return c;
}

DensityCurve density_by_inversion(const SpectralBasis& basis, double cut,
                                  const Eigen::Ref<const Eigen::VectorXd>& x,
                                  const InversionOptions& options) {
  if (x.size() == 0) throw InvalidArgument("empty abscissa grid");
  const Eigen::VectorXd lambdas = modes_above(basis, cut);
  if (lambdas.size() < 2 && !options.allow_few_modes) {
    throw NonIntegrableCharacteristic(
        "fewer than two retained modes above the cut; phi is not integrable");
  }
  MassDensity density(lambdas, x.minCoeff(), x.maxCoeff(), options);
  DensityCurve c = density.curve(x);
  c.truncation_tail = truncation_tail(basis);
  return c;
}

double f0_at(const SpectralBasis& basis, double m,
             const InversionOptions& options) {
  const double edge = mass_support_edge(basis);
  if (!(m > edge)) {
    throw InvalidArgument("m = " + std::to_string(m) +
                          " lies below the support edge of M at this truncation");
  }
  const MassDensity f0(basis.eigenvalues(), std::min(m, edge),
                       std::max(m, 0.0) + 1.0, options);
  const double value = f0(m);
  if (!(value > -std::max(1e-10, 10.0 * f0.tail_bound()))) {
    throw InversionAccuracyError("f0(m) = " + std::to_string(value) +
                                 " is negative beyond the inversion tolerance");
  }
  return value;
}

CylinderDensity::CylinderDensity(const BasisPtr& basis, double cut, double m,
                                 const InversionOptions& options)
    : cut_(cut), m_(m) {
  f0m_ = f0_at(*basis, m, options);
  if (!(f0m_ > 1e-12)) {
    throw DivisionGuardError("f0(m) = " + std::to_string(f0m_) +
                             " too small to normalise the cylinder density");
  }
  // m - M_{<=cut} ranges over (-inf, m + sum_{low} 1/lambda]; below the
  // support edge of M_{>cut} the density vanishes.
  const double low_shift = modes_at_or_below(*basis, cut).array().inverse().sum();
  const Eigen::VectorXd high = modes_above(*basis, cut);
  const double high_edge = -high.array().inverse().sum();
  f_high_ = std::make_unique<MassDensity>(high, high_edge, m + low_shift, options);
}

double CylinderDensity::operator()(const FieldCoeffs& u_low) const {
  const double x = m_ - renormalized_mass(u_low, cut_);
  if (x <= f_high_->support_edge()) return 0.0;
  return (*f_high_)(x) / f0m_;
}

double cylinder_density(const FieldCoeffs& u_low, double cut, double m) {
  const CylinderDensity density(u_low.basis, cut, m);
  return density(u_low);
}

namespace {

ConditionedEnsemble run_conditioning(const BasisPtr& basis,
                                     const CanonicalSpec& spec, Index n_target,
                                     Index max_proposals, std::uint64_t seed,
                                     unsigned threads) {
  spec.validate(*basis);
  const double top = basis->lambda_max();
  ConditionedEnsemble out;
  out.ensemble.seed = seed;
  out.ensemble.spec = MeasureSpec::gaussian(top);
  double closest = std::numeric_limits<double>::infinity();

  const Index batch = 4096;
  std::vector<double> masses(static_cast<std::size_t>(batch));
  std::vector<FieldCoeffs> draws(static_cast<std::size_t>(batch));
  Index next = 0;
  while (next < max_proposals &&
         static_cast<Index>(out.ensemble.samples.size()) < n_target) {
    const Index count = std::min(batch, max_proposals - next);
    parallel_for(count, threads, [&](std::int64_t b) {
      auto& u = draws[static_cast<std::size_t>(b)];
      u = sample_gaussian(basis, top, seed, static_cast<std::uint64_t>(next + b));
      masses[static_cast<std::size_t>(b)] = renormalized_mass(u, top);
    });
    for (Index b = 0; b < count; ++b) {
      ++out.proposals;
      const double dist = std::abs(masses[static_cast<std::size_t>(b)] - spec.m);
      closest = std::min(closest, dist);
      if (dist < spec.epsilon) {
        out.ensemble.samples.push_back(std::move(draws[static_cast<std::size_t>(b)]));
        if (static_cast<Index>(out.ensemble.samples.size()) >= n_target) break;
      }
    }
    next += count;
  }
  const auto accepted = static_cast<double>(out.ensemble.samples.size());
  if (accepted == 0.0) {
    throw WindowTooNarrow("no proposal landed in the mass window after " +
                              std::to_string(out.proposals) + " draws",
                          2.0 * closest);
  }
  const auto proposals = static_cast<double>(out.proposals);
  out.acceptance = accepted / proposals;
  out.acceptance_se = std::sqrt(out.acceptance * (1.0 - out.acceptance) / proposals);
  out.ensemble.log_weights = Eigen::VectorXd::Zero(static_cast<Index>(accepted));
  return out;
}

}  // namespace

ConditionedEnsemble sample_conditioned(const BasisPtr& basis,
                                       const CanonicalSpec& spec, Index n,
                                       std::uint64_t seed, Index max_proposals,
                                       unsigned threads) {
  if (n < 1) throw InvalidArgument("sample_conditioned needs n >= 1");
  if (max_proposals <= 0) max_proposals = 1000 * n;
  return run_conditioning(basis, spec, n, max_proposals, seed, threads);
}

ConditionedEnsemble sample_conditioned_budget(const BasisPtr& basis,
                                              const CanonicalSpec& spec,
                                              Index proposals,
                                              std::uint64_t seed,
                                              unsigned threads) {
  if (proposals < 1) throw InvalidArgument("proposal budget must be >= 1");
  return run_conditioning(basis, spec, proposals, proposals, seed, threads);
}

WeightedEnsemble canonical_gibbs_reweight(const WeightedEnsemble& ens, int sign,
                                          const CutoffQuadrature* quadrature) {
  if (sign != 1 && sign != -1) throw InvalidArgument("sign must be +1 or -1");
  if (ens.samples.empty()) return ens;
  const BasisPtr& basis = ens.samples.front().basis;
  if (sign == -1 && basis->s() <= 8.0 / 5.0) {
    throw InvalidArgument("focusing canonical measures require s > 8/5");
  }
  std::unique_ptr<ProductQuadrature> full;
  if (!quadrature) {
    full = std::make_unique<ProductQuadrature>(
        make_product_quadrature(*basis, basis->n_modes(), 8.0));
  }
  WeightedEnsemble out = ens;
  out.spec.kind = sign > 0 ? MeasureKind::gibbs_defocusing : MeasureKind::gibbs_focusing;
  if (quadrature) out.spec.lambda_cut = quadrature->cut();
  for (Index i = 0; i < ens.size(); ++i) {
    const auto& alpha = ens.samples[static_cast<std::size_t>(i)].alpha;
    double quartic;
    if (quadrature) {
      quartic = quadrature->quartic_norm(alpha);
    } else {
      const Eigen::ArrayXd re = (full->modes * alpha.real()).array();
      const Eigen::ArrayXd im = (full->modes * alpha.imag()).array();
      quartic = (full->weights.array() * (re.square() + im.square()).square()).sum();
    }
    out.log_weights(i) += -0.5 * static_cast<double>(sign) * quartic;
  }
  return out;
}

}  // namespace gibbsflow
