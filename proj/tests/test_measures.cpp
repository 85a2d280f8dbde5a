#include <cmath>
#include <limits>
#include <numbers>

#include "doctest.h"

#include "gibbsflow/errors.hpp"
#include "gibbsflow/measures.hpp"
#include "gibbsflow/stats.hpp"

using namespace gibbsflow;

namespace {

BasisPtr oscillator() {
  static BasisPtr b = build_basis(2.0, 16, 2048, 12.0);
  return b;
}

}  // namespace

TEST_CASE("Gaussian draws: moments and determinism") {
  const auto b = oscillator();
  const Index n = 20000;
  Eigen::VectorXd abs2(n), re(n);
  for (Index i = 0; i < n; ++i) {
    const FieldCoeffs u = sample_gaussian(b, 10.0, 5, static_cast<std::uint64_t>(i));
    abs2(i) = std::norm(u.alpha(1));
    re(i) = u.alpha(1).real();
    CHECK(u.alpha.tail(11).norm() == 0.0);
  }
  const auto m2 = stats::mean_se(abs2);
  CHECK(std::abs(m2.mean - 0.25) < 4.0 * m2.se);
  const auto m1 = stats::mean_se(re);
  CHECK(std::abs(m1.mean) < 4.0 * m1.se);

  const FieldCoeffs a = sample_gaussian(b, 10.0, 5, 17);
  const FieldCoeffs c = sample_gaussian(b, 10.0, 5, 17);
  CHECK(a.alpha == c.alpha);
}

TEST_CASE("renormalized mass") {
  const auto b = oscillator();
  CHECK(renormalized_mass(FieldCoeffs::zero(b), 6.0) == doctest::Approx(-11.0 / 12.0));
  const Index n = 20000;
  Eigen::VectorXd m(n);
  for (Index i = 0; i < n; ++i)
    m(i) = renormalized_mass(sample_gaussian(b, 10.0, 6, static_cast<std::uint64_t>(i)), 10.0);
  const auto mean = stats::mean_se(m);
  CHECK(std::abs(mean.mean) < 4.0 * mean.se);
  double var_exact = 0.0;
  for (int j = 1; j <= 5; ++j) var_exact += 1.0 / (4.0 * j * j);
  const auto var = stats::variance_se(m);
  CHECK(std::abs(var.mean - var_exact) < 5.0 * var.se);
}

TEST_CASE("Gibbs log weights") {
  const auto b = oscillator();
  const double cut = 8.0;  // chi(2 / 8) = 1
  const FieldCoeffs zero = FieldCoeffs::zero(b);
  CHECK(gibbs_log_weight(zero, MeasureSpec::defocusing(cut)) == 0.0);
  const FieldCoeffs e1 = FieldCoeffs::unit(b, 0);
  CHECK(gibbs_log_weight(e1, MeasureSpec::defocusing(cut)) ==
        doctest::Approx(-0.5 / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-6));
  CHECK(gibbs_log_weight(e1, MeasureSpec::gaussian(cut)) == 0.0);

  const MeasureSpec foc = MeasureSpec::focusing(cut, 0.1);
  FieldCoeffs big = e1;
  big.alpha(0) = 2.0;  // M = 4 - 1/2 - 1/4 - 1/6 - 1/8 > 0.1
  CHECK(gibbs_log_weight(big, foc) == -std::numeric_limits<double>::infinity());
  FieldCoeffs inside = zero;
  inside.alpha(0) = std::sqrt(0.5 + 0.25 + 1.0 / 6.0 + 0.125);  // M = 0
  CHECK(gibbs_log_weight(inside, foc) > 0.0);
}

TEST_CASE("ensembles, weights and estimates") {
  const auto b = oscillator();
  const double cut = b->lambda(7);
  const auto gauss = build_ensemble(b, MeasureSpec::gaussian(cut), 4000, 11);
  CHECK(gauss.log_weights.cwiseAbs().maxCoeff() == 0.0);
  const auto defoc = build_ensemble(b, MeasureSpec::defocusing(cut), 4000, 11);
  CHECK(defoc.log_weights.maxCoeff() <= 0.0);
  CHECK(defoc.effective_sample_size() / 4000.0 >= 0.1);
  // Same seed, same proposals: only the weights differ.
  CHECK(gauss.samples[123].alpha == defoc.samples[123].alpha);

  const Observable one{"one", [](const FieldCoeffs&) { return 1.0; }};
  const Estimate e1 = estimate_observable(defoc, one);
  CHECK(e1.value == doctest::Approx(1.0));
  CHECK(e1.std_error == doctest::Approx(0.0));

  const Estimate a1 = estimate_observable(gauss, mode_intensity(0));
  CHECK(std::abs(a1.value - 0.5) < 4.0 * a1.std_error);

  auto quad = std::make_shared<const CutoffQuadrature>(b, cut);
  const Observable l4 = cutoff_quartic(quad);
  CHECK(estimate_observable(defoc, l4).value < estimate_observable(gauss, l4).value);
}

TEST_CASE("exact defocusing sampler") {
  const auto b = oscillator();
  const auto r = sample_defocusing_exact(b, b->lambda(5), 500, 3);
  CHECK(r.ensemble.size() == 500);
  CHECK(r.acceptance > 0.0);
  CHECK(r.acceptance <= 1.0);
  CHECK(r.ensemble.log_weights.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("tail probabilities") {
  const auto b = oscillator();
  const TailStatistic hn{TailStatistic::Kind::hnorm, 0.0};
  const Estimate p0 = tail_probability(b, 10.0, hn, 0.0, 2000, 1);
  CHECK(p0.value == 1.0);
  const Estimate p_big = tail_probability(b, 10.0, hn, 100.0, 2000, 1);
  CHECK(p_big.value == 0.0);
}

TEST_CASE("measure spec validation") {
  const auto b = oscillator();
  CHECK_THROWS_AS(MeasureSpec::focusing(10.0, -1.0).validate(*b), InvalidArgument);
  CHECK(measure_kind_from_string("defocusing") == MeasureKind::gibbs_defocusing);
  CHECK_THROWS_AS(measure_kind_from_string("nonsense"), InvalidArgument);
}
