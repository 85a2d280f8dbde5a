#include <cmath>

#include "doctest.h"

#include "gibbsflow/canonical.hpp"
#include "gibbsflow/errors.hpp"

using namespace gibbsflow;

namespace {

BasisPtr oscillator() {
  static BasisPtr b = build_basis(2.0, 32, 2048, 12.0);
  return b;
}

}  // namespace

TEST_CASE("characteristic function") {
  Eigen::VectorXd lam(2);
  lam << 2.0, 4.0;
  Eigen::VectorXd s(4);
  s << 0.0, 2.0, -7.0, 50.0;
  const Eigen::VectorXcd phi = characteristic_function(lam, s);
  CHECK(std::abs(phi(0) - 1.0) < 1e-15);
  CHECK(std::abs(phi(1)) == doctest::Approx(std::pow(2.0 * 1.25, -0.5)).epsilon(1e-12));
  CHECK(std::abs(phi(1)) == doctest::Approx(0.6325).epsilon(1e-4));
  for (Index k = 0; k < s.size(); ++k) CHECK(std::abs(phi(k)) <= 1.0);
}

TEST_CASE("support edge and spread") {
  const auto b = oscillator();
  double edge = 0.0, var = 0.0;
  for (int j = 1; j <= 32; ++j) {
    edge -= 1.0 / (2.0 * j);
    var += 1.0 / (4.0 * j * j);
  }
  CHECK(mass_support_edge(*b) == doctest::Approx(edge).epsilon(1e-6));
  CHECK(mass_std(*b) == doctest::Approx(std::sqrt(var)).epsilon(1e-6));
  CHECK(truncation_tail(*b) > 0.0);
}

TEST_CASE("single mode inversion matches the shifted exponential") {
  Eigen::VectorXd lam(1);
  lam << 2.0;
  InversionOptions opt;
  opt.allow_few_modes = true;
  const MassDensity f(lam, -0.4, 3.0, opt);
  for (double x = -0.4; x <= 3.0; x += 0.17) {
    const double exact = 2.0 * std::exp(-2.0 * x - 1.0);
    CHECK(std::abs(f(x) - exact) < 1e-6);
  }
  CHECK_THROWS(MassDensity(lam, -0.4, 3.0));
}

TEST_CASE("two and three mode inversion against closed forms") {
  InversionOptions opt;
  opt.allow_few_modes = true;
  // |a1|^2 + |a2|^2 with rates 2 and 4: hypoexponential density.
  Eigen::VectorXd lam(2);
  lam << 2.0, 4.0;
  const double shift = 0.75;
  const MassDensity f(lam, -0.5, 3.0, opt);
  for (double x = -0.5; x <= 3.0; x += 0.25) {
    const double y = x + shift;
    const double exact = 4.0 * (std::exp(-2.0 * y) - std::exp(-4.0 * y));
    CHECK(std::abs(f(x) - exact) < 1e-6);
  }
  Eigen::VectorXd lam3(3);
  lam3 << 2.0, 4.0, 6.0;
  const MassDensity g(lam3, -0.9, 3.0, opt);
  const double shift3 = 0.5 + 0.25 + 1.0 / 6.0;
  for (double x = -0.9; x <= 3.0; x += 0.3) {
    const double y = x + shift3;
    // 48 sum_i e^{-l_i y} / prod_{k != i}(l_k - l_i)
    const double exact = 48.0 * (std::exp(-2.0 * y) / 8.0 - std::exp(-4.0 * y) / 4.0 +
                                 std::exp(-6.0 * y) / 8.0);
    CHECK(std::abs(g(x) - exact) < 1e-6);
  }
}

TEST_CASE("density of the full mass") {
  const auto b = oscillator();
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(8001, mass_support_edge(*b) - 0.2, 8.0);
  const DensityCurve c = density_by_inversion(*b, 0.0, x);
  CHECK(c.integral() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(c.f.minCoeff() > -1e-8);
  const double f0 = f0_at(*b, 0.0);
  CHECK(f0 > 0.1);
  CHECK(f0 == doctest::Approx(0.64415).epsilon(1e-4));
  CHECK(f0_at(*b, 10.0 * mass_std(*b)) < 1e-3 * f0);
  CHECK_THROWS_AS(f0_at(*b, mass_support_edge(*b) - 0.1), InvalidArgument);
}

TEST_CASE("cylinder density") {
  const auto b = oscillator();
  const double cut = b->lambda(7);
  const CylinderDensity rho(b, cut, 0.0);
  CHECK(rho.f0m() > 0.0);
  // Zero low block: M_{<=cut} = -sum_{j<=8} 1/lambda_j, so the high part must
  // carry the rest.
  const double v = rho(FieldCoeffs::zero(b));
  CHECK(v >= 0.0);
  CHECK(std::isfinite(v));
}

TEST_CASE("window conditioning") {
  const auto b = oscillator();
  CanonicalSpec spec;
  spec.m = 0.0;
  spec.epsilon = 0.1;
  const auto ce = sample_conditioned(b, spec, 200, 4);
  CHECK(ce.ensemble.size() == 200);
  for (const auto& u : ce.ensemble.samples)
    CHECK(std::abs(renormalized_mass(u, 1e9)) < 0.1);
  CHECK(ce.acceptance > 0.0);

  CanonicalSpec far = spec;
  far.m = 40.0;
  far.epsilon = 1e-3;
  CHECK_THROWS_AS(sample_conditioned(b, far, 10, 4, 2000), WindowTooNarrow);
}

TEST_CASE("canonical reweighting") {
  const auto b = oscillator();
  CanonicalSpec spec;
  spec.epsilon = 0.2;
  const auto ce = sample_conditioned(b, spec, 100, 8);
  const auto defoc = canonical_gibbs_reweight(ce.ensemble, +1);
  const auto foc = canonical_gibbs_reweight(ce.ensemble, -1);
  CHECK(defoc.log_weights.maxCoeff() <= 0.0);
  const Eigen::VectorXd diff = defoc.log_weights - foc.log_weights;
  for (Index i = 0; i < diff.size(); ++i)
    CHECK(diff(i) == doctest::Approx(2.0 * defoc.log_weights(i)).epsilon(1e-12));
}
