#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"

#include "gibbsflow/fields.hpp"
#include "gibbsflow/random.hpp"

using namespace gibbsflow;

namespace {

BasisPtr oscillator() {
  static BasisPtr b = build_basis(2.0, 16, 2048, 12.0);
  return b;
}

FieldCoeffs random_field(const BasisPtr& b, std::uint64_t stream) {
  RandomStream rng(99, stream);
  Eigen::VectorXcd a(b->n_modes());
  for (Index j = 0; j < a.size(); ++j) a(j) = Complex(rng.normal(), rng.normal()) / (1.0 + j);
  return FieldCoeffs(b, a);
}

}  // namespace

TEST_CASE("synthesis and analysis") {
  const auto b = oscillator();
  const Eigen::VectorXcd e1 = synthesize(FieldCoeffs::unit(b, 0));
  CHECK((e1.real() - b->eigenvectors().col(0)).norm() < 1e-14);

  const FieldCoeffs u = random_field(b, 1);
  const FieldCoeffs back = analyze(synthesize(u), b);
  CHECK((back.alpha - u.alpha).norm() < 1e-10);

  const Eigen::VectorXcd sum = (b->eigenvectors().col(0) + b->eigenvectors().col(1)).cast<Complex>();
  const FieldCoeffs a = analyze(sum, b);
  CHECK(std::abs(a.alpha(0) - 1.0) < 1e-10);
  CHECK(std::abs(a.alpha(1) - 1.0) < 1e-10);
  CHECK(a.alpha.tail(14).norm() < 1e-10);
}

TEST_CASE("sharp projections") {
  const auto b = oscillator();
  const FieldCoeffs u = random_field(b, 2);
  CHECK((project_low(u, 1e3).alpha - u.alpha).norm() == 0.0);
  CHECK(project_low(u, 1.0).alpha.norm() == 0.0);
  const FieldCoeffs low = project_low(u, 5.0);
  CHECK(low.alpha.head(2) == u.alpha.head(2));
  CHECK(low.alpha.tail(14).norm() == 0.0);
  CHECK((project_low(u, 5.0).alpha + project_high(u, 5.0).alpha - u.alpha).norm() == 0.0);
}

TEST_CASE("smooth cutoff profile and action") {
  const CutoffProfile chi;
  CHECK(chi(0.0) == 1.0);
  CHECK(chi(0.5) == 1.0);
  CHECK(chi(1.0) == 0.0);
  CHECK(chi(0.75) == doctest::Approx(0.5));
  for (double t = 0.5; t < 1.0; t += 0.01) CHECK(chi(t + 0.01) <= chi(t));

  const auto b = oscillator();
  const FieldCoeffs u = random_field(b, 3);
  const double cut = 12.0;  // lambda = 2, 4, 6 kept, 8 .. 10 dressed, >= 12 zeroed
  const FieldCoeffs q = smooth_cutoff(u, cut);
  const FieldCoeffs qq = smooth_cutoff(q, cut);
  for (Index j = 0; j < b->n_modes(); ++j) {
    const double t = b->lambda(j) / cut;
    if (t <= 0.5) CHECK(q.alpha(j) == u.alpha(j));
    if (t >= 1.0) CHECK(q.alpha(j) == Complex(0.0));
    if (t > 0.5 + 1e-6 && t < 1.0 - 1e-6) CHECK(std::abs(qq.alpha(j)) < std::abs(q.alpha(j)));
  }
}

TEST_CASE("Sobolev norms") {
  const auto b = oscillator();
  CHECK(sobolev_norm(FieldCoeffs::unit(b, 0), 1.0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-6));
  const FieldCoeffs u = random_field(b, 4);
  CHECK(sobolev_norm(u, 0.0) == doctest::Approx(u.alpha.norm()));
  CHECK(sobolev_norm(u, 0.2) <= sobolev_norm(u, 0.5));
}

TEST_CASE("weighted Lebesgue norms") {
  const auto b = oscillator();
  const FieldCoeffs u = random_field(b, 5);
  CHECK(wbp_norm(u, 0.0, 2) == doctest::Approx(sobolev_norm(u, 0.0)).epsilon(1e-8));
  const double l4 = wbp_norm(FieldCoeffs::unit(b, 0), 0.0, 4);
  CHECK(l4 == doctest::Approx(std::pow(2.0 * std::numbers::pi, -0.125)).epsilon(1e-6));
  FieldCoeffs v = u;
  v.alpha *= Complex(0.0, -3.0);
  CHECK(wbp_norm(v, 0.3, 4) == doctest::Approx(3.0 * wbp_norm(u, 0.3, 4)).epsilon(1e-10));
}

TEST_CASE("quartic functional") {
  const auto b = oscillator();
  CHECK(quartic_functional(FieldCoeffs::zero(b)) == 0.0);
  const double e1 = quartic_functional(FieldCoeffs::unit(b, 0));
  CHECK(e1 == doctest::Approx(0.5 / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-6));
  const FieldCoeffs u = random_field(b, 6);
  FieldCoeffs two = u;
  two.alpha *= 2.0;
  CHECK(quartic_functional(two) == doctest::Approx(16.0 * quartic_functional(u)).epsilon(1e-12));
}

TEST_CASE("product quadrature reproduces the full-grid quartic") {
  const auto b = oscillator();
  const CutoffQuadrature q(b, 1e6);
  CHECK(q.active_modes() == 16);
  const FieldCoeffs u = random_field(b, 7);
  CHECK(q.quartic_norm(u.alpha) == doctest::Approx(2.0 * quartic_functional(u)).epsilon(1e-8));
  CHECK(q.quartic_norm(FieldCoeffs::unit(b, 0).alpha) ==
        doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-7));
}

TEST_CASE("field CSV round trip") {
  const auto b = oscillator();
  const FieldCoeffs u = random_field(b, 8);
  std::stringstream io;
  write_field_csv(u, io);
  const FieldCoeffs back = read_field_csv(io, b);
  CHECK((back.alpha - u.alpha).norm() < 1e-14 * u.alpha.norm());
}
