#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

#include "doctest.h"

#include "gibbsflow/errors.hpp"
#include "gibbsflow/random.hpp"
#include "gibbsflow/spectral.hpp"

using namespace gibbsflow;

namespace {

BasisPtr oscillator() {
  static BasisPtr b = build_basis(2.0, 20, 2048, 12.0);
  return b;
}

}  // namespace

TEST_CASE("potential values") {
  const Grid g = make_grid(601, 3.0);  // spacing 0.01
  const Potential v2 = build_potential(2.0, g);
  CHECK(v2.values(300) == doctest::Approx(1.0));
  CHECK(v2.values(600) == doctest::Approx(10.0));
  const Potential v4 = build_potential(4.0, g);
  CHECK(v4.values(400) == doctest::Approx(4.0));
  CHECK_THROWS_AS(build_potential(1.0, g), InvalidArgument);
}

TEST_CASE("discrete operator on simple vectors") {
  const Grid g = make_grid(401, 10.0);
  Potential flat = build_potential(2.0, g);
  flat.values.setOnes();
  const OperatorMatrix op = discretize_hamiltonian(flat, g);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(g.size());
  const Eigen::VectorXd h1 = op.apply(ones);
  CHECK(h1(200) == doctest::Approx(1.0).epsilon(1e-12));
  const Eigen::VectorXd lin = g.points;
  const Eigen::VectorXd hl = op.apply(lin);
  CHECK(hl(150) == doctest::Approx(lin(150)).epsilon(1e-10));

  const Potential harmonic = build_potential(2.0, g);
  const OperatorMatrix h = discretize_hamiltonian(harmonic, g);
  const Eigen::VectorXd gauss = (-0.5 * g.points.array().square()).exp().matrix();
  const Eigen::VectorXd hg = h.apply(gauss);
  CHECK((hg - 2.0 * gauss).lpNorm<Eigen::Infinity>() < 1e-5);
}

TEST_CASE("oscillator spectrum and ground state") {
  const auto b = oscillator();
  for (Index j = 0; j < b->n_modes(); ++j)
    CHECK(std::abs(b->lambda(j) / (2.0 * (j + 1)) - 1.0) < 1e-6);
  const Index mid = b->grid_size() / 2;
  const double x = b->grid().points(mid);  // no node sits exactly at 0
  CHECK(std::abs(b->eigenvectors()(mid, 0)) ==
        doctest::Approx(std::pow(std::numbers::pi, -0.25) * std::exp(-0.5 * x * x)).epsilon(1e-6));
  const Eigen::MatrixXd gram = b->gram();
  CHECK((gram - Eigen::MatrixXd::Identity(20, 20)).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("trace power and its convergence flag") {
  const auto b = oscillator();
  const TracePower p2 = trace_power(*b, 2.0);
  CHECK(p2.converged);
  double direct = 0.0;
  for (int j = 1; j <= 20; ++j) direct += 1.0 / (4.0 * j * j);
  CHECK(p2.value == doctest::Approx(direct).epsilon(1e-6));
  const TracePower p1 = trace_power(*b, 1.0);
  CHECK_FALSE(p1.converged);
  CHECK(p1.threshold == doctest::Approx(1.0));
}

TEST_CASE("green diagonal") {
  const auto b = oscillator();
  const Eigen::VectorXd g = green_diagonal(*b, 0.0);
  CHECK(g.minCoeff() >= 0.0);
  const double dx = b->grid().spacing;
  const double integral = dx * g.sum();
  CHECK(integral == doctest::Approx(trace_power(*b, 1.0).value).epsilon(1e-8));
  const auto coarse = build_basis(2.0, 10, 2048, 12.0);
  const double l2_20 = green_lp_norm(*b, 0.0, 2.0);
  const double l2_10 = green_lp_norm(*coarse, 0.0, 2.0);
  CHECK(std::abs(l2_20 / l2_10 - 1.0) < 0.1);
}

TEST_CASE("eigenvalue counting and the Weyl law") {
  const auto b = oscillator();
  CHECK(count_eigenvalues(*b, 20.0).count == 10);
  CHECK(count_eigenvalues(*b, 1.0).count == 0);
  CHECK(count_eigenvalues(*b, 100.0).censored);
  const double ratio = weyl_count(b->potential(), b->grid(), 40.0) / 20.0;
  CHECK(ratio >= 0.9);
  CHECK(ratio <= 1.1);
}

TEST_CASE("wall guard refuses a too-deep truncation") {
  CHECK_THROWS_AS(build_basis(2.0, 60, 512, 6.0), TruncationTooDeep);
}

TEST_CASE("basis save and load round trip") {
  const auto b = build_basis(2.0, 6, 256, 8.0);
  const auto path = std::filesystem::temp_directory_path() / "gf_unit_basis.bin";
  save_basis(*b, path.string());
  const SpectralBasis back = load_basis(path.string());
  CHECK((back.eigenvalues() - b->eigenvalues()).norm() == 0.0);
  CHECK((back.eigenvectors() - b->eigenvectors()).norm() == 0.0);
  CHECK(back.s() == 2.0);
  std::filesystem::remove(path);
}

TEST_CASE("Philox known answer") {
  const Philox4x32 gen(0, 0);
  const auto block = gen.block(0);
  CHECK(block[0] == 0x6627e8d5u);
  CHECK(block[1] == 0xe169c58du);
  CHECK(block[2] == 0xbc57ac4cu);
  CHECK(block[3] == 0x9b00dbd8u);
}

TEST_CASE("random streams are reproducible and distinct") {
  RandomStream a(7, 3), b(7, 3), c(7, 4);
  for (int i = 0; i < 10; ++i) {
    const double x = a.normal();
    CHECK(x == b.normal());
    CHECK(x != c.normal());
  }
}

TEST_CASE("banded eigensolver agrees with the dense solver") {
  const Grid g = make_grid(256, 8.0);
  const Potential v = build_potential(3.0, g);
  const OperatorMatrix op = discretize_hamiltonian(v, g);
  const SpectralBasis b = eigendecompose(op, 10);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> dense(op.matrix.to_dense());
  for (Index j = 0; j < 10; ++j) {
    CHECK(b.lambda(j) == doctest::Approx(dense.eigenvalues()(j)).epsilon(1e-10));
    const double overlap = std::abs(b.eigenvectors().col(j).dot(dense.eigenvectors().col(j))) *
                           std::sqrt(g.spacing);
    CHECK(overlap == doctest::Approx(1.0).epsilon(1e-8));
  }
  CHECK(max_relative_residual(op, b) < 1e-8);
}
