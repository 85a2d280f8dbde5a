#include <cmath>
#include <algorithm>
#include <numbers>
#include <sstream>

#include "doctest.h"

#include "gibbsflow/dynamics.hpp"
#include "gibbsflow/errors.hpp"
#include "gibbsflow/measures.hpp"

using namespace gibbsflow;

namespace {

BasisPtr oscillator() {
  static BasisPtr b = build_basis(2.0, 24, 2048, 12.0);
  return b;
}

FlowState random_state(double cut, double scale, std::uint64_t stream) {
  const auto b = oscillator();
  FieldCoeffs u = sample_gaussian(b, b->lambda_max(), 31, stream);
  u.alpha *= scale;
  return FlowState{u, 0.0, cut, 1, {}};
}

}  // namespace

TEST_CASE("nonlinear term") {
  const auto b = oscillator();
  const double cut = b->lambda(9);
  CHECK(nonlinear_term(FieldCoeffs::zero(b), cut, 1).alpha.norm() == 0.0);
  const FieldCoeffs hi = project_high(random_state(cut, 1.0, 1).u, cut);
  CHECK(nonlinear_term(hi, cut, 1).alpha.norm() == 0.0);
  const FieldCoeffs u = random_state(cut, 1.0, 2).u;
  FieldCoeffs cu = u;
  cu.alpha *= 1.7;
  const FieldCoeffs n1 = nonlinear_term(u, cut, 1);
  const FieldCoeffs n2 = nonlinear_term(cu, cut, 1);
  CHECK((n2.alpha - std::pow(1.7, 3) * n1.alpha).norm() < 1e-12 * n2.alpha.norm());
  CHECK(n1.alpha.tail(b->n_modes() - b->modes_below(cut)).norm() == 0.0);
}

TEST_CASE("energy and mass") {
  const auto b = oscillator();
  FlowState s{FieldCoeffs::unit(b, 0), 0.0, 4.0, 1, {}};
  CHECK(hamiltonian(s) == doctest::Approx(2.19947).epsilon(1e-6));
  CHECK(mass_low(s) == doctest::Approx(1.0));
  FlowState z{FieldCoeffs::zero(b), 0.0, 4.0, 1, {}};
  CHECK(hamiltonian(z) == 0.0);
  CHECK(mass_low(z) == 0.0);
}

TEST_CASE("linear parts rotate exactly") {
  const auto b = oscillator();
  FlowConfig cfg;
  cfg.dt = 0.01;
  cfg.T = 0.7;
  FlowState z{FieldCoeffs::zero(b), 0.0, 10.0, 1, {}};
  CHECK(evolve(z, cfg).u.alpha.norm() == 0.0);

  const FlowState lin = random_state(1.0, 1.0, 3);
  const FlowState out = evolve(lin, cfg);
  CHECK((out.u.alpha.cwiseAbs() - lin.u.alpha.cwiseAbs()).lpNorm<Eigen::Infinity>() < 1e-14);

  const double cut = b->lambda(9);
  FlowState high = random_state(cut, 1.0, 4);
  high.u.alpha.head(b->modes_below(cut)).setZero();
  const Index j = 15;
  const FlowState h1 = evolve(high, cfg);
  const Complex expected = std::exp(Complex(0.0, -cfg.T * b->lambda(j))) * high.u.alpha(j);
  CHECK(std::abs(h1.u.alpha(j) - expected) < 1e-12);
}

TEST_CASE("conservation, reversibility and convergence order") {
  const auto b = oscillator();
  const double cut = b->lambda(11);
  const FlowState s0 = random_state(cut, 1.0, 5);
  FlowConfig cfg;
  cfg.dt = 1e-3;
  cfg.T = 1.0;
  Trajectory traj;
  TrajectoryOptions topt;
  topt.every = 100;
  const FlowState s1 = evolve(s0, cfg, &traj, topt);
  CHECK(traj.points.size() == 11);
  CHECK(traj.hamiltonian_drift() <= 1e-8);
  CHECK(traj.mass_drift() <= 1e-8);

  FlowConfig back = cfg;
  back.T = -1.0;
  const FlowState s2 = evolve(s1, back);
  CHECK((s2.u.alpha - s0.u.alpha).norm() < 1e-8 * s0.u.alpha.norm());

  double drift[2];
  for (int k = 0; k < 2; ++k) {
    FlowConfig c = cfg;
    c.dt = 0.01 / (1 << k);
    Trajectory t;
    evolve(s0, c, &t);
    drift[k] = t.hamiltonian_drift();
  }
  CHECK(drift[0] / drift[1] > 8.0);
}

TEST_CASE("stability guard and config validation") {
  const auto b = oscillator();
  const FlowState s0 = random_state(b->lambda(19), 1.0, 6);
  FlowConfig cfg;
  cfg.dt = 0.1;
  cfg.T = 1.0;
  CHECK_THROWS_AS(evolve(s0, cfg), InvalidArgument);
  FlowConfig bad;
  bad.dt = -1.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  CHECK(integrator_from_string(to_string(Integrator::picard_oracle)) == Integrator::picard_oracle);
}

TEST_CASE("Picard oracle") {
  const auto b = oscillator();
  const double cut = b->lambda(9);
  CHECK(picard_local_solve(FieldCoeffs::zero(b), 0.01, cut, 1).alpha.norm() == 0.0);

  const FieldCoeffs f = random_state(cut, 0.5, 7).u;
  const FieldCoeffs lin = picard_local_solve(f, 0.05, 1.0, 1);
  for (Index j = 0; j < b->n_modes(); ++j) {
    const Complex expected = std::exp(Complex(0.0, -0.05 * b->lambda(j))) * f.alpha(j);
    CHECK(std::abs(lin.alpha(j) - expected) < 1e-12);
  }

  const FieldCoeffs p = picard_local_solve(f, 0.01, cut, 1);
  FlowConfig cfg;
  cfg.dt = 0.001;
  cfg.T = 0.01;
  const FlowState e = evolve(FlowState{f, 0.0, cut, 1, {}}, cfg);
  CHECK(sobolev_norm(FieldCoeffs(b, p.alpha - e.u.alpha), 0.0) <= 1e-6);

  CHECK_THROWS_AS(picard_local_solve(f, 10.0, cut, 1), InvalidArgument);
}

TEST_CASE("trajectory CSV") {
  const auto b = oscillator();
  FlowConfig cfg;
  cfg.dt = 0.01;
  cfg.T = 0.05;
  Trajectory t;
  TrajectoryOptions opt;
  opt.every = 1;
  opt.amplitudes = true;
  evolve(random_state(b->lambda(5), 1.0, 8), cfg, &t, opt);
  std::ostringstream out;
  write_trajectory_csv(t, out);
  const std::string text = out.str();
  CHECK(text.rfind("t,H,M_low,hnorm_theta,abs_alpha_1", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 7);
}

TEST_CASE("default theta") {
  CHECK(default_theta(2.0) == doctest::Approx(-0.25));
  const double s = 4.0;
  CHECK(default_theta(s) > 0.5 * (0.5 - 1.0 / s));
  CHECK(default_theta(s) < 0.5 - 1.0 / s);
}
