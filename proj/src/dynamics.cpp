#include "gibbsflow/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>

#include "gibbsflow/errors.hpp"

namespace gibbsflow {

namespace {

const Complex kI(0.0, 1.0);

Eigen::VectorXcd phases(const Eigen::Ref<const Eigen::VectorXd>& lambdas, double tau) {
  Eigen::VectorXcd out(lambdas.size());
  for (Index j = 0; j < lambdas.size(); ++j) out(j) = std::exp(-kI * (lambdas(j) * tau));
  return out;
}

double weighted_norm(const Eigen::Ref<const Eigen::VectorXcd>& v,
                     const Eigen::Ref<const Eigen::VectorXd>& weights) {
  return std::sqrt((weights.array() * v.array().abs2()).sum());
}

// F(alpha) = -i * sign * Q(|Qu|^2 Qu) on the active block.
struct ActiveRhs {
  const FlowKernel& kernel;
  Index active;
  mutable Eigen::VectorXcd full;
  mutable Eigen::VectorXcd nl;

  ActiveRhs(const FlowKernel& k, Index n_modes)
      : kernel(k), active(k.active_modes()), full(Eigen::VectorXcd::Zero(n_modes)) {}

  void operator()(const Eigen::VectorXcd& a, Eigen::VectorXcd& out) const {
    full.head(active) = a;
    kernel.nonlinear(full, nl);
    out = -kI * nl.head(active);
  }
};

// One Lawson RK4 step of length h on the active block.
void lawson_step(const ActiveRhs& rhs, const Eigen::VectorXcd& e_half,
                 const Eigen::VectorXcd& e_full, double h, Eigen::VectorXcd& a) {
  Eigen::VectorXcd k1, k2, k3, k4;
  rhs(a, k1);
  const Eigen::VectorXcd a_half = e_half.cwiseProduct(a);
  rhs(e_half.cwiseProduct(a + 0.5 * h * k1), k2);
  rhs(a_half + 0.5 * h * k2, k3);
  rhs(e_full.cwiseProduct(a) + h * e_half.cwiseProduct(k3), k4);
  a = e_full.cwiseProduct(a) +
      (h / 6.0) * (e_full.cwiseProduct(k1) + 2.0 * e_half.cwiseProduct(k2 + k3) + k4);
}

// Cumulative integral int_0^{tau_k} g on a uniform grid of `n` (even)
// intervals: Simpson to even nodes, Simpson plus the 3/8 rule to odd ones.
void cumulative_simpson(const std::vector<Eigen::VectorXcd>& g, double h,
                        std::vector<Eigen::VectorXcd>& out) {
  const auto n = static_cast<Index>(g.size()) - 1;
  out.assign(g.size(), Eigen::VectorXcd::Zero(g.front().size()));
  for (Index k = 2; k <= n; k += 2) {
    out[k] = out[k - 2] + (h / 3.0) * (g[k - 2] + 4.0 * g[k - 1] + g[k]);
  }
  if (n >= 1) out[1] = (h / 12.0) * (5.0 * g[0] + 8.0 * g[1] - g[2]);
  for (Index k = 3; k <= n; k += 2) {
    out[k] = out[k - 3] +
             (3.0 * h / 8.0) * (g[k - 3] + 3.0 * g[k - 2] + 3.0 * g[k - 1] + g[k]);
  }
}

// Duhamel fixed point for the active block over [0, delta]; returns
// alpha(delta) of the active block. No smallness guard.
Eigen::VectorXcd picard_block(const ActiveRhs& rhs,
                              const Eigen::Ref<const Eigen::VectorXd>& lambdas,
                              const Eigen::Ref<const Eigen::VectorXcd>& f,
                              double delta, const PicardOptions& opt) {
  Index n = std::max<Index>(2, opt.subintervals);
  if (n % 2 != 0) ++n;
  const double h = delta / static_cast<double>(n);
  const Eigen::VectorXd hweights = lambdas.array().pow(opt.theta);

  std::vector<Eigen::VectorXcd> fwd(n + 1), back(n + 1);
  for (Index k = 0; k <= n; ++k) {
    const double tau = h * static_cast<double>(k);
    fwd[k] = phases(lambdas, tau);
    back[k] = fwd[k].conjugate();
  }
  // beta(tau) = e^{i tau h} alpha(tau); the zeroth iterate is free evolution.
  std::vector<Eigen::VectorXcd> beta(n + 1, f), g(n + 1), integral;
  Eigen::VectorXcd tmp;
  for (Index it = 0; it < opt.max_iter; ++it) {
    for (Index k = 0; k <= n; ++k) {
      rhs(fwd[k].cwiseProduct(beta[k]), tmp);
      g[k] = back[k].cwiseProduct(tmp);
    }
    cumulative_simpson(g, h, integral);
    double change = 0.0;
    for (Index k = 0; k <= n; ++k) {
      const Eigen::VectorXcd next = f + integral[k];
      change = std::max(change, weighted_norm(next - beta[k], hweights));
      beta[k] = next;
    }
    if (!std::isfinite(change)) break;
    if (change <= opt.tol) return fwd[n].cwiseProduct(beta[n]);
  }
  throw ContractionFailure("Duhamel iteration did not contract within " +
                           std::to_string(opt.max_iter) + " iterations");
}

}  // namespace

std::string to_string(Integrator integrator) {
  return integrator == Integrator::interaction_rk4 ? "interaction_rk4" : "picard_oracle";
}

Integrator integrator_from_string(const std::string& name) {
  if (name == "interaction_rk4") return Integrator::interaction_rk4;
  if (name == "picard_oracle") return Integrator::picard_oracle;
  throw InvalidArgument("unknown integrator '" + name + "'");
}

void FlowConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("dt must be positive");
  if (!std::isfinite(T)) throw InvalidArgument("horizon must be finite");
  if (T != 0.0 && dt > std::abs(T)) throw InvalidArgument("dt must not exceed |T|");
  if (!(conservation_tol > 0.0)) throw InvalidArgument("conservation_tol must be positive");
  if (!(blowup_factor > 1.0)) throw InvalidArgument("blowup_factor must exceed 1");
}

FlowKernel::FlowKernel(BasisPtr basis, double cut, int sign,
                       const CutoffProfile& profile)
    : quadrature_(std::make_shared<CutoffQuadrature>(std::move(basis), cut, profile)),
      sign_(sign) {
  if (sign != 1 && sign != -1) throw InvalidArgument("sign must be +1 or -1");
}

void FlowKernel::nonlinear(const Eigen::Ref<const Eigen::VectorXcd>& alpha,
                           Eigen::VectorXcd& out) const {
  quadrature_->cubic(alpha, out);
  if (sign_ < 0) out = -out;
}

double FlowKernel::hamiltonian(const Eigen::Ref<const Eigen::VectorXcd>& alpha) const {
  const Index low = basis()->modes_below(cut());
  const double kinetic =
      (basis()->eigenvalues().head(low).array() * alpha.head(low).array().abs2()).sum();
  return kinetic + 0.5 * static_cast<double>(sign_) * quadrature_->quartic_norm(alpha);
}

double FlowKernel::mass_low(const Eigen::Ref<const Eigen::VectorXcd>& alpha) const {
  return alpha.head(basis()->modes_below(cut())).squaredNorm();
}

FieldCoeffs nonlinear_term(const FieldCoeffs& u, double cut, int sign,
                           const CutoffProfile& profile) {
  const FlowKernel kernel(u.basis, cut, sign, profile);
  Eigen::VectorXcd out;
  kernel.nonlinear(u.alpha, out);
  return {u.basis, std::move(out)};
}

double hamiltonian(const FlowState& state) {
  return FlowKernel(state.u.basis, state.lambda_cut, state.sign, state.profile)
      .hamiltonian(state.u.alpha);
}

double mass_low(const FlowState& state) {
  return state.u.alpha.head(state.u.basis->modes_below(state.lambda_cut)).squaredNorm();
}

double Trajectory::hamiltonian_drift() const {
  if (points.empty()) return 0.0;
  const double h0 = points.front().hamiltonian;
  const double scale = std::max(std::abs(h0), std::numeric_limits<double>::min());
  double drift = 0.0;
  for (const auto& p : points) drift = std::max(drift, std::abs(p.hamiltonian - h0) / scale);
  return drift;
}

double Trajectory::mass_drift() const {
  if (points.empty()) return 0.0;
  const double m0 = points.front().mass_low;
  const double scale = std::max(std::abs(m0), std::numeric_limits<double>::min());
  double drift = 0.0;
  for (const auto& p : points) drift = std::max(drift, std::abs(p.mass_low - m0) / scale);
  return drift;
}

FlowState evolve(const FlowState& state, const FlowConfig& cfg,
                 Trajectory* trajectory, const TrajectoryOptions& options) {
  const FlowKernel kernel(state.u.basis, state.lambda_cut, state.sign, state.profile);
  return evolve(state, cfg, kernel, trajectory, options);
}

FlowState evolve(const FlowState& state, const FlowConfig& cfg,
                 const FlowKernel& kernel, Trajectory* trajectory,
                 const TrajectoryOptions& options) {
  cfg.validate();
  if (kernel.basis() != state.u.basis || kernel.cut() != state.lambda_cut ||
      kernel.sign() != state.sign) {
    throw InvalidArgument("flow kernel does not match the state");
  }
  const SpectralBasis& basis = *state.u.basis;
  const Index active = kernel.active_modes();
  if (active > 0 && cfg.enforce_stability_guard &&
      cfg.dt * basis.lambda(active - 1) > 0.5) {
    throw InvalidArgument("dt * lambda_max of the active block exceeds 0.5");
  }

  const auto n_steps = cfg.T == 0.0
                           ? Index{0}
                           : static_cast<Index>(std::ceil(std::abs(cfg.T) / cfg.dt - 1e-9));
  const double h = n_steps == 0 ? 0.0 : cfg.T / static_cast<double>(n_steps);
  const Eigen::VectorXd lam_active = basis.eigenvalues().head(active);
  const Eigen::VectorXcd e_half = phases(lam_active, 0.5 * h);
  const Eigen::VectorXcd e_full = phases(lam_active, h);
  const ActiveRhs rhs(kernel, basis.n_modes());
  PicardOptions picard;
  picard.subintervals = 16;

  const double norm0 = state.u.alpha.norm();
  Eigen::VectorXcd a = state.u.alpha.head(active);
  const Eigen::VectorXcd rest0 = state.u.alpha.tail(basis.n_modes() - active);
  const Eigen::VectorXd lam_rest = basis.eigenvalues().tail(basis.n_modes() - active);

  auto full_state = [&](Index step) {
    const double elapsed = h * static_cast<double>(step);
    Eigen::VectorXcd alpha(basis.n_modes());
    alpha.head(active) = a;
    alpha.tail(basis.n_modes() - active) = phases(lam_rest, elapsed).cwiseProduct(rest0);
    return alpha;
  };
  auto record = [&](Index step) {
    if (!trajectory) return;
    const Eigen::VectorXcd alpha = full_state(step);
    TrajectoryPoint p;
    p.t = state.t + h * static_cast<double>(step);
    p.hamiltonian = kernel.hamiltonian(alpha);
    p.mass_low = kernel.mass_low(alpha);
    p.hnorm_theta = sobolev_norm(FieldCoeffs(state.u.basis, alpha), options.theta);
    if (options.amplitudes) p.amplitudes = alpha.cwiseAbs();
    trajectory->points.push_back(std::move(p));
  };

  if (trajectory) {
    trajectory->theta = options.theta;
    trajectory->points.clear();
  }
  record(0);
  const double rest_norm2 = rest0.squaredNorm();
  for (Index step = 1; step <= n_steps; ++step) {
    if (active > 0) {
      if (cfg.integrator == Integrator::interaction_rk4) {
        lawson_step(rhs, e_half, e_full, h, a);
      } else {
        a = picard_block(rhs, lam_active, a, h, picard);
      }
      const double norm = std::sqrt(a.squaredNorm() + rest_norm2);
      if (!std::isfinite(norm) || (norm0 > 0.0 && norm > cfg.blowup_factor * norm0)) {
        throw BlowupDetected("field norm ran away at t = " +
                                 std::to_string(state.t + h * static_cast<double>(step)),
                             state.t + h * static_cast<double>(step));
      }
    }
    const bool last = step == n_steps;
    if (trajectory && (last || (options.every > 0 && step % options.every == 0))) {
      record(step);
    }
  }

  FlowState out = state;
  out.u = FieldCoeffs(state.u.basis, full_state(n_steps));
  out.t = state.t + cfg.T;
  return out;
}

FieldCoeffs picard_local_solve(const FieldCoeffs& f, double delta, double cut,
                               int sign, const PicardOptions& options,
                               const CutoffProfile& profile) {
  if (!(delta > 0.0)) throw InvalidArgument("delta must be positive");
  const double fn = sobolev_norm(f, options.theta);
  if (delta * (1.0 + fn * fn * fn) > 1.0) {
    throw InvalidArgument("delta (1 + ||f||^3) exceeds 1; shorten the interval");
  }
  const FlowKernel kernel(f.basis, cut, sign, profile);
  const SpectralBasis& basis = *f.basis;
  const Index active = kernel.active_modes();
  Eigen::VectorXcd alpha = phases(basis.eigenvalues(), delta).cwiseProduct(f.alpha);
  if (active > 0) {
    const ActiveRhs rhs(kernel, basis.n_modes());
    alpha.head(active) = picard_block(rhs, basis.eigenvalues().head(active),
                                      f.alpha.head(active), delta, options);
  }
  return {f.basis, std::move(alpha)};
}

void write_trajectory_csv(const Trajectory& trajectory, std::ostream& out) {
  const Index n_amp = trajectory.points.empty()
                          ? 0
                          : trajectory.points.front().amplitudes.size();
  out << "t,H,M_low,hnorm_theta";
  for (Index j = 0; j < n_amp; ++j) out << ",abs_alpha_" << (j + 1);
  out << '\n' << std::setprecision(17);
  for (const auto& p : trajectory.points) {
    out << p.t << ',' << p.hamiltonian << ',' << p.mass_low << ',' << p.hnorm_theta;
    for (Index j = 0; j < p.amplitudes.size(); ++j) out << ',' << p.amplitudes(j);
    out << '\n';
  }
}

void write_trajectory_csv(const Trajectory& trajectory, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_trajectory_csv(trajectory, out);
}

double default_theta(double s) {
  if (!(s > 1.0)) throw InvalidArgument("default_theta needs s > 1");
  const double top = 0.5 - 1.0 / s;
  return s <= 2.0 ? top - 0.25 : 0.75 * top;
}

}  // namespace gibbsflow
