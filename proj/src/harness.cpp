#include "gibbsflow/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "gibbsflow/errors.hpp"
#include "gibbsflow/parallel.hpp"
#include "gibbsflow/stats.hpp"

#ifndef GIBBSFLOW_VERSION
#define GIBBSFLOW_VERSION "unknown"
#endif

namespace gibbsflow {

namespace {

double tgamma_int(int k) { return std::tgamma(static_cast<double>(k) + 1.0); }

std::vector<Observable> select_observables(const ExperimentConfig& config,
                                           const BasisPtr& basis, double cut) {
  std::vector<Observable> all = default_observables(basis, cut, config.theta_value());
  if (config.observables.empty()) return all;
  std::vector<Observable> out;
  for (const auto& name : config.observables) {
    for (const auto& o : all) {
      if (o.name == name) out.push_back(o);
    }
  }
  return out;
}

FlowConfig flow_config(const ExperimentConfig& config) {
  FlowConfig fc;
  fc.dt = config.flow.dt;
  fc.T = config.flow.T;
  fc.integrator = integrator_from_string(config.flow.integrator);
  fc.conservation_tol = config.flow.conservation_tol;
  return fc;
}

// Simpson integral of a scalar function over [a, b] with n (even) panels.
template <typename F>
double simpson(F&& f, double a, double b, Index n) {
  if (n % 2 != 0) ++n;
  const double h = (b - a) / static_cast<double>(n);
  double sum = f(a) + f(b);
  for (Index i = 1; i < n; ++i) {
    sum += (i % 2 == 1 ? 4.0 : 2.0) * f(a + h * static_cast<double>(i));
  }
  return sum * h / 3.0;
}

struct TailFit {
  std::vector<double> thresholds;
  std::vector<double> probabilities;
  std::vector<double> std_errors;
  std::vector<double> skipped;
  stats::LineFit fit;
  bool usable = false;
};

// Exceedance probabilities between the median and the highest threshold
// that still has min_events exceedances, regressed as log p against t or t^2.
TailFit fit_tail(const Eigen::VectorXd& values, Index n_thresholds,
                 Index min_events, bool squared) {
  TailFit out;
  std::vector<double> sorted(values.data(), values.data() + values.size());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<Index>(sorted.size());
  const double lo = sorted[static_cast<std::size_t>(n / 2)];
  const Index top_index = n - min_events - 1;
  if (top_index <= n / 2) return out;
  const double hi = sorted[static_cast<std::size_t>(top_index)];
  std::vector<double> xs, ys, sig;
  for (Index k = 0; k < n_thresholds; ++k) {
    const double t = lo + (hi - lo) * static_cast<double>(k) /
                              static_cast<double>(n_thresholds - 1);
    const Estimate p = exceedance(values, t);
    if (p.value * static_cast<double>(n) < static_cast<double>(min_events)) {
      out.skipped.push_back(t);
      continue;
    }
    out.thresholds.push_back(t);
    out.probabilities.push_back(p.value);
    out.std_errors.push_back(p.std_error);
    xs.push_back(squared ? t * t : t);
    ys.push_back(std::log(p.value));
    sig.push_back(p.std_error / p.value);
  }
  if (xs.size() >= 4) {
    const auto m = static_cast<Index>(xs.size());
    out.fit = stats::fit_line_weighted(Eigen::Map<Eigen::VectorXd>(xs.data(), m),
                                       Eigen::Map<Eigen::VectorXd>(ys.data(), m),
                                       Eigen::Map<Eigen::VectorXd>(sig.data(), m));
    out.usable = true;
  }
  return out;
}

Json tail_json(const TailFit& t) {
  return {{"thresholds", t.thresholds},
          {"probabilities", t.probabilities},
          {"std_errors", t.std_errors},
          {"skipped_thresholds", t.skipped},
          {"slope", t.fit.slope},
          {"slope_se", t.fit.slope_se},
          {"intercept", t.fit.intercept},
          {"r_squared", t.fit.r_squared},
          {"usable", t.usable}};
}

std::string basis_cache_name(const BasisConfig& c) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "gfbasis_s%.17g_J%lld_n%lld_L%.17g.bin", c.s,
                static_cast<long long>(c.modes), static_cast<long long>(c.grid_points),
                c.half_extent);
  return buf;
}

// Histogram counts of `values` over equal bins of [lo, hi).
std::vector<Index> histogram(const Eigen::VectorXd& values, double lo, double hi,
                             Index bins) {
  std::vector<Index> counts(static_cast<std::size_t>(bins), 0);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (Index i = 0; i < values.size(); ++i) {
    const double v = values(i);
    if (v < lo || v >= hi) continue;
    const auto b = std::min<Index>(bins - 1, static_cast<Index>((v - lo) / width));
    ++counts[static_cast<std::size_t>(b)];
  }
  return counts;
}

struct HistogramCheck {
  Index failing_bins = 0;
  double max_abs_z = 0.0;
  Json bins = Json::array();
};

HistogramCheck compare_histogram(const Eigen::VectorXd& values, const MassDensity& f,
                                 double lo, double hi, Index bins) {
  HistogramCheck out;
  const auto counts = histogram(values, lo, hi, bins);
  const auto n = static_cast<double>(values.size());
  const double width = (hi - lo) / static_cast<double>(bins);
  for (Index b = 0; b < bins; ++b) {
    const double a = lo + width * static_cast<double>(b);
    const double p = simpson([&](double x) { return f(x); }, a, a + width, 20);
    const double phat = static_cast<double>(counts[static_cast<std::size_t>(b)]) / n;
    const double se = std::sqrt(std::max(p * (1.0 - p), 1e-300) / n);
    const double z = (phat - p) / se;
    out.max_abs_z = std::max(out.max_abs_z, std::abs(z));
    if (std::abs(z) > 3.0) ++out.failing_bins;
    out.bins.push_back({{"lo", a}, {"expected", p}, {"observed", phat}, {"z", z}});
  }
  return out;
}

}  // namespace

std::string code_version() { return GIBBSFLOW_VERSION; }

BasisPtr load_or_build_basis(const BasisConfig& config) {
  const char* dir = std::getenv("GIBBSFLOW_CACHE_DIR");
  if (dir && *dir) {
    const std::filesystem::path path = std::filesystem::path(dir) / basis_cache_name(config);
    if (std::filesystem::exists(path)) {
      return std::make_shared<const SpectralBasis>(load_basis(path.string()));
    }
    BasisPtr basis = build_basis(config.s, config.modes, config.grid_points,
                                 config.half_extent);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    save_basis(*basis, path.string());
    return basis;
  }
  return build_basis(config.s, config.modes, config.grid_points, config.half_extent);
}

double resolve_cut(const MeasureConfig& measure, const SpectralBasis& basis) {
  if (measure.cut_mode > 0) {
    if (measure.cut_mode > basis.n_modes()) {
      throw InvalidArgument("cut_mode exceeds the retained modes");
    }
    return basis.lambda(measure.cut_mode - 1);
  }
  return measure.lambda_cut;
}

MeasureSpec resolve_measure(const ExperimentConfig& config,
                            const SpectralBasis& basis) {
  const double cut = resolve_cut(config.measure, basis);
  switch (measure_kind_from_string(config.measure.kind)) {
    case MeasureKind::gaussian:
      return MeasureSpec::gaussian(cut);
    case MeasureKind::gibbs_defocusing:
      return MeasureSpec::defocusing(cut);
    case MeasureKind::gibbs_focusing: {
      double m = config.measure.mass_cut;
      if (!(m > 0.0)) {
        const Index low = basis.modes_below(cut);
        m = config.measure.mass_cut_std *
            std::sqrt(basis.eigenvalues().head(low).array().pow(-2.0).sum());
      }
      return MeasureSpec::focusing(cut, m);
    }
  }
  throw InvalidArgument("unknown measure kind");
}

double combined_z(double mean_t0, double se_t0, double mean_T, double se_T) {
  const double diff = mean_T - mean_t0;
  if (diff == 0.0) return 0.0;
  const double se = std::sqrt(se_t0 * se_t0 + se_T * se_T);
  return se > 0.0 ? diff / se : std::copysign(std::numeric_limits<double>::infinity(), diff);
}

bool InvarianceReport::statistics_ok() const {
  return std::all_of(observables.begin(), observables.end(),
                     [](const ObservableComparison& o) { return o.passed; });
}

bool InvarianceReport::passed() const {
  return conservation_ok && statistics_ok() &&
         (!negative_control.ran || negative_control.flagged);
}

Json InvarianceReport::to_json() const {
  Json obs = Json::array();
  for (const auto& o : observables) {
    obs.push_back({{"name", o.name},
                   {"mean_t0", o.mean_t0},
                   {"se_t0", o.se_t0},
                   {"mean_T", o.mean_T},
                   {"se_T", o.se_T},
                   {"z", o.z},
                   {"passed", o.passed}});
  }
  Json j{{"observables", obs},
         {"n_samples", n_samples},
         {"effective_sample_size", effective_sample_size},
         {"max_hamiltonian_drift", max_hamiltonian_drift},
         {"max_mass_drift", max_mass_drift},
         {"blowups", blowups},
         {"conservation_ok", conservation_ok}};
  if (observables.size() > 5) {
    j["note"] = "more than five observables: a Bonferroni threshold would be stricter";
  }
  j["negative_control"] = {{"ran", negative_control.ran},
                           {"dt", negative_control.dt},
                           {"samples", negative_control.samples},
                           {"max_hamiltonian_drift", negative_control.max_hamiltonian_drift},
                           {"max_mass_drift", negative_control.max_mass_drift},
                           {"blowups", negative_control.blowups},
                           {"flagged", negative_control.flagged}};
  j["passed"] = passed();
  return j;
}

InvarianceReport compare_under_flow(const WeightedEnsemble& ensemble,
                                    const std::vector<Observable>& observables,
                                    const FlowKernel& kernel,
                                    const FlowConfig& cfg, unsigned threads) {
  const Index n = ensemble.size();
  const auto k = static_cast<Index>(observables.size());
  Eigen::MatrixXd v0(n, k), vT(n, k);
  Eigen::VectorXd h_drift = Eigen::VectorXd::Zero(n), m_drift = Eigen::VectorXd::Zero(n);
  std::vector<char> blown(static_cast<std::size_t>(n), 0);

  parallel_for(n, threads, [&](std::int64_t i) {
    const FieldCoeffs& u0 = ensemble.samples[static_cast<std::size_t>(i)];
    for (Index o = 0; o < k; ++o) {
      v0(i, o) = observables[static_cast<std::size_t>(o)].evaluate(u0);
    }
    FlowState state{u0, 0.0, kernel.cut(), kernel.sign(), {}};
    try {
      const FlowState end = evolve(state, cfg, kernel);
      for (Index o = 0; o < k; ++o) {
        vT(i, o) = observables[static_cast<std::size_t>(o)].evaluate(end.u);
      }
      const double h0 = kernel.hamiltonian(u0.alpha);
      const double m0 = kernel.mass_low(u0.alpha);
      h_drift(i) = std::abs(kernel.hamiltonian(end.u.alpha) - h0) /
                   std::max(std::abs(h0), std::numeric_limits<double>::min());
      m_drift(i) = std::abs(kernel.mass_low(end.u.alpha) - m0) /
                   std::max(std::abs(m0), std::numeric_limits<double>::min());
    } catch (const BlowupDetected&) {
      blown[static_cast<std::size_t>(i)] = 1;
      vT.row(i).setConstant(std::numeric_limits<double>::quiet_NaN());
    }
  });

  InvarianceReport report;
  report.n_samples = n;
  report.effective_sample_size = ensemble.effective_sample_size();
  report.blowups = std::count(blown.begin(), blown.end(), 1);
  report.max_hamiltonian_drift = n > 0 ? h_drift.maxCoeff() : 0.0;
  report.max_mass_drift = n > 0 ? m_drift.maxCoeff() : 0.0;
  report.conservation_ok = report.blowups == 0 &&
                           report.max_hamiltonian_drift <= cfg.conservation_tol &&
                           report.max_mass_drift <= cfg.conservation_tol;

  Eigen::VectorXd logw = ensemble.log_weights;
  for (Index i = 0; i < n; ++i) {
    if (blown[static_cast<std::size_t>(i)]) logw(i) = -std::numeric_limits<double>::infinity();
  }
  for (Index o = 0; o < k; ++o) {
    const Estimate e0 = estimate_weighted(logw, v0.col(o));
    const Estimate eT = estimate_weighted(logw, vT.col(o));
    ObservableComparison c;
    c.name = observables[static_cast<std::size_t>(o)].name;
    c.mean_t0 = e0.value;
    c.se_t0 = e0.std_error;
    c.mean_T = eT.value;
    c.se_T = eT.std_error;
    c.z = combined_z(c.mean_t0, c.se_t0, c.mean_T, c.se_T);
    c.passed = std::isfinite(c.z) && std::abs(c.z) <= 3.0;
    report.observables.push_back(c);
  }
  return report;
}

NegativeControl broken_flow_control(const WeightedEnsemble& ensemble,
                                    const FlowKernel& kernel,
                                    const FlowConfig& cfg, double factor,
                                    Index samples, unsigned threads) {
  NegativeControl nc;
  nc.ran = true;
  FlowConfig broken = cfg;
  broken.dt = std::min(cfg.dt * factor, std::abs(cfg.T));
  broken.enforce_stability_guard = false;
  nc.dt = broken.dt;
  nc.samples = std::min(samples, ensemble.size());
  Eigen::VectorXd hd = Eigen::VectorXd::Zero(nc.samples), md = Eigen::VectorXd::Zero(nc.samples);
  std::vector<char> blown(static_cast<std::size_t>(nc.samples), 0);
  parallel_for(nc.samples, threads, [&](std::int64_t i) {
    const FieldCoeffs& u0 = ensemble.samples[static_cast<std::size_t>(i)];
    FlowState state{u0, 0.0, kernel.cut(), kernel.sign(), {}};
    try {
      const FlowState end = evolve(state, broken, kernel);
      const double h0 = kernel.hamiltonian(u0.alpha);
      const double m0 = kernel.mass_low(u0.alpha);
      hd(i) = std::abs(kernel.hamiltonian(end.u.alpha) - h0) /
              std::max(std::abs(h0), std::numeric_limits<double>::min());
      md(i) = std::abs(kernel.mass_low(end.u.alpha) - m0) /
              std::max(std::abs(m0), std::numeric_limits<double>::min());
    } catch (const BlowupDetected&) {
      blown[static_cast<std::size_t>(i)] = 1;
    }
  });
  nc.blowups = std::count(blown.begin(), blown.end(), 1);
  nc.max_hamiltonian_drift = nc.samples > 0 ? hd.maxCoeff() : 0.0;
  nc.max_mass_drift = nc.samples > 0 ? md.maxCoeff() : 0.0;
  nc.flagged = nc.blowups > 0 || nc.max_hamiltonian_drift > cfg.conservation_tol ||
               nc.max_mass_drift > cfg.conservation_tol;
  return nc;
}

InvarianceReport run_invariance(const ExperimentConfig& config) {
  config.validate();
  const BasisPtr basis = load_or_build_basis(config.basis);
  const MeasureSpec spec = resolve_measure(config, *basis);
  const unsigned threads = config.worker_count();
  const int sign = spec.kind == MeasureKind::gaussian ? config.flow.sign : spec.sign();

  SamplingOptions opts;
  opts.threads = threads;
  // mu_0 is sampled over every retained mode; Gibbs measures live on the
  // low block and carry their weights.
  MeasureSpec draw = spec;
  if (spec.kind == MeasureKind::gaussian) draw.lambda_cut = basis->lambda_max();
  WeightedEnsemble ens = build_ensemble(basis, draw, config.n_samples, config.seed, opts);
  ens.spec = spec;
  if (!config.csv_path.empty()) {
    std::ofstream out(config.csv_path);
    if (!out) throw IoError("cannot write " + config.csv_path);
    write_ensemble_csv(ens, out);
  }

  const auto observables = select_observables(config, basis, spec.lambda_cut);
  const FlowKernel kernel(basis, spec.lambda_cut, sign);
  const FlowConfig fc = flow_config(config);
  InvarianceReport report = compare_under_flow(ens, observables, kernel, fc, threads);
  if (kernel.active_modes() > 0) {
    report.negative_control =
        broken_flow_control(ens, kernel, fc, config.flow.negative_control_factor,
                            config.flow.negative_control_samples, threads);
  }
  return report;
}

bool SuiteReport::passed() const {
  return std::all_of(tests.begin(), tests.end(),
                     [](const TestResult& t) { return t.passed; });
}

const TestResult& SuiteReport::find(const std::string& name) const {
  for (const auto& t : tests) {
    if (t.name == name) return t;
  }
  throw InvalidArgument("no test named " + name + " in suite " + suite);
}

SuiteReport to_suite(const InvarianceReport& report, const std::string& prefix) {
  SuiteReport suite;
  suite.suite = "invariance";
  for (const auto& o : report.observables) {
    suite.tests.push_back({prefix + "z_" + o.name, o.passed,
                           {{"mean_t0", o.mean_t0},
                            {"se_t0", o.se_t0},
                            {"mean_T", o.mean_T},
                            {"se_T", o.se_T},
                            {"z", o.z}}});
  }
  suite.tests.push_back({prefix + "conservation", report.conservation_ok,
                         {{"max_hamiltonian_drift", report.max_hamiltonian_drift},
                          {"max_mass_drift", report.max_mass_drift},
                          {"blowups", report.blowups},
                          {"effective_sample_size", report.effective_sample_size}}});
  if (report.negative_control.ran) {
    const auto& nc = report.negative_control;
    suite.tests.push_back({prefix + "negative_control_flagged", nc.flagged,
                           {{"dt", nc.dt},
                            {"samples", nc.samples},
                            {"max_hamiltonian_drift", nc.max_hamiltonian_drift},
                            {"max_mass_drift", nc.max_mass_drift},
                            {"blowups", nc.blowups}}});
  }
  return suite;
}

SuiteReport run_moment_suite(const ExperimentConfig& config) {
  config.validate();
  const BasisPtr basis = load_or_build_basis(config.basis);
  const unsigned threads = config.worker_count();
  const Index n = config.moments.n_samples;
  const Index J = basis->n_modes();
  const double theta = config.theta_value();
  const double cut = resolve_cut(config.measure, *basis);
  const Index low = basis->modes_below(cut);
  const Index inc_mode = std::clamp<Index>(config.moments.increment_mode, 1, J - 1);
  const double inc_cut = basis->lambda(inc_mode - 1);
  const Eigen::VectorXd& lam = basis->eigenvalues();

  Eigen::MatrixXd abs2(n, J);
  Eigen::VectorXd mass_low(n), increment(n), hnorm2(n);
  parallel_for(n, threads, [&](std::int64_t i) {
    const FieldCoeffs u = sample_gaussian(basis, basis->lambda_max(), config.seed,
                                          static_cast<std::uint64_t>(i));
    abs2.row(i) = u.alpha.cwiseAbs2().transpose();
    mass_low(i) = renormalized_mass(u, cut);
    increment(i) = renormalized_mass(u, basis->lambda_max()) - renormalized_mass(u, inc_cut);
    const double h = sobolev_norm(u, theta);
    hnorm2(i) = h * h;
  });

  SuiteReport suite;
  suite.suite = "moments";

  {
    Json per_mode = Json::array();
    double worst2 = 0.0, worst4 = 0.0;
    bool ok2 = true, ok4 = true;
    for (Index j = 0; j < J; ++j) {
      const auto m2 = stats::mean_se(abs2.col(j));
      const auto m4 = stats::mean_se(abs2.col(j).array().square().matrix());
      const double z2 = (m2.mean - 1.0 / lam(j)) / m2.se;
      const double z4 = (m4.mean - 2.0 / (lam(j) * lam(j))) / m4.se;
      worst2 = std::max(worst2, std::abs(z2));
      worst4 = std::max(worst4, std::abs(z4));
      ok2 = ok2 && std::abs(z2) <= 4.0;
      ok4 = ok4 && std::abs(z4) <= 5.0;
      per_mode.push_back({{"j", j + 1}, {"mean_abs2", m2.mean}, {"z_abs2", z2},
                          {"mean_abs4", m4.mean}, {"z_abs4", z4}});
    }
    suite.tests.push_back({"second_moments_within_4se", ok2,
                           {{"max_abs_z", worst2}, {"modes", per_mode}}});
    suite.tests.push_back({"fourth_moments_within_5se", ok4, {{"max_abs_z", worst4}}});
  }

  {
    const auto v = stats::variance_se(mass_low);
    const double target = lam.head(low).array().pow(-2.0).sum();
    const double z = (v.mean - target) / v.se;
    suite.tests.push_back({"variance_mass_low_within_5se", std::abs(z) <= 5.0,
                           {{"variance", v.mean}, {"se", v.se}, {"target", target},
                            {"z", z}, {"cut", cut}}});
  }
  {
    const auto m = stats::mean_se(increment.array().square().matrix());
    const double target = lam.tail(J - inc_mode).array().pow(-2.0).sum();
    const double z = (m.mean - target) / m.se;
    suite.tests.push_back({"mass_cauchy_increment_within_5se", std::abs(z) <= 5.0,
                           {{"mean_square", m.mean}, {"se", m.se}, {"target", target},
                            {"z", z}, {"lower_cut", inc_cut}, {"upper_cut", basis->lambda_max()}}});
  }
  const double trace = lam.array().pow(theta - 1.0).sum();
  {
    const auto m = stats::mean_se(hnorm2);
    const double z = (m.mean - trace) / m.se;
    suite.tests.push_back({"hnorm_identity_within_4se", std::abs(z) <= 4.0,
                           {{"mean", m.mean}, {"se", m.se}, {"target", trace},
                            {"z", z}, {"theta", theta}}});
  }
  for (int k = 1; k <= 3; ++k) {
    const auto m = stats::mean_se(hnorm2.array().pow(k).matrix());
    const double bound = tgamma_int(k) * std::pow(trace, k);
    suite.tests.push_back({"hnorm_moment_bound_k" + std::to_string(k),
                           m.mean <= bound + 3.0 * m.se,
                           {{"mean", m.mean}, {"se", m.se}, {"bound", bound},
                            {"ratio", m.mean / bound}}});
  }
  {
    // Broken configuration: the second moment against 1/(2 lambda_1).
    const auto m2 = stats::mean_se(abs2.col(0));
    const double wrong = 0.5 / lam(0);
    const double z = (m2.mean - wrong) / m2.se;
    suite.tests.push_back({"negative_control_wrong_variance_rejected", std::abs(z) > 4.0,
                           {{"mean", m2.mean}, {"wrong_target", wrong}, {"z", z}}});
  }
  return suite;
}

SuiteReport run_tail_suite(const ExperimentConfig& config) {
  config.validate();
  const unsigned threads = config.worker_count();
  const TailConfig& tc = config.tails;
  SuiteReport suite;
  suite.suite = "tails";

  {
    const BasisPtr basis = load_or_build_basis(config.basis);
    const double cut = resolve_cut(config.measure, *basis);
    TailStatistic stat{TailStatistic::Kind::hnorm, config.theta_value()};
    const Eigen::VectorXd values =
        sample_statistic(basis, cut, stat, tc.n_samples, config.seed, threads);
    const TailFit fit = fit_tail(values, tc.thresholds, tc.min_events, true);
    const bool ok = fit.usable && fit.fit.slope < 0.0 && fit.fit.r_squared >= 0.9;
    Json d = tail_json(fit);
    d["theta"] = stat.theta;
    d["cut"] = cut;
    suite.tests.push_back({"hnorm_tail_gaussian_in_lambda_squared", ok, d});
  }

  BasisConfig deep = config.basis;
  deep.modes = tc.high_modes;
  deep.half_extent = tc.high_half_extent;
  const BasisPtr basis = load_or_build_basis(deep);
  const double c1 = tc.base_cut, c2 = tc.factor * tc.base_cut;
  if (basis->modes_below(c2) >= basis->n_modes() - 2) {
    throw InvalidArgument("tail suite needs retained modes well above factor * base_cut");
  }
  struct Pair {
    TailStatistic::Kind kind;
    bool squared;
    std::string name;
  };
  for (const Pair& p : {Pair{TailStatistic::Kind::mass_high, false, "mass_high"},
                        Pair{TailStatistic::Kind::l4_high, true, "l4_high"}}) {
    TailStatistic stat{p.kind, 0.0};
    const Eigen::VectorXd v1 = sample_statistic(basis, c1, stat, tc.n_samples,
                                                config.seed + 1, threads);
    const Eigen::VectorXd v2 = sample_statistic(basis, c2, stat, tc.n_samples,
                                                config.seed + 2, threads);
    const TailFit f1 = fit_tail(v1, tc.thresholds, tc.min_events, p.squared);
    const TailFit f2 = fit_tail(v2, tc.thresholds, tc.min_events, p.squared);
    const double gap = f1.fit.slope - f2.fit.slope;
    const double gap_se = std::hypot(f1.fit.slope_se, f2.fit.slope_se);
    const bool steeper = f1.usable && f2.usable && f2.fit.slope < 0.0 && gap > 3.0 * gap_se;
    suite.tests.push_back({p.name + "_tail_steepens_with_cut", steeper,
                           {{"cut", c1}, {"cut_high", c2}, {"fit_cut", tail_json(f1)},
                            {"fit_cut_high", tail_json(f2)}, {"slope_gap", gap},
                            {"slope_gap_se", gap_se}}});
    if (p.kind == TailStatistic::Kind::mass_high) {
      // Broken configuration: the same check with the cuts swapped.
      const bool reversed = f1.usable && f2.usable && -gap > 3.0 * gap_se;
      suite.tests.push_back({"negative_control_reversed_cuts_rejected", !reversed,
                             {{"slope_gap", -gap}, {"slope_gap_se", gap_se}}});
    }
  }
  return suite;
}

SuiteReport run_canonical_suite(const ExperimentConfig& config) {
  config.validate();
  const BasisPtr basis = load_or_build_basis(config.basis);
  const unsigned threads = config.worker_count();
  const CanonicalConfig& cc = config.canonical;
  const double sigma = mass_std(*basis);
  const double edge = mass_support_edge(*basis);
  const double m = cc.m;
  SuiteReport suite;
  suite.suite = "canonical";

  {
    // One retained mode: |alpha|^2 - 1/lambda is a shifted exponential.
    const double lam = basis->lambda(0);
    Eigen::VectorXd one(1);
    one << lam;
    InversionOptions opt;
    opt.allow_few_modes = true;
    const MassDensity f(one, -1.0 / lam, 4.0, opt);
    double worst = 0.0;
    for (double x = -1.0 / lam + 0.05; x <= 4.0; x += 0.01) {
      worst = std::max(worst, std::abs(f(x) - lam * std::exp(-lam * x - 1.0)));
    }
    for (double x = -1.0 / lam - 0.5; x <= -1.0 / lam - 0.05; x += 0.01) {
      worst = std::max(worst, std::abs(f(x)));
    }
    suite.tests.push_back({"single_mode_oracle", worst <= 1e-6,
                           {{"lambda", lam}, {"max_abs_error", worst}}});
  }

  const double right = 10.0 * sigma + 40.0 / basis->lambda(0);
  const MassDensity f0(basis->eigenvalues(), edge, right);
  {
    const Index points = 40001;
    const Eigen::VectorXd xs = Eigen::VectorXd::LinSpaced(points, edge, right);
    const DensityCurve curve = f0.curve(xs);
    const double total = curve.integral();
    suite.tests.push_back({"density_normalisation", std::abs(total - 1.0) <= 1e-6,
                           {{"integral", total}, {"min_value", curve.f.minCoeff()},
                            {"max_imag_residue", curve.imag_residue.maxCoeff()},
                            {"s_range", curve.s_range}, {"s_step", curve.s_step}}});
  }
  const double f0m = f0_at(*basis, m);
  {
    const double f_zero = f0_at(*basis, 0.0);
    const double far_right = f0(10.0 * sigma);
    const double far_left = -10.0 * sigma > edge ? f0(-10.0 * sigma) : 0.0;
    suite.tests.push_back({"f0_positive_and_decaying",
                           f_zero > 0.1 && f0m > 0.0 && far_right < 1e-3 &&
                               std::abs(far_left) < 1e-3,
                           {{"f0_at_0", f_zero}, {"f0_at_m", f0m}, {"m", m},
                            {"f0_at_plus_10_std", far_right},
                            {"f0_at_minus_10_std", far_left}}});
  }

  // Monte Carlo law of M over every retained mode.
  const Index n_hist = cc.histogram_samples;
  Eigen::VectorXd masses(n_hist);
  parallel_for(n_hist, threads, [&](std::int64_t i) {
    const FieldCoeffs u = sample_gaussian(basis, basis->lambda_max(), config.seed + 3,
                                          static_cast<std::uint64_t>(i));
    masses(i) = renormalized_mass(u, basis->lambda_max());
  });
  {
    const double mean = masses.mean();
    const Eigen::ArrayXd c = masses.array() - mean;
    const double skew = c.cube().mean() / std::pow(c.square().mean(), 1.5);
    suite.tests.push_back({"skewness_positive", skew > 0.0,
                           {{"sample_skewness", skew},
                            {"third_cumulant", (2.0 * basis->eigenvalues().array().pow(-3.0)).sum()}}});
  }
  {
    const double lo = std::max(edge, -3.0 * sigma), hi = 5.0 * sigma;
    const HistogramCheck h = compare_histogram(masses, f0, lo, hi, cc.bins);
    suite.tests.push_back({"density_matches_histogram", h.failing_bins == 0,
                           {{"bins", cc.bins}, {"failing_bins", h.failing_bins},
                            {"max_abs_z", h.max_abs_z}, {"samples", n_hist},
                            {"table", h.bins}}});
    // Broken configuration: the density of a different law.
    const Eigen::VectorXd wrong_lambdas = 1.15 * basis->eigenvalues();
    const MassDensity wrong(wrong_lambdas, lo, hi);
    const HistogramCheck hw = compare_histogram(masses, wrong, lo, hi, cc.bins);
    suite.tests.push_back({"negative_control_wrong_density_rejected", hw.failing_bins > 0,
                           {{"failing_bins", hw.failing_bins}, {"max_abs_z", hw.max_abs_z}}});
  }

  {
    // Window conditioning: acceptance / (2 eps) against the window average
    // of the inverted density, and its approach to f0(m).
    Json ladder = Json::array();
    bool all_ok = true;
    double last_bias = std::numeric_limits<double>::infinity();
    bool bias_shrinks = true;
    double smallest_eps = std::numeric_limits<double>::infinity();
    double z_small = 0.0;
    std::vector<double> eps_list = cc.epsilon_ladder;
    std::sort(eps_list.rbegin(), eps_list.rend());
    for (double e_std : eps_list) {
      const double eps = e_std * sigma;
      CanonicalSpec spec{m, eps, 0.0};
      const ConditionedEnsemble ce =
          sample_conditioned_budget(basis, spec, cc.proposals, config.seed + 4, threads);
      const double rate = ce.acceptance / (2.0 * eps);
      const double se = ce.acceptance_se / (2.0 * eps);
      const double lo = std::max(m - eps, edge);
      const double window = simpson([&](double x) { return f0(x); }, lo, m + eps, 400) /
                            (2.0 * eps);
      const double z_window = (rate - window) / se;
      const double z_f0 = (rate - f0m) / se;
      const double bias = std::abs(window - f0m);
      if (bias > last_bias) bias_shrinks = false;
      last_bias = bias;
      all_ok = all_ok && std::abs(z_window) <= 3.0;
      if (eps < smallest_eps) {
        smallest_eps = eps;
        z_small = z_f0;
      }
      ladder.push_back({{"epsilon", eps}, {"epsilon_std", e_std}, {"acceptance", ce.acceptance},
                        {"rate", rate}, {"rate_se", se}, {"window_average", window},
                        {"z_vs_window", z_window}, {"z_vs_f0", z_f0},
                        {"window_bias", bias}});
    }
    suite.tests.push_back({"acceptance_matches_window_average", all_ok,
                           {{"f0_at_m", f0m}, {"ladder", ladder}}});
    suite.tests.push_back({"acceptance_converges_to_f0",
                           bias_shrinks && std::abs(z_small) <= 3.0,
                           {{"bias_shrinks", bias_shrinks}, {"z_smallest_eps", z_small}}});
  }

  {
    // Cylinder projection against mu_0^{<=cut} and the tightness bound.
    const Index mode = std::clamp<Index>(cc.tightness_cut_mode, 1, basis->n_modes() - 2);
    const double cut = basis->lambda(mode - 1);
    const Index low = basis->modes_below(cut);
    const CylinderDensity cyl(basis, cut, m);
    const Index n = cc.tightness_samples;
    Eigen::VectorXd density(n);
    Eigen::MatrixXd scaled(n, low);
    parallel_for(n, threads, [&](std::int64_t i) {
      const FieldCoeffs u = sample_gaussian(basis, cut, config.seed + 6,
                                            static_cast<std::uint64_t>(i));
      density(i) = cyl(u);
      for (Index j = 0; j < low; ++j) {
        scaled(i, j) = basis->lambda(j) * std::norm(u.alpha(j)) * density(i);
      }
    });
    const auto norm = stats::mean_se(density);
    const double zn = (norm.mean - 1.0) / norm.se;
    suite.tests.push_back({"cylinder_density_normalised", std::abs(zn) <= 3.0,
                           {{"mean", norm.mean}, {"se", norm.se}, {"z", zn}, {"cut", cut}}});
    Eigen::VectorXd js(low), means(low), ses(low);
    for (Index j = 0; j < low; ++j) {
      const auto e = stats::mean_se(scaled.col(j));
      js(j) = static_cast<double>(j + 1);
      means(j) = e.mean;
      ses(j) = e.se;
    }
    const stats::LineFit fit = stats::fit_line_weighted(js, means, ses);
    const bool flat = fit.slope < 3.0 * fit.slope_se;
    suite.tests.push_back({"tightness_no_growth_in_j", flat,
                           {{"max_over_j", means.maxCoeff()}, {"slope", fit.slope},
                            {"slope_se", fit.slope_se},
                            {"means", std::vector<double>(means.data(), means.data() + low)}}});
  }

  {
    // Conditioned + defocusing-reweighted ensemble under the truncated flow.
    const double cut = resolve_cut(config.measure, *basis);
    CanonicalSpec spec{m, cc.epsilon_std * sigma, cut};
    const ConditionedEnsemble ce =
        sample_conditioned(basis, spec, cc.n_conditioned, config.seed + 5, 0, threads);
    const CutoffQuadrature quadrature(basis, cut);
    const WeightedEnsemble ens = canonical_gibbs_reweight(ce.ensemble, +1, &quadrature);
    const auto observables = select_observables(config, basis, cut);
    const FlowKernel kernel(basis, cut, +1);
    const FlowConfig fc = flow_config(config);
    InvarianceReport report = compare_under_flow(ens, observables, kernel, fc, threads);
    report.negative_control =
        broken_flow_control(ens, kernel, fc, config.flow.negative_control_factor,
                            config.flow.negative_control_samples, threads);
    SuiteReport inv = to_suite(report, "canonical_");
    for (auto& t : inv.tests) suite.tests.push_back(std::move(t));
    suite.tests.push_back({"canonical_pathwise_mass_conserved",
                           report.blowups == 0 &&
                               report.max_mass_drift <= config.flow.conservation_tol,
                           {{"max_mass_drift", report.max_mass_drift},
                            {"acceptance", ce.acceptance},
                            {"proposals", ce.proposals},
                            {"effective_sample_size", report.effective_sample_size}}});
  }
  return suite;
}

Json report_json(const ExperimentConfig& config, const SuiteReport& suite) {
  Json tests = Json::array();
  for (const auto& t : suite.tests) {
    tests.push_back({{"name", t.name}, {"passed", t.passed}, {"details", t.details}});
  }
  return {{"suite", suite.suite},
          {"version", code_version()},
          {"seed", std::to_string(config.seed)},
          {"config", to_json(config)},
          {"tests", tests},
          {"passed", suite.passed()}};
}

void write_report(const ExperimentConfig& config, const Json& report) {
  if (config.report_path.empty()) return;
  std::ofstream out(config.report_path);
  if (!out) throw IoError("cannot open " + config.report_path + " for writing");
  out << report.dump(2) << '\n';
}

ExperimentConfig default_config(const std::string& experiment) {
  ExperimentConfig c;
  c.name = experiment;
  if (experiment == "invariance") return c;
  if (experiment == "focusing-invariance") {
    c.measure.kind = "focusing";
    return c;
  }
  if (experiment == "moments" || experiment == "tails" || experiment == "canonical") {
    c.n_samples = 100000;
    return c;
  }
  throw InvalidArgument("unknown experiment '" + experiment + "'");
}

}  // namespace gibbsflow
