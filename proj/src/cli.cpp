#include "gibbsflow/cli.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include "CLI11.hpp"

#include "gibbsflow/errors.hpp"
#include "gibbsflow/harness.hpp"

namespace gibbsflow {

namespace {

struct BasisFlags {
  BasisConfig basis;

  void attach(CLI::App* app) {
    app->add_option("--s", basis.s, "potential exponent, V = (1 + x^2)^{s/2}")
        ->capture_default_str();
    app->add_option("--modes", basis.modes, "retained eigenmodes J")->capture_default_str();
    app->add_option("--grid", basis.grid_points, "grid points")->capture_default_str();
    app->add_option("--L", basis.half_extent, "half-width of the box [-L, L]")
        ->capture_default_str();
  }
};

// Writes to --out when given, else to the command's stdout.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : out_(&fallback) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw IoError("cannot open " + path + " for writing");
      out_ = &file_;
    }
  }
  std::ostream& operator*() { return *out_; }

 private:
  std::ofstream file_;
  std::ostream* out_;
};

int parse_sign(const std::string& text) {
  if (text == "+1" || text == "1") return 1;
  if (text == "-1") return -1;
  throw InvalidArgument("--sign must be +1 or -1");
}

FieldCoeffs initial_field(const std::string& init, const BasisPtr& basis, double cut) {
  const std::string prefix = "random:";
  if (init.rfind(prefix, 0) == 0) {
    const std::uint64_t seed = parse_seed(init.substr(prefix.size()));
    return sample_gaussian(basis, cut, seed, 0);
  }
  return read_field_csv(init, basis);
}

struct SuiteFlags {
  std::string config_path;
  std::optional<std::string> seed;
  std::optional<Index> n_samples;
  std::optional<double> T;
  std::optional<double> dt;
  std::optional<std::string> measure;
  std::string out;
  std::string csv;
  bool serial = false;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON experiment config");
    app->add_option("--seed", seed, "u64 seed (decimal)");
    app->add_option("--n-samples", n_samples, "ensemble size");
    app->add_option("--T", T, "flow horizon");
    app->add_option("--dt", dt, "flow step");
    app->add_option("--measure", measure, "gaussian | defocusing | focusing");
    app->add_option("--out", out, "report path (default: stdout)");
    app->add_option("--csv", csv, "invariance: also write the weighted ensemble as CSV");
    app->add_flag("--serial", serial, "single-threaded, bit-reproducible run");
  }

  ExperimentConfig resolve(const std::string& experiment) const {
    ExperimentConfig c = config_path.empty() ? default_config(experiment)
                                             : load_config(config_path);
    if (seed) c.seed = parse_seed(*seed);
    if (n_samples) c.n_samples = *n_samples;
    if (T) c.flow.T = *T;
    if (dt) c.flow.dt = *dt;
    if (measure) c.measure.kind = *measure;
    if (serial) c.serial = true;
    if (!out.empty()) c.report_path = out;
    if (!csv.empty()) c.csv_path = csv;
    c.validate();
    return c;
  }
};

int emit_report(const ExperimentConfig& config, const SuiteReport& suite,
                std::ostream& out) {
  const Json report = report_json(config, suite);
  if (config.report_path.empty()) {
    out << report.dump(2) << '\n';
  } else {
    write_report(config, report);
    out << suite.suite << ": " << (suite.passed() ? "PASS" : "FAIL") << " -> "
        << config.report_path << '\n';
  }
  return suite.passed() ? kExitPass : kExitExperimentFail;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gibbs measures and the truncated NLS flow with a trapping potential",
               "gibbsflow"};
  app.require_subcommand(1);
  app.set_version_flag("--version", code_version());

  // spectrum
  auto* spectrum = app.add_subcommand("spectrum", "eigenvalues of h as CSV");
  BasisFlags spectrum_basis;
  spectrum_basis.basis.modes = 20;
  spectrum_basis.attach(spectrum);
  std::string spectrum_out;
  spectrum->add_option("--out", spectrum_out, "CSV path (default: stdout)");

  // sample
  auto* sample = app.add_subcommand("sample", "weighted draws of a finite-cut measure");
  BasisFlags sample_basis;
  sample_basis.attach(sample);
  std::string sample_kind = "gaussian", sample_seed = "1", sample_out;
  Index sample_n = 1, sample_cut_mode = 20;
  double sample_mass_cut = 0.0;
  sample->add_option("--measure", sample_kind, "gaussian | defocusing | focusing")
      ->capture_default_str();
  sample->add_option("--cut-mode", sample_cut_mode, "Lambda = lambda_k")->capture_default_str();
  sample->add_option("--mass-cut", sample_mass_cut, "focusing mass cutoff m");
  sample->add_option("--n", sample_n, "number of draws")->capture_default_str();
  sample->add_option("--seed", sample_seed, "u64 seed")->capture_default_str();
  sample->add_option("--out", sample_out, "CSV path (default: stdout)");

  // flow
  auto* flow = app.add_subcommand("flow", "integrate one trajectory of the truncated flow");
  BasisFlags flow_basis;
  flow_basis.attach(flow);
  std::optional<double> flow_cut;
  Index flow_cut_mode = 20, flow_every = 10;
  std::string flow_sign = "+1", flow_init = "random:1", flow_out, flow_integrator = "interaction_rk4";
  FlowConfig flow_cfg;
  bool flow_amplitudes = false;
  std::optional<double> flow_theta;
  flow->add_option("--lambda-cut", flow_cut, "Lambda (overrides --cut-mode)");
  flow->add_option("--cut-mode", flow_cut_mode, "Lambda = lambda_k")->capture_default_str();
  flow->add_option("--sign", flow_sign, "+1 defocusing, -1 focusing")->capture_default_str();
  flow->add_option("--dt", flow_cfg.dt, "step")->capture_default_str();
  flow->add_option("--T", flow_cfg.T, "horizon")->capture_default_str();
  flow->add_option("--integrator", flow_integrator, "interaction_rk4 | picard_oracle")
      ->capture_default_str();
  flow->add_option("--conservation-tol", flow_cfg.conservation_tol, "relative drift tolerance")
      ->capture_default_str();
  flow->add_option("--init", flow_init, "field CSV path or random:<seed>")->capture_default_str();
  flow->add_option("--every", flow_every, "record every k-th step")->capture_default_str();
  flow->add_option("--theta", flow_theta, "H^theta index for the norm column");
  flow->add_flag("--amplitudes", flow_amplitudes, "add |alpha_j| columns");
  flow->add_option("--out", flow_out, "trajectory CSV (default: stdout)");

  // suites
  auto* invariance = app.add_subcommand("invariance", "measure invariance under the flow");
  SuiteFlags invariance_flags;
  invariance_flags.attach(invariance);
  auto* moments = app.add_subcommand("moments", "Gaussian moment identities and bounds");
  SuiteFlags moment_flags;
  moment_flags.attach(moments);
  auto* tails = app.add_subcommand("tails", "tail probability fits");
  SuiteFlags tail_flags;
  tail_flags.attach(tails);
  auto* canonical_suite = app.add_subcommand("canonical-suite", "canonical-measure diagnostics");
  SuiteFlags canonical_flags;
  canonical_flags.attach(canonical_suite);

  // canonical-density
  auto* density = app.add_subcommand("canonical-density", "density of M_{>cut} by inversion");
  BasisFlags density_basis;
  density_basis.attach(density);
  double density_cut = 0.0, density_lo = -2.0, density_hi = 4.0;
  Index density_points = 201;
  std::string density_out;
  density->add_option("--cut", density_cut, "modes with lambda_j > cut (0: all)")
      ->capture_default_str();
  density->add_option("--x-lo", density_lo, "first abscissa")->capture_default_str();
  density->add_option("--x-hi", density_hi, "last abscissa")->capture_default_str();
  density->add_option("--points", density_points, "abscissae")->capture_default_str();
  density->add_option("--out", density_out, "CSV path (default: stdout)");

  // canonical-sample
  auto* csample = app.add_subcommand("canonical-sample", "rejection draws of mu_0^{m,eps}");
  BasisFlags csample_basis;
  csample_basis.attach(csample);
  double csample_m = 0.0;
  std::optional<double> csample_eps;
  double csample_eps_std = 0.2;
  Index csample_n = 100;
  std::string csample_seed = "1", csample_out;
  csample->add_option("--m", csample_m, "target renormalised mass")->capture_default_str();
  csample->add_option("--eps", csample_eps, "window half-width");
  csample->add_option("--eps-std", csample_eps_std, "half-width in units of std(M)")
      ->capture_default_str();
  csample->add_option("--n", csample_n, "accepted draws")->capture_default_str();
  csample->add_option("--seed", csample_seed, "u64 seed")->capture_default_str();
  csample->add_option("--out", csample_out, "CSV path (default: stdout)");

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    err << app.help();
    return kExitUsage;
  }

  try {
    if (*spectrum) {
      const BasisPtr basis = load_or_build_basis(spectrum_basis.basis);
      Sink sink(spectrum_out, out);
      *sink << "j,lambda_j\n" << std::setprecision(17);
      for (Index j = 0; j < basis->n_modes(); ++j) {
        *sink << (j + 1) << ',' << basis->lambda(j) << '\n';
      }
      return kExitPass;
    }
    if (*sample) {
      ExperimentConfig c;
      c.basis = sample_basis.basis;
      c.measure.kind = sample_kind;
      c.measure.cut_mode = sample_cut_mode;
      c.measure.mass_cut = sample_mass_cut;
      const BasisPtr basis = load_or_build_basis(c.basis);
      const MeasureSpec spec = resolve_measure(c, *basis);
      const WeightedEnsemble ens =
          build_ensemble(basis, spec, sample_n, parse_seed(sample_seed));
      Sink sink(sample_out, out);
      write_ensemble_csv(ens, *sink);
      return kExitPass;
    }
    if (*flow) {
      const BasisPtr basis = load_or_build_basis(flow_basis.basis);
      const double cut = flow_cut ? *flow_cut : resolve_cut(MeasureConfig{"gaussian", flow_cut_mode}, *basis);
      FlowState state{initial_field(flow_init, basis, cut), 0.0, cut, parse_sign(flow_sign), {}};
      flow_cfg.integrator = integrator_from_string(flow_integrator);
      Trajectory trajectory;
      TrajectoryOptions opts;
      opts.every = flow_every;
      opts.theta = flow_theta ? *flow_theta : default_theta(basis->s());
      opts.amplitudes = flow_amplitudes;
      evolve(state, flow_cfg, &trajectory, opts);
      Sink sink(flow_out, out);
      write_trajectory_csv(trajectory, *sink);
      const bool ok = trajectory.hamiltonian_drift() <= flow_cfg.conservation_tol &&
                      trajectory.mass_drift() <= flow_cfg.conservation_tol;
      if (!ok) {
        err << "conservation drift above tolerance: H " << trajectory.hamiltonian_drift()
            << ", M " << trajectory.mass_drift() << '\n';
      }
      return ok ? kExitPass : kExitExperimentFail;
    }
    if (*invariance) {
      const ExperimentConfig c = invariance_flags.resolve("invariance");
      const InvarianceReport report = run_invariance(c);
      SuiteReport suite = to_suite(report);
      return emit_report(c, suite, out);
    }
    if (*moments) {
      const ExperimentConfig c = moment_flags.resolve("moments");
      return emit_report(c, run_moment_suite(c), out);
    }
    if (*tails) {
      const ExperimentConfig c = tail_flags.resolve("tails");
      return emit_report(c, run_tail_suite(c), out);
    }
    if (*canonical_suite) {
      const ExperimentConfig c = canonical_flags.resolve("canonical");
      return emit_report(c, run_canonical_suite(c), out);
    }
    if (*density) {
      const BasisPtr basis = load_or_build_basis(density_basis.basis);
      if (density_points < 2) throw InvalidArgument("--points must be >= 2");
      const Eigen::VectorXd xs =
          Eigen::VectorXd::LinSpaced(density_points, density_lo, density_hi);
      const DensityCurve curve = density_by_inversion(*basis, density_cut, xs);
      Sink sink(density_out, out);
      *sink << "x,f,imag_residue\n" << std::setprecision(17);
      for (Index i = 0; i < xs.size(); ++i) {
        *sink << curve.x(i) << ',' << curve.f(i) << ',' << curve.imag_residue(i) << '\n';
      }
      return kExitPass;
    }
    if (*csample) {
      const BasisPtr basis = load_or_build_basis(csample_basis.basis);
      CanonicalSpec spec{csample_m, csample_eps ? *csample_eps : csample_eps_std * mass_std(*basis),
                         0.0};
      const ConditionedEnsemble ce =
          sample_conditioned(basis, spec, csample_n, parse_seed(csample_seed));
      Sink sink(csample_out, out);
      write_ensemble_csv(ce.ensemble, *sink);
      err << "acceptance " << ce.acceptance << " +- " << ce.acceptance_se << " over "
          << ce.proposals << " proposals\n";
      return kExitPass;
    }
  } catch (const WindowTooNarrow& e) {
    err << "error: " << e.what() << " (try eps >= " << e.suggested_eps() << ")\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

int cli_main(int argc, const char* const* argv) {
  std::vector<std::string> args(argv, argv + argc);
  return cli_main(args, std::cout, std::cerr);
}

}  // namespace gibbsflow
