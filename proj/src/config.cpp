#include "gibbsflow/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "gibbsflow/dynamics.hpp"
#include "gibbsflow/errors.hpp"
#include "gibbsflow/measures.hpp"
#include "gibbsflow/parallel.hpp"

namespace gibbsflow {

namespace {

const std::set<std::string> kObservableNames{
    "abs2_alpha_1", "hnorm2_theta", "l4_cut_quartic", "renormalized_mass",
    "re_alpha_1_conj_alpha_2"};

void reject_unknown(const Json& j, const std::set<std::string>& known,
                    const std::string& where) {
  if (!j.is_object()) throw InvalidArgument(where + " must be a JSON object");
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) {
      throw InvalidArgument("unknown key '" + item.key() + "' in " + where);
    }
  }
}

template <typename T>
void read(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::uint64_t parse_seed(const std::string& text) {
  if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) {
    throw InvalidArgument("seed must be a decimal u64 string, got '" + text + "'");
  }
  try {
    return std::stoull(text);
  } catch (const std::out_of_range&) {
    throw InvalidArgument("seed out of u64 range: " + text);
  }
}

void ExperimentConfig::validate() const {
  if (!(basis.s > 1.0)) throw InvalidArgument("s must exceed 1");
  if (basis.modes < 2) throw InvalidArgument("need at least two modes");
  if (measure.cut_mode > basis.modes) {
    throw InvalidArgument("cut_mode exceeds the retained modes");
  }
  if (measure.cut_mode <= 0 && !(measure.lambda_cut > 0.0)) {
    throw InvalidArgument("give cut_mode >= 1 or lambda_cut > 0");
  }
  const MeasureKind kind = measure_kind_from_string(measure.kind);
  if (kind == MeasureKind::gibbs_focusing && basis.s <= 8.0 / 5.0) {
    throw InvalidArgument("focusing measures require s > 8/5");
  }
  if (flow.sign != 1 && flow.sign != -1) throw InvalidArgument("flow sign must be +1 or -1");
  integrator_from_string(flow.integrator);
  FlowConfig fc;
  fc.dt = flow.dt;
  fc.T = flow.T;
  fc.conservation_tol = flow.conservation_tol;
  fc.validate();
  if (n_samples < 2) throw InvalidArgument("n_samples must be >= 2");
  if (!std::isnan(theta) && !(theta < 0.5 - 1.0 / basis.s)) {
    throw InvalidArgument("theta must be below 1/2 - 1/s");
  }
  for (const auto& name : observables) {
    if (!kObservableNames.count(name)) throw InvalidArgument("unknown observable " + name);
  }
  if (canonical.epsilon_std <= 0.0) throw InvalidArgument("epsilon_std must be positive");
  for (double e : canonical.epsilon_ladder) {
    if (!(e > 0.0)) throw InvalidArgument("epsilon ladder entries must be positive");
  }
  if (tails.thresholds < 4) throw InvalidArgument("tail fits need >= 4 thresholds");
  if (!(tails.factor > 1.0)) throw InvalidArgument("tail factor must exceed 1");
}

unsigned ExperimentConfig::worker_count() const {
  if (serial) return 1;
  return threads == 0 ? hardware_workers() : threads;
}

double ExperimentConfig::theta_value() const {
  return std::isnan(theta) ? default_theta(basis.s) : theta;
}

Json to_json(const ExperimentConfig& c) {
  Json j;
  j["name"] = c.name;
  j["basis"] = {{"s", c.basis.s},
                {"modes", c.basis.modes},
                {"grid_points", c.basis.grid_points},
                {"half_extent", c.basis.half_extent}};
  j["measure"] = {{"kind", c.measure.kind},
                  {"cut_mode", c.measure.cut_mode},
                  {"lambda_cut", c.measure.lambda_cut},
                  {"mass_cut", c.measure.mass_cut},
                  {"mass_cut_std", c.measure.mass_cut_std}};
  j["flow"] = {{"dt", c.flow.dt},
               {"T", c.flow.T},
               {"integrator", c.flow.integrator},
               {"conservation_tol", c.flow.conservation_tol},
               {"sign", c.flow.sign},
               {"negative_control_factor", c.flow.negative_control_factor},
               {"negative_control_samples", c.flow.negative_control_samples}};
  j["moments"] = {{"n_samples", c.moments.n_samples},
                  {"increment_mode", c.moments.increment_mode}};
  j["tails"] = {{"n_samples", c.tails.n_samples},
                {"thresholds", c.tails.thresholds},
                {"min_events", c.tails.min_events},
                {"high_modes", c.tails.high_modes},
                {"high_half_extent", c.tails.high_half_extent},
                {"base_cut", c.tails.base_cut},
                {"factor", c.tails.factor}};
  j["canonical"] = {{"m", c.canonical.m},
                    {"epsilon_std", c.canonical.epsilon_std},
                    {"epsilon_ladder", c.canonical.epsilon_ladder},
                    {"proposals", c.canonical.proposals},
                    {"n_conditioned", c.canonical.n_conditioned},
                    {"histogram_samples", c.canonical.histogram_samples},
                    {"bins", c.canonical.bins},
                    {"tightness_cut_mode", c.canonical.tightness_cut_mode},
                    {"tightness_samples", c.canonical.tightness_samples}};
  j["n_samples"] = c.n_samples;
  j["seed"] = std::to_string(c.seed);
  if (std::isnan(c.theta)) {
    j["theta"] = nullptr;
  } else {
    j["theta"] = c.theta;
  }
  j["observables"] = c.observables;
  j["serial"] = c.serial;
  j["threads"] = c.threads;
  j["report_path"] = c.report_path;
  j["csv_path"] = c.csv_path;
  return j;
}

ExperimentConfig config_from_json(const Json& j) {
  ExperimentConfig c;
  try {
    reject_unknown(j, {"name", "basis", "measure", "flow", "moments", "tails",
                       "canonical", "n_samples", "seed", "theta", "observables",
                       "serial", "threads", "report_path", "csv_path"},
                   "config");
    read(j, "name", c.name);
    if (j.contains("basis")) {
      const Json& b = j.at("basis");
      reject_unknown(b, {"s", "modes", "grid_points", "half_extent"}, "basis");
      read(b, "s", c.basis.s);
      read(b, "modes", c.basis.modes);
      read(b, "grid_points", c.basis.grid_points);
      read(b, "half_extent", c.basis.half_extent);
    }
    if (j.contains("measure")) {
      const Json& m = j.at("measure");
      reject_unknown(m, {"kind", "cut_mode", "lambda_cut", "mass_cut", "mass_cut_std"},
                     "measure");
      read(m, "kind", c.measure.kind);
      read(m, "cut_mode", c.measure.cut_mode);
      read(m, "lambda_cut", c.measure.lambda_cut);
      read(m, "mass_cut", c.measure.mass_cut);
      read(m, "mass_cut_std", c.measure.mass_cut_std);
    }
    if (j.contains("flow")) {
      const Json& f = j.at("flow");
      reject_unknown(f, {"dt", "T", "integrator", "conservation_tol", "sign",
                         "negative_control_factor", "negative_control_samples"},
                     "flow");
      read(f, "dt", c.flow.dt);
      read(f, "T", c.flow.T);
      read(f, "integrator", c.flow.integrator);
      read(f, "conservation_tol", c.flow.conservation_tol);
      read(f, "sign", c.flow.sign);
      read(f, "negative_control_factor", c.flow.negative_control_factor);
      read(f, "negative_control_samples", c.flow.negative_control_samples);
    }
    if (j.contains("moments")) {
      const Json& m = j.at("moments");
      reject_unknown(m, {"n_samples", "increment_mode"}, "moments");
      read(m, "n_samples", c.moments.n_samples);
      read(m, "increment_mode", c.moments.increment_mode);
    }
    if (j.contains("tails")) {
      const Json& t = j.at("tails");
      reject_unknown(t, {"n_samples", "thresholds", "min_events", "high_modes",
                         "high_half_extent", "base_cut", "factor"},
                     "tails");
      read(t, "n_samples", c.tails.n_samples);
      read(t, "thresholds", c.tails.thresholds);
      read(t, "min_events", c.tails.min_events);
      read(t, "high_modes", c.tails.high_modes);
      read(t, "high_half_extent", c.tails.high_half_extent);
      read(t, "base_cut", c.tails.base_cut);
      read(t, "factor", c.tails.factor);
    }
    if (j.contains("canonical")) {
      const Json& k = j.at("canonical");
      reject_unknown(k, {"m", "epsilon_std", "epsilon_ladder", "proposals",
                         "n_conditioned", "histogram_samples", "bins",
                         "tightness_cut_mode", "tightness_samples"},
                     "canonical");
      read(k, "m", c.canonical.m);
      read(k, "epsilon_std", c.canonical.epsilon_std);
      read(k, "epsilon_ladder", c.canonical.epsilon_ladder);
      read(k, "proposals", c.canonical.proposals);
      read(k, "n_conditioned", c.canonical.n_conditioned);
      read(k, "histogram_samples", c.canonical.histogram_samples);
      read(k, "bins", c.canonical.bins);
      read(k, "tightness_cut_mode", c.canonical.tightness_cut_mode);
      read(k, "tightness_samples", c.canonical.tightness_samples);
    }
    read(j, "n_samples", c.n_samples);
    if (j.contains("seed")) {
      if (!j.at("seed").is_string()) throw InvalidArgument("seed must be a decimal string");
      c.seed = parse_seed(j.at("seed").get<std::string>());
    }
    if (j.contains("theta") && !j.at("theta").is_null()) c.theta = j.at("theta").get<double>();
    read(j, "observables", c.observables);
    read(j, "serial", c.serial);
    read(j, "threads", c.threads);
    read(j, "report_path", c.report_path);
    read(j, "csv_path", c.csv_path);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("config " + path + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

void save_config(const ExperimentConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << to_json(config).dump(2) << '\n';
}

}  // namespace gibbsflow
