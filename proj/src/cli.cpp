#include "radtrap/cli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "radtrap/dynamics.hpp"
#include "radtrap/oracle.hpp"
#include "radtrap/steadystate.hpp"
#include "radtrap/trapping.hpp"

namespace radtrap::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------- config ---

json mode_defaults(Mode mode)
{
  json d = {{"gamma0", 0.0}, {"doppler_width", 100.0}, {"threads", 0}};
  switch (mode) {
    case Mode::Evolve:
      d.update({{"t_end", nullptr},
                {"samples", 401},
                {"grid", "uniform"},
                {"initial", {0.0, 0.5, 0.5}},
                {"integrator", "dopri5"},
                {"rtol", 1e-8},
                {"atol", 1e-10}});
      break;
    case Mode::Spectrum:
      d.update({{"detuning_min", -20.0},
                {"detuning_max", 20.0},
                {"detuning_samples", 801},
                {"normalization", "peak"},
                {"tolerance", 1e-10}});
      break;
    case Mode::Sweep:
      d.update({{"tolerance", 1e-10}, {"cross_validate", true}});
      break;
    case Mode::Asymptote:
      d.update({{"samples", 401}, {"rtol", 1e-8}, {"atol", 1e-10}});
      break;
    case Mode::Oracle:
      d.update({{"bandwidth", 200.0},
                {"n_trajectories", 10000},
                {"dt", nullptr},
                {"seed", 1},
                {"delta_ac", 0.0},
                {"gamma_ac", nullptr},
                {"collective_rate", 0.0},
                {"t_end", 4.0},
                {"samples", 9},
                {"initial", {0.0, 0.5, 0.5}}});
      break;
  }
  return d;
}

std::vector<std::string> required_fields(Mode mode)
{
  if (mode == Mode::Oracle)
    return {"gamma_prime", "pump_rate"};
  return {"gamma_prime", "pump_rate", "regime", "density"};
}

std::set<std::string> allowed_fields(Mode mode)
{
  std::set<std::string> keys;
  const json defaults = mode_defaults(mode);
  for (auto it = defaults.begin(); it != defaults.end(); ++it)
    keys.insert(it.key());
  for (const auto& k : required_fields(mode))
    keys.insert(k);
  keys.insert({"gamma_prime", "pump_rate", "regime", "density"});
  return keys;
}

json read_json_file(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot read config file '" + path + "'");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (text.find_first_not_of(" \t\r\n") == std::string::npos)
    return json::object();
  try {
    json j = json::parse(text);
    if (!j.is_object())
      throw ConfigError("config file '" + path + "' must hold a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw ConfigError("cannot parse config file '" + path + "': " + e.what());
  }
}

bool is_manifest(const json& j)
{
  return j.contains("tool") && j["tool"] == "radtrap" && j.contains("config") &&
         j["config"].is_object();
}

void apply_override(json& config, const std::string& assignment)
{
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded())
    value = text;

  std::string pointer;
  std::size_t start = 0;
  while (start <= key.size()) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos
                                                                        : dot - start);
    if (part.empty())
      throw ConfigError("empty path component in --set key '" + key + "'");
    pointer += "/" + part;
    if (dot == std::string::npos)
      break;
    start = dot + 1;
  }
  config[json::json_pointer(pointer)] = value;
}

std::vector<double> number_list(const json& config, const std::string& key)
{
  const json& v = config.at(key);
  std::vector<double> out;
  if (v.is_number()) {
    out.push_back(v.get<double>());
  } else if (v.is_array() && !v.empty()) {
    for (const auto& e : v) {
      if (!e.is_number())
        throw ConfigError("'" + key + "' must hold numbers");
      out.push_back(e.get<double>());
    }
  } else {
    throw ConfigError("'" + key + "' must be a number or a non-empty list of numbers");
  }
  for (double x : out) {
    if (!std::isfinite(x) || x < 0.0)
      throw ConfigError("'" + key + "' values must be finite and >= 0");
  }
  return out;
}

double number(const json& config, const std::string& key)
{
  const json& v = config.at(key);
  if (!v.is_number())
    throw ConfigError("'" + key + "' must be a number");
  return v.get<double>();
}

double positive(const json& config, const std::string& key)
{
  const double x = number(config, key);
  if (!(x > 0.0) || !std::isfinite(x))
    throw ConfigError("'" + key + "' must be finite and > 0");
  return x;
}

long count(const json& config, const std::string& key, long minimum)
{
  const json& v = config.at(key);
  if (!v.is_number_integer() || v.get<long>() < minimum)
    throw ConfigError("'" + key + "' must be an integer >= " + std::to_string(minimum));
  return v.get<long>();
}

std::string choice(const json& config, const std::string& key,
                   std::initializer_list<std::string_view> options)
{
  const json& v = config.at(key);
  if (v.is_string()) {
    for (auto o : options) {
      if (v.get<std::string>() == o)
        return std::string(o);
    }
  }
  std::string list;
  for (auto o : options)
    list += (list.empty() ? "" : ", ") + std::string(o);
  throw ConfigError("'" + key + "' must be one of: " + list);
}

bool radiative(const json& config)
{
  return config.contains("regime") && config["regime"] == "radiative";
}

SystemParams base_params(const json& config)
{
  SystemParams p;
  p.gamma_prime = number(config, "gamma_prime");
  p.pump_rate = number(config, "pump_rate");
  if (config.contains("regime")) {
    const std::string regime = choice(config, "regime", {"inhomogeneous", "radiative"});
    if (regime == "radiative")
      p.regime = Radiative{};
    else
      p.regime = Inhomogeneous{positive(config, "doppler_width"), 0.0};
  }
  return p;
}

PopulationState initial_state(const json& config)
{
  const json& v = config.at("initial");
  if (!v.is_array() || v.size() != 3)
    throw ConfigError("'initial' must be [rho_aa, rho_bb, rho_cc]");
  for (const auto& e : v) {
    if (!e.is_number())
      throw ConfigError("'initial' must hold numbers");
  }
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

// Everything that can be checked without running the numerics.
void validate_config(Mode mode, const json& config)
{
  for (const auto& field : required_fields(mode)) {
    if (!config.contains(field) || config[field].is_null())
      throw ConfigError("missing required field '" + field + "'");
  }
  const auto allowed = allowed_fields(mode);
  for (const auto& [key, value] : config.items()) {
    if (!allowed.count(key))
      throw ConfigError("unknown field '" + key + "' for mode " + std::string(mode_name(mode)));
  }

  try {
    SystemParams p = base_params(config);
    const auto gamma0 = number_list(config, "gamma0");
    for (double g0 : gamma0) {
      p.gamma0 = g0;
      validate(p);
    }
    if (config.contains("density"))
      number_list(config, "density");
    count(config, "threads", 0);

    switch (mode) {
      case Mode::Evolve:
        if (!config["t_end"].is_null())
          positive(config, "t_end");
        count(config, "samples", 3);
        choice(config, "grid", {"uniform", "log"});
        choice(config, "integrator", {"dopri5", "rosenbrock"});
        positive(config, "rtol");
        positive(config, "atol");
        validate(initial_state(config));
        break;
      case Mode::Spectrum:
        if (!(number(config, "detuning_min") < number(config, "detuning_max")))
          throw ConfigError("'detuning_min' must be below 'detuning_max'");
        count(config, "detuning_samples", 3);
        choice(config, "normalization", {"peak", "area", "none"});
        positive(config, "tolerance");
        if (gamma0.size() != 1)
          throw ConfigError("'gamma0' must be a single value in spectrum mode");
        break;
      case Mode::Sweep:
        positive(config, "tolerance");
        if (!config["cross_validate"].is_boolean())
          throw ConfigError("'cross_validate' must be true or false");
        break;
      case Mode::Asymptote:
        count(config, "samples", 3);
        positive(config, "rtol");
        positive(config, "atol");
        if (gamma0.size() != 1 || gamma0[0] != 0.0)
          throw ConfigError("asymptote mode requires gamma0 = 0");
        if (!radiative(config)) {
          for (double k : number_list(config, "density")) {
            if (!(k > 1.0))
              throw ConfigError("inhomogeneous asymptote needs every density > 1");
          }
        }
        break;
      case Mode::Oracle:
        if (gamma0.size() != 1)
          throw ConfigError("'gamma0' must be a single value in oracle mode");
        positive(config, "t_end");
        count(config, "samples", 2);
        count(config, "n_trajectories", 1);
        if (!config["seed"].is_number_integer() || config["seed"].get<long long>() < 0)
          throw ConfigError("'seed' must be a non-negative integer");
        if (!config["dt"].is_null())
          positive(config, "dt");
        if (!config["gamma_ac"].is_null())
          positive(config, "gamma_ac");
        number(config, "delta_ac");
        number(config, "collective_rate");
        validate(initial_state(config));
        break;
    }
  } catch (const Error& e) {
    throw ConfigError(e.what());
  } catch (const json::exception& e) {
    throw ConfigError(e.what());
  }
}

// ---------------------------------------------------------------- output ---

std::string num(double x)
{
  if (std::isnan(x))
    return "nan";
  return fmt::format("{}", x);
}

class CsvWriter
{
public:
  CsvWriter(const fs::path& path, Mode mode, const std::vector<std::string>& columns,
            const std::vector<std::string>& notes)
      : out_(path), width_(columns.size())
  {
    if (!out_)
      throw ConfigError("cannot write '" + path.string() + "'");
    out_ << "# radtrap " << kVersion << " " << mode_name(mode) << "\n";
    out_ << "# units: times in 1/gamma, rates and detunings in gamma unless noted\n";
    for (const auto& n : notes)
      out_ << "# " << n << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i)
      out_ << (i ? "," : "") << columns[i];
    out_ << "\n";
  }

  void row(const std::vector<std::string>& cells)
  {
    if (cells.size() != width_)
      throw std::logic_error("CSV row width mismatch");
    for (std::size_t i = 0; i < cells.size(); ++i)
      out_ << (i ? "," : "") << cells[i];
    out_ << "\n";
  }

private:
  std::ofstream out_;
  std::size_t width_;
};

std::string density_label(bool rad)
{
  return rad ? "K0" : "K";
}

// Failure tagged with the parameters of the run that produced it.
struct RunFailure : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

[[noreturn]] void fail_at(const std::string& where, const std::exception& e)
{
  throw RunFailure(where + ": " + e.what());
}

struct RunRecord
{
  json outputs = json::array();
  json diagnostics = json::object();
  std::vector<std::string> failures;
};

std::vector<double> time_grid(const json& config, double t_end)
{
  const int n = static_cast<int>(config["samples"].get<long>());
  if (config["grid"] == "log") {
    std::vector<double> grid{0.0};
    const double lo = std::log(t_end * 1e-5);
    const double hi = std::log(t_end);
    for (int i = 0; i < n - 1; ++i)
      grid.push_back(std::exp(lo + (hi - lo) * i / (n - 2)));
    grid.back() = t_end;
    return grid;
  }
  return uniform_grid(0.0, t_end, n);
}

void run_evolve(const json& config, const fs::path& dir, RunRecord& rec)
{
  const bool rad = radiative(config);
  const SystemParams base = base_params(config);
  EvolveOptions opts;
  opts.rtol = number(config, "rtol");
  opts.atol = number(config, "atol");
  opts.integrator =
      config["integrator"] == "rosenbrock" ? Integrator::Rosenbrock : Integrator::DormandPrince;
  const PopulationState initial = initial_state(config);
  const auto gamma0_list = number_list(config, "gamma0");

  for (double g0 : gamma0_list) {
    for (double density : number_list(config, "density")) {
      SystemParams p = with_density(base, density);
      p.gamma0 = g0;
      const std::string where =
          fmt::format("{}={} gamma0={}", density_label(rad), num(density), num(g0));
      Trajectory traj;
      try {
        const double t_end =
            config["t_end"].is_null() ? default_t_end(p) : number(config, "t_end");
        traj = evolve(p, initial, t_end, time_grid(config, t_end), opts);
      } catch (const Error& e) {
        fail_at(where, e);
      }

      const std::string name =
          gamma0_list.size() == 1
              ? fmt::format("evolve_{}{}.csv", density_label(rad), num(density))
              : fmt::format("evolve_{}{}_gamma0_{}.csv", density_label(rad), num(density), num(g0));
      CsvWriter csv(dir / name, Mode::Evolve, csv_columns("evolve", rad),
                    {where, "Gamma: collective rate; Gamma_p: -d ln(rho_aa + rho_cc)/dt"});
      for (std::size_t i = 0; i < traj.times.size(); ++i) {
        const auto& s = traj.states[i];
        csv.row({num(traj.times[i]), num(s.aa()), num(s.bb()), num(s.cc()), num(traj.gammas[i]),
                 traj.pump_rates.empty() ? "nan" : num(traj.pump_rates[i])});
      }
      rec.outputs.push_back({{"file", name}, {"table", "evolve"}, {"density", density}, {"gamma0", g0}});
      rec.diagnostics[name] = {{"accepted_steps", traj.stats.accepted},
                               {"rejected_steps", traj.stats.rejected},
                               {"max_trace_error", traj.max_trace_error},
                               {"inversion_seen", traj.inversion_seen}};
    }
  }
}

StationaryOptions stationary_options(const json& config)
{
  StationaryOptions o;
  o.tolerance = number(config, "tolerance");
  if (config.contains("cross_validate"))
    o.cross_validate = config["cross_validate"].get<bool>();
  return o;
}

void run_spectrum(const json& config, const fs::path& dir, RunRecord& rec)
{
  const bool rad = radiative(config);
  SystemParams base = base_params(config);
  base.gamma0 = number_list(config, "gamma0").front();
  const long n = config["detuning_samples"].get<long>();
  const Eigen::VectorXd deltas = Eigen::VectorXd::LinSpaced(
      n, number(config, "detuning_min"), number(config, "detuning_max"));
  const std::string norm_name = config["normalization"];
  const Normalization norm = norm_name == "area"   ? Normalization::Area
                             : norm_name == "none" ? Normalization::None
                                                   : Normalization::Peak;
  const std::string label = density_label(rad);

  CsvWriter csv(dir / "spectrum.csv", Mode::Spectrum, csv_columns("spectrum", rad),
                {rad ? "delta in gamma" : "delta in Doppler widths",
                 rad ? "absorption: Lorentzian of width gamma_ab + Gamma_stat"
                     : "absorption: Doppler profile exp(-delta^2/2)",
                 "normalization: " + norm_name});
  CsvWriter widths(dir / "spectrum_widths.csv", Mode::Spectrum,
                   csv_columns("spectrum_widths", rad), {"widths in the units of delta"});

  for (double density : number_list(config, "density")) {
    const SystemParams p = with_density(base, density);
    const std::string where = fmt::format("{}={} gamma0={}", label, num(density), num(p.gamma0));
    try {
      const StationaryResult st = stationary(p, stationary_options(config));
      const Spectrum trapped = spectral_distribution(st.state, p, deltas, norm);
      Spectrum absorption;
      if (rad) {
        absorption = absorption_spectrum(st.state, p, st.gamma, deltas);
      } else {
        absorption.detunings = deltas;
        absorption.values = deltas.unaryExpr([](double d) { return std::exp(-0.5 * d * d); });
        absorption.normalization = Normalization::Peak;
      }
      for (Eigen::Index i = 0; i < deltas.size(); ++i)
        csv.row({num(deltas[i]), num(density), num(trapped.values[i]), num(absorption.values[i])});
      widths.row({num(density), num(p.gamma0), num(st.state.aa()), num(st.state.bb()),
                  num(st.state.cc()), num(st.gamma), num(full_width_half_max(trapped)),
                  num(full_width_half_max(absorption))});
    } catch (const Error& e) {
      fail_at(where, e);
    }
  }
  rec.outputs.push_back({{"file", "spectrum.csv"}, {"table", "spectrum"}});
  rec.outputs.push_back({{"file", "spectrum_widths.csv"}, {"table", "spectrum_widths"}});
}

void run_sweep(const json& config, const fs::path& dir, RunRecord& rec)
{
  const bool rad = radiative(config);
  const SystemParams base = base_params(config);
  const auto densities = number_list(config, "density");
  const auto gamma0_list = number_list(config, "gamma0");
  SweepOptions opts;
  opts.stationary = stationary_options(config);
  opts.threads = static_cast<unsigned>(config["threads"].get<long>());
  const SweepTable table = sweep(base, densities, gamma0_list, opts);

  CsvWriter csv(dir / "sweep.csv", Mode::Sweep, csv_columns("sweep", rad),
                {"status: ok, or failed (message in the manifest)"});
  for (const SweepRow& row : table.rows) {
    if (row.result) {
      const auto& r = *row.result;
      csv.row({num(row.density), num(row.gamma0), num(r.state.bb()), num(r.residual),
               num(r.state.aa()), num(r.state.cc()), num(r.gamma), "ok"});
    } else {
      csv.row({num(row.density), num(row.gamma0), "nan", "nan", "nan", "nan", "nan", "failed"});
      rec.failures.push_back(fmt::format("{}={} gamma0={}: {}", density_label(rad),
                                         num(row.density), num(row.gamma0), row.error));
    }
  }
  rec.outputs.push_back({{"file", "sweep.csv"}, {"table", "sweep"}});
}

void run_asymptote(const json& config, const fs::path& dir, RunRecord& rec)
{
  const bool rad = radiative(config);
  const SystemParams base = base_params(config);
  EvolveOptions opts;
  opts.rtol = number(config, "rtol");
  opts.atol = number(config, "atol");
  const int samples = static_cast<int>(config["samples"].get<long>());

  CsvWriter csv(dir / "asymptote.csv", Mode::Asymptote, csv_columns("asymptote", rad),
                {"plateau: median of Gamma_p over the final 20% of the window",
                 rad ? "closed_form: (gamma/2) exp(-K_tilde)"
                     : "closed_form: gamma / (2 K sqrt(pi ln K)); K_tilde column repeats K"});
  for (double density : number_list(config, "density")) {
    const SystemParams p = with_density(base, density);
    const std::string where = fmt::format("{}={}", density_label(rad), num(density));
    try {
      const double kt = rad ? k_tilde(p, density) : density;
      const double closed = rad ? asymptotic_pump_rate_rad(kt) : asymptotic_pump_rate_inhom(density);
      const double t_end = default_t_end(p);
      const Trajectory traj =
          evolve(p, equal_lower_populations(), t_end, uniform_grid(0.0, t_end, samples), opts);
      const Plateau plateau = estimate_asymptote(traj);
      csv.row({num(density), num(kt), num(plateau.rate), num(closed), num(plateau.rate / closed),
               num(plateau.spread)});
    } catch (const Error& e) {
      fail_at(where, e);
    }
  }
  rec.outputs.push_back({{"file", "asymptote.csv"}, {"table", "asymptote"}});
}

void run_oracle(const json& config, const fs::path& dir, RunRecord& rec)
{
  SystemParams p = base_params(config);
  p.gamma0 = number_list(config, "gamma0").front();
  StochasticConfig cfg;
  cfg.bandwidth = number(config, "bandwidth");
  cfg.pump_rate = p.pump_rate;
  cfg.n_trajectories = config["n_trajectories"].get<long>();
  cfg.dt = config["dt"].is_null() ? 0.1 / cfg.bandwidth : number(config, "dt");
  cfg.seed = config["seed"].get<std::uint64_t>();
  cfg.delta_ac = number(config, "delta_ac");
  if (!config["gamma_ac"].is_null())
    cfg.gamma_ac = number(config, "gamma_ac");
  cfg.collective_rate = number(config, "collective_rate");
  cfg.threads = static_cast<unsigned>(config["threads"].get<long>());
  const double t_end = number(config, "t_end");
  const auto grid = uniform_grid(0.0, t_end, static_cast<int>(config["samples"].get<long>()));
  const PopulationState initial = initial_state(config);

  EnsembleResult ens;
  std::vector<PopulationState> ref;
  try {
    validate(cfg, p);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  try {
    ens = simulate_stochastic(p, cfg, initial, t_end, grid);
    ref = rate_reference(p, cfg.collective_rate, initial, t_end, ens.times);
  } catch (const Error& e) {
    fail_at(fmt::format("bandwidth={}", num(cfg.bandwidth)), e);
  }
  const Discrepancy d = discrepancy(ens, ref);

  CsvWriter csv(dir / "oracle.csv", Mode::Oracle, csv_columns("oracle", false),
                {fmt::format("{} trajectories, bandwidth {}, step {}", cfg.n_trajectories,
                             num(cfg.bandwidth), num(ens.step)),
                 "*_mean, *_se: ensemble mean and standard error; *_rate: rate equations"});
  for (std::size_t k = 0; k < ens.times.size(); ++k) {
    const auto& m = ens.mean[k];
    const auto& se = ens.standard_error[k];
    csv.row({num(ens.times[k]), num(m.aa()), num(se.aa()), num(m.bb()), num(se.bb()),
             num(m.cc()), num(se.cc()), num(ref[k].aa()), num(ref[k].bb()), num(ref[k].cc())});
  }
  rec.outputs.push_back({{"file", "oracle.csv"}, {"table", "oracle"}});
  rec.diagnostics = {{"step", ens.step},
                     {"gamma_ac", coherence_decay(cfg, p)},
                     {"max_trace_error", ens.max_trace_error},
                     {"max_sigma", d.max_sigma},
                     {"mean_rho_bb_discrepancy", d.value},
                     {"mean_rho_bb_discrepancy_se", d.standard_error},
                     {"noise_mean", {ens.noise.mean_re, ens.noise.mean_im}},
                     {"noise_mean_se", ens.noise.mean_se},
                     {"noise_correlation_integral", ens.noise.correlation_integral}};
}

}  // namespace

// ------------------------------------------------------------- interface ---

Mode parse_mode(std::string_view name)
{
  static const std::map<std::string_view, Mode> modes = {
      {"evolve", Mode::Evolve},       {"spectrum", Mode::Spectrum}, {"sweep", Mode::Sweep},
      {"asymptote", Mode::Asymptote}, {"oracle", Mode::Oracle},
  };
  const auto it = modes.find(name);
  if (it == modes.end())
    throw ConfigError("unknown mode '" + std::string(name) +
                      "' (expected evolve, spectrum, sweep, asymptote or oracle)");
  return it->second;
}

std::string_view mode_name(Mode mode)
{
  switch (mode) {
    case Mode::Evolve: return "evolve";
    case Mode::Spectrum: return "spectrum";
    case Mode::Sweep: return "sweep";
    case Mode::Asymptote: return "asymptote";
    case Mode::Oracle: return "oracle";
  }
  return "";
}

json preset(const std::string& name, Mode& mode)
{
  const json common = {{"gamma_prime", 1.0}, {"pump_rate", 10.0}};
  json j = common;
  if (name == "fig2") {
    mode = Mode::Evolve;
    j.update({{"regime", "inhomogeneous"}, {"gamma0", 0.0}, {"density", {0.0, 1.0, 10.0, 100.0}},
              {"t_end", 1000.0}, {"samples", 401}, {"grid", "log"}});
  } else if (name == "fig3") {
    mode = Mode::Sweep;
    json k = json::array();
    for (int i = 0; i <= 32; ++i)
      k.push_back(std::pow(10.0, i / 8.0));
    j.update({{"regime", "inhomogeneous"}, {"gamma0", {1e-4, 1e-3, 1e-2}}, {"density", k}});
  } else if (name == "fig4") {
    mode = Mode::Sweep;
    json k = json::array();
    for (int i = 0; i <= 48; ++i)
      k.push_back(std::pow(10.0, i / 8.0));
    j.update({{"regime", "radiative"}, {"gamma0", {1e-4, 1e-3, 1e-2}}, {"density", k}});
  } else if (name == "fig5") {
    mode = Mode::Spectrum;
    j.update({{"regime", "radiative"}, {"gamma0", 1e-4}, {"density", {1.0, 10.0, 100.0}},
              {"detuning_min", -30.0}, {"detuning_max", 30.0}, {"detuning_samples", 1201}});
  } else {
    throw ConfigError("unknown preset '" + name + "' (expected fig2, fig3, fig4 or fig5)");
  }
  return j;
}

json resolve_config(Mode mode, const std::string& config_path,
                    const std::vector<std::string>& overrides, const std::string& preset_name)
{
  json config = mode_defaults(mode);
  if (!preset_name.empty()) {
    Mode preset_mode = mode;
    const json p = preset(preset_name, preset_mode);
    if (preset_mode != mode) {
      throw ConfigError("preset '" + preset_name + "' is a " +
                        std::string(mode_name(preset_mode)) + " scenario");
    }
    config.update(p);
  }
  if (!config_path.empty()) {
    json file = read_json_file(config_path);
    if (is_manifest(file)) {
      if (file.contains("mode") && file["mode"] != mode_name(mode)) {
        throw ConfigError("manifest records mode '" + file["mode"].get<std::string>() + "'");
      }
      file = file["config"];
    }
    config.update(file);
  }
  for (const auto& o : overrides) {
    try {
      apply_override(config, o);
    } catch (const json::exception& e) {
      throw ConfigError("bad --set '" + o + "': " + e.what());
    }
  }
  validate_config(mode, config);
  return config;
}

std::vector<std::string> csv_columns(std::string_view table, bool rad)
{
  const std::string k = density_label(rad);
  if (table == "evolve")
    return {"t", "rho_aa", "rho_bb", "rho_cc", "Gamma", "Gamma_p"};
  if (table == "sweep")
    return {k, "gamma0", "rho_bb_stat", "residual", "rho_aa_stat", "rho_cc_stat", "Gamma_stat", "status"};
  if (table == "spectrum")
    return {"delta", k, "spectrum", "absorption"};
  if (table == "spectrum_widths")
    return {k,        "gamma0",   "rho_aa_stat",   "rho_bb_stat",
            "rho_cc_stat", "Gamma_stat", "fwhm_spectrum", "fwhm_absorption"};
  if (table == "asymptote")
    return {k, "K_tilde", "plateau", "closed_form", "ratio", "spread"};
  if (table == "oracle")
    return {"t",          "rho_aa_mean", "rho_aa_se",   "rho_bb_mean", "rho_bb_se",
            "rho_cc_mean", "rho_cc_se",  "rho_aa_rate", "rho_bb_rate", "rho_cc_rate"};
  throw std::invalid_argument("unknown table '" + std::string(table) + "'");
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
  CLI::App app{"Optical pumping with radiation trapping"};
  app.set_version_flag("--version", std::string(kVersion));
  std::string mode_arg, config_path, out_dir, preset_name;
  std::vector<std::string> overrides;
  app.add_option("mode", mode_arg, "evolve | spectrum | sweep | asymptote | oracle")->required();
  app.add_option("--config", config_path, "JSON scenario, or a manifest from an earlier run");
  app.add_option("--set", overrides, "override a field, key=value (repeatable)")
      ->expected(1)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  app.add_option("--out", out_dir, "output directory")->required();
  app.add_option("--preset", preset_name, "fig2 | fig3 | fig4 | fig5");

  // CLI11 consumes a vector argument from the back.
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }

  const auto started = std::chrono::steady_clock::now();
  json config;
  Mode mode;
  try {
    mode = parse_mode(mode_arg);
    if (config_path.empty() && preset_name.empty())
      throw ConfigError("either --config or --preset is required");
    config = resolve_config(mode, config_path, overrides, preset_name);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir))
      throw ConfigError("cannot create output directory '" + out_dir + "'");
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }

  RunRecord rec;
  int status = kOk;
  try {
    switch (mode) {
      case Mode::Evolve: run_evolve(config, out_dir, rec); break;
      case Mode::Spectrum: run_spectrum(config, out_dir, rec); break;
      case Mode::Sweep: run_sweep(config, out_dir, rec); break;
      case Mode::Asymptote: run_asymptote(config, out_dir, rec); break;
      case Mode::Oracle: run_oracle(config, out_dir, rec); break;
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const RunFailure& e) {
    err << "error: " << e.what() << "\n";
    return kNumericalError;
  }
  for (const auto& f : rec.failures) {
    err << "error: " << f << "\n";
    status = kNumericalError;
  }

  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  json manifest = {{"tool", "radtrap"},
                   {"version", kVersion},
                   {"mode", mode_name(mode)},
                   {"config", config},
                   {"outputs", rec.outputs},
                   {"diagnostics", rec.diagnostics},
                   {"failures", rec.failures},
                   {"wall_clock_seconds", seconds}};
  std::ofstream mf(fs::path(out_dir) / "manifest.json");
  mf << manifest.dump(2) << "\n";
  if (!mf) {
    err << "error: cannot write manifest in '" << out_dir << "'\n";
    return kConfigError;
  }
  out << fmt::format("{}: wrote {} table(s) to {} in {:.2f} s\n", mode_name(mode),
                     rec.outputs.size(), out_dir, seconds);
  return status;
}

}  // namespace radtrap::cli
