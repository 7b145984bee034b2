#include "cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "stf/ci_engine.hpp"
#include "stf/effective_model.hpp"
#include "stf/errors.hpp"
#include "stf/noise_dynamics.hpp"
#include "stf/protocol_sim.hpp"

#ifndef STF_VERSION
#define STF_VERSION "0.0.0"
#endif

namespace stf::cli {

namespace fs = std::filesystem;

json default_config() {
  return json::parse(R"({
    "seed": 1,
    "format": "csv",
    "material": {"effective_mass_ratio": 0.067, "dielectric_constant": 12.9},
    "geometry": {"side_length_nm": 100.0, "corner_inset": 0.2},
    "basis": {"n_max": 8, "pair_energy_cutoff_meV": null, "quad_order": 0,
              "quad_tolerance": 1e-10, "coulomb": true},
    "spectrum": {"states": 10, "check_convergence": true},
    "density": {"resolution": 64, "state": "ground"},
    "gate": {"voltage_V": 0.1, "lever_arm": 0.01},
    "params": null,
    "params_file": null,
    "dynamics": {"t_max_ps": null, "t_max_tstar": 4.0, "points": 401},
    "noise": {"E_hf_ueV": 0.388, "dephasing_rate_per_ps": 0.0,
              "field_convention": "zeeman_per_component", "dephasing_basis": "energy",
              "samples": 1000, "t_max_ps": null, "t_max_tstar": 4.0, "points": 201,
              "coherence_t_max_ps": null, "coherence_points": 201, "fit_floor": 0.8,
              "rounds": 5, "rus_input": "injected"},
    "protocol": {"mode": "swap", "n_dots": [1, 2, 3], "trials": 10000, "povm": "ideal",
                 "confidence": 0.99},
    "table": {"compute_max_L_nm": 400.0, "rows": [
      {"L_nm": 100,  "E_hf_ueV": 1.74,   "Delta_meV": 0.814,   "J_meV": -0.243,    "alpha2": 0.441, "beta2": 5.23e-2},
      {"L_nm": 200,  "E_hf_ueV": 0.776,  "Delta_meV": 0.145,   "J_meV": -4.363e-2, "alpha2": 0.445, "beta2": 3.63e-5},
      {"L_nm": 400,  "E_hf_ueV": 0.388,  "Delta_meV": 2.11e-2, "J_meV": -5.05e-3,  "alpha2": 0.420, "beta2": 1.21e-3},
      {"L_nm": 800,  "E_hf_ueV": 0.194,  "Delta_meV": 2.08e-3, "J_meV": -2.20e-4,  "alpha2": 0.453, "beta2": 2.78e-4},
      {"L_nm": 1600, "E_hf_ueV": 0.0969, "Delta_meV": 9.34e-5, "J_meV": -1.66e-6,  "alpha2": 0.490, "beta2": 6.02e-6}
    ]}
  })");
}

namespace {

// Objects whose contents are free-form and not checked against the defaults.
bool free_form(const std::string& path) { return path == "params" || path == "table.rows"; }

void check_known_keys(const json& given, const json& defaults, const std::string& prefix) {
  if (!given.is_object()) return;
  for (auto it = given.begin(); it != given.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!defaults.contains(it.key())) throw ConfigError("unknown config key '" + path + "'");
    if (free_form(path)) continue;
    if (defaults[it.key()].is_object()) {
      if (!it.value().is_object()) throw ConfigError("config key '" + path + "' must be an object");
      check_known_keys(it.value(), defaults[it.key()], path);
    }
  }
}

json parse_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return json(text);
  }
}

json::json_pointer pointer(const std::string& dotted) {
  std::string p;
  std::stringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) p += "/" + part;
  return json::json_pointer(p);
}

template <class T>
T get(const json& cfg, const std::string& dotted) {
  try {
    const json& v = cfg.at(pointer(dotted));
    if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw ConfigError("'" + dotted + "' must be a number");
    } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (!v.is_number_integer() && !v.is_number_unsigned()) throw ConfigError("'" + dotted + "' must be an integer");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError("'" + dotted + "' must be true or false");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError("'" + dotted + "' must be a string");
    }
    return v.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("'" + dotted + "': " + e.what());
  }
}

std::optional<double> get_optional(const json& cfg, const std::string& dotted) {
  if (!cfg.contains(pointer(dotted)) || cfg.at(pointer(dotted)).is_null()) return std::nullopt;
  return get<double>(cfg, dotted);
}

template <class E>
E choice(const json& cfg, const std::string& dotted, std::initializer_list<std::pair<const char*, E>> options) {
  const auto s = get<std::string>(cfg, dotted);
  std::string names;
  for (const auto& [name, value] : options) {
    if (s == name) return value;
    names += names.empty() ? name : std::string(", ") + name;
  }
  throw ConfigError("'" + dotted + "' must be one of: " + names);
}

// --- outputs ---------------------------------------------------------------

struct Output {
  fs::path dir;
  std::string header;  // "# stfilter <version> config_hash=<hash>"
  bool csv = true;
  json config;
  std::string hash;

  fs::path file(const std::string& name) const { return dir / name; }
};

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::string& header, const std::vector<std::string>& columns)
      : out_(path, std::ios::binary) {
    if (!out_) throw ConfigError("cannot write " + path.string());
    out_ << header << '\n';
    for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
    out_ << '\n';
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }
  void row(const std::vector<double>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << fmt(cells[i]);
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

void write_json(const Output& o, const std::string& name, json body) {
  body["tool"] = "stfilter";
  body["version"] = STF_VERSION;
  body["config_hash"] = o.hash;
  body["config"] = o.config;
  std::ofstream f(o.file(name), std::ios::binary);
  if (!f) throw ConfigError("cannot write " + o.file(name).string());
  f << body.dump(2) << '\n';
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// --- config → library types --------------------------------------------------

CiSettings ci_settings(const json& cfg) {
  CiSettings s;
  s.material.effective_mass_ratio = get<double>(cfg, "material.effective_mass_ratio");
  s.material.dielectric_constant = get<double>(cfg, "material.dielectric_constant");
  s.geometry.side_length = get<double>(cfg, "geometry.side_length_nm");
  s.geometry.corner_inset = get<double>(cfg, "geometry.corner_inset");
  s.n_max = get<int>(cfg, "basis.n_max");
  if (auto cut = get_optional(cfg, "basis.pair_energy_cutoff_meV")) s.pair_energy_cutoff = *cut;
  s.quad.order = get<int>(cfg, "basis.quad_order");
  s.quad.tolerance = get<double>(cfg, "basis.quad_tolerance");
  s.coulomb = get<bool>(cfg, "basis.coulomb");
  try {
    s.material.validate();
    s.geometry.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (s.n_max < 1 || s.n_max > 24) throw ConfigError("basis.n_max must lie in [1, 24]");
  if (s.quad.order < 0) throw ConfigError("basis.quad_order must be >= 0");
  return s;
}

NoiseConfig noise_config(const json& cfg) {
  NoiseConfig n;
  n.E_hf = get<double>(cfg, "noise.E_hf_ueV");
  n.dephasing_rate = get<double>(cfg, "noise.dephasing_rate_per_ps");
  n.convention = choice<FieldConvention>(cfg, "noise.field_convention",
                                         {{"zeeman_per_component", FieldConvention::ZeemanPerComponent},
                                          {"rms_magnitude", FieldConvention::RmsMagnitude},
                                          {"per_component", FieldConvention::PerComponent}});
  n.dephasing = choice<DephasingBasis>(cfg, "noise.dephasing_basis",
                                       {{"energy", DephasingBasis::Energy}, {"charge", DephasingBasis::Charge}});
  n.samples = get<int>(cfg, "noise.samples");
  n.seed = get<std::uint64_t>(cfg, "seed");
  try {
    n.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return n;
}

struct ResolvedParams {
  EffectiveParams params;
  GatedInitialState gated;
};

// Inline "params" wins over "params_file" (a spectrum JSON record).
ResolvedParams resolve_params(const json& cfg) {
  json p = cfg.at("params");
  json gated;
  if (p.is_null()) {
    const json& file = cfg.at("params_file");
    if (file.is_null()) throw ConfigError("this command needs 'params' or 'params_file'");
    std::ifstream in(file.get<std::string>());
    if (!in) throw ConfigError("cannot read params_file " + file.get<std::string>());
    json record;
    try {
      record = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("params_file: ") + e.what());
    }
    if (!record.contains("params")) throw ConfigError("params_file has no 'params' record");
    p = record["params"];
    if (record.contains("gated") && !record["gated"].is_null()) gated = record["gated"];
  }
  if (!p.is_object()) throw ConfigError("'params' must be an object");
  const json wrapped = {{"params", p}};
  for (const char* key : {"Delta_meV", "J_meV"})
    if (!p.contains(key)) throw ConfigError(std::string("params needs ") + key);
  ResolvedParams r;
  const double e0 = p.contains("E0_meV") ? get<double>(wrapped, "params.E0_meV") : 0.0;
  r.params = EffectiveParams::from_delta_j(e0, get<double>(wrapped, "params.Delta_meV"),
                                           get<double>(wrapped, "params.J_meV"));
  if (p.contains("gap_ratio") && p["gap_ratio"].is_number()) r.params.gap_ratio = p["gap_ratio"].get<double>();
  if (p.contains("alpha")) r.gated.alpha = get<double>(wrapped, "params.alpha");
  if (p.contains("beta")) r.gated.beta = get<double>(wrapped, "params.beta");
  if (p.contains("alpha2")) r.gated.alpha = std::sqrt(get<double>(wrapped, "params.alpha2"));
  if (p.contains("beta2")) {
    const double sign = p.contains("beta_sign") ? get<double>(wrapped, "params.beta_sign") : 1.0;
    r.gated.beta = std::copysign(std::sqrt(get<double>(wrapped, "params.beta2")), sign);
  }
  if (gated.is_object() && !p.contains("alpha") && !p.contains("alpha2")) {
    r.gated.alpha = gated.at("alpha").get<double>();
    r.gated.beta = gated.at("beta").get<double>();
    r.gated.overlap_ideal = gated.at("overlap_ideal").get<double>();
  }
  if (!(r.params.Delta > 0.0)) throw ConfigError("params.Delta_meV must be > 0");
  return r;
}

std::vector<double> linear_grid(double t_max, int points) {
  if (points < 0) throw ConfigError("points must be >= 0");
  std::vector<double> t(static_cast<std::size_t>(points));
  for (int k = 0; k < points; ++k) t[static_cast<std::size_t>(k)] = points > 1 ? t_max * k / (points - 1) : 0.0;
  return t;
}

json params_json(const EffectiveParams& p) {
  return {{"E0_meV", p.E0},       {"Delta1_meV", p.Delta1}, {"Delta2_meV", p.Delta2},
          {"Delta_meV", p.Delta}, {"J_meV", p.J},           {"gap_ratio", finite_or_null(p.gap_ratio)},
          {"J_convention", "J = (Delta1 - Delta2)/2, spectrum {E0-J-Delta, E0, E0-J+Delta}"}};
}

// --- commands -----------------------------------------------------------------

void cmd_spectrum(const json& cfg, const Output& out) {
  const CiModel model(ci_settings(cfg));
  const int states = get<int>(cfg, "spectrum.states");
  if (states < 2) throw ConfigError("spectrum.states must be >= 2");
  const DotAnalysis a = analyze_dot(model, states, get<bool>(cfg, "spectrum.check_convergence"));

  json body;
  body["params"] = params_json(a.params);
  body["manifold_valid"] = a.manifold_valid;
  body["manifold_error"] = a.manifold_error;
  body["basis_size"] = {{"singlet", a.singlet.basis_size}, {"triplet", a.triplet.basis_size}};
  body["max_residual"] = std::max(a.singlet.residuals.maxCoeff(), a.triplet.residuals.maxCoeff());
  body["convergence"] = {{"converged", a.converged},
                         {"ground_energy_change", a.ground_energy_change},
                         {"delta_change", a.delta_change},
                         {"compared_n_max", model.settings().n_max - 1}};
  body["coulomb_quadrature"] = {{"order", model.coulomb_table()->order()},
                                {"achieved_error", model.coulomb_table()->achieved_error()}};

  json gated = nullptr;
  if (a.manifold_valid) {
    try {
      const auto manifold = localize_manifold(model, a.singlet, a.triplet);
      const double step = gate_step_meV(get<double>(cfg, "gate.voltage_V"), get<double>(cfg, "gate.lever_arm"));
      const GatedInitialState g = gated_initial_state(model, step, manifold);
      gated = {{"gate_step_meV", step},
               {"alpha", g.alpha.real()},
               {"beta", g.beta.real()},
               {"alpha2", std::norm(g.alpha)},
               {"beta2", std::norm(g.beta)},
               {"overlap_ideal", g.overlap_ideal}};
    } catch (const AlignmentFailure& e) {
      body["gated_error"] = e.what();
    }
  }
  body["gated"] = gated;

  json rows = json::array();
  for (const CiSpectrum* s : {&a.singlet, &a.triplet})
    for (Eigen::Index i = 0; i < s->eigenvalues.size(); ++i)
      rows.push_back({to_string(s->sector), i, s->eigenvalues(i)});
  if (out.csv) {
    CsvWriter csv(out.file("spectrum.csv"), out.header, {"sector", "index", "energy_meV"});
    for (const auto& r : rows)
      csv.row(std::vector<std::string>{r[0].get<std::string>(), std::to_string(r[1].get<int>()), fmt(r[2].get<double>())});
  } else {
    body["spectrum"] = rows;
  }
  write_json(out, "spectrum.json", body);
}

void cmd_density(const json& cfg, const Output& out) {
  const CiModel model(ci_settings(cfg));
  const int G = get<int>(cfg, "density.resolution");
  if (G < 2 || G > 1024) throw ConfigError("density.resolution must lie in [2, 1024]");
  const auto state = get<std::string>(cfg, "density.state");
  const double L = model.settings().geometry.side_length;

  DensityGrid grid;
  const auto singlet = model.spectrum(Sector::Symmetric, 3);
  if (state == "ground" || state == "S1") {
    grid = charge_density(model, singlet, 0, G);
  } else if (state == "S2") {
    grid = charge_density(model, singlet, 1, G);
  } else if (state == "T1" || state == "phi1" || state == "phi2") {
    const auto triplet = model.spectrum(Sector::Antisymmetric, 3);
    if (state == "T1") {
      grid = charge_density(model, triplet, 0, G);
    } else {
      const auto m = localize_manifold(model, singlet, triplet);
      const auto& c = state == "phi1" ? m.phi1_symmetric : m.phi2_symmetric;
      grid = charge_density(model.basis(Sector::Symmetric), c, L, G);
    }
  } else {
    throw ConfigError("density.state must be one of: ground, S1, S2, T1, phi1, phi2");
  }

  json maxima = json::array();
  for (const Point& p : local_maxima(grid)) maxima.push_back({p.x, p.y});
  json body = {{"state", state},
               {"resolution", G},
               {"total", grid.total},
               {"corner_fraction", corner_fraction(grid)},
               {"ac_quadrant_fraction", ac_quadrant_fraction(grid)},
               {"local_maxima_nm", maxima}};
  const double h = grid.cell();
  if (out.csv) {
    CsvWriter csv(out.file("density.csv"), out.header, {"x_nm", "y_nm", "density"});
    for (int i = 0; i < G; ++i)
      for (int j = 0; j < G; ++j) csv.row(std::vector<double>{(i + 0.5) * h, (j + 0.5) * h, grid.values(i, j)});
  } else {
    json values = json::array();
    for (int i = 0; i < G; ++i) {
      json row = json::array();
      for (int j = 0; j < G; ++j) row.push_back(grid.values(i, j));
      values.push_back(row);
    }
    body["values"] = values;
    body["cell_nm"] = h;
  }
  write_json(out, "density.json", body);
}

void cmd_dynamics(const json& cfg, const Output& out) {
  const ResolvedParams r = resolve_params(cfg);
  const double tstar = t_star(r.params);
  const double t_max = get_optional(cfg, "dynamics.t_max_ps").value_or(get<double>(cfg, "dynamics.t_max_tstar") * tstar);
  const auto grid = linear_grid(t_max, get<int>(cfg, "dynamics.points"));

  json body = {{"params", params_json(r.params)},
               {"alpha", r.gated.alpha.real()},
               {"beta", r.gated.beta.real()},
               {"t_star_ps", tstar},
               {"points", grid.size()}};
  double gated_max = 0.0;
  std::vector<std::array<double, 4>> rows;
  for (double t : grid) {
    rows.push_back({t, p_singlet(t, r.params), p_initial(t, r.params), p_singlet_gated(t, r.gated, r.params)});
    gated_max = std::max(gated_max, rows.back()[3]);
  }
  body["p_singlet_gated_max"] = gated_max;
  if (out.csv) {
    CsvWriter csv(out.file("dynamics.csv"), out.header, {"t_ps", "p_singlet", "p_initial", "p_singlet_gated"});
    for (const auto& row : rows) csv.row(std::vector<double>(row.begin(), row.end()));
  } else {
    json data = json::array();
    for (const auto& row : rows) data.push_back(row);
    body["columns"] = {"t_ps", "p_singlet", "p_initial", "p_singlet_gated"};
    body["data"] = data;
  }
  write_json(out, "dynamics.json", body);
}

void cmd_noise(const json& cfg, const Output& out) {
  const ResolvedParams r = resolve_params(cfg);
  const NoiseConfig noise = noise_config(cfg);
  const double tstar = t_star(r.params);
  const double t_max = get_optional(cfg, "noise.t_max_ps").value_or(get<double>(cfg, "noise.t_max_tstar") * tstar);
  const auto grid = linear_grid(t_max, get<int>(cfg, "noise.points"));
  const FilterCurve curve = ensemble_filter_curve(r.params, noise, grid);

  json body = {{"params", params_json(r.params)}, {"t_star_ps", tstar}, {"shots", noise.E_hf == 0.0 ? 1 : noise.samples}};
  // First maximum: the largest value before the curve first falls below half of it.
  double first_max = 0.0, first_max_t = 0.0;
  for (std::size_t k = 0; k < curve.mean.size(); ++k) {
    if (curve.mean[k] > first_max) {
      first_max = curve.mean[k];
      first_max_t = curve.t[k];
    } else if (first_max > 0.0 && curve.mean[k] < 0.5 * first_max) {
      break;
    }
  }
  body["first_maximum"] = {{"value", first_max}, {"t_ps", first_max_t}};

  if (noise.E_hf > 0.0) {
    const double reference = 2.0 * PhysicalConstants::pi * PhysicalConstants::hbar / (noise.E_hf * 1e-3);
    const double ct_max = get_optional(cfg, "noise.coherence_t_max_ps").value_or(0.5 * reference);
    const auto cgrid = linear_grid(ct_max, get<int>(cfg, "noise.coherence_points"));
    const CoherenceCurve coh = ensemble_coherence(r.params, noise, cgrid);
    json fit = nullptr;
    try {
      const CoherenceFit f = fit_gaussian_decay(coh, get<double>(cfg, "noise.fit_floor"));
      fit = {{"omega_per_ps", f.omega}, {"t_1e_ps", f.t_1e}, {"t_2pi_ps", f.t_2pi}, {"points", f.points}};
    } catch (const ConvergenceFailure& e) {
      body["coherence_fit_error"] = e.what();
    }
    body["coherence_fit"] = fit;
    body["coherence_reference_2pi_hbar_over_E_hf_ps"] = reference;
    if (out.csv) {
      CsvWriter csv(out.file("noise_coherence.csv"), out.header, {"t_ps", "coherence"});
      for (std::size_t k = 0; k < coh.t.size(); ++k) csv.row(std::vector<double>{coh.t[k], coh.value[k]});
    } else {
      body["coherence"] = {{"t_ps", coh.t}, {"value", coh.value}};
    }
  }

  const int rounds = get<int>(cfg, "noise.rounds");
  if (rounds >= 1) {
    const RusInput input = choice<RusInput>(
        cfg, "noise.rus_input",
        {{"injected", RusInput::Injected}, {"singlet", RusInput::Singlet}, {"triplet", RusInput::Triplet}});
    const RusRecord rus = repeat_until_success(r.params, noise, input, rounds);
    body["repeat_until_success"] = {
        {"detection", rus.detection}, {"cumulative_miss", rus.cumulative_miss}, {"survival", rus.survival}};
  }
  const PovmSummary povm = povm_summary(r.params, noise);
  body["povm"] = {{"p_detect_singlet", povm.p_detect_singlet}, {"p_detect_triplet", povm.p_detect_triplet}};

  if (out.csv) {
    CsvWriter csv(out.file("noise.csv"), out.header, {"t_ps", "p_mean", "p_stderr"});
    for (std::size_t k = 0; k < curve.t.size(); ++k)
      csv.row(std::vector<double>{curve.t[k], curve.mean[k], curve.std_error[k]});
  } else {
    body["curve"] = {{"t_ps", curve.t}, {"p_mean", curve.mean}, {"p_stderr", curve.std_error}};
  }
  write_json(out, "noise.json", body);
}

void cmd_protocol(const json& cfg, const Output& out) {
  ChainConfig base;
  base.trials = get<int>(cfg, "protocol.trials");
  base.seed = get<std::uint64_t>(cfg, "seed");
  base.confidence = get<double>(cfg, "protocol.confidence");
  const auto mode = get<std::string>(cfg, "protocol.mode");
  std::vector<ChainMode> modes;
  if (mode == "swap" || mode == "both") modes.push_back(ChainMode::Swap);
  if (mode == "aklt" || mode == "both") modes.push_back(ChainMode::Aklt);
  if (modes.empty()) throw ConfigError("protocol.mode must be one of: swap, aklt, both");
  const auto povm = get<std::string>(cfg, "protocol.povm");
  if (povm == "noise") {
    const ResolvedParams r = resolve_params(cfg);
    base.povm = povm_summary(r.params, noise_config(cfg));
  } else if (povm != "ideal") {
    throw ConfigError("protocol.povm must be one of: ideal, noise");
  }

  std::vector<int> dots;
  const json& nd = cfg.at("protocol").at("n_dots");
  if (nd.is_array()) {
    for (std::size_t i = 0; i < nd.size(); ++i) dots.push_back(get<int>(cfg, "protocol.n_dots." + std::to_string(i)));
  } else {
    dots.push_back(get<int>(cfg, "protocol.n_dots"));
  }
  for (int n : dots)
    if (n < 1 || n > kMaxDots) throw ConfigError("protocol.n_dots entries must lie in [1, " + std::to_string(kMaxDots) + "]");
  if (base.trials < 100) throw ConfigError("protocol.trials must be >= 100");

  json results = json::array();
  std::vector<std::vector<std::string>> rows;
  for (ChainMode m : modes) {
    for (int n : dots) {
      ChainConfig c = base;
      c.mode = m;
      c.n_dots = n;
      const SuccessEstimate e = estimate_success_prob(c);
      json r = {{"mode", m == ChainMode::Swap ? "swap" : "aklt"},
                {"n_dots", n},
                {"trials", e.trials},
                {"successes", e.successes},
                {"rate", e.rate},
                {"ci_low", e.ci_low},
                {"ci_high", e.ci_high},
                {"theory", e.theory}};
      double fidelity = 0.0;
      if (m == ChainMode::Swap) {
        fidelity = run_swap_chain(c).mean_fidelity;
      } else {
        const AkltResult a = run_aklt_chain(c);
        fidelity = a.statistics.mean_fidelity;
        r["aklt_energy"] = a.energy;
        r["branch_probability"] = a.branch.probability;
      }
      r["mean_fidelity"] = fidelity;
      rows.push_back({r["mode"].get<std::string>(), std::to_string(n), std::to_string(e.trials),
                      std::to_string(e.successes), fmt(e.rate), fmt(e.ci_low), fmt(e.ci_high), fmt(e.theory),
                      fmt(fidelity)});
      results.push_back(r);
    }
  }
  json body = {{"povm", {{"p_detect_singlet", base.povm.p_detect_singlet}, {"p_detect_triplet", base.povm.p_detect_triplet}}},
               {"results", results}};
  if (out.csv) {
    CsvWriter csv(out.file("protocol.csv"), out.header,
                  {"mode", "n_dots", "trials", "successes", "rate", "ci_low", "ci_high", "theory", "mean_fidelity"});
    for (const auto& r : rows) csv.row(r);
  }
  write_json(out, "protocol.json", body);
}

void cmd_table(const json& cfg, const Output& out) {
  const double compute_max = get<double>(cfg, "table.compute_max_L_nm");
  const json& rows = cfg.at("table").at("rows");
  if (!rows.is_array() || rows.empty()) throw ConfigError("table.rows must be a nonempty array");
  const double step = gate_step_meV(get<double>(cfg, "gate.voltage_V"), get<double>(cfg, "gate.lever_arm"));

  std::optional<CiModel> model;
  const char* quantities[] = {"Delta_meV", "J_meV", "alpha2", "beta2", "E_hf_ueV"};
  json table = json::array();
  std::vector<std::vector<std::string>> csv_rows;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string at = "table.rows." + std::to_string(i);
    const double L = get<double>(cfg, at + ".L_nm");
    json cells;
    for (const char* q : quantities) {
      if (rows[i].contains(q) && rows[i][q].is_number())
        cells[q] = {{"value", rows[i][q].get<double>()}, {"source", "input"}};
      else
        cells[q] = {{"value", nullptr}, {"source", "missing"}};
    }
    json extra = {{"gap_ratio", nullptr}, {"converged", nullptr}, {"manifold_valid", nullptr}};
    if (L <= compute_max) {
      if (!model) model.emplace(ci_settings(cfg));
      const CiModel m = model->resized(L);
      const DotAnalysis a = analyze_dot(m, 10, true);
      cells["Delta_meV"] = {{"value", a.params.Delta}, {"source", "computed"}};
      cells["J_meV"] = {{"value", a.params.J}, {"source", "computed"}};
      extra = {{"gap_ratio", finite_or_null(a.params.gap_ratio)},
               {"converged", a.converged},
               {"manifold_valid", a.manifold_valid}};
      if (a.manifold_valid) {
        try {
          const GatedInitialState g = gated_initial_state(m, step, localize_manifold(m, a.singlet, a.triplet));
          cells["alpha2"] = {{"value", std::norm(g.alpha)}, {"source", "computed"}};
          cells["beta2"] = {{"value", std::norm(g.beta)}, {"source", "computed"}};
        } catch (const AlignmentFailure& e) {
          extra["alignment_error"] = e.what();
        }
      }
    }
    json row = {{"L_nm", L}, {"cells", cells}};
    row.update(extra);
    table.push_back(row);

    std::vector<std::string> line{fmt(L)};
    for (const char* q : quantities) {
      const json& c = cells[q];
      line.push_back(c["value"].is_null() ? "" : fmt(c["value"].get<double>()));
      line.push_back(c["source"].get<std::string>());
    }
    line.push_back(extra["gap_ratio"].is_null() ? "" : fmt(extra["gap_ratio"].get<double>()));
    line.push_back(extra["converged"].is_null() ? "" : (extra["converged"].get<bool>() ? "yes" : "no"));
    csv_rows.push_back(line);
  }
  if (out.csv) {
    CsvWriter csv(out.file("table.csv"), out.header,
                  {"L_nm", "Delta_meV", "Delta_source", "J_meV", "J_source", "alpha2", "alpha2_source", "beta2",
                   "beta2_source", "E_hf_ueV", "E_hf_source", "gap_ratio", "converged"});
    for (const auto& r : csv_rows) csv.row(r);
  }
  write_json(out, "table.json", {{"gate_step_meV", step}, {"rows", table}});
}

int exit_code_for(const Error& e) {
  const std::string& k = e.kind();
  if (k == "config-error" || k == "invalid-argument" || k == "invalid-params" || k == "resource-limit")
    return kConfigError;
  return kNumericalError;
}

}  // namespace

json resolve_config(const std::string& config_path, const std::vector<std::string>& overrides) {
  json cfg = default_config();
  const json defaults = cfg;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("cannot read config file " + config_path);
    json file;
    try {
      file = json::parse(in, nullptr, true, true);
    } catch (const json::exception& e) {
      throw ConfigError("config file " + config_path + ": " + e.what());
    }
    if (!file.is_object()) throw ConfigError("config file must hold a JSON object");
    check_known_keys(file, defaults, "");
    cfg.merge_patch(file);
    // merge_patch drops null values; restore keys the defaults allow to be null.
    for (const char* key : {"params", "params_file"})
      if (!cfg.contains(key)) cfg[key] = nullptr;
  }
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "' must look like key.path=value");
    const std::string key = o.substr(0, eq);
    json patch;
    patch[pointer(key)] = parse_value(o.substr(eq + 1));
    check_known_keys(patch, defaults, "");
    cfg[pointer(key)] = patch[pointer(key)];
  }
  return cfg;
}

std::string config_hash(const json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Singlet-triplet filtering in a square quantum dot"};
  app.set_version_flag("--version", STF_VERSION);
  app.require_subcommand(1);

  std::string config_path, out_dir = ".", format;
  std::optional<std::uint64_t> seed;
  std::optional<double> side_length;
  std::optional<int> n_max;
  bool no_coulomb = false;
  std::vector<std::string> overrides;

  struct Command {
    const char* name;
    const char* help;
    void (*fn)(const json&, const Output&);
  };
  const Command commands[] = {
      {"spectrum", "CI spectra and effective parameters", cmd_spectrum},
      {"density", "charge density of a CI state", cmd_density},
      {"dynamics", "ideal filter curves", cmd_dynamics},
      {"noise", "hyperfine and dephasing ensembles", cmd_noise},
      {"protocol", "entanglement swapping and AKLT chains", cmd_protocol},
      {"table", "parameter table over dot sizes", cmd_table},
  };
  std::vector<CLI::App*> subs;
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--seed", seed, "master RNG seed");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--L", side_length, "dot side length, nm");
    sub->add_option("--n-max", n_max, "orbital cutoff per axis");
    sub->add_flag("--no-coulomb", no_coulomb, "drop the Coulomb interaction");
    sub->add_option("--set", overrides, "override, key.path=value (repeatable)");
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    // Dedicated flags win over --set, which wins over the file.
    if (seed) overrides.push_back("seed=" + std::to_string(*seed));
    if (!format.empty()) overrides.push_back("format=\"" + format + "\"");
    if (side_length) overrides.push_back("geometry.side_length_nm=" + fmt(*side_length));
    if (n_max) overrides.push_back("basis.n_max=" + std::to_string(*n_max));
    if (no_coulomb) overrides.push_back("basis.coulomb=false");
    const json cfg = resolve_config(config_path, overrides);

    Output out;
    out.dir = out_dir;
    out.config = cfg;
    out.hash = config_hash(cfg);
    out.header = std::string("# stfilter ") + STF_VERSION + " config_hash=" + out.hash;
    out.csv = choice<bool>(cfg, "format", {{"csv", true}, {"json", false}});
    fs::create_directories(out.dir);

    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (!subs[i]->parsed()) continue;
      commands[i].fn(cfg, out);
      std::cout << commands[i].name << ": wrote " << out.dir.string() << " (config_hash=" << out.hash << ")\n";
    }
    return kOk;
  } catch (const Error& e) {
    std::cerr << "stfilter: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const json::exception& e) {
    std::cerr << "stfilter: config-error: " << e.what() << '\n';
    return kConfigError;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "stfilter: config-error: " << e.what() << '\n';
    return kConfigError;
  }
}

}  // namespace stf::cli
