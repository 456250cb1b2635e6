#pragma once

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "omsense/array.hpp"
#include "omsense/oracle.hpp"
#include "omsense/preset_data.hpp"
#include "omsense/report.hpp"
#include "omsense/scenario.hpp"
#include "omsense/sensitivity.hpp"

namespace omsense::cli {

inline constexpr const char *version = "1.0.0";

enum ExitCode { ok = 0, validation = 2, nonconvergence = 3 };

struct Options {
  std::string command;
  std::string scenario_path;
  std::string out_dir = ".";
  std::string format;
  std::optional<double> tolerance;
  bool strict = false;
  std::size_t threads = 1;
  std::string gamma_convention;
  std::vector<std::string> overlays;
};

struct Result {
  std::vector<NamedTable> tables;
  nlohmann::json summary = nlohmann::json::object();
  std::vector<std::string> failures;
  bool nonconverged = false;
  std::optional<std::string> check_failure;
};

inline const std::map<std::string, std::string> &preset_commands() {
  static const std::map<std::string, std::string> m{
      {"fig2", "array-scan"}, {"fig3", "dm-projection"}, {"fig4", "noise"}, {"fig5", "power-scan"}, {"fig6", "loss-scan"}};
  return m;
}

inline std::vector<std::string> command_names() {
  return {"noise", "array-scan", "sensitivity", "dm-projection", "power-scan", "loss-scan", "oracle-check",
          "fig2", "fig3", "fig4", "fig5", "fig6"};
}

namespace detail {

inline std::vector<double> hz_axis(const Scenario &sc, double lower_factor, double upper_factor, std::size_t n) {
  if (!sc.axes.frequencies_hz.empty()) return sc.axes.frequencies_hz;
  const double f0 = rad_s_to_hz(sc.study.sensor.osc.resonance_rad_s);
  return log_space(f0 * lower_factor, f0 * upper_factor, n);
}

inline std::vector<double> to_rad_s(const std::vector<double> &hz) {
  std::vector<double> out;
  for (double f : hz) {
    if (!(f > 0.0)) throw ConfigurationError("frequencies must be positive");
    out.push_back(hz_to_rad_s(f));
  }
  return out;
}

inline void absorb(Result &r, const Table &t) {
  for (const auto &f : t.failures) r.failures.push_back(f);
  r.nonconverged = r.nonconverged || t.nonconverged;
}

inline nlohmann::json grid_stats(const Scenario &sc) {
  const ArrayConfig cfg = sc.study.array();
  const FrequencyGrid g = detector_grid(cfg, sc.study.span);
  nlohmann::json j;
  j["lower_rad_s"] = g.lower();
  j["upper_rad_s"] = g.upper();
  j["initial_points"] = g.size();
  j["tolerance"] = sc.study.span.integration.relative_tolerance;
  j["max_evaluations"] = sc.study.span.integration.max_evaluations;
  j["points_per_decade"] = sc.study.span.grid.points_per_decade;
  j["shell_ratio"] = sc.study.span.grid.shell_ratio;
  auto res = nlohmann::json::array();
  for (const auto &r : g.resonances) {
    res.push_back({{"omega_rad_s", r.omega_rad_s},
                   {"linewidth_rad_s", r.linewidth_rad_s},
                   {"points_within_10_linewidths", g.points_within(r.omega_rad_s, 10.0 * r.linewidth_rad_s)},
                   {"finest_spacing_rad_s", g.finest_spacing_near(r.omega_rad_s, 10.0 * r.linewidth_rad_s)}});
  }
  j["resonances"] = res;
  return j;
}

/// Single-sensor reference figures at the resonance for the scenario sensor.
inline nlohmann::json reference_levels(const Scenario &sc) {
  const Study st = sc.study.reference();
  const Detector d = st.classical(1);
  const auto &osc = st.sensor.osc;
  const double w0 = osc.resonance_rad_s;
  const auto b = array_noise_psd(d.array, QuadraturePsdTriple::vacuum(), w0);
  const double gain = signal_gain(d.array);
  nlohmann::json j;
  j["thermal_accel_asd_m_s2_rthz"] = acceleration_asd(b.thermal / gain, osc.mass_kg);
  j["back_action_accel_asd_on_resonance_m_s2_rthz"] = acceleration_asd(b.back_action / gain, osc.mass_kg);
  j["total_accel_asd_on_resonance_m_s2_rthz"] = acceleration_asd(b.total / gain, osc.mass_kg);
  j["shot_displacement_asd_m_rthz"] = displacement_asd(b.shot / gain, osc, w0);
  j["cooperativity_on_resonance"] =
      cavity_phase_and_cooperativity(st.sensor.cav.with_power(d.array.total_power_w), osc, 1.0, w0)
          .cooperativity_magnitude();
  return j;
}

inline Result cmd_noise(const Scenario &sc) {
  Result r;
  const auto omegas = to_rad_s(hz_axis(sc, 1e-2, 1e2, 401));
  NamedTable t{"noise", noise_table(sc.study, omegas), "", {}};
  absorb(r, t.table);
  r.tables.push_back(std::move(t));
  r.summary["reference_levels"] = reference_levels(sc);
  return r;
}

inline Result cmd_array_scan(const Scenario &sc) {
  Result r;
  NamedTable t{"array_scan", scaling_scan(sc.study, sc.axes.sensors), "", {}};
  absorb(r, t.table);
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto &row : t.table.rows) {
    if (!std::isfinite(row[5])) continue;
    lo = std::min(lo, row[5]);
    hi = std::max(hi, row[5]);
  }
  r.summary["squeezed_over_classical_min"] = number_or_null(lo);
  r.summary["squeezed_over_classical_max"] = number_or_null(hi);
  r.tables.push_back(std::move(t));
  return r;
}

inline Result cmd_sensitivity(const Scenario &sc) {
  Result r;
  const Study &st = sc.study;
  SpanSettings half = st.span;
  half.integration.relative_tolerance *= 0.5;
  NamedTable t;
  t.name = "sensitivity";
  t.label_column = "detector";
  t.table.columns = {"value", "error_estimate", "evaluations", "segments", "initial_segments",
                     "value_half_tolerance", "relative_change"};
  auto add = [&](const std::string &label, const Detector &d) {
    const auto a = detector_sensitivity(d, st.span);
    const auto b = detector_sensitivity(d, half);
    t.labels.push_back(label);
    t.table.rows.push_back({a.value, a.error_estimate, static_cast<double>(a.evaluations),
                            static_cast<double>(a.segments), static_cast<double>(a.initial_segments), b.value,
                            relative_difference(a.value, b.value)});
  };
  add("single_classical", st.reference().classical(1));
  add("classical_coherent", st.classical(st.sensors));
  add("squeezed_coherent", st.squeezed(st.sensors));
  const double incoh = incoherent_sensitivity(st.classical(st.sensors), st.span);
  t.labels.push_back("classical_incoherent");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  t.table.rows.push_back({incoh, nan, nan, nan, nan, nan, nan});

  // SQL reference integral over a wide span for the scenario sensor.
  const auto &osc = st.sensor.osc;
  const FrequencyGrid g = resonance_refined_grid({{osc.resonance_rad_s, osc.damping_rad_s}},
                                                 osc.resonance_rad_s * 1e-4, osc.resonance_rad_s * 1e4, st.span.grid);
  IntegrationOptions io = st.span.integration;
  const auto sql = integrated_sensitivity([](double) { return 1.0; },
                                          [&](double w) { return sql_noise_psd(osc, w); }, g, io);
  r.summary["sql_integral_over_analytic"] = sql.value / sql_integrated_sensitivity_analytic(osc, 1.0);
  r.summary["sql_integral_over_reference_constant"] = sql.value / sql_integrated_sensitivity_reference(osc, 1.0);
  r.summary["reference_levels"] = reference_levels(sc);
  r.tables.push_back(std::move(t));
  return r;
}

inline Result cmd_dm_projection(const Scenario &sc, const std::vector<Overlay> &overlays, Warnings &warnings) {
  Result r;
  ProjectionSetup setup;
  setup.dm = sc.dark_matter;
  setup.dm.material_factor = calibrated_material_factor(sc);
  setup.plan = sc.plan;
  setup.array_size = sc.projection_array_size;
  const auto hz = hz_axis(sc, 5e-3, 50.0, 241);
  const auto omegas = to_rad_s(hz);
  for (double w : {omegas.front(), omegas.back()}) setup.plan.validate(setup.dm.at(w), &warnings);

  NamedTable t{"dm_projection", dm_projection(sc.study, setup, omegas), "", {}};
  absorb(r, t.table);
  for (const auto &o : overlays) {
    t.table.columns.push_back(o.name);
    for (std::size_t i = 0; i < t.table.rows.size(); ++i) t.table.rows[i].push_back(o.at(hz[i]));
  }

  const auto &osc = sc.study.sensor.osc;
  const double anchor_omega =
      sc.calibration.frequency_hz > 0.0 ? hz_to_rad_s(sc.calibration.frequency_hz) : osc.resonance_rad_s;
  const Detector single = sc.study.reference().classical(1);
  const double gain = signal_gain(single.array);
  const auto at_res = array_noise_psd(single.array, QuadraturePsdTriple::vacuum(), osc.resonance_rad_s);
  const DarkMatterModel dm_anchor = setup.dm.at(anchor_omega);
  r.summary["material_factor"] = setup.dm.material_factor;
  r.summary["calibration"] = {{"anchor", to_string(sc.calibration.anchor)},
                              {"coupling", sc.calibration.coupling},
                              {"frequency_rad_s", anchor_omega},
                              {"note", sc.calibration.note}};
  r.summary["anchor_coupling_reproduced"] = min_detectable_coupling(at_res.thermal / gain, dm_anchor, setup.plan);
  r.summary["back_action_point_coupling"] =
      min_detectable_coupling(at_res.total / gain, setup.dm.at(osc.resonance_rad_s), setup.plan);
  r.tables.push_back(std::move(t));
  return r;
}

inline Result cmd_power_scan(const Scenario &sc) {
  Result r;
  const auto powers = sc.axes.powers_w.empty() ? log_space(1e-8, 1.0, 33) : sc.axes.powers_w;
  NamedTable t{"power_scan", power_scan(sc.study, powers, sc.axes.fixed_angles_rad), "", {}};
  absorb(r, t.table);
  auto peaks = nlohmann::json::object();
  for (std::size_t c = 1; c < t.table.columns.size(); ++c) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < t.table.rows.size(); ++i)
      if (t.table.rows[i][c] > t.table.rows[best][c]) best = i;
    peaks[t.table.columns[c]] = {{"power_w", t.table.rows[best][0]},
                                 {"interior", best > 0 && best + 1 < t.table.rows.size()}};
  }
  r.summary["peaks"] = peaks;
  r.tables.push_back(std::move(t));
  return r;
}

inline Result cmd_loss_scan(const Scenario &sc) {
  Result r;
  const auto losses = sc.axes.losses.empty() ? lin_space(0.0, 0.95, 20) : sc.axes.losses;
  NamedTable t{"loss_scan", loss_scan(sc.study, losses), "", {}};
  absorb(r, t.table);
  r.tables.push_back(std::move(t));
  return r;
}

inline Result cmd_oracle_check(const Scenario &sc, double tolerance) {
  Result r;
  const auto &suite = sc.oracle;
  std::mt19937_64 rng(suite.seed);
  std::vector<oracle::RandomDraw> draws;
  for (std::size_t i = 0; i < suite.configurations; ++i)
    draws.push_back(oracle::random_configuration(rng, sc.study.sensor, sc.study.power_w, suite.max_sensors, suite.spread,
                                                 suite.max_squeezing_db, suite.frequencies));
  NamedTable t;
  t.name = "oracle_check";
  t.table.columns = {"configuration", "sensors", "omega_rad_s", "closed_form", "generic_path", "oracle",
                     "relative_error"};
  std::vector<std::vector<std::vector<double>>> blocks(draws.size());
  std::vector<std::string> errors;
  std::vector<bool> numerical;
  parallel_points(
      draws.size(), sc.study.threads,
      [&](std::size_t i) {
        const auto &d = draws[i];
        for (double w : d.omegas) {
          const double closed = array_squeezed_noise_closed_form(d.cfg, d.r, d.theta, w);
          const double generic = array_noise_psd(d.cfg, input_quadrature_psds(d.r, d.theta), w).total;
          const double ref = oracle::oracle_noise_psd(d.cfg, d.r, d.theta, w, i + 1);
          const double err = std::max(relative_difference(closed, ref), relative_difference(generic, ref));
          blocks[i].push_back({static_cast<double>(i), static_cast<double>(d.cfg.size()), w, closed, generic, ref, err});
        }
      },
      errors, numerical);
  double worst = 0.0;
  for (auto &b : blocks)
    for (auto &row : b) {
      worst = std::max(worst, row[6]);
      t.table.rows.push_back(std::move(row));
    }
  r.summary["configurations"] = draws.size();
  r.summary["evaluations"] = t.table.rows.size();
  r.summary["max_relative_error"] = worst;
  r.summary["tolerance"] = tolerance;
  r.summary["passed"] = worst < tolerance;
  if (!(worst < tolerance)) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "oracle residual %.3g exceeds tolerance %.3g", worst, tolerance);
    r.check_failure = buf;
  }
  r.tables.push_back(std::move(t));
  return r;
}

inline nlohmann::json defaults_used(const Scenario &sc, const std::string &command) {
  nlohmann::json j;
  j["gamma_convention"] = to_string(sc.convention);
  j["combining_policy"] = to_string(sc.study.combining);
  j["power_convention"] = sc.study.power_per_sensor ? "per_sensor" : "total";
  j["momentum_psd"] = sc.study.sensor.momentum_psd ? "explicit" : "k_B T / (hbar Omega)";
  j["span_rule"] = "[Omega / 1e3, min(1e3 Omega, kappa / 10)] unless grid.lower_rad_s / grid.upper_rad_s are set";
  if (command == "dm-projection") {
    j["linewidth_rule"] = sc.dark_matter.linewidth_override_rad_s ? "explicit" : "fraction of Compton frequency";
    j["linewidth_fraction"] = sc.dark_matter.linewidth_fraction;
    j["threshold"] = sc.plan.threshold;
    j["integration_time"] = sc.plan.integration_time_s ? "explicit" : "1 / linewidth";
    j["observation_time_s"] = sc.plan.observation_time_s;
    j["density_kg_m3"] = sc.dark_matter.density_kg_m3;
  }
  return j;
}

} // namespace detail

/// Parses arguments, runs one command and writes its artifacts. Returns the exit code.
inline int run(const std::vector<std::string> &args, std::ostream &out = std::cout, std::ostream &err = std::cerr) {
  Options opt;
  CLI::App app{"Quantum noise budgets and sensitivity projections for optomechanical sensor arrays", "omsense"};
  app.set_version_flag("--version", version);
  app.add_option("command", opt.command, "Command to run")->required()->check(CLI::IsMember(command_names()));
  app.add_option("--scenario", opt.scenario_path, "Scenario JSON file")->envname("OMSENSE_SCENARIO");
  app.add_option("--out", opt.out_dir, "Output directory")->envname("OMSENSE_OUT");
  app.add_option("--format", opt.format, "Table format")->check(CLI::IsMember({"csv", "json"}))->envname("OMSENSE_FORMAT");
  app.add_option("--tolerance", opt.tolerance,
                 "Relative tolerance: quadrature tolerance, or the pass threshold for oracle-check")
      ->check(CLI::PositiveNumber)
      ->envname("OMSENSE_TOLERANCE");
  app.add_flag("--strict", opt.strict, "Reject unknown scenario keys")->envname("OMSENSE_STRICT");
  app.add_option("--threads", opt.threads, "Worker threads for scans")->check(CLI::PositiveNumber)->envname("OMSENSE_THREADS");
  app.add_option("--gamma-convention", opt.gamma_convention, "Meaning of the quality factor: half (Q = Omega/2gamma) or full")
      ->check(CLI::IsMember({"half", "full"}))
      ->envname("OMSENSE_GAMMA_CONVENTION");
  app.add_option("--overlay", opt.overlays, "Two-column constraint CSV passed through to dm-projection");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp &) {
    out << app.help();
    return ok;
  } catch (const CLI::CallForVersion &) {
    out << version << "\n";
    return ok;
  } catch (const CLI::ParseError &e) {
    err << "error: " << e.what() << "\n";
    return validation;
  }

  std::string command = opt.command;
  std::string preset;
  if (auto it = preset_commands().find(command); it != preset_commands().end()) {
    preset = command;
    command = it->second;
  }

  Scenario sc;
  std::string scenario_text;
  std::vector<Overlay> overlays;
  try {
    if (!opt.scenario_path.empty()) {
      scenario_text = read_file(opt.scenario_path);
    } else if (!preset.empty() || command == "oracle-check") {
      scenario_text = preset_scenario(preset.empty() ? "oracle_suite" : preset);
    } else {
      throw ConfigurationError("--scenario is required for " + command);
    }
    ScenarioOverrides ov;
    if (!opt.gamma_convention.empty()) ov.convention = parse_gamma_convention(opt.gamma_convention);
    if (command != "oracle-check") ov.tolerance = opt.tolerance;
    ov.threads = opt.threads;
    if (!opt.format.empty()) ov.format = opt.format;
    ov.strict = opt.strict;
    sc = parse_scenario(read_json_text(scenario_text, opt.scenario_path.empty() ? "preset" : opt.scenario_path), ov);
    if (!opt.overlays.empty() && command != "dm-projection")
      throw ConfigurationError("--overlay only applies to dm-projection");
    for (const auto &p : opt.overlays) overlays.push_back(read_overlay(p, read_file(p)));
  } catch (const ConfigurationError &e) {
    err << "validation error: " << e.what() << "\n";
    return validation;
  }

  Result result;
  Warnings warnings = sc.warnings;
  try {
    if (command == "noise") result = detail::cmd_noise(sc);
    else if (command == "array-scan") result = detail::cmd_array_scan(sc);
    else if (command == "sensitivity") result = detail::cmd_sensitivity(sc);
    else if (command == "dm-projection") result = detail::cmd_dm_projection(sc, overlays, warnings);
    else if (command == "power-scan") result = detail::cmd_power_scan(sc);
    else if (command == "loss-scan") result = detail::cmd_loss_scan(sc);
    else if (command == "oracle-check") result = detail::cmd_oracle_check(sc, opt.tolerance.value_or(1e-9));
  } catch (const ConfigurationError &e) {
    err << "validation error: " << e.what() << "\n";
    return validation;
  } catch (const NumericalError &e) {
    err << "numerical error: " << e.what() << "\n";
    return nonconvergence;
  }

  const std::string stem = preset.empty() ? result.tables.front().name : preset;
  const std::string ext = sc.output_format == "json" ? ".json" : ".csv";
  nlohmann::json manifest;
  manifest["tool"] = "omsense";
  manifest["version"] = version;
  manifest["command"] = command;
  manifest["preset"] = preset.empty() ? nlohmann::json(nullptr) : nlohmann::json(preset);
  manifest["scenario_name"] = sc.name;
  manifest["schema_version"] = sc.schema_version;
  {
    nlohmann::json effective = sc.source;
    effective["__overrides"] = {{"gamma_convention", opt.gamma_convention},
                                {"tolerance", opt.tolerance ? nlohmann::json(*opt.tolerance) : nlohmann::json(nullptr)},
                                {"format", sc.output_format}};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(effective.dump())));
    manifest["scenario_hash_fnv1a64"] = buf;
  }
  manifest["defaults"] = detail::defaults_used(sc, command);
  try {
    if (command != "oracle-check") manifest["grid"] = detail::grid_stats(sc);
  } catch (const ConfigurationError &e) {
    warnings.add(std::string("grid statistics unavailable: ") + e.what());
  }
  manifest["threads"] = sc.study.threads;
  manifest["summary"] = result.summary;
  manifest["failures"] = result.failures;
  manifest["warnings"] = warnings.messages;
  auto outputs = nlohmann::json::array();
  std::vector<std::pair<std::string, std::string>> files;
  for (std::size_t i = 0; i < result.tables.size(); ++i) {
    const auto &t = result.tables[i];
    const std::string name = (i == 0 ? stem : stem + "_" + t.name) + ext;
    files.emplace_back(name, sc.output_format == "json" ? to_json_text(t) : to_csv(t));
    std::vector<std::string> cols;
    if (!t.label_column.empty()) cols.push_back(t.label_column);
    cols.insert(cols.end(), t.table.columns.begin(), t.table.columns.end());
    outputs.push_back({{"file", name}, {"columns", cols}, {"rows", t.table.rows.size()}});
  }
  manifest["outputs"] = outputs;
  files.emplace_back(stem + ".manifest.json", manifest.dump(2) + "\n");

  try {
    std::filesystem::create_directories(opt.out_dir);
    for (const auto &[name, text] : files) write_text((std::filesystem::path(opt.out_dir) / name).string(), text);
  } catch (const std::exception &e) {
    err << "output error: " << e.what() << "\n";
    return validation;
  }

  for (const auto &w : warnings.messages) err << "warning: " << w << "\n";
  for (const auto &f : result.failures) err << "failed point: " << f << "\n";
  out << "wrote " << files.size() << " file(s) to " << opt.out_dir << "\n";
  if (result.check_failure) {
    err << "check failed: " << *result.check_failure << "\n";
    return nonconvergence;
  }
  return result.nonconverged ? nonconvergence : ok;
}

inline int run(int argc, char **argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

} // namespace omsense::cli
