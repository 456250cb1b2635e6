#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "omsense/array.hpp"
#include "omsense/core.hpp"
#include "omsense/sensitivity.hpp"

namespace omsense {

using json = nlohmann::json;

inline constexpr int scenario_schema_version = 1;

/// How the material factor is fixed: directly, or so that `coupling` is the detection
/// threshold at an anchor noise level (the standalone thermal floor, or an explicit
/// acceleration ASD) at `frequency_hz`.
struct Calibration {
  enum class Anchor { direct, thermal_floor, acceleration };
  Anchor anchor = Anchor::thermal_floor;
  double coupling = 4e-25;
  double frequency_hz = 0.0; // 0 means the sensor resonance
  double acceleration_asd = 0.0;
  double material_factor = 0.0; // used when anchor is direct
  std::string note;
};

inline std::string to_string(Calibration::Anchor a) {
  switch (a) {
  case Calibration::Anchor::direct: return "direct";
  case Calibration::Anchor::thermal_floor: return "thermal_floor";
  case Calibration::Anchor::acceleration: return "acceleration";
  }
  return "?";
}

struct OracleSuite {
  std::size_t configurations = 200;
  std::size_t frequencies = 50;
  std::size_t max_sensors = 4;
  double max_squeezing_db = 15.0;
  double spread = 10.0; // parameters drawn within x/spread .. x*spread of the reference sensor
  std::uint64_t seed = 1;
};

struct ScanAxes {
  std::vector<double> sensors{1, 2, 4, 8, 16, 32, 64, 100};
  std::vector<double> powers_w;
  std::vector<double> losses;
  std::vector<double> frequencies_hz;
  std::vector<double> fixed_angles_rad;
};

struct Scenario {
  int schema_version = scenario_schema_version;
  std::string name;
  GammaConvention convention = GammaConvention::half;
  Study study;
  DarkMatterModel dark_matter;
  ObservationPlan plan;
  Calibration calibration;
  std::size_t projection_array_size = 10;
  ScanAxes axes;
  OracleSuite oracle;
  std::string output_format = "csv";
  Warnings warnings;
  json source;
};

struct ScenarioOverrides {
  std::optional<GammaConvention> convention;
  std::optional<double> tolerance;
  std::optional<std::size_t> threads;
  std::optional<std::string> format;
  bool strict = false;
};

namespace detail {

/// Wraps a JSON object and tracks which keys were read so leftovers can be reported.
class Section {
public:
  Section(const json &j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigurationError(path_ + " must be a JSON object");
  }

  bool has(const std::string &key) const { return j_.contains(key); }

  const json &raw(const std::string &key) {
    used_.insert(key);
    return j_.at(key);
  }

  double number(const std::string &key) {
    if (!has(key)) throw ConfigurationError(where(key) + " is required");
    const json &v = raw(key);
    if (!v.is_number()) throw ConfigurationError(where(key) + " must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigurationError(where(key) + " must be finite");
    return d;
  }

  double number(const std::string &key, double fallback) { return has(key) ? number(key) : fallback; }

  std::optional<double> maybe_number(const std::string &key) {
    if (!has(key)) return std::nullopt;
    return number(key);
  }

  std::size_t count(const std::string &key, std::size_t fallback) {
    if (!has(key)) return fallback;
    const json &v = raw(key);
    if (!v.is_number_integer() || v.get<long long>() < 0)
      throw ConfigurationError(where(key) + " must be a non-negative integer");
    return static_cast<std::size_t>(v.get<long long>());
  }

  bool flag(const std::string &key, bool fallback) {
    if (!has(key)) return fallback;
    const json &v = raw(key);
    if (!v.is_boolean()) throw ConfigurationError(where(key) + " must be true or false");
    return v.get<bool>();
  }

  std::string text(const std::string &key, const std::string &fallback) {
    if (!has(key)) return fallback;
    const json &v = raw(key);
    if (!v.is_string()) throw ConfigurationError(where(key) + " must be a string");
    return v.get<std::string>();
  }

  std::optional<Section> child(const std::string &key) {
    if (!has(key)) return std::nullopt;
    return Section(raw(key), where(key));
  }

  std::vector<double> numbers(const std::string &key) {
    const json &v = raw(key);
    if (v.is_array()) {
      std::vector<double> out;
      for (const auto &e : v) {
        if (!e.is_number() || !std::isfinite(e.get<double>()))
          throw ConfigurationError(where(key) + " entries must be finite numbers");
        out.push_back(e.get<double>());
      }
      return out;
    }
    Section range(v, where(key));
    const double lo = range.number("lower");
    const double hi = range.number("upper");
    const std::size_t n = range.count("points", 50);
    const std::string spacing = range.text("spacing", "log");
    range.finish_into(nullptr, true);
    if (spacing == "log") return log_space(lo, hi, n);
    if (spacing == "linear") return lin_space(lo, hi, n);
    throw ConfigurationError(where(key) + ".spacing must be 'log' or 'linear'");
  }

  std::string where(const std::string &key) const { return path_ + "." + key; }

  /// Reports unread keys: an error in strict mode, otherwise a warning.
  void finish_into(Warnings *warnings, bool strict) const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (used_.count(it.key())) continue;
      const std::string msg = "unknown key " + where(it.key());
      if (strict || !warnings) throw ConfigurationError(msg);
      warnings->add(msg);
    }
  }

private:
  const json &j_;
  std::string path_;
  std::set<std::string> used_;
};

inline Sensor read_sensor(Section &s, const Sensor *base, GammaConvention conv, Warnings &w, bool strict) {
  Sensor out = base ? *base : Sensor{};
  auto &osc = out.osc;
  auto &cav = out.cav;
  const bool have_base = base != nullptr;
  auto req = [&](const std::string &key, double current) { return have_base ? s.number(key, current) : s.number(key); };

  osc.mass_kg = req("mass_kg", osc.mass_kg);
  osc.temperature_k = req("temperature_k", osc.temperature_k);
  if (s.has("resonance_hz")) osc.resonance_rad_s = hz_to_rad_s(s.number("resonance_hz"));
  else osc.resonance_rad_s = req("resonance_rad_s", osc.resonance_rad_s);
  if (s.has("quality_factor") && s.has("damping_rad_s"))
    throw ConfigurationError(s.where("quality_factor") + " and damping_rad_s are mutually exclusive");
  if (s.has("quality_factor")) {
    osc = OscillatorParams::from_quality(osc.mass_kg, osc.resonance_rad_s, s.number("quality_factor"),
                                         osc.temperature_k, conv);
  } else if (s.has("damping_rad_s")) {
    osc.damping_rad_s = s.number("damping_rad_s");
  } else if (!have_base) {
    throw ConfigurationError(s.where("quality_factor") + " or damping_rad_s is required");
  } else if (s.has("mass_kg") || s.has("resonance_hz") || s.has("resonance_rad_s")) {
    const double q = base->osc.quality() * (conv == GammaConvention::half ? 1.0 : 2.0);
    osc = OscillatorParams::from_quality(osc.mass_kg, osc.resonance_rad_s, q, osc.temperature_k, conv);
  }

  cav.linewidth_rad_s = req("cavity_linewidth_rad_s", cav.linewidth_rad_s);
  cav.readout_linewidth_rad_s = s.number("readout_linewidth_rad_s", have_base ? cav.readout_linewidth_rad_s : cav.linewidth_rad_s);
  if (s.has("wavelength_m")) cav.laser_rad_s = CavityOpticsParams::laser_from_wavelength(s.number("wavelength_m"));
  else cav.laser_rad_s = req("laser_rad_s", cav.laser_rad_s);
  if (s.has("cavity_length_m")) cav.cavity_length_m = s.number("cavity_length_m");
  if (s.has("vacuum_coupling_rad_s")) {
    cav.vacuum_coupling_rad_s = s.number("vacuum_coupling_rad_s");
  } else if (cav.cavity_length_m) {
    cav.vacuum_coupling_rad_s = fabry_perot_vacuum_coupling(cav.laser_rad_s, *cav.cavity_length_m, osc);
  } else if (!have_base) {
    throw ConfigurationError(s.where("vacuum_coupling_rad_s") + " or cavity_length_m is required");
  }
  cav.detection_efficiency_sq = s.number("detection_efficiency_sq", cav.detection_efficiency_sq);
  out.response_factor = s.number("response_factor", out.response_factor);
  if (s.has("momentum_psd")) out.momentum_psd = s.number("momentum_psd");
  s.finish_into(&w, strict);

  osc.validate();
  cav.with_power(0.0).validate();
  if (out.momentum_psd && *out.momentum_psd < 0.0) throw ConfigurationError("momentum_psd must be non-negative");
  return out;
}

inline SqueezingConfig read_light(Section &s, Warnings &w, bool strict) {
  const std::string policy = s.text("angle_policy", "optimal");
  AnglePolicy p;
  if (policy == "optimal") p = AnglePolicy::frequency_optimal;
  else if (policy == "fixed") p = AnglePolicy::fixed;
  else if (policy == "vacuum") p = AnglePolicy::vacuum;
  else throw ConfigurationError(s.where("angle_policy") + " must be optimal, fixed or vacuum");
  if (s.has("squeezing_db") && s.has("squeezed_photons"))
    throw ConfigurationError(s.where("squeezing_db") + " and squeezed_photons are mutually exclusive");
  const double angle = s.number("angle_rad", 0.0);
  SqueezingConfig out;
  if (s.has("squeezed_photons")) out = SqueezingConfig::from_photons(s.number("squeezed_photons"), p, angle);
  else out = SqueezingConfig::from_db(s.number("squeezing_db", 0.0), p, angle);
  s.finish_into(&w, strict);
  out.validate();
  return out;
}

} // namespace detail

/// Builds a scenario from parsed JSON, applying command-line overrides.
inline Scenario parse_scenario(const json &root, const ScenarioOverrides &ov = {}) {
  Scenario sc;
  sc.source = root;
  const bool strict = ov.strict;
  detail::Section top(root, "scenario");
  sc.schema_version = static_cast<int>(top.count("schema_version", scenario_schema_version));
  if (sc.schema_version != scenario_schema_version)
    throw ConfigurationError("unsupported schema_version " + std::to_string(sc.schema_version));
  sc.name = top.text("name", "scenario");
  sc.convention = ov.convention.value_or(parse_gamma_convention(top.text("gamma_convention", "half")));

  auto sensor_sec = top.child("sensor");
  if (!sensor_sec) throw ConfigurationError("scenario.sensor is required");
  sc.study.sensor = detail::read_sensor(*sensor_sec, nullptr, sc.convention, sc.warnings, strict);

  if (auto a = top.child("array")) {
    sc.study.sensors = a->count("sensors", 1);
    sc.study.power_per_sensor = a->flag("power_per_sensor", true);
    sc.study.power_w = a->number("power_w", 0.0);
    sc.study.combining = parse_combining_policy(a->text("combining", "matched"));
    if (a->has("members")) {
      const json &list = a->raw("members");
      if (!list.is_array() || list.empty()) throw ConfigurationError("scenario.array.members must be a non-empty list");
      for (std::size_t i = 0; i < list.size(); ++i) {
        detail::Section m(list[i], "scenario.array.members[" + std::to_string(i) + "]");
        sc.study.members.push_back(detail::read_sensor(m, &sc.study.sensor, sc.convention, sc.warnings, strict));
      }
      if (a->has("sensors") && sc.study.sensors != sc.study.members.size())
        throw ConfigurationError("scenario.array.sensors disagrees with the number of members");
      sc.study.sensors = sc.study.members.size();
    }
    if (a->has("dividing_weights")) {
      for (double v : a->numbers("dividing_weights")) sc.study.dividing.emplace_back(v, 0.0);
      if (!a->has("sensors") && sc.study.members.empty()) sc.study.sensors = sc.study.dividing.size();
    }
    a->finish_into(&sc.warnings, strict);
  }
  if (sc.study.sensors == 0) throw ConfigurationError("scenario.array.sensors must be positive");
  if (!(sc.study.power_w > 0.0)) throw ConfigurationError("scenario.array.power_w must be positive");

  if (auto l = top.child("light")) sc.study.light = detail::read_light(*l, sc.warnings, strict);
  else sc.study.light = SqueezingConfig::vacuum();

  if (auto d = top.child("dark_matter")) {
    sc.dark_matter.density_kg_m3 = gev_per_cm3_to_kg_per_m3(d->number("density_gev_cm3", 0.4));
    sc.dark_matter.linewidth_fraction = d->number("linewidth_fraction", 1e-6);
    if (d->has("linewidth_rad_s")) sc.dark_matter.linewidth_override_rad_s = d->number("linewidth_rad_s");
    sc.projection_array_size = d->count("array_sensors", 10);
    if (auto c = d->child("calibration")) {
      const std::string anchor = c->text("anchor", "thermal_floor");
      if (anchor == "thermal_floor") sc.calibration.anchor = Calibration::Anchor::thermal_floor;
      else if (anchor == "acceleration") sc.calibration.anchor = Calibration::Anchor::acceleration;
      else if (anchor == "direct") sc.calibration.anchor = Calibration::Anchor::direct;
      else throw ConfigurationError(c->where("anchor") + " must be thermal_floor, acceleration or direct");
      sc.calibration.coupling = c->number("coupling", 4e-25);
      sc.calibration.frequency_hz = c->number("frequency_hz", 0.0);
      if (sc.calibration.anchor == Calibration::Anchor::acceleration)
        sc.calibration.acceleration_asd = c->number("acceleration_asd_m_s2_rthz");
      if (sc.calibration.anchor == Calibration::Anchor::direct)
        sc.calibration.material_factor = c->number("material_factor");
      sc.calibration.note = c->text("note", "");
      c->finish_into(&sc.warnings, strict);
    }
    d->finish_into(&sc.warnings, strict);
  }
  if (!(sc.calibration.coupling > 0.0)) throw ConfigurationError("calibration coupling must be positive");
  if (sc.projection_array_size == 0) throw ConfigurationError("dark_matter.array_sensors must be positive");

  if (auto o = top.child("observation")) {
    sc.plan.observation_time_s = o->number("time_s", constants::seconds_per_year);
    if (o->has("integration_time_s")) sc.plan.integration_time_s = o->number("integration_time_s");
    sc.plan.threshold = o->number("threshold", 1.0);
    o->finish_into(&sc.warnings, strict);
  }

  auto &span = sc.study.span;
  if (auto g = top.child("grid")) {
    span.lower_rad_s = g->maybe_number("lower_rad_s");
    span.upper_rad_s = g->maybe_number("upper_rad_s");
    span.integration.relative_tolerance = g->number("tolerance", span.integration.relative_tolerance);
    span.integration.max_evaluations = g->count("max_evaluations", span.integration.max_evaluations);
    span.grid.points_per_decade = g->number("points_per_decade", span.grid.points_per_decade);
    span.grid.shell_ratio = g->number("shell_ratio", span.grid.shell_ratio);
    g->finish_into(&sc.warnings, strict);
  }
  if (ov.tolerance) span.integration.relative_tolerance = *ov.tolerance;
  if (!(span.integration.relative_tolerance > 0.0)) throw ConfigurationError("grid tolerance must be positive");
  if (!(span.grid.points_per_decade >= 1.0)) throw ConfigurationError("grid.points_per_decade must be >= 1");
  if (!(span.grid.shell_ratio > 1.0)) throw ConfigurationError("grid.shell_ratio must exceed 1");

  if (auto s = top.child("scan")) {
    if (s->has("sensors")) sc.axes.sensors = s->numbers("sensors");
    if (s->has("power_w")) sc.axes.powers_w = s->numbers("power_w");
    if (s->has("loss")) sc.axes.losses = s->numbers("loss");
    if (s->has("frequency_hz")) sc.axes.frequencies_hz = s->numbers("frequency_hz");
    if (s->has("fixed_angles_rad")) sc.axes.fixed_angles_rad = s->numbers("fixed_angles_rad");
    s->finish_into(&sc.warnings, strict);
  }

  if (auto o = top.child("oracle")) {
    sc.oracle.configurations = o->count("configurations", sc.oracle.configurations);
    sc.oracle.frequencies = o->count("frequencies", sc.oracle.frequencies);
    sc.oracle.max_sensors = o->count("max_sensors", sc.oracle.max_sensors);
    sc.oracle.max_squeezing_db = o->number("max_squeezing_db", sc.oracle.max_squeezing_db);
    sc.oracle.spread = o->number("spread", sc.oracle.spread);
    sc.oracle.seed = o->count("seed", sc.oracle.seed);
    o->finish_into(&sc.warnings, strict);
    if (sc.oracle.max_sensors == 0 || !(sc.oracle.spread >= 1.0))
      throw ConfigurationError("oracle.max_sensors must be positive and oracle.spread >= 1");
  }

  if (auto o = top.child("output")) {
    sc.output_format = o->text("format", "csv");
    o->finish_into(&sc.warnings, strict);
  }
  if (ov.format) sc.output_format = *ov.format;
  if (sc.output_format != "csv" && sc.output_format != "json")
    throw ConfigurationError("output format must be csv or json");
  sc.study.threads = ov.threads.value_or(1);
  if (sc.study.threads == 0) throw ConfigurationError("threads must be positive");

  top.finish_into(&sc.warnings, strict);

  // Network-level checks happen here so a malformed array never reaches a computation.
  const ArrayConfig cfg = sc.study.array();
  validate_network(cfg);
  sc.dark_matter.at(sc.study.sensor.osc.resonance_rad_s).validate();
  return sc;
}

inline json read_json_text(const std::string &text, const std::string &origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error &e) {
    throw ConfigurationError(origin + ": " + e.what());
  }
}

inline std::string read_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigurationError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string &data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// Material factor for the scenario's calibration rule.
inline double calibrated_material_factor(const Scenario &sc) {
  const auto &cal = sc.calibration;
  if (cal.anchor == Calibration::Anchor::direct) return cal.material_factor;
  const auto &osc = sc.study.sensor.osc;
  const double omega = cal.frequency_hz > 0.0 ? hz_to_rad_s(cal.frequency_hz) : osc.resonance_rad_s;
  const double noise = cal.anchor == Calibration::Anchor::acceleration
                           ? force_psd_from_acceleration(cal.acceleration_asd, osc.mass_kg)
                           : 4.0 * constants::hbar * osc.mass_kg * osc.damping_rad_s * osc.resonance_rad_s *
                                 sc.study.sensor.bath_psd();
  const double gain = sc.study.sensor.response_factor * sc.study.sensor.response_factor;
  return calibrate_material_factor(cal.coupling, noise / gain, sc.dark_matter.at(omega), sc.plan);
}

} // namespace omsense
