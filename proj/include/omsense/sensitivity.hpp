#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "omsense/array.hpp"
#include "omsense/core.hpp"
#include "omsense/quadrature.hpp"

namespace omsense {

struct DarkMatterModel {
  double coupling = 1.0;
  double density_kg_m3 = gev_per_cm3_to_kg_per_m3(0.4);
  double material_factor = 0.0; // N per unit g sqrt(rho)
  double compton_rad_s = 0.0;
  double linewidth_fraction = 1e-6;
  std::optional<double> linewidth_override_rad_s;

  double linewidth() const { return linewidth_override_rad_s.value_or(linewidth_fraction * compton_rad_s); }
  double force_amplitude() const { return coupling * std::sqrt(density_kg_m3) * material_factor; }
  double drive_psd() const {
    const double f = force_amplitude();
    return f * f / linewidth();
  }
  DarkMatterModel at(double compton) const {
    DarkMatterModel out = *this;
    out.compton_rad_s = compton;
    return out;
  }
  DarkMatterModel with_coupling(double g) const {
    DarkMatterModel out = *this;
    out.coupling = g;
    return out;
  }

  void validate() const {
    if (!(density_kg_m3 > 0.0)) throw ConfigurationError("dark-matter density must be positive");
    if (!(linewidth() > 0.0)) throw ConfigurationError("dark-matter linewidth must be positive");
    if (!(material_factor >= 0.0)) throw ConfigurationError("material factor must be non-negative");
  }
};

struct ObservationPlan {
  double observation_time_s = constants::seconds_per_year;
  std::optional<double> integration_time_s; // defaults to 1 / linewidth
  double threshold = 1.0;

  double integration_time(const DarkMatterModel &dm) const {
    return integration_time_s.value_or(1.0 / dm.linewidth());
  }

  void validate(const DarkMatterModel &dm, Warnings *warnings = nullptr) const {
    if (!(observation_time_s > 0.0)) throw ConfigurationError("observation time must be positive");
    if (!(threshold > 0.0)) throw ConfigurationError("detection threshold must be positive");
    const double t_int = integration_time(dm);
    if (!(t_int > 0.0)) throw ConfigurationError("integration time must be positive");
    if (t_int > observation_time_s) throw ConfigurationError("integration time exceeds observation time");
    if (!warnings) return;
    char buf[200];
    if (t_int > 1.0 / dm.linewidth() * (1.0 + 1e-12)) {
      std::snprintf(buf, sizeof buf,
                    "integration time %.6g s exceeds the coherence time %.6g s; fewer independent repetitions",
                    t_int, 1.0 / dm.linewidth());
      warnings->add(buf);
    }
    if (dm.linewidth() * observation_time_s < 1.0) {
      std::snprintf(buf, sizeof buf, "linewidth x observation time = %.6g < 1; sqrt law does not apply",
                    dm.linewidth() * observation_time_s);
      warnings->add(buf);
    }
  }
};

/// SNR = (S_dr / S_noise) sqrt(linewidth * T_O).
inline double snr_observation(double drive_psd, double noise_psd, const DarkMatterModel &dm,
                              const ObservationPlan &plan) {
  if (!(noise_psd > 0.0)) throw ConfigurationError("noise PSD must be positive");
  return drive_psd / noise_psd * std::sqrt(dm.linewidth() * plan.observation_time_s);
}

/// Coupling at which the SNR reaches the plan threshold. `noise_psd` is force-referred
/// (already divided by the signal gain of the detector).
inline double min_detectable_coupling(double noise_psd, const DarkMatterModel &dm, const ObservationPlan &plan) {
  if (!(noise_psd > 0.0)) throw ConfigurationError("noise PSD must be positive");
  if (!(dm.material_factor > 0.0)) throw ConfigurationError("material factor must be calibrated");
  const double g_ref = dm.coupling > 0.0 ? dm.coupling : 1.0;
  const double snr_ref = snr_observation(dm.with_coupling(g_ref).drive_psd(), noise_psd, dm, plan);
  return g_ref * std::sqrt(plan.threshold / snr_ref);
}

/// Material factor that puts the detection threshold at `target_coupling` for the given noise.
inline double calibrate_material_factor(double target_coupling, double noise_psd, const DarkMatterModel &dm,
                                        const ObservationPlan &plan) {
  if (!(target_coupling > 0.0) || !(noise_psd > 0.0))
    throw ConfigurationError("calibration needs positive coupling and noise");
  const double root = std::sqrt(dm.linewidth() * plan.observation_time_s);
  return std::sqrt(plan.threshold * noise_psd * dm.linewidth() / (dm.density_kg_m3 * root)) / target_coupling;
}

inline double acceleration_asd(double force_psd, double mass_kg) { return std::sqrt(force_psd) / mass_kg; }
inline double force_psd_from_acceleration(double asd, double mass_kg) { return asd * asd * mass_kg * mass_kg; }

/// Displacement ASD corresponding to a force PSD seen through the mechanical response.
inline double displacement_asd(double force_psd, const OscillatorParams &osc, double omega) {
  return std::sqrt(force_psd) * mechanical_susceptibility(osc, omega).magnitude() /
         (osc.mass_kg * osc.resonance_rad_s);
}

struct Detector {
  ArrayConfig array;
  SqueezingConfig light;
};

inline double detector_noise(const Detector &d, double omega) {
  return array_noise_for_light(d.array, d.light, omega).total;
}

/// |sum_n W_0n M_n|^2: signal PSD per unit common drive PSD.
inline double signal_gain(const ArrayConfig &cfg) { return array_signal_psd(cfg, 1.0); }

inline double force_referred_noise(const Detector &d, double omega) {
  const double gain = signal_gain(d.array);
  if (!(gain > 0.0)) throw ConfigurationError("detector has no signal response");
  return detector_noise(d, omega) / gain;
}

struct SpanSettings {
  std::optional<double> lower_rad_s;
  std::optional<double> upper_rad_s;
  GridOptions grid;
  IntegrationOptions integration;
};

/// [Omega / 1e3, min(1e3 Omega, kappa / 10)] over all sensors.
inline std::pair<double, double> default_span(const ArrayConfig &cfg) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  double top = 0.0;
  for (const auto &s : cfg.sensors) {
    lo = std::min(lo, s.osc.resonance_rad_s / 1e3);
    top = std::max(top, s.osc.resonance_rad_s * 1e3);
    hi = std::min(hi, s.cav.linewidth_rad_s / 10.0);
  }
  return {lo, std::min(top, hi)};
}

inline FrequencyGrid detector_grid(const ArrayConfig &cfg, const SpanSettings &span) {
  const auto [lo, hi] = default_span(cfg);
  std::vector<Resonance> res;
  for (const auto &s : cfg.sensors) {
    const Resonance r{s.osc.resonance_rad_s, s.osc.damping_rad_s};
    bool seen = false;
    for (const auto &q : res) seen = seen || (q.omega_rad_s == r.omega_rad_s && q.linewidth_rad_s == r.linewidth_rad_s);
    if (!seen) res.push_back(r);
  }
  return resonance_refined_grid(res, span.lower_rad_s.value_or(lo), span.upper_rad_s.value_or(hi), span.grid);
}

/// Throws when a declared resonance has fewer than 64 grid points within 10 linewidths.
inline void check_resonance_coverage(const FrequencyGrid &grid) {
  for (const auto &r : grid.resonances)
    if (grid.points_within(r.omega_rad_s, 10.0 * r.linewidth_rad_s) < 64)
      throw ConfigurationError("frequency grid under-resolves a declared resonance");
}

/// Integral of (S_dr / S_noise)^2 d omega / pi over the grid span.
inline IntegrationResult integrated_sensitivity(const std::function<double(double)> &signal_psd,
                                                const std::function<double(double)> &noise_psd,
                                                const FrequencyGrid &grid, const IntegrationOptions &opt = {}) {
  check_resonance_coverage(grid);
  auto integrand = [&](double w) {
    const double n = noise_psd(w);
    if (!(n > 0.0)) throw ConfigurationError("noise PSD must be positive on the grid");
    const double ratio = signal_psd(w) / n;
    return ratio * ratio / std::numbers::pi;
  };
  return integrate(integrand, grid, opt);
}

/// Coherent integrated sensitivity of a detector for a flat drive PSD.
inline IntegrationResult detector_sensitivity(const Detector &d, const SpanSettings &span,
                                              double drive_psd = 1.0) {
  const double gain = signal_gain(d.array) * drive_psd;
  return integrated_sensitivity([gain](double) { return gain; },
                                [&d](double w) { return detector_noise(d, w); }, detector_grid(d.array, span),
                                span.integration);
}

/// Single sensor k of an array operated on its own share |w_k0|^2 P_tot with the same light.
inline Detector standalone(const ArrayConfig &cfg, std::size_t k, const SqueezingConfig &light) {
  Detector d;
  d.array.sensors = {cfg.sensors[k]};
  d.array.dividing = {complex(1.0, 0.0)};
  d.array.combining = {complex(1.0, 0.0)};
  d.array.total_power_w = std::norm(cfg.dividing[k]) * cfg.total_power_w;
  d.light = light;
  return d;
}

/// Sum of the standalone integrated sensitivities of every sensor (power-level combination).
inline double incoherent_sensitivity(const Detector &d, const SpanSettings &span, double drive_psd = 1.0) {
  if (d.array.all_identical() && !d.array.dividing.empty()) {
    bool equal_share = true;
    for (const auto &w : d.array.dividing) equal_share = equal_share && std::norm(w) == std::norm(d.array.dividing[0]);
    if (equal_share)
      return static_cast<double>(d.array.size()) *
             detector_sensitivity(standalone(d.array, 0, d.light), span, drive_psd).value;
  }
  double total = 0.0;
  for (std::size_t k = 0; k < d.array.size(); ++k)
    total += detector_sensitivity(standalone(d.array, k, d.light), span, drive_psd).value;
  return total;
}

/// Reference SQL integral S^2 / (4 gamma (hbar m Omega)^2) obtained from the SQL noise
/// over the whole positive axis.
inline double sql_integrated_sensitivity_analytic(const OscillatorParams &osc, double drive_psd) {
  const double h = constants::hbar * osc.mass_kg * osc.resonance_rad_s;
  return drive_psd * drive_psd / (4.0 * osc.damping_rad_s * h * h);
}

/// Constant 4 gamma S^2 / (hbar m Omega gamma)^2 built on the on-resonance SQL hbar m Omega gamma / 2.
inline double sql_integrated_sensitivity_reference(const OscillatorParams &osc, double drive_psd) {
  const double h = constants::hbar * osc.mass_kg * osc.resonance_rad_s * osc.damping_rad_s;
  return 4.0 * osc.damping_rad_s * drive_psd * drive_psd / (h * h);
}

/// Minimizes the detector noise at `omega` over the total power on a log scale.
inline MinimizeResult optimal_power_noise(const Detector &d, double omega, double log10_lower = -12.0,
                                          double log10_upper = 3.0) {
  auto f = [&](double lp) {
    Detector t = d;
    t.array.total_power_w = std::pow(10.0, lp);
    return detector_noise(t, omega);
  };
  auto r = scan_then_refine(f, log10_lower, log10_upper, 301, 1e-10);
  r.x = std::pow(10.0, r.x);
  return r;
}

// ---------------------------------------------------------------------------------------
// Scans

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> failures;
  bool nonconverged = false;
};

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Results land by index, so the
/// output does not depend on scheduling. NumericalError is recorded per point; any other
/// exception is rethrown after all workers finish.
template <class Fn>
void parallel_points(std::size_t n, std::size_t threads, Fn &&fn, std::vector<std::string> &errors,
                     std::vector<bool> &numerical) {
  errors.assign(n, {});
  numerical.assign(n, false);
  std::vector<std::exception_ptr> fatal(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (const NumericalError &e) {
        errors[i] = e.what();
        numerical[i] = true;
      } catch (...) {
        fatal[i] = std::current_exception();
      }
    }
  };
  const std::size_t count = std::max<std::size_t>(1, std::min(threads, n));
  if (count == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
    for (auto &t : pool) t.join();
  }
  for (auto &f : fatal)
    if (f) std::rethrow_exception(f);
}

/// Base description shared by the scans: a reference sensor replicated M times.
struct Study {
  Sensor sensor;
  std::size_t sensors = 1;
  double power_w = 0.0;          // per sensor when power_per_sensor, else total
  bool power_per_sensor = true;
  CombiningPolicy combining = CombiningPolicy::matched;
  SqueezingConfig light;         // the squeezed configuration under study
  SpanSettings span;
  std::size_t threads = 1;

  std::vector<Sensor> members;   // explicit heterogeneous sensors; empty means M copies of `sensor`
  std::vector<complex> dividing; // explicit dividing weights; empty means uniform

  bool customized() const { return !members.empty() || !dividing.empty(); }

  ArrayConfig array(std::size_t m) const {
    if (!customized()) return make_identical_array(sensor, m, power_w, power_per_sensor, combining);
    ArrayConfig cfg;
    cfg.sensors = members.empty() ? std::vector<Sensor>(sensors, sensor) : members;
    if (m != cfg.size()) throw ConfigurationError("an explicitly configured array cannot be resized");
    cfg.dividing = dividing.empty() ? uniform_weights(m) : dividing;
    if (cfg.dividing.size() != m) throw ConfigurationError("dividing weights do not match the number of sensors");
    cfg.total_power_w = power_per_sensor ? power_w * static_cast<double>(m) : power_w;
    cfg.combining.assign(m, complex(0.0, 0.0));
    validate_network(cfg);
    cfg.combining = combining_weights(cfg, combining, cfg.sensors.front().osc.resonance_rad_s);
    return cfg;
  }

  /// The base sensor on its own, ignoring any explicit array layout.
  Study reference() const {
    Study s = *this;
    s.members.clear();
    s.dividing.clear();
    s.sensors = 1;
    return s;
  }

  Study with_efficiency(double eta_sq) const {
    Study s = *this;
    s.sensor.cav.detection_efficiency_sq = eta_sq;
    for (auto &m : s.members) m.cav.detection_efficiency_sq = eta_sq;
    return s;
  }

  ArrayConfig array() const { return array(sensors); }
  Detector classical(std::size_t m) const { return {array(m), SqueezingConfig::vacuum()}; }
  Detector squeezed(std::size_t m) const { return {array(m), light}; }
};

namespace detail {
template <class RowFn>
Table run_scan(std::vector<std::string> columns, const std::vector<double> &values, std::size_t threads,
               RowFn row_fn, const char *axis) {
  Table t;
  t.columns = std::move(columns);
  t.rows.assign(values.size(), std::vector<double>(t.columns.size(), std::numeric_limits<double>::quiet_NaN()));
  std::vector<std::string> errors;
  std::vector<bool> numerical;
  parallel_points(values.size(), threads, [&](std::size_t i) { t.rows[i] = row_fn(values[i]); }, errors, numerical);
  for (std::size_t i = 0; i < values.size(); ++i) {
    t.rows[i][0] = values[i];
    if (numerical[i]) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%s=%.17g: ", axis, values[i]);
      t.failures.push_back(buf + errors[i]);
      t.nonconverged = true;
    }
  }
  return t;
}
} // namespace detail

/// Integrated sensitivity versus number of sensors.
inline Table scaling_scan(const Study &study, const std::vector<double> &sizes) {
  return detail::run_scan(
      {"sensors", "single", "classical_incoherent", "classical_coherent", "squeezed_coherent", "squeezed_over_classical"},
      sizes, study.threads,
      [&](double mv) {
        const auto m = static_cast<std::size_t>(mv);
        if (m == 0 || static_cast<double>(m) != mv) throw ConfigurationError("sensor counts must be positive integers");
        const double single = detector_sensitivity(study.reference().classical(1), study.span).value;
        const double incoh = incoherent_sensitivity(study.classical(m), study.span);
        const double coh = detector_sensitivity(study.classical(m), study.span).value;
        const double sq = detector_sensitivity(study.squeezed(m), study.span).value;
        return std::vector<double>{mv, single, incoh, coh, sq, sq / coh};
      },
      "sensors");
}

/// Integrated sensitivity versus laser power (per sensor or total, as in the study).
inline Table power_scan(const Study &study, const std::vector<double> &powers,
                        const std::vector<double> &fixed_angles) {
  std::vector<std::string> cols{"power_w", "classical", "squeezed_optimal_angle"};
  for (double a : fixed_angles) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "squeezed_fixed_%.6g_rad", a);
    cols.emplace_back(buf);
  }
  return detail::run_scan(
      cols, powers, study.threads,
      [&](double p) {
        Study s = study;
        s.power_w = p;
        std::vector<double> row{p, detector_sensitivity(s.classical(s.sensors), s.span).value};
        Detector opt = s.squeezed(s.sensors);
        opt.light.policy = AnglePolicy::frequency_optimal;
        row.push_back(detector_sensitivity(opt, s.span).value);
        for (double a : fixed_angles) {
          Detector fixed = s.squeezed(s.sensors);
          fixed.light.policy = AnglePolicy::fixed;
          fixed.light.angle_rad = a;
          row.push_back(detector_sensitivity(fixed, s.span).value);
        }
        return row;
      },
      "power_w");
}

/// Integrated sensitivity versus detection loss 1 - eta^2.
inline Table loss_scan(const Study &study, const std::vector<double> &losses) {
  return detail::run_scan(
      {"loss", "classical", "squeezed", "squeezed_over_classical"}, losses, study.threads,
      [&](double loss) {
        if (!(loss >= 0.0 && loss < 1.0)) throw ConfigurationError("loss must lie in [0, 1)");
        const Study s = study.with_efficiency(1.0 - loss);
        const double c = detector_sensitivity(s.classical(s.sensors), s.span).value;
        const double q = detector_sensitivity(s.squeezed(s.sensors), s.span).value;
        return std::vector<double>{loss, c, q, q / c};
      },
      "loss");
}

/// Noise spectra versus frequency for the classical and squeezed detector.
inline Table noise_table(const Study &study, const std::vector<double> &omegas) {
  const Detector c = study.classical(study.sensors);
  const Detector q = study.squeezed(study.sensors);
  const double mass = study.sensor.osc.mass_kg;
  const double gain = signal_gain(c.array);
  return detail::run_scan(
      {"omega_rad_s", "frequency_hz", "classical_shot", "classical_back_action", "classical_correlation",
       "classical_residual", "classical_loss", "thermal", "classical_total", "squeezed_total", "squeezing_angle_rad",
       "sql_total", "classical_accel_asd", "squeezed_accel_asd", "sql_accel_asd"},
      omegas, study.threads,
      [&](double w) {
        const auto b = array_noise_psd(c.array, QuadraturePsdTriple::vacuum(), w);
        const auto sums = coherent_sums(q.array.dividing, q.array.combining, sensor_terms(q.array, w));
        const double theta = resolve_angle(q.light, sums);
        const double sq = combine_noise(sums, input_quadrature_psds(q.light, theta)).total;
        const double sql = array_sql_psd(c.array, w) + b.thermal;
        return std::vector<double>{w,
                                   rad_s_to_hz(w),
                                   b.shot,
                                   b.back_action,
                                   b.correlation,
                                   b.residual_vacuum,
                                   b.loss,
                                   b.thermal,
                                   b.total,
                                   sq,
                                   theta,
                                   sql,
                                   acceleration_asd(b.total / gain, mass),
                                   acceleration_asd(sq / gain, mass),
                                   acceleration_asd(sql / gain, mass)};
      },
      "omega_rad_s");
}

struct ProjectionSetup {
  DarkMatterModel dm;     // material factor already calibrated
  ObservationPlan plan;
  std::size_t array_size = 10;
};

/// Minimum detectable coupling versus dark-matter frequency for the reference detectors.
inline Table dm_projection(const Study &study, const ProjectionSetup &setup, const std::vector<double> &omegas) {
  const std::size_t m = setup.array_size;
  const Detector single = study.reference().classical(1);
  const Detector coh = study.classical(m);
  Detector sq = study.squeezed(m);
  sq.light.policy = AnglePolicy::frequency_optimal;
  const double gain_single = signal_gain(single.array);
  const double gain_coh = signal_gain(coh.array);
  return detail::run_scan(
      {"omega_rad_s", "frequency_hz", "single_classical", "single_thermal_floor", "classical_incoherent", "classical_coherent",
       "sql_coherent", "squeezed_coherent", "squeezed_power_optimized", "optimal_power_w"},
      omegas, study.threads,
      [&](double w) {
        const DarkMatterModel dm = setup.dm.at(w);
        auto g = [&](double noise) { return min_detectable_coupling(noise, dm, setup.plan); };
        const double n1 = detector_noise(single, w) / gain_single;
        const double floor1 = array_noise_psd(single.array, QuadraturePsdTriple::vacuum(), w).thermal / gain_single;
        // Independent identical sensors: SNR_eff = sqrt(sum SNR_k^2) = sqrt(M) SNR_1.
        const double n_incoh = n1 / std::sqrt(static_cast<double>(m));
        const double thermal = array_noise_psd(coh.array, QuadraturePsdTriple::vacuum(), w).thermal;
        const auto best = optimal_power_noise(sq, w);
        return std::vector<double>{w,
                                   rad_s_to_hz(w),
                                   g(n1),
                                   g(floor1),
                                   g(n_incoh),
                                   g(detector_noise(coh, w) / gain_coh),
                                   g((array_sql_psd(coh.array, w) + thermal) / gain_coh),
                                   g(detector_noise(sq, w) / gain_coh),
                                   g(best.value / gain_coh),
                                   best.x};
      },
      "omega_rad_s");
}

inline std::vector<double> log_space(double lower, double upper, std::size_t n) {
  if (!(lower > 0.0) || !(upper >= lower) || n == 0) throw ConfigurationError("log_space needs 0 < lower <= upper, n > 0");
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = n == 1 ? lower : lower * std::pow(upper / lower, static_cast<double>(i) / static_cast<double>(n - 1));
  return out;
}

inline std::vector<double> lin_space(double lower, double upper, std::size_t n) {
  if (!(upper >= lower) || n == 0) throw ConfigurationError("lin_space needs lower <= upper, n > 0");
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = n == 1 ? lower : lower + (upper - lower) * static_cast<double>(i) / static_cast<double>(n - 1);
  return out;
}

} // namespace omsense
