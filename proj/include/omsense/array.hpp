#pragma once

// Network algebra for M optomechanical sensors read out by one laser mode that is
// split by a passive beam-splitter array (dividing weights w_k0) and recombined in
// post-processing (combining weights W_0k).

#include <cmath>
#include <complex>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "omsense/core.hpp"
#include "omsense/spectra.hpp"

namespace omsense {

struct Sensor {
  OscillatorParams osc;
  CavityOpticsParams cav; // input_power_w is ignored inside an array
  double response_factor = 1.0;
  std::optional<double> momentum_psd; // defaults to k_B T / (hbar Omega)

  double bath_psd() const { return momentum_psd.value_or(thermal_momentum_psd(osc)); }
};

inline bool identical(const Sensor &a, const Sensor &b) {
  const auto &oa = a.osc, &ob = b.osc;
  const auto &ca = a.cav, &cb = b.cav;
  return oa.mass_kg == ob.mass_kg && oa.resonance_rad_s == ob.resonance_rad_s &&
         oa.damping_rad_s == ob.damping_rad_s && oa.temperature_k == ob.temperature_k &&
         ca.linewidth_rad_s == cb.linewidth_rad_s &&
         ca.readout_linewidth_rad_s == cb.readout_linewidth_rad_s &&
         ca.vacuum_coupling_rad_s == cb.vacuum_coupling_rad_s && ca.laser_rad_s == cb.laser_rad_s &&
         ca.detection_efficiency_sq == cb.detection_efficiency_sq &&
         a.response_factor == b.response_factor && a.bath_psd() == b.bath_psd();
}

enum class CombiningPolicy { matched, uniform, inverse_variance };

inline std::string to_string(CombiningPolicy p) {
  switch (p) {
  case CombiningPolicy::matched: return "matched";
  case CombiningPolicy::uniform: return "uniform";
  case CombiningPolicy::inverse_variance: return "inverse_variance";
  }
  return "?";
}

inline CombiningPolicy parse_combining_policy(const std::string &s) {
  if (s == "matched") return CombiningPolicy::matched;
  if (s == "uniform") return CombiningPolicy::uniform;
  if (s == "inverse_variance") return CombiningPolicy::inverse_variance;
  throw ConfigurationError("unknown combining policy '" + s + "'");
}

struct ArrayConfig {
  std::vector<Sensor> sensors;
  std::vector<complex> dividing;  // w_k0
  std::vector<complex> combining; // W_0k
  double total_power_w = 0.0;

  std::size_t size() const { return sensors.size(); }
  bool all_identical() const {
    for (const auto &s : sensors)
      if (!identical(s, sensors.front())) return false;
    return true;
  }
};

inline std::vector<complex> uniform_weights(std::size_t m) {
  return std::vector<complex>(m, complex(1.0 / std::sqrt(static_cast<double>(m)), 0.0));
}

/// Combining weights W = w* (matched), 1/sqrt(M) (uniform), or proportional to
/// M_k / S_k with S_k the classical per-sensor noise at `reference_omega`, normalized to
/// sum |W|^2 = 1 (inverse_variance).
inline std::vector<complex> combining_weights(const ArrayConfig &cfg, CombiningPolicy policy,
                                              double reference_omega = 0.0) {
  const std::size_t m = cfg.size();
  std::vector<complex> out(m);
  switch (policy) {
  case CombiningPolicy::matched:
    for (std::size_t k = 0; k < m; ++k) out[k] = std::conj(cfg.dividing[k]);
    return out;
  case CombiningPolicy::uniform:
    return uniform_weights(m);
  case CombiningPolicy::inverse_variance: {
    double norm = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const auto &s = cfg.sensors[k];
      const double share = std::norm(cfg.dividing[k]);
      const double noise =
          share > 0.0 ? single_sensor_noise_psd(s.osc, s.cav.with_power(share * cfg.total_power_w),
                                                QuadraturePsdTriple::vacuum(), reference_omega,
                                                s.bath_psd())
                      : 0.0;
      const double weight = noise > 0.0 ? s.response_factor / noise : 0.0;
      out[k] = weight;
      norm += weight * weight;
    }
    if (!(norm > 0.0)) throw ConfigurationError("inverse-variance weights are all zero");
    for (auto &v : out) v /= std::sqrt(norm);
    return out;
  }
  }
  return out;
}

/// M identical copies of `sensor` with uniform dividing weights. The total power is
/// `power_w` times M when `power_per_sensor` is set, otherwise `power_w`.
inline ArrayConfig make_identical_array(const Sensor &sensor, std::size_t m, double power_w,
                                        bool power_per_sensor = true,
                                        CombiningPolicy policy = CombiningPolicy::matched) {
  if (m == 0) throw ConfigurationError("array needs at least one sensor");
  ArrayConfig cfg;
  cfg.sensors.assign(m, sensor);
  cfg.dividing = uniform_weights(m);
  cfg.total_power_w = power_per_sensor ? power_w * static_cast<double>(m) : power_w;
  cfg.combining = combining_weights(cfg, policy, sensor.osc.resonance_rad_s);
  return cfg;
}

struct NetworkDiagnostics {
  double normalization_error = 0.0; // |sum |w|^2 - 1|
  bool phases_aligned = true;       // every arg(w_k0) == 0
  bool matched = false;             // W proportional to w*
  bool routing_degenerate = false;  // a single sensor receives all the light
  Warnings warnings;
};

/// Rejects non-normalized or malformed networks; reports phase alignment and matching.
inline NetworkDiagnostics validate_network(const ArrayConfig &cfg) {
  const std::size_t m = cfg.size();
  if (m == 0) throw ConfigurationError("array needs at least one sensor");
  if (cfg.dividing.size() != m || cfg.combining.size() != m)
    throw ConfigurationError("weight vectors must have one entry per sensor");
  if (!(cfg.total_power_w >= 0.0)) throw ConfigurationError("total power must be non-negative");
  for (const auto &s : cfg.sensors) {
    s.osc.validate();
    s.cav.with_power(cfg.total_power_w).validate();
    if (s.momentum_psd && !(*s.momentum_psd >= 0.0))
      throw ConfigurationError("mechanical bath spectrum must be non-negative");
  }

  NetworkDiagnostics d;
  double norm = 0.0;
  std::size_t lit = 0;
  for (const auto &w : cfg.dividing) {
    norm += std::norm(w);
    if (std::abs(w) > 0.0) ++lit;
    if (w.imag() != 0.0 || w.real() < 0.0) d.phases_aligned = false;
  }
  d.normalization_error = std::abs(norm - 1.0);
  if (d.normalization_error > 1e-10)
    throw ConfigurationError("dividing weights are not normalized: sum |w|^2 = " + std::to_string(norm));
  d.routing_degenerate = lit == 1;
  if (!d.phases_aligned)
    d.warnings.add("dividing weights carry non-zero phases; sensor quadratures are misaligned");

  // W = c w* for a common complex c.
  complex ratio(0.0, 0.0);
  d.matched = true;
  for (std::size_t k = 0; k < m; ++k) {
    const complex target = std::conj(cfg.dividing[k]);
    if (std::abs(target) == 0.0) {
      if (std::abs(cfg.combining[k]) > 1e-12) d.matched = false;
      continue;
    }
    const complex r = cfg.combining[k] / target;
    if (ratio == complex(0.0, 0.0)) ratio = r;
    else if (std::abs(r - ratio) > 1e-10 * std::abs(ratio)) d.matched = false;
  }
  if (ratio == complex(0.0, 0.0)) d.matched = false;
  return d;
}

/// |sum_n W_0n M_n|^2 f^2.
inline double array_signal_psd(const ArrayConfig &cfg, double drive_amplitude) {
  complex sum(0.0, 0.0);
  for (std::size_t k = 0; k < cfg.size(); ++k) sum += cfg.combining[k] * cfg.sensors[k].response_factor;
  return std::norm(sum) * drive_amplitude * drive_amplitude;
}

/// Force-referred amplitudes of one sensor at one frequency, before weighting:
///   imprecision = e^{i phi/2} / chi * sqrt(hbar m Omega / (8 gamma |C'|))
///   back_action = e^{i phi/2} * sqrt(8 hbar m Omega gamma |C'|)
struct SensorTerms {
  complex chi;
  complex half_phase;
  double coop = 0.0; // |C'_k|
  complex imprecision;
  complex back_action;
  double thermal = 0.0; // 4 hbar m gamma Omega S_PP
  double loss = 0.0;    // (1 - eta^2)/eta^2 * |imprecision|^2 / 2
};

inline SensorTerms make_sensor_terms(const OscillatorParams &osc, complex half_phase, double coop,
                                     double efficiency_sq, double momentum_psd, double omega) {
  SensorTerms t;
  t.chi = mechanical_susceptibility(osc, omega).value;
  t.half_phase = half_phase;
  t.coop = coop;
  const double hm_omega = constants::hbar * osc.mass_kg * osc.resonance_rad_s;
  const double gamma = osc.damping_rad_s;
  t.imprecision = half_phase / t.chi * std::sqrt(hm_omega / (8.0 * gamma * coop));
  t.back_action = half_phase * std::sqrt(8.0 * hm_omega * gamma * coop);
  t.thermal = 4.0 * hm_omega * gamma * momentum_psd;
  t.loss = (1.0 - efficiency_sq) / efficiency_sq * 0.5 * std::norm(t.imprecision);
  return t;
}

/// Per-sensor terms with C'_k = |w_k0|^2 C_k(P_tot).
inline std::vector<SensorTerms> sensor_terms(const ArrayConfig &cfg, double omega) {
  std::vector<SensorTerms> out;
  out.reserve(cfg.size());
  for (std::size_t k = 0; k < cfg.size(); ++k) {
    const auto &s = cfg.sensors[k];
    const double share = std::norm(cfg.dividing[k]);
    const auto resp = cavity_phase_and_cooperativity(s.cav.with_power(cfg.total_power_w), s.osc, share, omega);
    const double coop = resp.cooperativity_magnitude();
    if (!(coop > 0.0)) {
      if (std::abs(cfg.combining[k]) > 0.0)
        throw ConfigurationError("sensor " + std::to_string(k) +
                                 " has zero cooperativity but a non-zero combining weight");
      SensorTerms idle;
      idle.chi = mechanical_susceptibility(s.osc, omega).value;
      idle.half_phase = resp.half_phase;
      idle.thermal = 4.0 * constants::hbar * s.osc.mass_kg * s.osc.damping_rad_s *
                     s.osc.resonance_rad_s * s.bath_psd();
      out.push_back(idle);
      continue;
    }
    out.push_back(make_sensor_terms(s.osc, resp.half_phase, coop, s.cav.detection_efficiency_sq,
                                    s.bath_psd(), omega));
  }
  return out;
}

struct CoherentSums {
  complex imprecision;  // sum_k W_0k w_k0 imprecision_k
  complex back_action;  // sum_k W_0k w_k0 back_action_k
  double incoherent = 0.0; // sum_k |W_0k|^2 (|imprecision_k|^2 + |back_action_k|^2) / 2
  double thermal = 0.0;
  double loss = 0.0;
};

inline CoherentSums coherent_sums(const std::vector<complex> &dividing,
                                  const std::vector<complex> &combining,
                                  const std::vector<SensorTerms> &terms) {
  CoherentSums s;
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const complex ww = combining[k] * dividing[k];
    const double weight = std::norm(combining[k]);
    s.imprecision += ww * terms[k].imprecision;
    s.back_action += ww * terms[k].back_action;
    s.incoherent += weight * 0.5 * (std::norm(terms[k].imprecision) + std::norm(terms[k].back_action));
    s.thermal += weight * terms[k].thermal;
    s.loss += weight * terms[k].loss;
  }
  return s;
}

struct CombinedNoiseBreakdown {
  double shot = 0.0;
  double back_action = 0.0;
  double correlation = 0.0;
  double thermal = 0.0;
  double residual_vacuum = 0.0;
  double loss = 0.0;
  double total = 0.0;

  double optical() const { return shot + back_action + correlation + residual_vacuum + loss; }
};

inline double expanded_residual(const CoherentSums &s) {
  return s.incoherent - 0.5 * std::norm(s.imprecision) - 0.5 * std::norm(s.back_action);
}

inline CombinedNoiseBreakdown combine_noise(const CoherentSums &s, const QuadraturePsdTriple &input) {
  CombinedNoiseBreakdown b;
  b.shot = std::norm(s.imprecision) * input.yy;
  b.back_action = std::norm(s.back_action) * input.xx;
  b.correlation = 2.0 * (std::conj(s.imprecision) * s.back_action).real() * input.xy;
  b.thermal = s.thermal;
  b.residual_vacuum = expanded_residual(s);
  b.loss = s.loss;
  b.total = b.shot + b.back_action + b.correlation + b.thermal + b.residual_vacuum + b.loss;
  return b;
}

/// Array force noise for an arbitrary Gaussian input on mode 0 (the remaining M-1
/// ports of the splitter carry vacuum). Detection loss adds sum |W|^2 loss_k.
inline CombinedNoiseBreakdown array_noise_psd(const ArrayConfig &cfg, const QuadraturePsdTriple &input,
                                              double omega) {
  const auto terms = sensor_terms(cfg, omega);
  return combine_noise(coherent_sums(cfg.dividing, cfg.combining, terms), input);
}

struct ResidualForms {
  double pairwise = 0.0; // sum_jk (delta_jk - w_j0* w_k0) W_0j* W_0k (...)
  double expanded = 0.0;
};

/// Residual vacuum from the idle splitter ports, computed both as the O(M^2) pairwise
/// sum and as the expanded difference of incoherent and coherent sums. Throws
/// NumericalError if the two disagree by more than 1e-10 of the per-sensor scale.
inline ResidualForms residual_vacuum_forms(const ArrayConfig &cfg, double omega) {
  const auto terms = sensor_terms(cfg, omega);
  const auto sums = coherent_sums(cfg.dividing, cfg.combining, terms);
  ResidualForms r;
  r.expanded = expanded_residual(sums);

  complex pairwise(0.0, 0.0);
  const std::size_t m = cfg.size();
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t k = 0; k < m; ++k) {
      const complex delta = (j == k ? 1.0 : 0.0) - std::conj(cfg.dividing[j]) * cfg.dividing[k];
      const complex weight = delta * std::conj(cfg.combining[j]) * cfg.combining[k];
      const complex shot = std::conj(terms[j].imprecision) * terms[k].imprecision;
      const complex ba = std::conj(terms[j].back_action) * terms[k].back_action;
      pairwise += weight * 0.5 * (shot + ba);
    }
  }
  r.pairwise = pairwise.real();
  const double scale = std::max(sums.incoherent, std::abs(r.expanded));
  if (std::abs(r.pairwise - r.expanded) > 1e-10 * scale)
    throw NumericalError("residual vacuum forms disagree: pairwise " + std::to_string(r.pairwise) +
                         " vs expanded " + std::to_string(r.expanded));
  return r;
}

inline double residual_vacuum_psd(const ArrayConfig &cfg, double omega) {
  return residual_vacuum_forms(cfg, omega).pairwise;
}

/// Angle that minimizes the anti-squeezed coefficient |A sin(theta) + B cos(theta)|^2,
/// equivalently the total squeezed noise at fixed r. Returned in [-pi/2, pi/2).
inline double optimal_squeezing_angle(const CoherentSums &s) {
  const double aa = std::norm(s.imprecision);
  const double bb = std::norm(s.back_action);
  const double rho = (std::conj(s.imprecision) * s.back_action).real();
  if (aa == 0.0 && bb == 0.0) return -std::numbers::pi / 2.0;
  double theta = 0.5 * std::atan2(-2.0 * rho, aa - bb);
  if (theta >= std::numbers::pi / 2.0) theta -= std::numbers::pi;
  return theta;
}

inline double optimal_squeezing_angle(const ArrayConfig &cfg, double omega) {
  return optimal_squeezing_angle(coherent_sums(cfg.dividing, cfg.combining, sensor_terms(cfg, omega)));
}

/// Magnitude-ratio form tan(theta) = -|sum 8 e^{i phi/2} sqrt(hbar m Omega gamma |C'|) W w|
///   / |sum e^{i phi/2} ((Omega^2 - omega^2)/Omega) sqrt(hbar m Omega / (gamma |C'|)) W w|.
/// Agrees with `optimal_squeezing_angle` below every resonance; above resonance the true
/// optimum has the opposite sign, which this form cannot express.
inline double textbook_squeezing_angle(const ArrayConfig &cfg, double omega) {
  const auto terms = sensor_terms(cfg, omega);
  complex num(0.0, 0.0), den(0.0, 0.0);
  for (std::size_t k = 0; k < cfg.size(); ++k) {
    const auto &osc = cfg.sensors[k].osc;
    const complex ww = cfg.combining[k] * cfg.dividing[k];
    const double hm_omega = constants::hbar * osc.mass_kg * osc.resonance_rad_s;
    const double w0 = osc.resonance_rad_s;
    num += 8.0 * terms[k].half_phase * std::sqrt(hm_omega * osc.damping_rad_s * terms[k].coop) * ww;
    den += terms[k].half_phase * ((w0 - omega) * (w0 + omega) / w0) *
           std::sqrt(hm_omega / (osc.damping_rad_s * terms[k].coop)) * ww;
  }
  if (std::abs(den) == 0.0) return -std::numbers::pi / 2.0;
  return std::atan(-std::abs(num) / std::abs(den));
}

/// |A sin(theta) + B cos(theta)|^2 with A, B the coherent imprecision/back-action sums.
inline double anti_squeezed_coefficient(const CoherentSums &s, double theta) {
  return std::norm(s.imprecision * std::sin(theta) + s.back_action * std::cos(theta));
}

/// Squeezed-input array noise in terms of r and theta:
///   1/2 |A cos - B sin|^2 e^{-2r} + 1/2 |A sin + B cos|^2 e^{2r} + thermal + residual + loss.
inline double array_squeezed_noise_closed_form(const ArrayConfig &cfg, double r, double theta,
                                               double omega) {
  const auto s = coherent_sums(cfg.dividing, cfg.combining, sensor_terms(cfg, omega));
  const double c = std::cos(theta), sn = std::sin(theta);
  const double squeezed = 0.5 * std::norm(s.imprecision * c - s.back_action * sn) * std::exp(-2.0 * r);
  const double anti = 0.5 * anti_squeezed_coefficient(s, theta) * std::exp(2.0 * r);
  return squeezed + anti + s.thermal + expanded_residual(s) + s.loss;
}

/// Squeezing angle selected by the light's policy at this frequency.
inline double resolve_angle(const SqueezingConfig &light, const CoherentSums &sums) {
  switch (light.policy) {
  case AnglePolicy::vacuum: return 0.0;
  case AnglePolicy::fixed: return light.angle_rad;
  case AnglePolicy::frequency_optimal: return optimal_squeezing_angle(sums);
  }
  return 0.0;
}

inline CombinedNoiseBreakdown array_noise_for_light(const ArrayConfig &cfg, const SqueezingConfig &light,
                                                    double omega) {
  const auto sums = coherent_sums(cfg.dividing, cfg.combining, sensor_terms(cfg, omega));
  const double theta = resolve_angle(light, sums);
  return combine_noise(sums, input_quadrature_psds(light, theta));
}

/// sum_k |W_0k|^2 hbar m_k Omega_k / |chi_k| (optical part).
inline double array_sql_psd(const ArrayConfig &cfg, double omega) {
  double total = 0.0;
  for (std::size_t k = 0; k < cfg.size(); ++k)
    total += std::norm(cfg.combining[k]) * sql_noise_psd(cfg.sensors[k].osc, omega);
  return total;
}

/// Vacuum-input optical noise of the array with every sensor's |C'_k| set explicitly.
inline double array_vacuum_noise_with_cooperativities(const ArrayConfig &cfg,
                                                      const std::vector<double> &coops, double omega) {
  std::vector<SensorTerms> terms;
  terms.reserve(cfg.size());
  for (std::size_t k = 0; k < cfg.size(); ++k) {
    const auto &s = cfg.sensors[k];
    const auto resp = cavity_phase_and_cooperativity(s.cav.with_power(cfg.total_power_w), s.osc, 1.0, omega);
    terms.push_back(make_sensor_terms(s.osc, resp.half_phase, coops[k], 1.0, 0.0, omega));
  }
  return combine_noise(coherent_sums(cfg.dividing, cfg.combining, terms), QuadraturePsdTriple::vacuum()).total;
}

/// Power-level combination of independent sensors: sum_k SNR_k^2.
inline double incoherent_baseline(const std::vector<double> &snrs) {
  double total = 0.0;
  for (double s : snrs) {
    if (!(s >= 0.0)) throw ConfigurationError("SNR values must be non-negative");
    total += s * s;
  }
  return total;
}

struct DqsDcsComparison {
  std::vector<double> omegas;
  std::vector<double> distributed;  // one squeezer split over the array
  std::vector<double> independent;  // one squeezer per sensor
  double max_relative_difference = 0.0;
  double photons_per_sensor_distributed = 0.0;
  double photons_per_sensor_independent = 0.0;
};

/// Compares a single squeezed vacuum of `photons` split across M identical sensors
/// (total power M P) against M independent squeezers of `photons` each (power P each).
inline DqsDcsComparison dqs_vs_dcs_report(const ArrayConfig &cfg, double photons, AnglePolicy policy,
                                          double fixed_angle, const std::vector<double> &omegas) {
  validate_network(cfg);
  if (!cfg.all_identical())
    throw ConfigurationError("distributed vs independent squeezing comparison needs identical sensors");
  const std::size_t m = cfg.size();
  const auto light = SqueezingConfig::from_photons(photons, policy, fixed_angle);
  const double per_sensor_power = cfg.total_power_w / static_cast<double>(m);

  DqsDcsComparison out;
  out.omegas = omegas;
  out.photons_per_sensor_distributed = photons / static_cast<double>(m);
  out.photons_per_sensor_independent = photons;

  // Single-sensor network used to pick each independent squeezer's angle.
  ArrayConfig single;
  single.sensors = {cfg.sensors.front()};
  single.dividing = {complex(1.0, 0.0)};
  single.combining = {complex(1.0, 0.0)};
  single.total_power_w = per_sensor_power;

  for (double omega : omegas) {
    out.distributed.push_back(array_noise_for_light(cfg, light, omega).total);
    // Independent sensors: cross terms vanish, so the combined noise is the
    // |W|^2-weighted sum of per-sensor squeezed noise.
    double dcs = 0.0;
    const double per_sensor = array_noise_for_light(single, light, omega).total;
    for (std::size_t k = 0; k < m; ++k) dcs += std::norm(cfg.combining[k]) * per_sensor;
    out.independent.push_back(dcs);
    out.max_relative_difference =
        std::max(out.max_relative_difference, relative_difference(out.distributed.back(), dcs));
  }
  return out;
}

} // namespace omsense
