#pragma once

// Single-sensor frequency-domain noise model of a cavity optomechanical
// force sensor. All rates and frequencies are angular (rad/s).

#include <cmath>
#include <complex>
#include <optional>
#include <string>

#include "omsense/core.hpp"

namespace omsense {

/// How a quoted quality factor maps onto the damping rate gamma.
///   half: Q = Omega / (2 gamma), gamma is the half-linewidth in chi.
///   full: Q = Omega / gamma.
enum class GammaConvention { half, full };

inline std::string to_string(GammaConvention c) {
  return c == GammaConvention::half ? "half" : "full";
}

inline GammaConvention parse_gamma_convention(const std::string &s) {
  if (s == "half") return GammaConvention::half;
  if (s == "full") return GammaConvention::full;
  throw ConfigurationError("unknown gamma convention '" + s + "' (expected half|full)");
}

struct OscillatorParams {
  double mass_kg = 0.0;
  double resonance_rad_s = 0.0;
  double damping_rad_s = 0.0;
  double temperature_k = 0.0;

  static OscillatorParams from_quality(double mass_kg, double resonance_rad_s, double quality,
                                       double temperature_k,
                                       GammaConvention convention = GammaConvention::half) {
    if (!(quality > 0.0)) throw ConfigurationError("quality factor must be positive");
    const double divisor = convention == GammaConvention::half ? 2.0 * quality : quality;
    OscillatorParams p{mass_kg, resonance_rad_s, resonance_rad_s / divisor, temperature_k};
    p.validate();
    return p;
  }

  /// Q = Omega / (2 gamma).
  double quality() const { return resonance_rad_s / (2.0 * damping_rad_s); }

  void validate() const {
    if (!(mass_kg > 0.0)) throw ConfigurationError("oscillator mass must be positive");
    if (!(resonance_rad_s > 0.0)) throw ConfigurationError("oscillator resonance must be positive");
    if (!(damping_rad_s > 0.0)) throw ConfigurationError("oscillator damping must be positive");
    if (!(temperature_k >= 0.0)) throw ConfigurationError("temperature must be non-negative");
  }
};

struct CavityOpticsParams {
  double linewidth_rad_s = 0.0;         // kappa, total
  double readout_linewidth_rad_s = 0.0; // kappa_r
  double vacuum_coupling_rad_s = 0.0;   // G_0
  double laser_rad_s = 0.0;             // Omega_L
  double input_power_w = 0.0;
  double detection_efficiency_sq = 1.0; // eta^2
  std::optional<double> cavity_length_m;

  static double laser_from_wavelength(double wavelength_m) {
    return constants::two_pi * constants::speed_of_light / wavelength_m;
  }

  double loss_linewidth_rad_s() const { return linewidth_rad_s - readout_linewidth_rad_s; }

  /// E_0^2 = P / (hbar Omega_L), photons per second.
  double input_flux() const { return input_power_w / (constants::hbar * laser_rad_s); }

  /// E^2 = (4 kappa_r / kappa^2) E_0^2.
  double intracavity_photons() const {
    return 4.0 * readout_linewidth_rad_s / (linewidth_rad_s * linewidth_rad_s) * input_flux();
  }

  /// G^2 = G_0^2 E^2.
  double coupling_sq() const {
    return vacuum_coupling_rad_s * vacuum_coupling_rad_s * intracavity_photons();
  }

  CavityOpticsParams with_power(double power_w) const {
    CavityOpticsParams c = *this;
    c.input_power_w = power_w;
    return c;
  }

  void validate() const {
    if (!(linewidth_rad_s > 0.0)) throw ConfigurationError("cavity linewidth must be positive");
    if (!(readout_linewidth_rad_s > 0.0) || readout_linewidth_rad_s > linewidth_rad_s)
      throw ConfigurationError("readout linewidth must satisfy 0 < kappa_r <= kappa");
    if (!(vacuum_coupling_rad_s >= 0.0)) throw ConfigurationError("vacuum coupling must be non-negative");
    if (!(laser_rad_s > 0.0)) throw ConfigurationError("laser frequency must be positive");
    if (!(input_power_w >= 0.0)) throw ConfigurationError("input power must be non-negative");
    if (!(detection_efficiency_sq > 0.0 && detection_efficiency_sq <= 1.0))
      throw ConfigurationError("detection efficiency eta^2 must lie in (0, 1]");
    if (cavity_length_m && !(*cavity_length_m > 0.0))
      throw ConfigurationError("cavity length must be positive");
  }
};

/// G_0 = (Omega_L / L) sqrt(hbar / (2 m Omega)) for a Fabry-Perot cavity.
inline double fabry_perot_vacuum_coupling(double laser_rad_s, double length_m,
                                          const OscillatorParams &osc) {
  return laser_rad_s / length_m *
         std::sqrt(constants::hbar / (2.0 * osc.mass_kg * osc.resonance_rad_s));
}

enum class AnglePolicy { vacuum, fixed, frequency_optimal };

struct SqueezingConfig {
  double strength = 0.0; // r
  AnglePolicy policy = AnglePolicy::vacuum;
  double angle_rad = 0.0; // used when policy == fixed

  static SqueezingConfig vacuum() { return {}; }

  static double strength_from_db(double db) { return std::log(std::pow(10.0, db / 10.0)) / 2.0; }
  /// e^{-2r} = 1 / (sqrt(N_s) + sqrt(N_s + 1))^2
  static double strength_from_photons(double photons) {
    if (!(photons >= 0.0)) throw ConfigurationError("squeezed photon number must be non-negative");
    return std::log(std::sqrt(photons) + std::sqrt(photons + 1.0));
  }

  static SqueezingConfig from_db(double db, AnglePolicy policy, double angle_rad = 0.0) {
    SqueezingConfig s{strength_from_db(db), policy, angle_rad};
    s.validate();
    return s;
  }

  static SqueezingConfig from_photons(double photons, AnglePolicy policy, double angle_rad = 0.0) {
    SqueezingConfig s{strength_from_photons(photons), policy, angle_rad};
    s.validate();
    return s;
  }

  double decibels() const { return 10.0 * std::log10(std::exp(2.0 * strength)); }
  double photons() const {
    const double s = std::sinh(strength);
    return s * s;
  }
  bool is_vacuum() const { return policy == AnglePolicy::vacuum || strength == 0.0; }

  void validate() const {
    if (!(strength >= 0.0)) throw ConfigurationError("squeezing strength must be non-negative");
  }
};

struct ComplexResponse {
  complex value;
  double omega_rad_s = 0.0;

  double magnitude() const { return std::abs(value); }
};

/// Symmetrized input-quadrature spectra (dimensionless, vacuum = 1/2).
struct QuadraturePsdTriple {
  double yy = 0.5;
  double xx = 0.5;
  double xy = 0.0;

  static QuadraturePsdTriple vacuum() { return {}; }
  double uncertainty_product() const { return yy * xx - xy * xy; }
};

/// chi = Omega / (Omega^2 - omega^2 - 2 i gamma omega). The difference of squares is
/// factored so that the value stays accurate within a linewidth of resonance.
inline ComplexResponse mechanical_susceptibility(const OscillatorParams &osc, double omega) {
  const double w0 = osc.resonance_rad_s;
  const double detuning = (w0 - omega) * (w0 + omega);
  const complex denom(detuning, -2.0 * osc.damping_rad_s * omega);
  return {w0 / denom, omega};
}

struct CavityResponse {
  complex phase;      // e^{i phi}
  complex half_phase; // e^{i phi / 2}
  complex cooperativity;

  double cooperativity_magnitude() const { return std::abs(cooperativity); }
};

/// e^{i phi} = (kappa/2 + i omega) / (kappa/2 - i omega) and
/// C = s (2 G^2 / gamma kappa) / (1 - 2 i omega / kappa)^2, s = power_scale.
inline CavityResponse cavity_phase_and_cooperativity(const CavityOpticsParams &cav,
                                                     const OscillatorParams &osc,
                                                     double power_scale, double omega) {
  if (!(power_scale >= 0.0)) throw ConfigurationError("power scale must be non-negative");
  const double half_kappa = 0.5 * cav.linewidth_rad_s;
  const complex num(half_kappa, omega);
  const double modulus = std::abs(num);
  const complex half_phase = num / modulus;
  const complex phase = num / std::conj(num);
  const double dc = power_scale * 2.0 * cav.coupling_sq() / (osc.damping_rad_s * cav.linewidth_rad_s);
  const complex lag(1.0, -2.0 * omega / cav.linewidth_rad_s);
  return {phase, half_phase, dc / (lag * lag)};
}

/// Input spectra of a squeezed vacuum with strength r and angle theta.
inline QuadraturePsdTriple input_quadrature_psds(double r, double theta) {
  const double anti = std::exp(2.0 * r);
  const double sq = std::exp(-2.0 * r);
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {0.5 * (sq * c * c + anti * s * s), 0.5 * (anti * c * c + sq * s * s),
          0.5 * c * s * (anti - sq)};
}

inline QuadraturePsdTriple input_quadrature_psds(const SqueezingConfig &sq, double theta) {
  if (sq.is_vacuum()) return QuadraturePsdTriple::vacuum();
  return input_quadrature_psds(sq.strength, theta);
}

/// Thermal momentum-noise spectrum k_B T / (hbar Omega).
inline double thermal_momentum_psd(const OscillatorParams &osc) {
  return constants::boltzmann * osc.temperature_k / (constants::hbar * osc.resonance_rad_s);
}

/// Force-noise contributions in N^2/Hz.
struct NoiseTerms {
  double shot = 0.0;
  double back_action = 0.0;
  double correlation = 0.0;
  double thermal = 0.0;
  double loss = 0.0;

  double optical() const { return shot + back_action + correlation + loss; }
  double total() const { return shot + back_action + correlation + thermal + loss; }
};

/// Four-term force noise plus detection loss, given the optical response directly.
/// `coop_magnitude` is |C_omega|; `momentum_psd` is the mechanical bath spectrum.
inline NoiseTerms noise_terms(const OscillatorParams &osc, complex chi, double coop_magnitude,
                              const QuadraturePsdTriple &input, double momentum_psd,
                              double efficiency_sq) {
  if (!(coop_magnitude > 0.0))
    throw ConfigurationError("cooperativity is zero: no optical readout of the oscillator");
  const double hm_omega = constants::hbar * osc.mass_kg * osc.resonance_rad_s;
  const double gamma = osc.damping_rad_s;
  const double chi_abs = std::abs(chi);
  const double imprecision = hm_omega / (8.0 * gamma * coop_magnitude * chi_abs * chi_abs);
  NoiseTerms t;
  t.shot = imprecision * input.yy;
  t.back_action = 8.0 * hm_omega * gamma * coop_magnitude * input.xx;
  t.correlation = 2.0 * hm_omega / chi_abs * (chi.real() / chi_abs) * input.xy;
  t.thermal = 4.0 * hm_omega * gamma * momentum_psd;
  t.loss = (1.0 - efficiency_sq) / efficiency_sq * 0.5 * imprecision;
  return t;
}

inline NoiseTerms single_sensor_noise_terms(const OscillatorParams &osc,
                                            const CavityOpticsParams &cav,
                                            const QuadraturePsdTriple &input, double omega,
                                            std::optional<double> momentum_psd = std::nullopt) {
  const complex chi = mechanical_susceptibility(osc, omega).value;
  const auto response = cavity_phase_and_cooperativity(cav, osc, 1.0, omega);
  return noise_terms(osc, chi, response.cooperativity_magnitude(), input,
                     momentum_psd.value_or(thermal_momentum_psd(osc)),
                     cav.detection_efficiency_sq);
}

inline double single_sensor_noise_psd(const OscillatorParams &osc, const CavityOpticsParams &cav,
                                      const QuadraturePsdTriple &input, double omega,
                                      std::optional<double> momentum_psd = std::nullopt) {
  return single_sensor_noise_terms(osc, cav, input, omega, momentum_psd).total();
}

/// Squeezed-input noise written as anti-squeezed and squeezed quadratures:
///   hbar m Omega / (16 gamma |C| |chi|^2) * (|cos - a chi sin|^2 e^{-2r}
///   + |sin + a chi cos|^2 e^{2r}) + 4 m gamma k_B T, with a = 8 gamma |C|.
/// Detection loss is added as in `noise_terms`.
inline double squeezed_noise_closed_form(const OscillatorParams &osc,
                                         const CavityOpticsParams &cav, double r, double theta,
                                         double omega) {
  const complex chi = mechanical_susceptibility(osc, omega).value;
  const double coop = cavity_phase_and_cooperativity(cav, osc, 1.0, omega).cooperativity_magnitude();
  if (!(coop > 0.0))
    throw ConfigurationError("cooperativity is zero: no optical readout of the oscillator");
  const double gamma = osc.damping_rad_s;
  const double hm_omega = constants::hbar * osc.mass_kg * osc.resonance_rad_s;
  const double chi_sq = std::norm(chi);
  const double prefactor = hm_omega / (16.0 * gamma * coop * chi_sq);
  const complex a_chi = 8.0 * gamma * coop * chi;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double squeezed = std::norm(c - a_chi * s) * std::exp(-2.0 * r);
  const double anti = std::norm(s + a_chi * c) * std::exp(2.0 * r);
  const double eta_sq = cav.detection_efficiency_sq;
  const double loss = (1.0 - eta_sq) / eta_sq * prefactor;
  const double thermal = 4.0 * osc.mass_kg * gamma * constants::boltzmann * osc.temperature_k;
  return prefactor * (squeezed + anti) + loss + thermal;
}

/// hbar m Omega / |chi| (optical part only).
inline double sql_noise_psd(const OscillatorParams &osc, double omega) {
  const double chi_abs = mechanical_susceptibility(osc, omega).magnitude();
  return constants::hbar * osc.mass_kg * osc.resonance_rad_s / chi_abs;
}

/// |C| = 1 / (8 gamma |chi|) balances shot noise and back-action.
inline double sql_cooperativity(const OscillatorParams &osc, double omega) {
  return 1.0 / (8.0 * osc.damping_rad_s * mechanical_susceptibility(osc, omega).magnitude());
}

/// Free-mirror readout: phase shift zeta q on a field of flux E_0^2.
struct SimplifiedReadout {
  double zeta_per_m = 0.0;      // zeta
  double field_amplitude = 0.0; // E_0 = sqrt(photon flux)
  double efficiency_sq = 1.0;

  /// Momentum transferred per reflected photon, hbar zeta (= 2 hbar Omega_L / c for a mirror).
  double momentum_kick() const { return constants::hbar * zeta_per_m; }

  static SimplifiedReadout mirror(double laser_rad_s, double power_w, double efficiency_sq = 1.0) {
    return {2.0 * laser_rad_s / constants::speed_of_light,
            std::sqrt(power_w / (constants::hbar * laser_rad_s)), efficiency_sq};
  }
};

/// 4 m gamma k_B T + |B|^2 (S_YY + (1 - eta^2)/(2 eta^2)) + 2 kick^2 E_0^2 S_XX
/// + 2 Re[B'(-omega) S_XY] with B = m Omega / (sqrt2 E_0 zeta chi), B' = sqrt2 kick E_0 B.
inline double simplified_model_noise_psd(const SimplifiedReadout &readout,
                                         const OscillatorParams &osc,
                                         const QuadraturePsdTriple &input, double omega) {
  if (!(readout.field_amplitude > 0.0))
    throw ConfigurationError("simplified model needs a non-zero probe field");
  const double e0 = readout.field_amplitude;
  const double kick = readout.momentum_kick();
  const double eta_sq = readout.efficiency_sq;
  auto b_of = [&](double w) {
    const complex chi = mechanical_susceptibility(osc, w).value;
    return osc.mass_kg * osc.resonance_rad_s / (std::sqrt(2.0) * e0 * readout.zeta_per_m * chi);
  };
  const complex b = b_of(omega);
  const complex b_prime_neg = std::sqrt(2.0) * kick * e0 * b_of(-omega);
  const double thermal = 4.0 * osc.mass_kg * osc.damping_rad_s * constants::boltzmann * osc.temperature_k;
  return thermal + std::norm(b) * (input.yy + (1.0 - eta_sq) / (2.0 * eta_sq)) +
         2.0 * kick * kick * e0 * e0 * input.xx + 2.0 * (b_prime_neg * input.xy).real();
}

/// Bad-cavity correspondence: hbar zeta = (4 G_0 / kappa) sqrt(2 hbar m Omega) sqrt(kappa_r / kappa).
/// The kappa_r/kappa factor is 1 for an over-coupled cavity.
inline SimplifiedReadout bad_cavity_map(const CavityOpticsParams &cav, const OscillatorParams &osc,
                                        Warnings *warnings = nullptr) {
  if (warnings && !(cav.linewidth_rad_s > 100.0 * osc.resonance_rad_s))
    warnings->add("bad-cavity map used with kappa not much larger than Omega");
  const double hbar_zeta = 4.0 * cav.vacuum_coupling_rad_s / cav.linewidth_rad_s *
                           std::sqrt(2.0 * constants::hbar * osc.mass_kg * osc.resonance_rad_s) *
                           std::sqrt(cav.readout_linewidth_rad_s / cav.linewidth_rad_s);
  return {hbar_zeta / constants::hbar, std::sqrt(cav.input_flux()), cav.detection_efficiency_sq};
}

} // namespace omsense
