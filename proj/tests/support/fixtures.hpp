#pragma once

#include <cmath>
#include <random>

#include "omsense/array.hpp"
#include "omsense/spectra.hpp"

namespace omsense::testing {

/// Membrane sensor used by the figure scenarios: 6 mg, 2 kHz, Q = 1e9, 10 mK.
inline Sensor membrane_sensor(GammaConvention conv = GammaConvention::half) {
  Sensor s;
  s.osc = OscillatorParams::from_quality(6e-6, hz_to_rad_s(2000.0), 1e9, 0.01, conv);
  s.cav.linewidth_rad_s = 0.94e9;
  s.cav.readout_linewidth_rad_s = 0.94e9;
  s.cav.vacuum_coupling_rad_s = 46.0;
  s.cav.laser_rad_s = CavityOpticsParams::laser_from_wavelength(1.06e-6);
  s.cav.input_power_w = 2e-3;
  return s;
}

inline double rel(double a, double b) { return relative_difference(a, b); }

inline double log_uniform(std::mt19937_64 &rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return lo * std::pow(hi / lo, u(rng));
}

inline double uniform(std::mt19937_64 &rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Random single sensor around the membrane parameters.
inline Sensor random_sensor(std::mt19937_64 &rng) {
  Sensor s = membrane_sensor();
  s.osc = OscillatorParams::from_quality(log_uniform(rng, 6e-7, 6e-5), log_uniform(rng, 2e3, 2e5),
                                         log_uniform(rng, 1e6, 1e10), uniform(rng, 0.0, 1.0));
  s.cav.linewidth_rad_s = log_uniform(rng, 1e7, 1e10);
  s.cav.readout_linewidth_rad_s = s.cav.linewidth_rad_s * uniform(rng, 0.3, 1.0);
  s.cav.input_power_w = log_uniform(rng, 1e-6, 1e-1);
  s.cav.detection_efficiency_sq = uniform(rng, 0.3, 1.0);
  return s;
}

} // namespace omsense::testing
