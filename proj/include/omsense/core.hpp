#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace omsense {

using complex = std::complex<double>;

namespace constants {
inline constexpr double hbar = 1.054571817e-34;          // J s
inline constexpr double boltzmann = 1.380649e-23;        // J/K
inline constexpr double speed_of_light = 299792458.0;    // m/s
inline constexpr double electron_volt = 1.602176634e-19; // J
inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline constexpr double seconds_per_year = 365.25 * 86400.0;
} // namespace constants

/// Thrown when a parameter set violates a physical or structural invariant.
class ConfigurationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a numerical procedure fails to reach its declared accuracy.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline double hz_to_rad_s(double hz) { return constants::two_pi * hz; }
inline double rad_s_to_hz(double rad_s) { return rad_s / constants::two_pi; }

/// Mass density in kg/m^3 from GeV/cm^3.
inline double gev_per_cm3_to_kg_per_m3(double gev_cm3) {
  const double joule = gev_cm3 * 1e9 * constants::electron_volt;
  return joule / (constants::speed_of_light * constants::speed_of_light) * 1e6;
}

inline double relative_difference(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

/// Accumulates non-fatal diagnostics that end up in run manifests.
struct Warnings {
  std::vector<std::string> messages;

  void add(std::string message) { messages.push_back(std::move(message)); }
  bool empty() const { return messages.empty(); }
};

} // namespace omsense
