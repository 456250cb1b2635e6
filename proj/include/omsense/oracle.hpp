#pragma once

// Brute-force reference for the array noise: every input quadrature (laser mode, idle
// splitter ports, mechanical baths, detection-loss ports) is propagated through the
// frequency-domain input-output relations to the combined force estimate, and the
// symmetrized output spectrum is the quadratic form of the input covariance.
//
// Nothing here reuses the closed-form noise expressions from spectra.hpp/array.hpp.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "omsense/array.hpp"
#include "omsense/core.hpp"

namespace omsense::oracle {

using Matrix2 = Eigen::Matrix2d;
using RowVector = Eigen::RowVectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;

/// Covariance of (X, Y) for a squeezed vacuum: S S^T / 2 with S = R(theta) diag(e^r, e^-r).
inline Matrix2 squeezed_covariance(double r, double theta) {
  Matrix2 rot;
  rot << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  const Matrix2 sympl = rot * Eigen::Vector2d(std::exp(r), std::exp(-r)).asDiagonal();
  return 0.5 * sympl * sympl.transpose();
}

inline Matrix2 vacuum_covariance() { return 0.5 * Matrix2::Identity(); }

struct OracleSensor {
  OscillatorParams osc;
  CavityOpticsParams cav; // at the power that defines the full-power cooperativity
  double coop_scale = 1.0;
  double momentum_psd = 0.0;
};

/// A fully specified linear network: sensor n is probed by sum_r routing(n, r) a_r.
struct OracleNetwork {
  std::vector<OracleSensor> sensors;
  std::vector<complex> combining;
  ComplexMatrix routing;             // M x M unitary
  std::vector<Matrix2> mode_covariances; // one per splitter input port
  bool force_conversion = true;

  std::size_t size() const { return sensors.size(); }
};

/// Completes `first` to an M x M unitary whose first column is `first`. Remaining
/// columns are Gram-Schmidt orthogonalized from a seed basis: the standard basis for
/// seed 0, otherwise random complex vectors drawn from the seed.
inline ComplexMatrix complete_unitary(const std::vector<complex> &first, std::uint64_t seed = 0) {
  const auto m = static_cast<Eigen::Index>(first.size());
  ComplexMatrix u(m, m);
  Eigen::VectorXcd v0(m);
  for (Eigen::Index i = 0; i < m; ++i) v0(i) = first[static_cast<std::size_t>(i)];
  u.col(0) = v0 / v0.norm();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::Index filled = 1;
  Eigen::Index candidate = 0;
  while (filled < m) {
    Eigen::VectorXcd v(m);
    if (seed == 0) {
      if (candidate >= m) throw NumericalError("unitary completion ran out of seed vectors");
      v.setZero();
      v(candidate++) = 1.0;
    } else {
      for (Eigen::Index i = 0; i < m; ++i) v(i) = complex(normal(rng), normal(rng));
    }
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index j = 0; j < filled; ++j) v -= u.col(j).dot(v) * u.col(j);
    const double n = v.norm();
    if (n < 1e-8) continue;
    u.col(filled++) = v / n;
  }
  return u;
}

/// Laser mode 0 carries squeezed vacuum (r, theta); the other ports carry vacuum.
inline OracleNetwork distributed_network(const ArrayConfig &cfg, double r, double theta,
                                         std::uint64_t seed = 0) {
  OracleNetwork net;
  for (std::size_t k = 0; k < cfg.size(); ++k) {
    const auto &s = cfg.sensors[k];
    net.sensors.push_back({s.osc, s.cav.with_power(cfg.total_power_w), std::norm(cfg.dividing[k]),
                           s.bath_psd()});
  }
  net.combining = cfg.combining;
  net.routing = complete_unitary(cfg.dividing, seed);
  net.mode_covariances.assign(cfg.size(), vacuum_covariance());
  net.mode_covariances[0] = squeezed_covariance(r, theta);
  return net;
}

/// Each sensor has its own laser (power P_tot / M) and its own squeezed vacuum.
inline OracleNetwork independent_network(const ArrayConfig &cfg, double r, double theta) {
  OracleNetwork net;
  const double per_sensor = cfg.total_power_w / static_cast<double>(cfg.size());
  for (const auto &s : cfg.sensors)
    net.sensors.push_back({s.osc, s.cav.with_power(per_sensor), 1.0, s.bath_psd()});
  net.combining = cfg.combining;
  const auto m = static_cast<Eigen::Index>(cfg.size());
  net.routing = ComplexMatrix::Identity(m, m);
  net.mode_covariances.assign(cfg.size(), squeezed_covariance(r, theta));
  return net;
}

/// Linear map from the input quadratures to the estimator at one frequency sign.
///   noise columns: [X_0, Y_0, ..., X_{M-1}, Y_{M-1}, P_0..P_{M-1}, L_0..L_{M-1}]
///   sensor_basis columns: same, but optical entries refer to (X'_n, Y'_n) at the sensors.
struct TransferSide {
  double omega = 0.0;
  RowVector signal; // per-sensor drive force -> estimator
  RowVector noise;
  RowVector sensor_basis;
  bool divergent = false;
};

struct TransferAssembly {
  double omega = 0.0;
  std::size_t sensors = 0;
  TransferSide positive; // +omega with weights W
  TransferSide negative; // -omega with weights W*
  Eigen::MatrixXd input_covariance;  // Sigma_in over the `noise` columns
  Eigen::MatrixXd sensor_covariance; // rank-1 + complement covariance over `sensor_basis`
};

namespace detail {

inline TransferSide assemble_side(const OracleNetwork &net, double omega, bool conjugate_weights) {
  const auto m = static_cast<Eigen::Index>(net.size());
  TransferSide side;
  side.omega = omega;
  side.signal = RowVector::Zero(m);
  side.noise = RowVector::Zero(4 * m);
  side.sensor_basis = RowVector::Zero(4 * m);
  const complex i(0.0, 1.0);

  for (Eigen::Index n = 0; n < m; ++n) {
    const auto &s = net.sensors[static_cast<std::size_t>(n)];
    const double w0 = s.osc.resonance_rad_s;
    const double gamma = s.osc.damping_rad_s;
    const double kappa = s.cav.linewidth_rad_s;
    const double hm_omega = constants::hbar * s.osc.mass_kg * w0;
    const double eta_sq = s.cav.detection_efficiency_sq;

    const complex chi = w0 / ((w0 - omega) * (w0 + omega) - 2.0 * i * gamma * omega);
    const complex cavity_phase = (0.5 * kappa + i * omega) / (0.5 * kappa - i * omega);
    const complex lag = 1.0 - 2.0 * i * omega / kappa;
    const complex coop = s.coop_scale * 2.0 * s.cav.coupling_sq() / (gamma * kappa) / (lag * lag);
    const complex root_coop = std::sqrt(coop);
    const double coop_abs = std::abs(coop);

    complex weight = net.combining[static_cast<std::size_t>(n)];
    if (conjugate_weights) weight = std::conj(weight);

    // Y_out = -e^{i phi} Y' + 2 sqrt(2 gamma C) Q,  Q = 2 sqrt(gamma) chi (P - sqrt(2 C) X') + Q_dr,
    // Y_det = eta Y_out + sqrt(1 - eta^2) L, Q_dr = chi F_dr / sqrt(hbar m Omega).
    const complex to_q = 2.0 * std::sqrt(2.0 * gamma) * root_coop;
    const complex q_from_p = 2.0 * std::sqrt(gamma) * chi;
    const complex q_from_x = -2.0 * std::sqrt(gamma) * chi * std::sqrt(2.0) * root_coop;

    complex gain;
    if (net.force_conversion) {
      if (coop_abs == 0.0) {
        side.divergent = true;
        continue;
      }
      gain = weight / std::sqrt(cavity_phase) / chi * std::sqrt(hm_omega / (8.0 * gamma * coop_abs));
    } else {
      gain = weight * std::sqrt(eta_sq);
    }
    // Estimator is gain * Y_det / eta.
    const complex c_y = gain * -cavity_phase;
    const complex c_x = gain * to_q * q_from_x;
    const complex c_p = gain * to_q * q_from_p;
    const complex c_loss = gain * std::sqrt(1.0 - eta_sq) / std::sqrt(eta_sq);
    side.signal(n) = gain * to_q * chi / std::sqrt(hm_omega);

    side.sensor_basis(2 * n) = c_x;
    side.sensor_basis(2 * n + 1) = c_y;
    side.sensor_basis(2 * m + n) = c_p;
    side.sensor_basis(3 * m + n) = c_loss;
    side.noise(2 * m + n) = c_p;
    side.noise(3 * m + n) = c_loss;

    // X'_n = sum_r Re(U) X_r - Im(U) Y_r,  Y'_n = sum_r Im(U) X_r + Re(U) Y_r.
    for (Eigen::Index r = 0; r < m; ++r) {
      const complex u = net.routing(n, r);
      side.noise(2 * r) += c_x * u.real() + c_y * u.imag();
      side.noise(2 * r + 1) += -c_x * u.imag() + c_y * u.real();
    }
  }
  return side;
}

inline Eigen::Matrix2d quadrature_rotation(complex u) {
  Eigen::Matrix2d r;
  r << u.real(), -u.imag(), u.imag(), u.real();
  return r;
}

} // namespace detail

inline TransferAssembly assemble_transfer(const OracleNetwork &net, double omega) {
  const std::size_t m = net.size();
  if (m == 0 || net.combining.size() != m || net.mode_covariances.size() != m ||
      net.routing.rows() != static_cast<Eigen::Index>(m) || net.routing.cols() != static_cast<Eigen::Index>(m))
    throw ConfigurationError("oracle network dimensions are inconsistent");
  const auto mi = static_cast<Eigen::Index>(m);
  if (!(net.routing.adjoint() * net.routing).isApprox(ComplexMatrix::Identity(mi, mi), 1e-10))
    throw ConfigurationError("oracle routing matrix is not unitary");

  TransferAssembly t;
  t.omega = omega;
  t.sensors = m;
  t.positive = detail::assemble_side(net, omega, false);
  t.negative = detail::assemble_side(net, -omega, true);

  t.input_covariance = Eigen::MatrixXd::Zero(4 * mi, 4 * mi);
  for (Eigen::Index r = 0; r < mi; ++r)
    t.input_covariance.block<2, 2>(2 * r, 2 * r) = net.mode_covariances[static_cast<std::size_t>(r)];
  for (Eigen::Index n = 0; n < mi; ++n) {
    t.input_covariance(2 * mi + n, 2 * mi + n) = net.sensors[static_cast<std::size_t>(n)].momentum_psd;
    t.input_covariance(3 * mi + n, 3 * mi + n) = 0.5;
  }

  // Sensor-side covariance: delta_nm I/2 + sum over non-vacuum ports of R(U_nr)(V_r - I/2)R(U_mr)^T.
  t.sensor_covariance = Eigen::MatrixXd::Zero(4 * mi, 4 * mi);
  t.sensor_covariance.topLeftCorner(2 * mi, 2 * mi) = 0.5 * Eigen::MatrixXd::Identity(2 * mi, 2 * mi);
  for (Eigen::Index r = 0; r < mi; ++r) {
    const Matrix2 excess = net.mode_covariances[static_cast<std::size_t>(r)] - vacuum_covariance();
    if (excess.isZero(0.0)) continue;
    for (Eigen::Index a = 0; a < mi; ++a)
      for (Eigen::Index b = 0; b < mi; ++b)
        t.sensor_covariance.block<2, 2>(2 * a, 2 * b) += detail::quadrature_rotation(net.routing(a, r)) *
                                                         excess *
                                                         detail::quadrature_rotation(net.routing(b, r)).transpose();
  }
  t.sensor_covariance.bottomRightCorner(2 * mi, 2 * mi) =
      t.input_covariance.bottomRightCorner(2 * mi, 2 * mi);
  return t;
}

inline TransferAssembly assemble_transfer(const ArrayConfig &cfg, double r, double theta, double omega,
                                          std::uint64_t seed = 0) {
  validate_network(cfg);
  return assemble_transfer(distributed_network(cfg, r, theta, seed), omega);
}

namespace detail {
inline double quadratic_form(const RowVector &c, const Eigen::MatrixXd &cov) {
  const Eigen::VectorXcd col = c.transpose();
  return (col.adjoint() * cov.cast<complex>() * col)(0, 0).real();
}
} // namespace detail

/// Symmetrized output spectrum: average of c^dagger Sigma c at +omega and -omega.
inline double propagate_covariance(const TransferAssembly &t) {
  if (t.positive.divergent || t.negative.divergent) return std::numeric_limits<double>::infinity();
  return 0.5 * (detail::quadratic_form(t.positive.noise, t.input_covariance) +
                detail::quadratic_form(t.negative.noise, t.input_covariance));
}

/// Same quantity through the eigendecomposition of Sigma_in: sum_i lambda_i |c . v_i|^2.
inline double propagate_covariance_eigen(const TransferAssembly &t) {
  if (t.positive.divergent || t.negative.divergent) return std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(t.input_covariance);
  const auto &vals = solver.eigenvalues();
  const auto &vecs = solver.eigenvectors();
  double total = 0.0;
  for (const auto *side : {&t.positive, &t.negative}) {
    for (Eigen::Index i = 0; i < vals.size(); ++i) {
      const complex proj = (side->noise * vecs.col(i).cast<complex>())(0, 0);
      total += 0.5 * vals(i) * std::norm(proj);
    }
  }
  return total;
}

/// Spectrum from the sensor-side covariance (no explicit idle columns).
inline double propagate_sensor_basis(const TransferAssembly &t) {
  if (t.positive.divergent || t.negative.divergent) return std::numeric_limits<double>::infinity();
  return 0.5 * (detail::quadratic_form(t.positive.sensor_basis, t.sensor_covariance) +
                detail::quadratic_form(t.negative.sensor_basis, t.sensor_covariance));
}

/// Signal transfer |s . drive|^2 for a common drive shared with per-sensor factors.
inline double signal_gain(const TransferAssembly &t, const std::vector<double> &response_factors) {
  complex sum(0.0, 0.0);
  for (std::size_t k = 0; k < response_factors.size(); ++k)
    sum += t.positive.signal(static_cast<Eigen::Index>(k)) * response_factors[k];
  return std::norm(sum);
}

struct OracleBreakdown {
  double mode0_shot = 0.0;
  double mode0_back_action = 0.0;
  double correlation = 0.0;
  double idle = 0.0;
  double thermal = 0.0;
  double loss = 0.0;
  double total = 0.0;
};

/// Splits the propagated spectrum by input block.
inline OracleBreakdown breakdown(const TransferAssembly &t) {
  const auto m = static_cast<Eigen::Index>(t.sensors);
  OracleBreakdown b;
  for (const auto *side : {&t.positive, &t.negative}) {
    const auto &c = side->noise;
    const auto &cov = t.input_covariance;
    b.mode0_back_action += 0.5 * std::norm(c(0)) * cov(0, 0);
    b.mode0_shot += 0.5 * std::norm(c(1)) * cov(1, 1);
    b.correlation += 0.5 * 2.0 * (std::conj(c(0)) * c(1)).real() * cov(0, 1);
    RowVector idle = c.segment(2, 2 * m - 2);
    b.idle += 0.5 * detail::quadratic_form(idle, cov.block(2, 2, 2 * m - 2, 2 * m - 2));
    for (Eigen::Index n = 0; n < m; ++n) {
      b.thermal += 0.5 * std::norm(c(2 * m + n)) * cov(2 * m + n, 2 * m + n);
      b.loss += 0.5 * std::norm(c(3 * m + n)) * cov(3 * m + n, 3 * m + n);
    }
  }
  b.total = b.mode0_shot + b.mode0_back_action + b.correlation + b.idle + b.thermal + b.loss;
  return b;
}

/// Convenience: oracle spectrum for an array with squeezed (r, theta) light on mode 0.
inline double oracle_noise_psd(const ArrayConfig &cfg, double r, double theta, double omega,
                               std::uint64_t seed = 0) {
  return propagate_covariance(assemble_transfer(cfg, r, theta, omega, seed));
}

/// One randomly drawn heterogeneous network with squeezed input and test frequencies.
struct RandomDraw {
  ArrayConfig cfg;
  double r = 0.0;
  double theta = 0.0;
  std::vector<double> omegas;
};

/// Sensors drawn log-uniformly within a factor `spread` of the reference in mass,
/// resonance and quality; real positive dividing weights; complex combining weights;
/// squeezing up to `max_db`. Half of the frequencies sit close to a resonance.
inline RandomDraw random_configuration(std::mt19937_64 &rng, const Sensor &reference, double power_w,
                                       std::size_t max_sensors, double spread, double max_db,
                                       std::size_t frequencies) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto around = [&](double x) { return x * std::pow(spread, 2.0 * unit(rng) - 1.0); };
  RandomDraw d;
  const std::size_t m = 1 + static_cast<std::size_t>(unit(rng) * static_cast<double>(max_sensors)) % max_sensors;
  const double q_ref = reference.osc.quality();
  double norm_w = 0.0, norm_c = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    Sensor s = reference;
    s.osc = OscillatorParams::from_quality(around(reference.osc.mass_kg), around(reference.osc.resonance_rad_s),
                                           around(q_ref), reference.osc.temperature_k);
    s.cav.readout_linewidth_rad_s = s.cav.linewidth_rad_s * (0.5 + 0.5 * unit(rng));
    s.cav.detection_efficiency_sq = 0.5 + 0.5 * unit(rng);
    s.response_factor = 0.5 + unit(rng);
    d.cfg.sensors.push_back(s);
    d.cfg.dividing.emplace_back(0.05 + unit(rng), 0.0);
    d.cfg.combining.push_back(std::polar(0.05 + unit(rng), 2.0 * std::numbers::pi * unit(rng)));
    norm_w += std::norm(d.cfg.dividing.back());
    norm_c += std::norm(d.cfg.combining.back());
  }
  for (auto &w : d.cfg.dividing) w /= std::sqrt(norm_w);
  for (auto &w : d.cfg.combining) w /= std::sqrt(norm_c);
  d.cfg.total_power_w = around(power_w);
  d.r = SqueezingConfig::strength_from_db(max_db * unit(rng));
  d.theta = std::numbers::pi * (2.0 * unit(rng) - 1.0);

  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto &s : d.cfg.sensors) {
    lo = std::min(lo, s.osc.resonance_rad_s / 100.0);
    hi = std::max(hi, s.osc.resonance_rad_s * 100.0);
  }
  for (std::size_t i = 0; i < frequencies; ++i) {
    if (i % 2 == 0) {
      d.omegas.push_back(lo * std::pow(hi / lo, unit(rng)));
    } else {
      const auto &s = d.cfg.sensors[static_cast<std::size_t>(unit(rng) * static_cast<double>(m)) % m];
      const double offset = std::pow(10.0, -11.0 + 9.0 * unit(rng)) * (unit(rng) < 0.5 ? -1.0 : 1.0);
      d.omegas.push_back(s.osc.resonance_rad_s * (i % 10 == 1 ? 1.0 : 1.0 + offset));
    }
  }
  return d;
}

} // namespace omsense::oracle
