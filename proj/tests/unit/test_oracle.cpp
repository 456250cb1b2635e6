#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "omsense/oracle.hpp"

using namespace omsense;
using omsense::testing::membrane_sensor;
using omsense::testing::rel;

TEST(Oracle, SingleSensorVacuumMatchesClosedForm) {
  const auto s = membrane_sensor();
  const auto cfg = make_identical_array(s, 1, 2e-3);
  for (double w : {1.0, 1e3, s.osc.resonance_rad_s, 1e5, 1e8}) {
    const auto t = oracle::assemble_transfer(cfg, 0.0, 0.0, w);
    const auto closed = single_sensor_noise_terms(s.osc, s.cav, QuadraturePsdTriple::vacuum(), w);
    const auto b = oracle::breakdown(t);
    EXPECT_LT(rel(oracle::propagate_covariance(t), closed.total()), 1e-12) << w;
    EXPECT_LT(rel(b.mode0_shot, closed.shot), 1e-12);
    EXPECT_LT(rel(b.mode0_back_action, closed.back_action), 1e-12);
    EXPECT_LT(rel(b.thermal, closed.thermal), 1e-12);
    EXPECT_EQ(b.idle, 0.0);
  }
}

TEST(Oracle, RandomNetworksMatchClosedFormBlockByBlock) {
  std::mt19937_64 rng(1234);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const auto d = oracle::random_configuration(rng, membrane_sensor(), 2e-3, 4, 10.0, 15.0, 20);
    const auto in = input_quadrature_psds(d.r, d.theta);
    for (double w : d.omegas) {
      const auto closed = array_noise_psd(d.cfg, in, w);
      const auto t = oracle::assemble_transfer(d.cfg, d.r, d.theta, w);
      const auto b = oracle::breakdown(t);
      const double scale = closed.total;
      worst = std::max(worst, rel(oracle::propagate_covariance(t), closed.total));
      ASSERT_LT(std::abs(b.mode0_shot - closed.shot), 1e-9 * scale);
      ASSERT_LT(std::abs(b.mode0_back_action - closed.back_action), 1e-9 * scale);
      ASSERT_LT(std::abs(b.correlation - closed.correlation), 1e-9 * scale);
      ASSERT_LT(std::abs(b.idle - closed.residual_vacuum), 1e-9 * scale);
      ASSERT_LT(std::abs(b.thermal - closed.thermal), 1e-9 * scale);
      ASSERT_LT(std::abs(b.loss - closed.loss), 1e-9 * scale);
    }
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Oracle, RedundantPropagationPathsAgree) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const auto d = oracle::random_configuration(rng, membrane_sensor(), 2e-3, 4, 10.0, 15.0, 5);
    for (double w : d.omegas) {
      const auto t = oracle::assemble_transfer(d.cfg, d.r, d.theta, w);
      const double direct = oracle::propagate_covariance(t);
      EXPECT_LT(rel(direct, oracle::propagate_covariance_eigen(t)), 1e-12);
      EXPECT_LT(rel(direct, oracle::propagate_sensor_basis(t)), 1e-12);
    }
  }
}

TEST(Oracle, IdleColumnCompletionDoesNotMatter) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 100; ++i) {
    const auto d = oracle::random_configuration(rng, membrane_sensor(), 2e-3, 4, 10.0, 15.0, 4);
    for (double w : d.omegas) {
      const double base = oracle::oracle_noise_psd(d.cfg, d.r, d.theta, w, 0);
      for (std::uint64_t seed : {1u, 99u, 2024u})
        EXPECT_LT(rel(base, oracle::oracle_noise_psd(d.cfg, d.r, d.theta, w, seed)), 1e-12);
    }
  }
}

TEST(Oracle, CompletionIsUnitaryWithPrescribedColumn) {
  const std::vector<complex> first{0.5, complex(0.5, 0.5), complex(0.0, -0.5)};
  for (std::uint64_t seed : {0u, 3u}) {
    const auto u = oracle::complete_unitary(first, seed);
    EXPECT_LT((u.adjoint() * u - oracle::ComplexMatrix::Identity(3, 3)).norm(), 1e-14);
    for (int i = 0; i < 3; ++i) EXPECT_LT(std::abs(u(i, 0) - first[static_cast<std::size_t>(i)]), 1e-15);
  }
}

TEST(Oracle, InputCovarianceIsPhysical) {
  std::mt19937_64 rng(9);
  const auto d = oracle::random_configuration(rng, membrane_sensor(), 2e-3, 4, 10.0, 15.0, 1);
  const auto t = oracle::assemble_transfer(d.cfg, d.r, d.theta, d.omegas.front());
  const auto m = static_cast<Eigen::Index>(d.cfg.size());
  EXPECT_EQ(t.input_covariance.rows(), 4 * m);
  EXPECT_EQ(t.positive.noise.cols(), 4 * m);
  EXPECT_LT((t.input_covariance - t.input_covariance.transpose()).norm(), 1e-15);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t.input_covariance);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12);
  const auto vac = oracle::assemble_transfer(d.cfg, 0.0, 0.0, d.omegas.front());
  EXPECT_LT((vac.input_covariance.topLeftCorner(2 * m, 2 * m) - 0.5 * Eigen::MatrixXd::Identity(2 * m, 2 * m)).norm(),
            1e-15);
}

TEST(Oracle, UnitRowOnVacuumGivesOneHalf) {
  oracle::TransferAssembly t;
  t.input_covariance = 0.5 * Eigen::MatrixXd::Identity(4, 4);
  t.positive.noise = oracle::RowVector::Zero(4);
  t.positive.noise(2) = 1.0;
  t.negative = t.positive;
  EXPECT_DOUBLE_EQ(oracle::propagate_covariance(t), 0.5);
  EXPECT_DOUBLE_EQ(oracle::propagate_covariance_eigen(t), 0.5);
}

TEST(Oracle, IndependentSqueezersEqualDistributedSqueezer) {
  const auto s = membrane_sensor();
  for (std::size_t m : {2u, 4u, 8u}) {
    const auto cfg = make_identical_array(s, m, 2e-3);
    const double r = SqueezingConfig::strength_from_photons(2.03);
    const double r_split = SqueezingConfig::strength_from_photons(2.03 * static_cast<double>(m));
    for (double w : {1e3, s.osc.resonance_rad_s, 3e4}) {
      const double theta = optimal_squeezing_angle(cfg, w);
      const double dcs = oracle::propagate_covariance(
          oracle::assemble_transfer(oracle::independent_network(cfg, r, theta), w));
      const double dqs = oracle::oracle_noise_psd(cfg, r, theta, w);
      EXPECT_LT(rel(dcs, dqs), 1e-10) << m << " " << w;
      EXPECT_GT(oracle::oracle_noise_psd(cfg, r_split, theta, w), 0.0);
    }
  }
}

TEST(Oracle, NoCouplingDivergesUnderForceConversion) {
  auto cfg = make_identical_array(membrane_sensor(), 2, 2e-3);
  for (auto &s : cfg.sensors) s.cav.vacuum_coupling_rad_s = 0.0;
  const double w = 1e4;
  EXPECT_TRUE(std::isinf(oracle::propagate_covariance(oracle::assemble_transfer(oracle::distributed_network(cfg, 0.0, 0.0), w))));

  auto single = make_identical_array(membrane_sensor(), 1, 2e-3);
  single.sensors[0].cav.vacuum_coupling_rad_s = 0.0;
  auto net = oracle::distributed_network(single, 0.7, 0.2);
  net.force_conversion = false;
  for (double f : {1e2, 1e4, 1e9}) {
    const auto t = oracle::assemble_transfer(net, f);
    EXPECT_LT(rel(oracle::propagate_covariance(t), input_quadrature_psds(0.7, 0.2).yy), 1e-14);
    EXPECT_NEAR(std::abs(t.positive.noise(1)), 1.0, 1e-15);
    EXPECT_EQ(oracle::signal_gain(t, {1.0}), 0.0);
  }
}

TEST(Oracle, SignalGainMatchesClosedForm) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 50; ++i) {
    const auto d = oracle::random_configuration(rng, membrane_sensor(), 2e-3, 4, 10.0, 15.0, 2);
    std::vector<double> factors;
    for (const auto &s : d.cfg.sensors) factors.push_back(s.response_factor);
    const auto t = oracle::assemble_transfer(d.cfg, d.r, d.theta, d.omegas.front());
    EXPECT_LT(rel(oracle::signal_gain(t, factors), array_signal_psd(d.cfg, 1.0)), 1e-12);
  }
}

TEST(Oracle, SpectrumIsNonNegative) {
  std::mt19937_64 rng(22);
  for (int i = 0; i < 200; ++i) {
    const auto d = oracle::random_configuration(rng, membrane_sensor(), 2e-3, 4, 10.0, 15.0, 5);
    for (double w : d.omegas) EXPECT_GE(oracle::oracle_noise_psd(d.cfg, d.r, d.theta, w), 0.0);
  }
}

TEST(Oracle, RejectsNonUnitaryRouting) {
  const auto cfg = make_identical_array(membrane_sensor(), 2, 2e-3);
  auto net = oracle::distributed_network(cfg, 0.0, 0.0);
  net.routing(0, 0) *= 1.1;
  EXPECT_THROW(oracle::assemble_transfer(net, 1e4), ConfigurationError);
}
