#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "omsense/quadrature.hpp"
#include "omsense/sensitivity.hpp"

using namespace omsense;
using omsense::testing::membrane_sensor;
using omsense::testing::rel;

TEST(Grid, PureLogGridWithoutResonances) {
  const auto g = resonance_refined_grid({}, 1.0, 1e4);
  EXPECT_EQ(g.size(), 161u);
  EXPECT_DOUBLE_EQ(g.lower(), 1.0);
  EXPECT_DOUBLE_EQ(g.upper(), 1e4);
  for (std::size_t i = 2; i < g.size(); ++i)
    EXPECT_NEAR(g.points[i] / g.points[i - 1], g.points[1] / g.points[0], 1e-12);
}

TEST(Grid, HighQualityResonanceIsResolved) {
  const auto osc = membrane_sensor().osc;
  const Resonance res{osc.resonance_rad_s, osc.damping_rad_s};
  const auto g = resonance_refined_grid({res}, osc.resonance_rad_s / 1e3, osc.resonance_rad_s * 1e3);
  EXPECT_GE(g.points_within(res.omega_rad_s, 10.0 * res.linewidth_rad_s), 64u);
  EXPECT_LE(g.finest_spacing_near(res.omega_rad_s, 10.0 * res.linewidth_rad_s),
            res.linewidth_rad_s / 8.0 * (1.0 + 1e-6));
  for (std::size_t i = 1; i < g.size(); ++i) ASSERT_GT(g.points[i], g.points[i - 1]);
  EXPECT_NO_THROW(check_resonance_coverage(g));
}

TEST(Grid, SpanMustContainResonances) {
  const Resonance res{100.0, 1e-3};
  EXPECT_THROW(resonance_refined_grid({res}, 200.0, 300.0), ConfigurationError);
  EXPECT_THROW(resonance_refined_grid({}, 0.0, 300.0), ConfigurationError);
  EXPECT_THROW(resonance_refined_grid({}, 3.0, 2.0), ConfigurationError);
}

TEST(Grid, CoverageCheckRejectsCoarseGrids) {
  FrequencyGrid g = linear_grid(1.0, 200.0, 50);
  g.resonances = {{100.0, 1e-3}};
  EXPECT_THROW(check_resonance_coverage(g), ConfigurationError);
}

TEST(Grid, TrapezoidWeightsSumToSpan) {
  const auto g = resonance_refined_grid({{50.0, 0.01}}, 1.0, 1e3);
  double sum = 0.0;
  for (double w : g.weights) sum += w;
  EXPECT_LT(rel(sum, 999.0), 1e-13);
}

TEST(Integrate, ConstantRatioOverBand) {
  const double ratio = 3.0, width = 250.0;
  const auto g = linear_grid(1e-9, width, 10);
  const auto r = integrated_sensitivity([ratio](double) { return ratio; }, [](double) { return 1.0; }, g);
  EXPECT_LT(rel(r.value, ratio * ratio * (width - 1e-9) / std::numbers::pi), 1e-13);
}

TEST(Integrate, PolynomialsAreExact) {
  const auto g = linear_grid(0.0, 2.0, 3);
  const auto r = integrate([](double x) { return x * x * x - x + 1.0; }, g);
  EXPECT_NEAR(r.value, 4.0, 1e-14);
}

TEST(Integrate, NarrowLorentzianOnRefinedGrid) {
  const double w0 = 1e4, g0 = 1e-5;
  const auto g = resonance_refined_grid({{w0, g0}}, 1.0, 1e7);
  auto f = [&](double x) { return g0 / ((x - w0) * (x - w0) + g0 * g0); };
  const auto r = integrate(f, g, {1e-9, 0.0, 4'000'000});
  const double exact = std::atan((1e7 - w0) / g0) + std::atan((w0 - 1.0) / g0);
  EXPECT_LT(rel(r.value, exact), 1e-8);
  EXPECT_LT(r.relative_error(), 1e-9);
}

TEST(Integrate, ToleranceIsRespected) {
  const auto g = resonance_refined_grid({}, 1.0, 100.0);
  auto f = [](double x) { return std::sin(x) * std::sin(x) / (x * x); };
  const auto loose = integrate(f, g, {1e-4, 0.0, 1'000'000});
  const auto tight = integrate(f, g, {1e-12, 0.0, 1'000'000});
  EXPECT_LT(rel(loose.value, tight.value), 1e-4);
  EXPECT_GE(tight.evaluations, loose.evaluations);
}

TEST(Integrate, BudgetExhaustionIsNumericalError) {
  const auto g = linear_grid(-1.0, 1.0, 3);
  auto f = [](double x) { return std::abs(x) < 1e-300 ? 0.0 : std::sin(1.0 / x); };
  EXPECT_THROW(integrate(f, g, {1e-14, 0.0, 2000}), NumericalError);
}

TEST(Integrate, NonFiniteIntegrandIsNumericalError) {
  const auto g = linear_grid(0.0, 1.0, 3);
  EXPECT_THROW(integrate([](double x) { return 1.0 / x; }, g), NumericalError);
}

TEST(Minimize, GoldenSectionFindsParabolaMinimum) {
  const auto r = golden_section_minimize([](double x) { return (x - 1.234) * (x - 1.234) + 2.0; }, -10.0, 10.0);
  EXPECT_NEAR(r.x, 1.234, 1e-7);
  EXPECT_DOUBLE_EQ(r.value, 2.0);
}

TEST(Minimize, ScanThenRefineEscapesLocalMinimum) {
  auto f = [](double x) { return std::cos(3.0 * x) + 0.1 * (x - 2.0) * (x - 2.0); };
  const auto r = scan_then_refine(f, -5.0, 5.0);
  for (double x = -5.0; x <= 5.0; x += 1e-3) EXPECT_LE(r.value, f(x) + 1e-12);
}

TEST(Spacing, LogAndLinearHelpers) {
  const auto l = log_space(1.0, 1e4, 5);
  EXPECT_DOUBLE_EQ(l[2], 100.0);
  EXPECT_DOUBLE_EQ(l.back(), 1e4);
  const auto s = lin_space(0.0, 1.0, 5);
  EXPECT_DOUBLE_EQ(s[1], 0.25);
  EXPECT_THROW(log_space(0.0, 1.0, 3), ConfigurationError);
  EXPECT_THROW(lin_space(1.0, 0.0, 3), ConfigurationError);
}
