// Prints one PASS/FAIL line per acceptance criterion. Exit status is the number of failures.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "omsense/cli_app.hpp"
#include "omsense/oracle.hpp"

using namespace omsense;
using omsense::testing::membrane_sensor;
using omsense::testing::rel;

namespace {

int failures = 0;

void report(int id, const char *name, bool pass, const std::string &detail) {
  std::printf("[%s] %2d %-28s %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char *f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Scenario preset(const std::string &name, std::optional<GammaConvention> conv = std::nullopt) {
  ScenarioOverrides ov;
  ov.convention = conv;
  return parse_scenario(read_json_text(preset_scenario(name), name), ov);
}

Study membrane_study() {
  Study s;
  s.sensor = membrane_sensor();
  s.power_w = 2e-3;
  s.light = SqueezingConfig::from_db(10.0, AnglePolicy::frequency_optimal);
  return s;
}

std::vector<double> sweep(double center, std::size_t n) {
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(center * std::pow(10.0, -3.0 + 6.0 * i / (n - 1.0)));
  for (double d : {-1e-9, -1e-10, 0.0, 1e-10, 1e-9}) out.push_back(center * (1.0 + d));
  return out;
}

// 1 -------------------------------------------------------------------------------------
void oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  const double tol = 1e-9;
  std::mt19937_64 rng(20240601);
  double worst = 0.0;
  std::size_t evaluations = 0;
  std::array<std::size_t, 5> sizes{};
  for (int i = 0; i < 200; ++i) {
    const auto d = oracle::random_configuration(rng, membrane_sensor(), 2e-3, 4, 10.0, 15.0, 50);
    ++sizes[d.cfg.size()];
    const auto in = input_quadrature_psds(d.r, d.theta);
    for (double w : d.omegas) {
      worst = std::max(worst, rel(array_noise_psd(d.cfg, in, w).total, oracle::oracle_noise_psd(d.cfg, d.r, d.theta, w)));
      ++evaluations;
    }
  }
  const double elapsed = seconds_since(t0);
  report(1, "oracle equivalence", worst < tol && elapsed < 60.0,
         fmt("max rel err %.3g (< %.0e) over %zu points, M=1..4 counts %zu/%zu/%zu/%zu, %.2f s (< 60 s)", worst, tol,
             evaluations, sizes[1], sizes[2], sizes[3], sizes[4], elapsed));
}

// 2 -------------------------------------------------------------------------------------
void identity_reduction() {
  const double tol = 1e-12;
  const auto s = membrane_sensor();
  const auto light = SqueezingConfig::from_db(10.0, AnglePolicy::frequency_optimal);
  double worst = 0.0, worst_residual = 0.0;
  for (std::size_t m : {1u, 2u, 4u, 8u, 16u}) {
    const auto cfg = make_identical_array(s, m, 2e-3);
    for (double w : sweep(s.osc.resonance_rad_s, 201)) {
      const auto b = array_noise_psd(cfg, QuadraturePsdTriple::vacuum(), w);
      worst = std::max(worst, rel(b.total, single_sensor_noise_psd(s.osc, s.cav, QuadraturePsdTriple::vacuum(), w)));
      worst_residual = std::max(worst_residual, std::abs(residual_vacuum_psd(cfg, w)) / b.total);
      worst_residual = std::max(worst_residual, std::abs(b.residual_vacuum) / b.total);
      const double theta = optimal_squeezing_angle(cfg, w);
      worst = std::max(worst, rel(array_noise_for_light(cfg, light, w).total,
                                  single_sensor_noise_psd(s.osc, s.cav, input_quadrature_psds(light, theta), w)));
    }
  }
  report(2, "identity reduction", worst < tol && worst_residual < tol,
         fmt("max rel diff %.3g, max |residual|/total %.3g (both < %.0e), M in {1,2,4,8,16}", worst, worst_residual, tol));
}

// 3 -------------------------------------------------------------------------------------
void scaling_laws() {
  const double law_tol = 1e-6, ratio_tol = 1e-2;
  const auto st = membrane_study();
  const double single = detector_sensitivity(st.classical(1), st.span).value;
  double worst_coh = 0.0, worst_inc = 0.0;
  for (std::size_t m : {2u, 4u, 8u, 16u, 32u, 64u, 100u}) {
    const double md = static_cast<double>(m);
    worst_coh = std::max(worst_coh, rel(detector_sensitivity(st.classical(m), st.span).value / single, md * md));
    worst_inc = std::max(worst_inc, rel(incoherent_sensitivity(st.classical(m), st.span) / single, md));
  }
  const auto t = scaling_scan(st, {1, 2, 3, 5, 10, 20, 50, 100});
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto &row : t.rows) {
    lo = std::min(lo, row[5]);
    hi = std::max(hi, row[5]);
  }
  const double spread = (hi - lo) / lo;
  report(3, "scaling laws", worst_coh < law_tol && worst_inc < law_tol && spread < ratio_tol && lo > 1.0,
         fmt("coherent M^2 err %.3g, incoherent M err %.3g (< %.0e); squeezed/classical %.6g..%.6g, spread %.3g (< %.0e)",
             worst_coh, worst_inc, law_tol, lo, hi, spread, ratio_tol));
}

// 4 -------------------------------------------------------------------------------------
void distributed_vs_independent() {
  const double tol = 1e-10;
  const auto s = membrane_sensor();
  const auto omegas = sweep(s.osc.resonance_rad_s, 301);
  const double photons = SqueezingConfig::from_db(10.0, AnglePolicy::frequency_optimal).photons();
  double worst = 0.0, worst_oracle = 0.0;
  for (std::size_t m : {2u, 4u, 8u}) {
    const auto cfg = make_identical_array(s, m, 2e-3);
    for (auto policy : {AnglePolicy::frequency_optimal, AnglePolicy::fixed})
      worst = std::max(worst, dqs_vs_dcs_report(cfg, photons, policy, -0.3, omegas).max_relative_difference);
    const double r = SqueezingConfig::strength_from_photons(photons);
    for (std::size_t i = 0; i < omegas.size(); i += 10) {
      const double w = omegas[i];
      const double theta = optimal_squeezing_angle(cfg, w);
      const double dcs =
          oracle::propagate_covariance(oracle::assemble_transfer(oracle::independent_network(cfg, r, theta), w));
      worst_oracle = std::max(worst_oracle, rel(dcs, oracle::oracle_noise_psd(cfg, r, theta, w)));
    }
  }
  report(4, "distributed = independent", worst < tol && worst_oracle < tol,
         fmt("closed form max rel diff %.3g, oracle networks %.3g (< %.0e), M in {2,4,8}, %zu frequencies", worst,
             worst_oracle, tol, omegas.size()));
}

// 5 -------------------------------------------------------------------------------------
void squeezing_factorization() {
  const double tol = 1e-12;
  std::mt19937_64 rng(55);
  double single = 0.0, array = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto s = omsense::testing::random_sensor(rng);
    const double r = omsense::testing::uniform(rng, 0.0, SqueezingConfig::strength_from_db(15.0));
    const double th = omsense::testing::uniform(rng, -3.2, 3.2);
    const double w = omsense::testing::log_uniform(rng, s.osc.resonance_rad_s / 1e3, s.osc.resonance_rad_s * 1e3);
    single = std::max(single, rel(squeezed_noise_closed_form(s.osc, s.cav, r, th, w),
                                  single_sensor_noise_psd(s.osc, s.cav, input_quadrature_psds(r, th), w)));
    const auto d = oracle::random_configuration(rng, membrane_sensor(), 2e-3, 4, 10.0, 15.0, 1);
    const double wa = d.omegas.front();
    array = std::max(array, rel(array_squeezed_noise_closed_form(d.cfg, d.r, d.theta, wa),
                                array_noise_psd(d.cfg, input_quadrature_psds(d.r, d.theta), wa).total));
  }
  report(5, "squeezing factorization", single < tol && array < tol,
         fmt("single-sensor max rel diff %.3g, array %.3g (< %.0e), 1000 draws each", single, array, tol));
}

// 6 -------------------------------------------------------------------------------------
void sql_optimality() {
  const double tol = 1e-6;
  std::mt19937_64 rng(66);
  double worst_value = 0.0, worst_arg = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto s = omsense::testing::random_sensor(rng);
    const double w = omsense::testing::log_uniform(rng, s.osc.resonance_rad_s / 100.0, s.osc.resonance_rad_s * 100.0);
    const complex chi = mechanical_susceptibility(s.osc, w).value;
    auto noise = [&](double log_c) {
      return noise_terms(s.osc, chi, std::exp(log_c), QuadraturePsdTriple::vacuum(), 0.0, 1.0).total();
    };
    const auto m = golden_section_minimize(noise, -80.0, 80.0, 1e-13);
    worst_value = std::max(worst_value, rel(m.value, sql_noise_psd(s.osc, w)));
    worst_arg = std::max(worst_arg, rel(std::exp(m.x), 1.0 / (8.0 * s.osc.damping_rad_s * std::abs(chi))));
  }
  report(6, "SQL optimality", worst_value < tol && worst_arg < tol,
         fmt("noise max rel err %.3g, optimal |C| max rel err %.3g (< %.0e), 100 draws", worst_value, worst_arg, tol));
}

// 7 -------------------------------------------------------------------------------------
void reference_levels_check() {
  const double slack = 3.0;
  struct Target {
    const char *label;
    const char *key;
    double value;
  };
  const Target targets[] = {{"thermal accel", "thermal_accel_asd_m_s2_rthz", 1e-12},
                            {"back-action accel", "back_action_accel_asd_on_resonance_m_s2_rthz", 2e-11},
                            {"shot displacement", "shot_displacement_asd_m_rthz", 9e-19}};
  const auto half = cli::detail::reference_levels(preset("fig4", GammaConvention::half));
  const auto full = cli::detail::reference_levels(preset("fig4", GammaConvention::full));
  bool pass = true;
  std::string detail;
  for (const auto &t : targets) {
    const double h = half[t.key].get<double>(), f = full[t.key].get<double>();
    const double fh = std::max(h / t.value, t.value / h), ff = std::max(f / t.value, t.value / f);
    const bool closer_half = fh <= ff;
    pass = pass && std::min(fh, ff) <= slack;
    detail += fmt("%s half %.3g (x%.2f) full %.3g (x%.2f) closer=%s; ", t.label, h, fh, f, ff,
                  closer_half ? "half" : "full");
  }
  detail += fmt("factor limit %.0f", slack);
  report(7, "reference-level regressions", pass, detail);
}

// 8 -------------------------------------------------------------------------------------
void fig3_anchor() {
  const double anchor_tol = 1e-12, slack = 3.0, target_ba = 7e-24;
  const auto sc = preset("fig3");
  ProjectionSetup setup;
  setup.dm = sc.dark_matter;
  setup.dm.material_factor = calibrated_material_factor(sc);
  setup.plan = sc.plan;
  setup.array_size = sc.projection_array_size;
  const double anchor = hz_to_rad_s(sc.calibration.frequency_hz);
  const double w0 = sc.study.sensor.osc.resonance_rad_s;
  const auto at = dm_projection(sc.study, setup, {anchor, w0});
  const double floor = at.rows[0][3];
  const double ba = at.rows[1][2];

  std::vector<double> hz = cli::detail::hz_axis(sc, 5e-3, 50.0, 241);
  const auto curve = dm_projection(sc.study, setup, cli::detail::to_rad_s(hz));
  std::size_t below = 0;
  double worst_ratio = 0.0;
  for (const auto &row : curve.rows) {
    if (row[7] < row[5]) ++below;
    worst_ratio = std::max(worst_ratio, row[7] / row[5]);
  }
  const double ba_factor = std::max(ba / target_ba, target_ba / ba);
  report(8, "dark-matter anchor", rel(floor, sc.calibration.coupling) < anchor_tol && ba_factor <= slack &&
                                      below == curve.rows.size(),
         fmt("thermal-floor curve at anchor %.6g (target %.3g, rel tol %.0e); back-action point %.3g (x%.2f of %.0e, "
             "limit %.0f); squeezed M=%zu below classical coherent at %zu/%zu frequencies (max ratio %.3f)",
             floor, sc.calibration.coupling, anchor_tol, ba, ba_factor, target_ba, slack, setup.array_size, below,
             curve.rows.size(), worst_ratio));
}

// 9 -------------------------------------------------------------------------------------
void quadrature_convergence() {
  const double tol = 1e-3;
  double worst = 0.0;
  std::size_t integrals = 0;
  std::string worst_where;
  auto compare = [&](const std::string &where, const Table &a, const Table &b) {
    for (std::size_t i = 0; i < a.rows.size(); ++i)
      for (std::size_t c = 1; c < a.columns.size(); ++c) {
        const double d = rel(a.rows[i][c], b.rows[i][c]);
        ++integrals;
        if (d > worst) {
          worst = d;
          worst_where = where + ":" + a.columns[c];
        }
      }
  };
  for (const auto &[name, text] : preset_scenarios()) {
    const auto sc = parse_scenario(read_json_text(text, name));
    Study fine = sc.study;
    fine.span.integration.relative_tolerance *= 0.5;
    const std::size_t m = sc.study.sensors;
    for (const auto &[label, pick] :
         std::vector<std::pair<std::string, std::function<Detector(const Study &)>>>{
             {"single", [](const Study &s) { return s.reference().classical(1); }},
             {"classical", [m](const Study &s) { return s.classical(m); }},
             {"squeezed", [m](const Study &s) { return s.squeezed(m); }}}) {
      const double d = rel(detector_sensitivity(pick(sc.study), sc.study.span).value,
                           detector_sensitivity(pick(fine), fine.span).value);
      ++integrals;
      if (d > worst) {
        worst = d;
        worst_where = name + ":" + label;
      }
    }
    if (name == "fig2") compare(name, scaling_scan(sc.study, sc.axes.sensors), scaling_scan(fine, sc.axes.sensors));
    if (name == "fig5") {
      const auto p = sc.axes.powers_w.empty() ? log_space(1e-8, 1.0, 33) : sc.axes.powers_w;
      compare(name, power_scan(sc.study, p, sc.axes.fixed_angles_rad), power_scan(fine, p, sc.axes.fixed_angles_rad));
    }
    if (name == "fig6") {
      const auto l = sc.axes.losses.empty() ? lin_space(0.0, 0.95, 20) : sc.axes.losses;
      compare(name, loss_scan(sc.study, l), loss_scan(fine, l));
    }
  }
  report(9, "quadrature self-convergence", worst < tol,
         fmt("max rel change %.3g (< %.0e) over %zu integrals in %zu shipped scenarios, worst at %s", worst, tol,
             integrals, preset_scenarios().size(), worst_where.c_str()));
}

// 10 ------------------------------------------------------------------------------------
std::string slurp(const std::filesystem::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void determinism() {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "omsense_acceptance";
  fs::remove_all(root);
  std::size_t compared = 0, identical = 0;
  std::string mismatch;
  for (const auto &[name, command] : cli::preset_commands()) {
    std::ostringstream out, err;
    const auto a = root / (name + "_a"), b = root / (name + "_b");
    const int ca = cli::run({name, "--out", a.string()}, out, err);
    const int cb = cli::run({name, "--out", b.string(), "--threads", "4"}, out, err);
    if (ca != 0 || cb != 0) {
      mismatch += name + "(exit) ";
      continue;
    }
    for (const auto &entry : fs::directory_iterator(a)) {
      if (entry.path().extension() != ".csv") continue;
      ++compared;
      if (slurp(entry.path()) == slurp(b / entry.path().filename())) ++identical;
      else mismatch += entry.path().filename().string() + " ";
    }
  }
  {
    std::ostringstream out, err;
    const auto a = root / "oracle_a", b = root / "oracle_b";
    cli::run({"oracle-check", "--out", a.string()}, out, err);
    cli::run({"oracle-check", "--out", b.string()}, out, err);
    ++compared;
    if (slurp(a / "oracle_check.csv") == slurp(b / "oracle_check.csv") && !slurp(a / "oracle_check.csv").empty())
      ++identical;
    else mismatch += "oracle_check.csv ";
  }
  fs::remove_all(root);
  report(10, "determinism", compared > 0 && identical == compared && mismatch.empty(),
         fmt("%zu/%zu preset CSVs byte-identical across repeated runs (1 vs 4 threads)%s%s", identical, compared,
             mismatch.empty() ? "" : "; mismatches: ", mismatch.c_str()));
}

} // namespace

int main() {
  oracle_equivalence();
  identity_reduction();
  scaling_laws();
  distributed_vs_independent();
  squeezing_factorization();
  sql_optimality();
  reference_levels_check();
  fig3_anchor();
  quadrature_convergence();
  determinism();
  std::printf("%d of 10 criteria failed\n", failures);
  return failures;
}
