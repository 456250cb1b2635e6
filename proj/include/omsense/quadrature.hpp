#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <queue>
#include <vector>

#include "omsense/core.hpp"

namespace omsense {

struct Resonance {
  double omega_rad_s = 0.0;
  double linewidth_rad_s = 0.0;
};

struct GridOptions {
  double points_per_decade = 40.0;
  double fine_spacing_fraction = 1.0 / 8.0; // of the linewidth
  double fine_halfwidth_linewidths = 10.0;
  double shell_ratio = 1.5;
};

struct FrequencyGrid {
  std::vector<double> points;  // rad/s, strictly increasing
  std::vector<double> weights; // trapezoid weights on `points`
  std::vector<Resonance> resonances;

  std::size_t size() const { return points.size(); }
  double lower() const { return points.front(); }
  double upper() const { return points.back(); }

  std::size_t points_within(double center, double halfwidth) const {
    auto lo = std::lower_bound(points.begin(), points.end(), center - halfwidth);
    auto hi = std::upper_bound(points.begin(), points.end(), center + halfwidth);
    return static_cast<std::size_t>(hi - lo);
  }

  double finest_spacing_near(double center, double halfwidth) const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < points.size(); ++i)
      if (std::abs(points[i] - center) <= halfwidth && std::abs(points[i - 1] - center) <= halfwidth)
        best = std::min(best, points[i] - points[i - 1]);
    return best;
  }
};

namespace detail {
inline void finalize_grid(FrequencyGrid &g) {
  std::sort(g.points.begin(), g.points.end());
  std::vector<double> unique;
  for (double p : g.points)
    if (unique.empty() || p - unique.back() > 1e-14 * std::max(1.0, std::abs(p))) unique.push_back(p);
  g.points = std::move(unique);
  g.weights.assign(g.points.size(), 0.0);
  for (std::size_t i = 1; i < g.points.size(); ++i) {
    const double h = g.points[i] - g.points[i - 1];
    g.weights[i - 1] += 0.5 * h;
    g.weights[i] += 0.5 * h;
  }
}
} // namespace detail

inline FrequencyGrid linear_grid(double lower, double upper, std::size_t n) {
  if (!(upper > lower) || n < 2) throw ConfigurationError("linear grid needs upper > lower and n >= 2");
  FrequencyGrid g;
  for (std::size_t i = 0; i < n; ++i)
    g.points.push_back(lower + (upper - lower) * static_cast<double>(i) / static_cast<double>(n - 1));
  detail::finalize_grid(g);
  return g;
}

/// Log-spaced backbone plus, around each resonance, uniform points at a fraction of the
/// linewidth inside the core and geometrically widening shells outside it.
inline FrequencyGrid resonance_refined_grid(const std::vector<Resonance> &resonances, double lower,
                                            double upper, const GridOptions &opt = {}) {
  if (!(lower > 0.0) || !(upper > lower)) throw ConfigurationError("grid span must satisfy 0 < lower < upper");
  FrequencyGrid g;
  g.resonances = resonances;
  const double decades = std::log10(upper / lower);
  const auto backbone = static_cast<std::size_t>(std::ceil(decades * opt.points_per_decade)) + 1;
  for (std::size_t i = 0; i < backbone; ++i)
    g.points.push_back(lower * std::pow(upper / lower, static_cast<double>(i) / static_cast<double>(backbone - 1)));
  g.points.back() = upper;

  for (const auto &res : resonances) {
    if (!(res.linewidth_rad_s > 0.0)) throw ConfigurationError("resonance linewidth must be positive");
    if (res.omega_rad_s <= lower || res.omega_rad_s >= upper)
      throw ConfigurationError("grid span excludes a declared resonance");
    const double step = res.linewidth_rad_s * opt.fine_spacing_fraction;
    const double core = res.linewidth_rad_s * opt.fine_halfwidth_linewidths;
    const auto n_core = static_cast<long>(std::ceil(core / step));
    for (long j = -n_core; j <= n_core; ++j) {
      const double p = res.omega_rad_s + static_cast<double>(j) * step;
      if (p > lower && p < upper) g.points.push_back(p);
    }
    for (double off = core * opt.shell_ratio;; off *= opt.shell_ratio) {
      bool any = false;
      if (res.omega_rad_s - off > lower) {
        g.points.push_back(res.omega_rad_s - off);
        any = true;
      }
      if (res.omega_rad_s + off < upper) {
        g.points.push_back(res.omega_rad_s + off);
        any = true;
      }
      if (!any) break;
    }
  }
  detail::finalize_grid(g);
  return g;
}

struct IntegrationOptions {
  double relative_tolerance = 1e-4;
  double absolute_floor = 0.0;
  std::size_t max_evaluations = 4'000'000;
};

struct IntegrationResult {
  double value = 0.0;
  double error_estimate = 0.0;
  std::size_t evaluations = 0;
  std::size_t segments = 0;
  std::size_t initial_segments = 0;

  double relative_error() const { return value == 0.0 ? error_estimate : error_estimate / std::abs(value); }
};

/// Globally adaptive Simpson quadrature seeded with the grid intervals. Each interval keeps
/// a Richardson error estimate; the worst interval is bisected until the summed estimate
/// meets the tolerance. Throws NumericalError when the evaluation budget runs out.
inline IntegrationResult integrate(const std::function<double(double)> &f, const FrequencyGrid &grid,
                                   const IntegrationOptions &opt = {}) {
  if (grid.size() < 2) throw ConfigurationError("integration grid needs at least two points");
  struct Segment {
    double a, b, fa, fm, fb, whole, refined, error;
    double fl, fr;
    bool operator<(const Segment &o) const { return error < o.error; }
  };
  IntegrationResult out;
  auto eval = [&](double x) {
    ++out.evaluations;
    const double y = f(x);
    if (!std::isfinite(y)) throw NumericalError("integrand is not finite");
    return y;
  };
  auto build = [&](double a, double b, double fa, double fm, double fb) {
    Segment s{a, b, fa, fm, fb, 0, 0, 0, 0, 0};
    const double h = b - a;
    s.fl = eval(a + 0.25 * h);
    s.fr = eval(a + 0.75 * h);
    s.whole = h / 6.0 * (fa + 4.0 * fm + fb);
    s.refined = h / 12.0 * (fa + 4.0 * s.fl + 2.0 * fm + 4.0 * s.fr + fb);
    s.error = std::abs(s.refined - s.whole) / 15.0;
    return s;
  };

  std::vector<double> values(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) values[i] = eval(grid.points[i]);
  std::priority_queue<Segment> queue;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double a = grid.points[i - 1], b = grid.points[i];
    queue.push(build(a, b, values[i - 1], eval(0.5 * (a + b)), values[i]));
  }
  out.initial_segments = queue.size();
  if (out.evaluations > opt.max_evaluations)
    throw NumericalError("integration grid alone exceeds the evaluation budget");

  auto totals = [&]() {
    double v = 0.0, e = 0.0;
    auto copy = queue;
    while (!copy.empty()) {
      v += copy.top().refined + (copy.top().refined - copy.top().whole) / 15.0;
      e += copy.top().error;
      copy.pop();
    }
    return std::pair{v, e};
  };

  double value = 0.0, error = 0.0;
  {
    auto [v, e] = totals();
    value = v;
    error = e;
  }
  while (error > std::max(opt.relative_tolerance * std::abs(value), opt.absolute_floor)) {
    if (out.evaluations + 4 > opt.max_evaluations)
      throw NumericalError("adaptive quadrature exceeded its evaluation budget");
    const Segment worst = queue.top();
    queue.pop();
    const double m = 0.5 * (worst.a + worst.b);
    Segment left = build(worst.a, m, worst.fa, worst.fl, worst.fm);
    Segment right = build(m, worst.b, worst.fm, worst.fr, worst.fb);
    const auto contribution = [](const Segment &s) { return s.refined + (s.refined - s.whole) / 15.0; };
    value += contribution(left) + contribution(right) - contribution(worst);
    error += left.error + right.error - worst.error;
    queue.push(left);
    queue.push(right);
    if (error < 0.0 || queue.size() % 4096 == 0) {
      auto [v, e] = totals();
      value = v;
      error = e;
    }
  }
  auto [v, e] = totals();
  out.value = v;
  out.error_estimate = e;
  out.segments = queue.size();
  return out;
}

struct MinimizeResult {
  double x = 0.0;
  double value = 0.0;
  std::size_t iterations = 0;
};

/// Golden-section search for a unimodal minimum on [a, b].
inline MinimizeResult golden_section_minimize(const std::function<double(double)> &f, double a, double b,
                                              double x_tolerance = 1e-12, std::size_t max_iterations = 500) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  MinimizeResult r;
  while (std::abs(b - a) > x_tolerance * std::max(1.0, std::abs(c) + std::abs(d)) && r.iterations < max_iterations) {
    ++r.iterations;
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  r.x = fc < fd ? c : d;
  r.value = std::min(fc, fd);
  return r;
}

/// Dense scan followed by golden-section polishing around the best sample.
inline MinimizeResult scan_then_refine(const std::function<double(double)> &f, double a, double b,
                                       std::size_t samples = 2001, double x_tolerance = 1e-12) {
  std::size_t best = 0;
  double best_value = std::numeric_limits<double>::infinity();
  const double h = (b - a) / static_cast<double>(samples - 1);
  for (std::size_t i = 0; i < samples; ++i) {
    const double v = f(a + h * static_cast<double>(i));
    if (v < best_value) {
      best_value = v;
      best = i;
    }
  }
  const double lo = a + h * static_cast<double>(best == 0 ? 0 : best - 1);
  const double hi = a + h * static_cast<double>(std::min(best + 1, samples - 1));
  auto r = golden_section_minimize(f, lo, hi, x_tolerance);
  if (best_value < r.value) {
    r.x = a + h * static_cast<double>(best);
    r.value = best_value;
  }
  return r;
}

} // namespace omsense
