#pragma once

// Two-photon interference curve fit:
//
//   f(x) = a + d * sinc(c1 (x - b)) * exp(-((x - b) / c2)^2),   sinc(u) = sin(u) / u
//
// d < 0 describes a HOM dip, d > 0 a bunching peak.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "etpa/core.hpp"
#include "etpa/linear_fit.hpp"

namespace etpa {

enum class HomShape { dip, peak };

struct HomCurveParams {
  double a = 0.0;   ///< baseline, counts/s
  double b = 0.0;   ///< delay offset, fs
  double c1 = 0.0;  ///< sinc scale, 1/fs
  double c2 = 1.0;  ///< Gaussian width, fs
  double d = 0.0;   ///< amplitude, counts/s
  double visibility = 0.0;
  double fwhm = 0.0;  ///< fs

  bool visibility_overshoot() const { return visibility > 1.0; }
  /// Rate at the feature center relative to the baseline.
  double center_ratio() const { return (a + d) / a; }
};

struct HomFit {
  HomCurveParams curve;
  FitResult fit;
  int iterations = 0;  ///< accepted steps summed over all starts
};

/// Per-start iteration cap.
inline constexpr int kHomFitMaxIterations = 500;
/// A dip deeper than this would drive the rate well below zero; peaks are not capped.
inline constexpr double kHomVisibilityCeiling = 1.05;

inline double sinc(double u) { return std::abs(u) < 1e-8 ? 1.0 - u * u / 6.0 : std::sin(u) / u; }

inline double hom_model(const HomCurveParams& p, double x) {
  const double z = (x - p.b) / p.c2;
  return p.a + p.d * sinc(p.c1 * (x - p.b)) * std::exp(-z * z);
}

/// Full width at half depth of the fitted feature, found by marching outward
/// from the center and bisecting the first crossing on each side.
inline double hom_fwhm(const HomCurveParams& p) {
  if (p.d == 0.0 || p.c2 == 0.0) return 0.0;
  const double half = 0.5 * std::abs(p.d);
  auto depth = [&](double x) { return std::abs(hom_model(p, x) - p.a); };
  const double scale = std::abs(p.c2);
  const double step = scale / 200.0;
  auto crossing = [&](double dir) {
    double inner = p.b;
    for (int k = 1; k <= 4000; ++k) {
      const double outer = p.b + dir * k * step;
      if (depth(outer) < half) {
        double lo = inner, hi = outer;
        for (int it = 0; it < 80; ++it) {
          const double mid = 0.5 * (lo + hi);
          (depth(mid) >= half ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
      }
      inner = outer;
    }
    return inner;
  };
  return crossing(+1.0) - crossing(-1.0);
}

namespace detail {

inline std::array<double, 5> hom_gradient(const Eigen::Matrix<double, 5, 1>& q, double x) {
  const double b = q(1), c1 = q(2), c2 = q(3), d = q(4);
  const double dx = x - b;
  const double u = c1 * dx;
  const double g = std::exp(-(dx / c2) * (dx / c2));
  const double s = sinc(u);
  const double ds = std::abs(u) < 1e-6 ? -u / 3.0 : (std::cos(u) - s) / u;
  return {1.0,
          d * g * (-c1 * ds + s * 2.0 * dx / (c2 * c2)),
          d * g * ds * dx,
          d * s * g * 2.0 * dx * dx / (c2 * c2 * c2),
          s * g};
}

inline HomCurveParams to_curve(const Eigen::Matrix<double, 5, 1>& q) {
  HomCurveParams p;
  p.a = q(0);
  p.b = q(1);
  p.c1 = std::abs(q(2));
  p.c2 = std::abs(q(3));
  p.d = q(4);
  return p;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

/// Starting point from the data: baseline from the far-delay median, center
/// and amplitude from the extremum, width from the half-depth crossings.
inline HomCurveParams hom_initial_guess(std::span<const DataPoint> pts, HomShape shape) {
  std::vector<DataPoint> s(pts.begin(), pts.end());
  std::sort(s.begin(), s.end(), [](const DataPoint& l, const DataPoint& r) { return l.x < r.x; });
  const std::size_t n = s.size();
  const std::size_t edge = std::max<std::size_t>(1, n / 4);
  std::vector<double> far;
  for (std::size_t i = 0; i < edge; ++i) {
    far.push_back(s[i].y);
    far.push_back(s[n - 1 - i].y);
  }
  HomCurveParams p;
  p.a = detail::median(far);

  auto ext = shape == HomShape::dip
                 ? std::min_element(s.begin(), s.end(), [](auto& l, auto& r) { return l.y < r.y; })
                 : std::max_element(s.begin(), s.end(), [](auto& l, auto& r) { return l.y < r.y; });
  const std::size_t k = static_cast<std::size_t>(ext - s.begin());
  p.b = ext->x;
  p.d = ext->y - p.a;

  const double span = s.back().x - s.front().x;
  double width = span / 10.0;
  if (p.d != 0.0) {
    const double half = 0.5 * std::abs(p.d);
    auto depth = [&](std::size_t i) { return std::abs(s[i].y - p.a); };
    auto interpolate = [&](std::size_t in, std::size_t out) {
      const double di = depth(in), dout = depth(out);
      if (di == dout) return s[out].x;
      return s[in].x + (s[out].x - s[in].x) * (di - half) / (di - dout);
    };
    std::size_t lo = k, hi = k;
    while (lo > 0 && depth(lo - 1) >= half) --lo;
    while (hi + 1 < n && depth(hi + 1) >= half) ++hi;
    const double left = lo > 0 ? interpolate(lo, lo - 1) : s[lo].x;
    const double right = hi + 1 < n ? interpolate(hi, hi + 1) : s[hi].x;
    if (right > left) width = right - left;
  }
  if (!(width > 0.0)) width = span > 0.0 ? span / 10.0 : 1.0;
  p.c2 = width / (2.0 * std::sqrt(std::numbers::ln2));
  p.c1 = 1.0 / p.c2;
  return p;
}

namespace detail {

using HomVec = Eigen::Matrix<double, 5, 1>;
using HomMat = Eigen::Matrix<double, 5, 5>;

struct LmRun {
  HomVec q;
  double chi2 = 0.0;
  int iterations = 0;
  bool converged = false;
};

inline double hom_chi2(std::span<const DataPoint> pts, const HomVec& v) {
  const HomCurveParams c = to_curve(v);
  double sum = 0.0;
  for (const auto& p : pts) {
    const double r = (p.y - hom_model(c, p.x)) / p.y_err;
    sum += r * r;
  }
  return sum;
}

inline void hom_normal_equations(std::span<const DataPoint> pts, const HomVec& v, HomMat& jtj, HomVec& jtr) {
  jtj.setZero();
  jtr.setZero();
  const HomCurveParams c = to_curve(v);
  for (const auto& p : pts) {
    const auto g = hom_gradient(v, p.x);
    const double w = 1.0 / (p.y_err * p.y_err);
    const double r = p.y - hom_model(c, p.x);
    for (int i = 0; i < 5; ++i) {
      jtr(i) += w * g[i] * r;
      for (int j = 0; j < 5; ++j) jtj(i, j) += w * g[i] * g[j];
    }
  }
}

/// Levenberg-Marquardt descent from `q`, at most `max_iterations` accepted steps.
inline LmRun levenberg_marquardt(std::span<const DataPoint> pts, HomVec q, int max_iterations) {
  LmRun run;
  double chi2 = hom_chi2(pts, q);
  double lambda = 1e-3;
  HomMat jtj;
  HomVec jtr;
  int it = 0;
  bool converged = false;
  for (; it < max_iterations && !converged; ++it) {
    hom_normal_equations(pts, q, jtj, jtr);
    const double floor = 1e-12 * std::max(1e-300, jtj.diagonal().maxCoeff());
    bool accepted = false;
    while (!accepted) {
      HomMat damped = jtj;
      for (int i = 0; i < 5; ++i) damped(i, i) += lambda * std::max(jtj(i, i), floor);
      const HomVec step = damped.ldlt().solve(jtr);
      const HomVec trial = q + step;
      const double trial_chi2 = hom_chi2(pts, trial);
      if (std::isfinite(trial_chi2) && trial_chi2 <= chi2) {
        const double drop = chi2 - trial_chi2;
        const double rel_step = (step.array().abs() / (q.array().abs() + 1e-12)).maxCoeff();
        q = trial;
        chi2 = trial_chi2;
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        converged = drop <= 1e-10 * (chi2 + 1e-30) || rel_step < 1e-10;
      } else {
        lambda *= 10.0;
        if (lambda > 1e16) {
          // No descent direction left: at a minimum to machine precision.
          accepted = true;
          converged = true;
        }
      }
    }
  }
  run.q = q;
  run.chi2 = chi2;
  run.iterations = it;
  run.converged = converged;
  return run;
}

}  // namespace detail

/// Levenberg-Marquardt fit of the interference model to (delay, rate, error) points.
/// The descent is started from the data-derived guess and from a few rescaled
/// (c1, c2) pairs around it; the lowest chi-square converged run is kept.
inline HomFit fit_hom_curve(std::span<const DataPoint> pts, HomShape shape) {
  if (pts.size() < 7) throw FitError("HOM fit needs at least 7 points");
  for (const auto& p : pts)
    if (!(p.y_err > 0.0)) throw FitError("HOM fit needs y_err > 0 at every point");

  const HomCurveParams init = hom_initial_guess(pts, shape);
  constexpr std::array<std::pair<double, double>, 7> kStarts = {
      {{1.0, 1.0}, {0.25, 1.0}, {1.75, 1.0}, {1.0, 0.8}, {1.0, 1.25}, {0.25, 1.25}, {1.75, 0.8}}};
  std::optional<detail::LmRun> best;
  int iterations = 0;
  for (const auto& [k1, k2] : kStarts) {
    const detail::HomVec q0(init.a, init.b, k1 * init.c1, k2 * init.c2, init.d);
    const detail::LmRun run = detail::levenberg_marquardt(pts, q0, kHomFitMaxIterations);
    iterations += run.iterations;
    if (run.converged && (!best || run.chi2 < best->chi2)) best = run;
  }
  if (!best) {
    const HomCurveParams c = detail::to_curve(detail::levenberg_marquardt(pts, {init.a, init.b, init.c1, init.c2, init.d},
                                                                          kHomFitMaxIterations).q);
    std::vector<double> res;
    for (const auto& p : pts) res.push_back((p.y - hom_model(c, p.x)) / p.y_err);
    throw FitError("HOM fit did not converge within 500 iterations", std::move(res));
  }
  const detail::HomVec q = best->q;
  const double chi2 = best->chi2;
  const int it = iterations;
  detail::HomMat jtj;
  detail::HomVec jtr;

  const HomCurveParams c0 = detail::to_curve(q);

  HomFit out;
  out.iterations = it;
  out.curve = c0;
  if (!(out.curve.a > 0.0)) throw FitError("HOM fit produced a non-positive baseline");
  out.curve.visibility = std::abs(out.curve.d) / out.curve.a;
  out.curve.fwhm = hom_fwhm(out.curve);
  if (out.curve.d < 0.0 && out.curve.visibility > kHomVisibilityCeiling) {
    std::vector<double> res;
    for (const auto& p : pts) res.push_back((p.y - hom_model(c0, p.x)) / p.y_err);
    throw FitError("HOM dip visibility exceeds 1.05", std::move(res));
  }

  detail::hom_normal_equations(pts, q, jtj, jtr);
  out.fit.params = q;
  out.fit.params(2) = out.curve.c1;
  out.fit.params(3) = out.curve.c2;
  out.fit.covariance = Eigen::MatrixXd(jtj).completeOrthogonalDecomposition().pseudoInverse();
  out.fit.covariance = 0.5 * (out.fit.covariance + out.fit.covariance.transpose()).eval();
  out.fit.chi2 = chi2;
  out.fit.dof = std::max(1, static_cast<int>(pts.size()) - 5);
  return out;
}

}  // namespace etpa
