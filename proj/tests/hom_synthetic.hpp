#pragma once

// Synthetic interference scans shared by the unit and acceptance tests.

#include <cmath>
#include <random>
#include <vector>

#include "etpa/hom_fit.hpp"

namespace etpa::testing {

/// Curve with c1 = 1/c2 whose full width at half depth equals `fwhm`.
inline HomCurveParams hom_truth(double baseline, double amplitude, double fwhm, double center = 0.0) {
  // Solve sinc(v) exp(-v^2) = 1/2 for v in (0, 1.5).
  double lo = 0.0, hi = 1.5;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (sinc(mid) * std::exp(-mid * mid) > 0.5 ? lo : hi) = mid;
  }
  HomCurveParams p;
  p.a = baseline;
  p.b = center;
  p.c2 = 0.5 * fwhm / lo;
  p.c1 = 1.0 / p.c2;
  p.d = amplitude;
  p.visibility = std::abs(amplitude) / baseline;
  p.fwhm = fwhm;
  return p;
}

/// 41 points over +-400 fs with multiplicative Gaussian noise of relative size `noise`.
inline std::vector<DataPoint> hom_scan(const HomCurveParams& truth, double noise, std::mt19937_64& rng,
                                       int points = 41, double span = 400.0) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<DataPoint> out;
  for (int i = 0; i < points; ++i) {
    const double x = -span + 2.0 * span * i / (points - 1);
    const double y = hom_model(truth, x) * (1.0 + noise * n(rng));
    out.push_back({x, y, noise > 0.0 ? noise * std::abs(y) : 1e-3 * truth.a});
  }
  return out;
}

}  // namespace etpa::testing

namespace etpa::testing {

/// Cramer-Rao standard deviation of the fitted FWHM for Gaussian noise of
/// relative size `noise`, from the numerically differentiated Fisher matrix.
inline double hom_fwhm_crlb(const HomCurveParams& truth, double noise, int points = 41, double span = 400.0) {
  const double q0[5] = {truth.a, truth.b, truth.c1, truth.c2, truth.d};
  auto curve = [](const double* q) {
    HomCurveParams p;
    p.a = q[0];
    p.b = q[1];
    p.c1 = q[2];
    p.c2 = q[3];
    p.d = q[4];
    return p;
  };
  Eigen::Matrix<double, 5, 5> fisher = Eigen::Matrix<double, 5, 5>::Zero();
  Eigen::Matrix<double, 5, 1> grad;
  std::vector<Eigen::Matrix<double, 5, 1>> rows(points);
  for (int k = 0; k < 5; ++k) {
    const double h = 1e-6 * std::max(std::abs(q0[k]), 1e-3);
    double qp[5], qm[5];
    std::copy(q0, q0 + 5, qp);
    std::copy(q0, q0 + 5, qm);
    qp[k] += h;
    qm[k] -= h;
    grad(k) = (hom_fwhm(curve(qp)) - hom_fwhm(curve(qm))) / (2 * h);
    for (int i = 0; i < points; ++i) {
      const double x = -span + 2.0 * span * i / (points - 1);
      rows[i](k) = (hom_model(curve(qp), x) - hom_model(curve(qm), x)) / (2 * h);
    }
  }
  for (int i = 0; i < points; ++i) {
    const double x = -span + 2.0 * span * i / (points - 1);
    const double s = noise * hom_model(truth, x);
    fisher += rows[i] * rows[i].transpose() / (s * s);
  }
  return std::sqrt(grad.dot(fisher.inverse() * grad));
}

}  // namespace etpa::testing
