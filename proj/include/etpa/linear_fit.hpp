#pragma once

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "etpa/core.hpp"

namespace etpa {

/// Least-squares result: parameters, their covariance, chi-square and degrees of freedom.
struct FitResult {
  Eigen::VectorXd params;
  Eigen::MatrixXd covariance;
  double chi2 = 0.0;
  int dof = 1;

  double param(int i) const { return params(i); }
  double param_error(int i) const { return std::sqrt(std::max(0.0, covariance(i, i))); }
  double reduced_chi2() const { return dof > 0 ? chi2 / dof : 0.0; }
};

/// A fit that could not be carried out or did not converge.
class FitError : public Error {
 public:
  FitError(const std::string& what, std::vector<double> residuals = {})
      : Error(what), residuals_(std::move(residuals)) {}
  const std::vector<double>& residuals() const noexcept { return residuals_; }

 private:
  std::vector<double> residuals_;
};

struct DataPoint {
  double x = 0.0;
  double y = 0.0;
  double y_err = 1.0;
};

/// Straight line y = intercept + slope * x; params = (intercept, slope).
struct LineFit : FitResult {
  Measurement slope() const { return {params(1), param_error(1)}; }
  Measurement intercept() const { return {params(0), param_error(0)}; }
};

/// Minimum chi-square straight line with known y errors.
inline LineFit weighted_linear_fit(std::span<const DataPoint> points) {
  if (points.size() < 3) throw FitError("linear fit needs at least 3 points");
  double sw = 0.0, swx = 0.0, swy = 0.0;
  for (const auto& p : points) {
    if (!(p.y_err > 0.0)) throw FitError("linear fit needs y_err > 0 at every point");
    const double w = 1.0 / (p.y_err * p.y_err);
    sw += w;
    swx += w * p.x;
    swy += w * p.y;
  }
  const double xm = swx / sw;
  const double ym = swy / sw;
  double sxx = 0.0, sxy = 0.0;
  bool distinct = false;
  for (const auto& p : points) {
    const double w = 1.0 / (p.y_err * p.y_err);
    sxx += w * (p.x - xm) * (p.x - xm);
    sxy += w * (p.x - xm) * (p.y - ym);
    distinct = distinct || p.x != points.front().x;
  }
  if (!distinct || !(sxx > 0.0)) throw FitError("singular design: all x values are equal");

  const double slope = sxy / sxx;
  const double intercept = ym - slope * xm;

  LineFit fit;
  fit.params = Eigen::Vector2d(intercept, slope);
  fit.covariance.resize(2, 2);
  fit.covariance << 1.0 / sw + xm * xm / sxx, -xm / sxx, -xm / sxx, 1.0 / sxx;
  for (const auto& p : points) {
    const double r = (p.y - intercept - slope * p.x) / p.y_err;
    fit.chi2 += r * r;
  }
  fit.dof = static_cast<int>(points.size()) - 2;
  return fit;
}

}  // namespace etpa
