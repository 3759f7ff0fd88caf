#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "qdrank/errors.hpp"

namespace qdrank::linalg {

struct VarimaxOptions {
  std::size_t max_iters = 100;  // full sweeps over all column pairs
  double tol = 1e-6;            // relative criterion change that ends the iteration
};

struct VarimaxResult {
  Eigen::MatrixXd rotation;  // k x k orthogonal
  Eigen::MatrixXd rotated;   // loadings * rotation
  std::vector<double> criterion_history;  // value before the first sweep, then after each sweep
  std::size_t sweeps = 0;
};

/// Raw varimax criterion: sum over columns of the variance of the squared loadings.
inline double varimax_criterion(const Eigen::MatrixXd& loadings) {
  const double n = static_cast<double>(loadings.rows());
  if (loadings.rows() == 0) return 0.0;
  double total = 0.0;
  for (Eigen::Index j = 0; j < loadings.cols(); ++j) {
    const Eigen::ArrayXd sq = loadings.col(j).array().square();
    const double mean = sq.sum() / n;
    total += sq.square().sum() / n - mean * mean;
  }
  return total;
}

/// Closed-form optimal planar angle for columns (x, y) under the rotation
/// x' = x cos(phi) + y sin(phi), y' = -x sin(phi) + y cos(phi).
/// `gain` is proportional to the criterion increase the angle achieves (always >= 0).
struct PlaneRotation {
  double phi = 0.0;
  double gain = 0.0;
  double scale = 0.0;  // magnitude of the angular objective; gain is judged relative to it
};

inline PlaneRotation varimax_plane_angle(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const double n = static_cast<double>(x.size());
  double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double u = x(i) * x(i) - y(i) * y(i);
    const double v = 2.0 * x(i) * y(i);
    a += u;
    b += v;
    c += u * u - v * v;
    d += 2.0 * u * v;
  }
  const double num = d - 2.0 * a * b / n;
  const double den = c - (a * a - b * b) / n;
  PlaneRotation r;
  r.phi = 0.25 * std::atan2(num, den);
  r.scale = std::hypot(num, den);
  r.gain = r.scale - den;
  return r;
}

/// Orthogonal varimax rotation by Kaiser's pairwise sweeps. Every planar step maximizes the
/// criterion over its plane exactly, so the criterion never decreases. Output columns are
/// sign-normalized so each column's largest-magnitude entry is positive.
inline VarimaxResult varimax(const Eigen::MatrixXd& loadings, const VarimaxOptions& opts = {}) {
  if (!loadings.allFinite()) throw NumericError("varimax: loadings contain non-finite values");
  const Eigen::Index k = loadings.cols();
  if (k < 1) throw DimensionError("varimax: need at least one column");

  VarimaxResult res;
  res.rotation = Eigen::MatrixXd::Identity(k, k);
  if (k == 1) {
    res.rotated = loadings;
    res.criterion_history.push_back(varimax_criterion(loadings));
    return res;
  }

  Eigen::MatrixXd lam = loadings;
  double crit = varimax_criterion(lam);
  res.criterion_history.push_back(crit);
  for (std::size_t sweep = 0; sweep < opts.max_iters; ++sweep) {
    for (Eigen::Index p = 0; p + 1 < k; ++p) {
      for (Eigen::Index q = p + 1; q < k; ++q) {
        const auto step = varimax_plane_angle(lam.col(p), lam.col(q));
        // Skip steps whose gain is lost in rounding; they cannot improve the criterion.
        if (!(step.gain > 1e-12 * step.scale)) continue;
        const double cs = std::cos(step.phi), sn = std::sin(step.phi);
        const Eigen::VectorXd lp = lam.col(p), lq = lam.col(q);
        lam.col(p) = cs * lp + sn * lq;
        lam.col(q) = -sn * lp + cs * lq;
        const Eigen::VectorXd rp = res.rotation.col(p), rq = res.rotation.col(q);
        res.rotation.col(p) = cs * rp + sn * rq;
        res.rotation.col(q) = -sn * rp + cs * rq;
      }
    }
    const double next = varimax_criterion(lam);
    res.criterion_history.push_back(next);
    ++res.sweeps;
    const double change = next - crit;
    crit = next;
    if (std::abs(change) <= opts.tol * std::max(std::abs(next), 1e-300)) break;
  }

  res.rotated = loadings * res.rotation;
  for (Eigen::Index j = 0; j < k; ++j) {
    Eigen::Index arg = 0;
    res.rotated.col(j).cwiseAbs().maxCoeff(&arg);
    if (res.rotated(arg, j) < 0.0) {
      res.rotated.col(j) *= -1.0;
      res.rotation.col(j) *= -1.0;
    }
  }
  return res;
}

}  // namespace qdrank::linalg
