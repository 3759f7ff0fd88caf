#pragma once

#include <cmath>
#include <span>

#include <boost/math/distributions/students_t.hpp>

#include "qdrank/errors.hpp"

namespace qdrank::eval {

struct TTestResult {
  double t = 0.0;
  double p_value = 1.0;
  std::size_t df = 0;
  double mean_diff = 0.0;
  bool significant = false;  // p < alpha
  bool degenerate = false;   // differences have zero variance; t is undefined
};

/// Two-tailed paired t-test on per-query differences a - b.
inline TTestResult paired_t_test(std::span<const double> a, std::span<const double> b, double alpha = 0.01) {
  if (a.size() != b.size()) throw DimensionError("paired_t_test: samples differ in length");
  if (a.size() < 2) throw InputError("paired_t_test: need at least 2 pairs");
  const auto n = a.size();
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i] - mean;
    ss += d * d;
  }
  TTestResult r;
  r.df = n - 1;
  r.mean_diff = mean;
  const double var = ss / static_cast<double>(n - 1);
  if (!(var > 0.0)) {
    r.degenerate = true;
    return r;
  }
  r.t = mean / std::sqrt(var / static_cast<double>(n));
  const boost::math::students_t dist(static_cast<double>(r.df));
  r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  r.significant = r.p_value < alpha;
  return r;
}

}  // namespace qdrank::eval
