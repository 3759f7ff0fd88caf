#pragma once

// Reference implementations used only by the tests. They are written independently of the
// library code (plain loops, textbook formulas) so agreement is meaningful.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qdrank/corpus/types.hpp"
#include <iterator>

namespace oracle {

// ---------------------------------------------------------------------------------------------
// Dense symmetric eigenvalues by cyclic Jacobi rotations.

inline std::vector<double> jacobi_eigenvalues(Eigen::MatrixXd a, double tol = 1e-14, int max_sweeps = 100) {
  const auto n = a.rows();
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0, total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        total += a(i, j) * a(i, j);
        if (i != j) off += a(i, j) * a(i, j);
      }
    if (off <= tol * tol * total) break;
    for (Eigen::Index p = 0; p < n - 1; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
  }
  std::vector<double> ev(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) ev[static_cast<std::size_t>(i)] = a(i, i);
  std::sort(ev.rbegin(), ev.rend());
  return ev;
}

/// Frobenius error of the best rank-k approximation: sqrt of the tail of the squared spectrum.
inline double best_rank_k_error(const Eigen::MatrixXd& x, std::size_t k) {
  const Eigen::MatrixXd gram = x.rows() <= x.cols() ? Eigen::MatrixXd(x * x.transpose()) : Eigen::MatrixXd(x.transpose() * x);
  const auto ev = jacobi_eigenvalues(gram);
  double tail = 0.0;
  for (std::size_t i = k; i < ev.size(); ++i) tail += std::max(ev[i], 0.0);
  return std::sqrt(tail);
}

// ---------------------------------------------------------------------------------------------
// Varimax: criterion by definition and a brute-force planar angle search.

inline double varimax_value(const Eigen::MatrixXd& l) {
  double total = 0.0;
  const double n = static_cast<double>(l.rows());
  for (Eigen::Index j = 0; j < l.cols(); ++j) {
    double s2 = 0.0, s4 = 0.0;
    for (Eigen::Index i = 0; i < l.rows(); ++i) {
      const double v = l(i, j) * l(i, j);
      s2 += v;
      s4 += v * v;
    }
    total += s4 / n - (s2 / n) * (s2 / n);
  }
  return total;
}

inline double plane_value(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double phi) {
  Eigen::MatrixXd m(x.size(), 2);
  m.col(0) = std::cos(phi) * x + std::sin(phi) * y;
  m.col(1) = -std::sin(phi) * x + std::cos(phi) * y;
  return varimax_value(m);
}

/// Best criterion over a fine grid of angles in [-pi/4, pi/4], refined by golden section.
inline double best_plane_value(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const double pi = std::acos(-1.0);
  const int grid = 2000;
  double best_phi = 0.0, best = plane_value(x, y, 0.0);
  for (int i = 0; i <= grid; ++i) {
    const double phi = -pi / 4 + (pi / 2) * i / grid;
    const double v = plane_value(x, y, phi);
    if (v > best) best = v, best_phi = phi;
  }
  double lo = best_phi - pi / (2 * grid), hi = best_phi + pi / (2 * grid);
  const double g = (std::sqrt(5.0) - 1) / 2;
  for (int it = 0; it < 100; ++it) {
    const double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
    if (plane_value(x, y, a) > plane_value(x, y, b)) hi = b; else lo = a;
  }
  return std::max(best, plane_value(x, y, 0.5 * (lo + hi)));
}

// ---------------------------------------------------------------------------------------------
// BM25 straight from the textbook definition, recomputing every statistic from the corpus.

inline double bm25(const qdrank::corpus::Dataset& train, const qdrank::corpus::QueryRecord& q,
                   const qdrank::corpus::DocumentRecord& d, double k1 = 1.2, double b = 0.75) {
  std::vector<const qdrank::corpus::DocumentRecord*> docs;
  for (const auto& r : train.records)
    for (const auto& c : r.candidates) docs.push_back(&c);
  auto length = [](const qdrank::corpus::DocumentRecord& x) {
    double n = 0;
    for (const auto& [f, toks] : x.sparse)
      for (const auto& t : toks) n += t.count;
    return n;
  };
  double avg = 0;
  for (auto* x : docs) avg += length(*x);
  avg /= static_cast<double>(docs.size());
  auto tf = [](const qdrank::corpus::DocumentRecord& x, const std::string& field, const std::string& tok) {
    auto it = x.sparse.find(field);
    if (it == x.sparse.end()) return 0.0;
    for (const auto& t : it->second)
      if (t.token == tok) return static_cast<double>(t.count);
    return 0.0;
  };
  double score = 0;
  for (const auto& [field, toks] : q.sparse)
    for (const auto& t : toks) {
      const double f = tf(d, field, t.token);
      if (f == 0) continue;
      double df = 0;
      for (auto* x : docs) df += tf(*x, field, t.token) > 0 ? 1 : 0;
      const double n = static_cast<double>(docs.size());
      const double idf = std::log(1 + (n - df + 0.5) / (df + 0.5));
      score += idf * f * (k1 + 1) / (f + k1 * (1 - b + b * length(d) / avg));
    }
  return score;
}

// ---------------------------------------------------------------------------------------------
// Expected rank of the clicked item under uniformly random tie-breaking, by enumerating every
// permutation of the candidates and using it as the tie-break priority.

inline double tie_rank_by_enumeration(const std::vector<double>& scores, std::size_t clicked) {
  std::vector<std::size_t> perm(scores.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double total = 0;
  std::size_t count = 0;
  do {
    std::vector<std::size_t> order = perm;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    const auto pos = std::find(order.begin(), order.end(), clicked) - order.begin();
    total += static_cast<double>(pos + 1);
    ++count;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return total / static_cast<double>(count);
}

// ---------------------------------------------------------------------------------------------
// Two-sided Student-t tail probability by adaptive Simpson quadrature of the density.

inline double t_density(double x, double nu) {
  const double logc = std::lgamma((nu + 1) / 2) - std::lgamma(nu / 2) - 0.5 * std::log(nu * std::acos(-1.0));
  return std::exp(logc - (nu + 1) / 2 * std::log1p(x * x / nu));
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double eps, double whole,
                               double fa, double fm, double fb, int depth) {
  const double m = (a + b) / 2, lm = (a + m) / 2, rm = (m + b) / 2;
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6 * (fa + 4 * flm + fm);
  const double right = (b - m) / 6 * (fm + 4 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15 * eps) return left + right + (left + right - whole) / 15;
  return adaptive_simpson(f, a, m, eps / 2, left, fa, flm, fm, depth - 1) +
         adaptive_simpson(f, m, b, eps / 2, right, fm, frm, fb, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b, double eps = 1e-13) {
  const double fa = f(a), fb = f(b), fm = f((a + b) / 2);
  return adaptive_simpson(f, a, b, eps, (b - a) / 6 * (fa + 4 * fm + fb), fa, fm, fb, 50);
}

/// P(|T| >= |t|) for T ~ Student t with nu degrees of freedom. The tail is integrated directly
/// after substituting x = |t| + u / (1 - u), which maps [0, 1) onto [|t|, inf).
inline double t_two_sided_p(double t, double nu) {
  const double a = std::abs(t);
  auto g = [&](double u) {
    if (u >= 1.0) return 0.0;
    const double x = a + u / (1 - u);
    return t_density(x, nu) / ((1 - u) * (1 - u));
  };
  // Split the range so the peak near u = 0 is resolved.
  double tail = 0;
  const double cuts[] = {0.0, 0.25, 0.5, 0.75, 0.9, 0.99, 0.999, 1.0};
  for (std::size_t i = 0; i + 1 < std::size(cuts); ++i) tail += integrate(g, cuts[i], cuts[i + 1], 1e-15);
  return 2 * tail;
}

inline double paired_t_statistic(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double mean = 0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ss += (a[i] - b[i] - mean) * (a[i] - b[i] - mean);
  return mean / std::sqrt(ss / (n - 1) / n);
}

// ---------------------------------------------------------------------------------------------
// Adjusted Rand index from the contingency table.

inline double adjusted_rand_index(const std::vector<std::string>& x, const std::vector<std::string>& y) {
  std::map<std::pair<std::string, std::string>, double> cell;
  std::map<std::string, double> rows, cols;
  for (std::size_t i = 0; i < x.size(); ++i) {
    cell[{x[i], y[i]}] += 1;
    rows[x[i]] += 1;
    cols[y[i]] += 1;
  }
  auto c2 = [](double n) { return n * (n - 1) / 2; };
  double sum_cells = 0, sum_rows = 0, sum_cols = 0;
  for (const auto& [k, v] : cell) sum_cells += c2(v);
  for (const auto& [k, v] : rows) sum_rows += c2(v);
  for (const auto& [k, v] : cols) sum_cols += c2(v);
  const double expected = sum_rows * sum_cols / c2(static_cast<double>(x.size()));
  const double maximum = 0.5 * (sum_rows + sum_cols);
  if (maximum == expected) return 1.0;
  return (sum_cells - expected) / (maximum - expected);
}

// ---------------------------------------------------------------------------------------------
// Cross-entropy of a target distribution against a prediction, rebuilt as H(p) + KL(p || q).

inline double entropy_plus_kl(const std::vector<double>& p, const std::vector<double>& q) {
  double h = 0, kl = 0;
  for (std::size_t c = 0; c < p.size(); ++c) {
    if (p[c] == 0) continue;
    h -= p[c] * std::log(p[c]);
    kl += p[c] * std::log(p[c] / q[c]);
  }
  return h + kl;
}

// ---------------------------------------------------------------------------------------------
// Central finite differences over every scalar of a parameter set.

template <class Params, class Grads, class Objective>
double max_gradient_error(Params& params, const Grads& grads, Objective objective, double h = 1e-5,
                          double floor = 1e-7) {
  double worst = 0;
  auto check = [&](double& x, double analytic) {
    const double saved = x;
    x = saved + h;
    const double up = objective();
    x = saved - h;
    const double down = objective();
    x = saved;
    const double numeric = (up - down) / (2 * h);
    const double err = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
    worst = std::max(worst, err);
  };
  for (std::size_t t = 0; t < params.tables.size(); ++t)
    for (Eigen::Index i = 0; i < params.tables[t].size(); ++i) check(params.tables[t].data()[i], grads.tables[t].data()[i]);
  for (std::size_t t = 0; t < params.dense.size(); ++t)
    for (Eigen::Index i = 0; i < params.dense[t].size(); ++i) check(params.dense[t].data()[i], grads.dense[t].data()[i]);
  for (Eigen::Index i = 0; i < params.wide.size(); ++i) check(params.wide(i), grads.wide(i));
  return worst;
}

// ---------------------------------------------------------------------------------------------
// Brute-force ranking metrics.

inline double mean_reciprocal(const std::vector<double>& ranks) {
  double s = 0;
  for (double r : ranks) s += 1 / r;
  return s / static_cast<double>(ranks.size());
}

inline double fraction_within(const std::vector<double>& ranks, double k) {
  double hits = 0;
  for (double r : ranks) hits += r <= k ? 1 : 0;
  return hits / static_cast<double>(ranks.size());
}

inline double weighted_mean(const std::vector<double>& values, const std::vector<double>& weights) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    num += weights[i] * values[i];
    den += weights[i];
  }
  return num / den;
}

}  // namespace oracle
