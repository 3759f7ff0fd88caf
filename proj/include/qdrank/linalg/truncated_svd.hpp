#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "qdrank/errors.hpp"
#include "qdrank/linalg/sparse_matrix.hpp"
#include "qdrank/random.hpp"

namespace qdrank::linalg {

/// Learned projection from the sparse input space onto k latent axes.
///
/// The basis is stored only on its support (the input columns that were active while
/// fitting); every other row of the conceptual input_dim x k basis is exactly zero.
struct SubspaceModel {
  std::size_t input_dim = 0;
  std::vector<std::size_t> support;  // sorted
  Eigen::MatrixXd basis;             // support.size() x k, orthonormal columns
  Eigen::VectorXd singular_values;   // k, non-increasing
  Eigen::MatrixXd rotation;          // k x k, orthogonal; identity until varimax is applied
  std::optional<Eigen::VectorXd> feature_means;  // unused; centering would destroy sparsity

  std::size_t rank() const { return static_cast<std::size_t>(basis.cols()); }

  Eigen::MatrixXd dense_basis() const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(input_dim), basis.cols());
    for (std::size_t r = 0; r < support.size(); ++r)
      out.row(static_cast<Eigen::Index>(support[r])) = basis.row(static_cast<Eigen::Index>(r));
    return out;
  }
};

struct SvdOptions {
  std::size_t oversample = 10;
  std::size_t power_iters = 2;
};

namespace detail {

inline Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& y) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
  return qr.householderQ() * Eigen::MatrixXd::Identity(y.rows(), y.cols());
}

}  // namespace detail

/// Randomized rank-k SVD (Gaussian sketch of width k + oversample, power iterations with
/// re-orthonormalization each pass, then a small dense SVD of the projected matrix).
/// Bit-reproducible for a fixed seed.
inline SubspaceModel truncated_svd(const SparseMatrix& x, std::size_t k, const SvdOptions& opts,
                                   std::uint64_t seed) {
  if (k == 0 || k > std::min(x.rows(), x.cols()))
    throw DimensionError("truncated_svd: k must lie in [1, min(rows, cols)]");
  if (x.squared_norm() == 0.0) throw DegenerateInputError("truncated_svd: all-zero matrix");

  // Work on the active columns only; absent columns get zero basis rows.
  const std::vector<std::size_t> support = x.active_columns();
  std::vector<std::size_t> remap(x.cols(), 0);
  for (std::size_t j = 0; j < support.size(); ++j) remap[support[j]] = j;
  std::vector<std::size_t> cols(x.columns().size());
  for (std::size_t p = 0; p < cols.size(); ++p) cols[p] = remap[x.columns()[p]];
  std::vector<double> vals = x.values();
  // Drop explicit zeros so the compacted matrix stays a valid CSR.
  std::vector<std::size_t> offsets{0}, c2;
  std::vector<double> v2;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t p = x.offsets()[i]; p < x.offsets()[i + 1]; ++p) {
      if (vals[p] == 0.0) continue;
      c2.push_back(cols[p]);
      v2.push_back(vals[p]);
    }
    offsets.push_back(c2.size());
  }
  const SparseMatrix xc(x.rows(), support.size(), std::move(offsets), std::move(c2), std::move(v2));

  const std::size_t max_rank = std::min(xc.rows(), xc.cols());
  if (k > max_rank) throw DegenerateInputError("truncated_svd: fewer active columns than k");
  const std::size_t width = std::min(k + opts.oversample, max_rank);

  Rng rng(seed);
  Eigen::MatrixXd omega(static_cast<Eigen::Index>(xc.cols()), static_cast<Eigen::Index>(width));
  for (Eigen::Index j = 0; j < omega.cols(); ++j)
    for (Eigen::Index i = 0; i < omega.rows(); ++i) omega(i, j) = rng.normal();

  Eigen::MatrixXd q = detail::orthonormalize(xc.multiply(omega));
  for (std::size_t it = 0; it < opts.power_iters; ++it) {
    const Eigen::MatrixXd z = detail::orthonormalize(xc.transpose_multiply(q));
    q = detail::orthonormalize(xc.multiply(z));
  }

  // B^T = X^T Q (active_cols x width); its left singular vectors are B's right singular vectors.
  const Eigen::MatrixXd bt = xc.transpose_multiply(q);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(bt, Eigen::ComputeThinU);

  SubspaceModel model;
  model.input_dim = x.cols();
  model.support = support;
  const auto kk = static_cast<Eigen::Index>(k);
  model.basis = svd.matrixU().leftCols(kk);
  model.singular_values = svd.singularValues().head(kk);
  // Fix the sign ambiguity: largest-magnitude basis entry of each column positive.
  for (Eigen::Index j = 0; j < kk; ++j) {
    Eigen::Index arg = 0;
    model.basis.col(j).cwiseAbs().maxCoeff(&arg);
    if (model.basis(arg, j) < 0.0) model.basis.col(j) *= -1.0;
  }
  model.rotation = Eigen::MatrixXd::Identity(kk, kk);
  return model;
}

inline SubspaceModel truncated_svd(const SparseMatrix& x, std::size_t k, std::uint64_t seed) {
  return truncated_svd(x, k, SvdOptions{}, seed);
}

/// Unrotated latent coordinates x * basis.
inline Eigen::VectorXd project_unrotated(const SubspaceModel& model, const SparseVector& x) {
  if (x.dim != model.input_dim) throw DimensionError("project: vector dimension does not match model");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(model.basis.cols());
  auto it = model.support.begin();
  for (std::size_t p = 0; p < x.indices.size(); ++p) {
    it = std::lower_bound(it, model.support.end(), x.indices[p]);
    if (it == model.support.end()) break;
    if (*it != x.indices[p]) continue;
    out += x.values[p] * model.basis.row(it - model.support.begin()).transpose();
  }
  return out;
}

/// Rotated embedding (x * basis) * rotation. Linear in x.
inline Eigen::VectorXd project(const SubspaceModel& model, const SparseVector& x) {
  return model.rotation.transpose() * project_unrotated(model, x);
}

/// Unrotated coordinates of every row of x (i.e. U * Sigma for the training rows).
inline Eigen::MatrixXd project_rows_unrotated(const SubspaceModel& model, const SparseMatrix& x) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(x.rows()), model.basis.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = project_unrotated(model, x.row(i)).transpose();
  return out;
}

}  // namespace qdrank::linalg
