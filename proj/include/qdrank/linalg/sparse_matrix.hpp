#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qdrank/errors.hpp"

namespace qdrank::linalg {

/// A sparse row vector: strictly increasing indices into a space of `dim` columns.
struct SparseVector {
  std::size_t dim = 0;
  std::vector<std::size_t> indices;
  std::vector<double> values;

  std::size_t nnz() const { return indices.size(); }

  friend bool operator==(const SparseVector&, const SparseVector&) = default;
};

/// Sums duplicate indices and sorts. Explicit zeros are dropped.
inline SparseVector make_sparse_vector(std::size_t dim, std::vector<std::pair<std::size_t, double>> entries) {
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  SparseVector v;
  v.dim = dim;
  for (const auto& [i, x] : entries) {
    if (i >= dim) throw DimensionError("sparse index out of range");
    if (!v.indices.empty() && v.indices.back() == i)
      v.values.back() += x;
    else {
      v.indices.push_back(i);
      v.values.push_back(x);
    }
  }
  std::size_t w = 0;
  for (std::size_t r = 0; r < v.indices.size(); ++r) {
    if (v.values[r] == 0.0) continue;
    v.indices[w] = v.indices[r];
    v.values[w] = v.values[r];
    ++w;
  }
  v.indices.resize(w);
  v.values.resize(w);
  return v;
}

/// Compressed sparse row matrix.
class SparseMatrix {
 public:
  SparseMatrix() = default;

  SparseMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> offsets,
               std::vector<std::size_t> columns, std::vector<double> values)
      : rows_(rows), cols_(cols), offsets_(std::move(offsets)), columns_(std::move(columns)),
        values_(std::move(values)) {
    check();
  }

  static SparseMatrix from_rows(std::size_t cols, const std::vector<SparseVector>& rows) {
    std::vector<std::size_t> offsets{0};
    std::vector<std::size_t> columns;
    std::vector<double> values;
    for (const auto& r : rows) {
      if (r.dim != cols) throw DimensionError("row dimension does not match matrix width");
      columns.insert(columns.end(), r.indices.begin(), r.indices.end());
      values.insert(values.end(), r.values.begin(), r.values.end());
      offsets.push_back(columns.size());
    }
    return SparseMatrix(rows.size(), cols, std::move(offsets), std::move(columns), std::move(values));
  }

  static SparseMatrix from_dense(const Eigen::MatrixXd& m) {
    std::vector<std::size_t> offsets{0};
    std::vector<std::size_t> columns;
    std::vector<double> values;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        if (m(i, j) != 0.0) {
          columns.push_back(static_cast<std::size_t>(j));
          values.push_back(m(i, j));
        }
      }
      offsets.push_back(columns.size());
    }
    return SparseMatrix(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()),
                        std::move(offsets), std::move(columns), std::move(values));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }
  const std::vector<std::size_t>& offsets() const { return offsets_; }
  const std::vector<std::size_t>& columns() const { return columns_; }
  const std::vector<double>& values() const { return values_; }

  SparseVector row(std::size_t i) const {
    SparseVector v;
    v.dim = cols_;
    v.indices.assign(columns_.begin() + static_cast<std::ptrdiff_t>(offsets_[i]),
                     columns_.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1]));
    v.values.assign(values_.begin() + static_cast<std::ptrdiff_t>(offsets_[i]),
                    values_.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1]));
    return v;
  }

  /// this * dense (rows x k)
  Eigen::MatrixXd multiply(const Eigen::MatrixXd& dense) const {
    if (static_cast<std::size_t>(dense.rows()) != cols_) throw DimensionError("multiply: shape mismatch");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows_), dense.cols());
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t p = offsets_[i]; p < offsets_[i + 1]; ++p)
        out.row(static_cast<Eigen::Index>(i)) += values_[p] * dense.row(static_cast<Eigen::Index>(columns_[p]));
    return out;
  }

  /// this^T * dense (cols x k)
  Eigen::MatrixXd transpose_multiply(const Eigen::MatrixXd& dense) const {
    if (static_cast<std::size_t>(dense.rows()) != rows_)
      throw DimensionError("transpose_multiply: shape mismatch");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cols_), dense.cols());
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t p = offsets_[i]; p < offsets_[i + 1]; ++p)
        out.row(static_cast<Eigen::Index>(columns_[p])) += values_[p] * dense.row(static_cast<Eigen::Index>(i));
    return out;
  }

  Eigen::MatrixXd to_dense() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_));
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t p = offsets_[i]; p < offsets_[i + 1]; ++p)
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(columns_[p])) = values_[p];
    return m;
  }

  double squared_norm() const {
    double s = 0.0;
    for (double v : values_) s += v * v;
    return s;
  }

  /// Sorted list of columns holding at least one nonzero.
  std::vector<std::size_t> active_columns() const {
    std::vector<char> seen(cols_, 0);
    for (std::size_t p = 0; p < values_.size(); ++p)
      if (values_[p] != 0.0) seen[columns_[p]] = 1;
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < cols_; ++j)
      if (seen[j]) out.push_back(j);
    return out;
  }

 private:
  void check() const {
    if (offsets_.size() != rows_ + 1 || offsets_.front() != 0 || offsets_.back() != columns_.size() ||
        columns_.size() != values_.size())
      throw DimensionError("inconsistent CSR arrays");
    for (std::size_t i = 0; i < rows_; ++i) {
      if (offsets_[i] > offsets_[i + 1]) throw DimensionError("CSR offsets must be non-decreasing");
      for (std::size_t p = offsets_[i]; p < offsets_[i + 1]; ++p) {
        if (columns_[p] >= cols_) throw DimensionError("CSR column index out of range");
        if (p > offsets_[i] && columns_[p] <= columns_[p - 1])
          throw DimensionError("CSR column indices must be strictly increasing within a row");
        if (!std::isfinite(values_[p])) throw NumericError("CSR value is not finite");
      }
    }
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::size_t> columns_;
  std::vector<double> values_;
};

}  // namespace qdrank::linalg
