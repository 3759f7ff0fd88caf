#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "qdrank/rank/config.hpp"
#include "qdrank/rank/parameters.hpp"

namespace qdrank::rank {

/// Adagrad (accumulators start at 0.1) or Adam (0.9, 0.999, 1e-8). Embedding columns and wide
/// weights are updated lazily: only entries touched by the current batch move, and their Adam
/// moments decay only when touched.
class Optimizer {
 public:
  static constexpr double kAdagradInit = 0.1;
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  Optimizer(OptimizerKind kind, double lr, const Parameters& shape) : kind_(kind), lr_(lr) {
    const double init = kind == OptimizerKind::adagrad ? kAdagradInit : 0.0;
    for (const auto& t : shape.tables) {
      m_tables_.push_back(Eigen::MatrixXd::Constant(t.rows(), t.cols(), init));
      v_tables_.push_back(Eigen::MatrixXd::Zero(kind == OptimizerKind::adam ? t.rows() : 0, t.cols()));
    }
    for (const auto& d : shape.dense) {
      m_dense_.push_back(Eigen::MatrixXd::Constant(d.rows(), d.cols(), init));
      v_dense_.push_back(Eigen::MatrixXd::Zero(kind == OptimizerKind::adam ? d.rows() : 0, d.cols()));
    }
    m_wide_ = Eigen::VectorXd::Constant(shape.wide.size(), init);
    v_wide_ = Eigen::VectorXd::Zero(kind == OptimizerKind::adam ? shape.wide.size() : 0);
  }

  void step(Parameters& p, const Gradients& g) {
    ++t_;
    if (kind_ == OptimizerKind::adam) {
      c1_ = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
      c2_ = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    }
    for (std::size_t i = 0; i < p.dense.size(); ++i)
      apply(p.dense[i].data(), g.dense[i].data(), m_dense_[i].data(), v_dense_[i].data(), p.dense[i].size());
    for (std::size_t t = 0; t < p.tables.size(); ++t) {
      const auto e = p.tables[t].rows();
      for (auto r : g.touched[t])
        apply(p.tables[t].col(r).data(), g.tables[t].col(r).data(), m_tables_[t].col(r).data(),
              kind_ == OptimizerKind::adam ? v_tables_[t].col(r).data() : nullptr, e);
    }
    for (auto f : g.wide_touched)
      apply(p.wide.data() + f, g.wide.data() + f, m_wide_.data() + f,
            kind_ == OptimizerKind::adam ? v_wide_.data() + f : nullptr, 1);
  }

  std::uint64_t steps() const { return t_; }

 private:
  void apply(double* p, const double* g, double* m, double* v, Eigen::Index n) const {
    if (kind_ == OptimizerKind::adagrad) {
      for (Eigen::Index i = 0; i < n; ++i) {
        m[i] += g[i] * g[i];
        p[i] -= lr_ * g[i] / std::sqrt(m[i]);
      }
      return;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g[i] * g[i];
      p[i] -= lr_ * (m[i] / c1_) / (std::sqrt(v[i] / c2_) + kEps);
    }
  }

  OptimizerKind kind_;
  double lr_;
  std::uint64_t t_ = 0;
  double c1_ = 1.0, c2_ = 1.0;
  std::vector<Eigen::MatrixXd> m_tables_, v_tables_, m_dense_, v_dense_;
  Eigen::VectorXd m_wide_, v_wide_;
};

}  // namespace qdrank::rank
