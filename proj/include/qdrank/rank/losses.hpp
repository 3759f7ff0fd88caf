#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "qdrank/errors.hpp"

namespace qdrank::rank {

inline constexpr double kProbClamp = 1e-12;

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

/// Pairwise log-loss -y log p - (1 - y) log(1 - p), with p clamped away from 0 and 1.
inline double loss_rank(double p, double y) {
  const double c = clamp_prob(p);
  return -y * std::log(c) - (1.0 - y) * std::log(1.0 - c);
}

/// d loss_rank / d p (zero where the clamp is active).
inline double loss_rank_grad(double p, double y) {
  if (p < kProbClamp || p > 1.0 - kProbClamp) return 0.0;
  return (p - y) / (p * (1.0 - p));
}

/// Cross-entropy -sum p_c log p_hat_c over the cluster vocabulary.
inline double loss_cluster(std::span<const double> p_hat, std::span<const double> target) {
  if (p_hat.size() != target.size()) throw DimensionError("loss_cluster: size mismatch");
  double l = 0.0;
  for (std::size_t c = 0; c < target.size(); ++c)
    if (target[c] != 0.0) l -= target[c] * std::log(std::max(p_hat[c], kProbClamp));
  return l;
}

/// Mean over queries of (rank loss + mix_rate * cluster loss).
inline double loss_joint(std::span<const double> rank_losses, std::span<const double> cluster_losses,
                         double mix_rate) {
  if (rank_losses.size() != cluster_losses.size()) throw DimensionError("loss_joint: length mismatch");
  if (rank_losses.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < rank_losses.size(); ++i) s += rank_losses[i] + mix_rate * cluster_losses[i];
  return s / static_cast<double>(rank_losses.size());
}

/// The same objective written as mean rank loss plus mix_rate times mean cluster loss.
inline double loss_joint_separated(std::span<const double> rank_losses, std::span<const double> cluster_losses,
                                   double mix_rate) {
  if (rank_losses.size() != cluster_losses.size()) throw DimensionError("loss_joint: length mismatch");
  if (rank_losses.empty()) return 0.0;
  const double n = static_cast<double>(rank_losses.size());
  double r = 0.0, c = 0.0;
  for (std::size_t i = 0; i < rank_losses.size(); ++i) {
    r += rank_losses[i];
    c += cluster_losses[i];
  }
  return r / n + mix_rate * (c / n);
}

}  // namespace qdrank::rank
