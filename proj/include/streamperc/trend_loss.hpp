#pragma once

#include <vector>

#include "streamperc/geometry.hpp"

namespace streamperc {

/// Trend-factor hyperparameters. tau thresholds new objects, nu weights
/// them; defaults are the grid-search optimum.
struct TrendConfig {
  double tau = 0.3;
  double nu = 1.4;

  void validate() const;
};

struct TrendWeights {
  std::vector<double> m_iou;
  std::vector<double> omega;
  std::vector<double> omega_hat;
};

struct LossTerms {
  std::vector<double> reg_losses;
  double cls_loss = 0.0;
  double obj_loss = 0.0;
};

/// Per next-frame box: max IoU against same-category boxes of the current
/// frame, 0 when no same-category box exists.
std::vector<double> matching_iou(const std::vector<GroundTruthBox>& gts_next,
                                 const std::vector<GroundTruthBox>& gts_cur);

/// 1/m_iou for tracked objects (m_iou >= tau), 1/nu for new ones.
double trend_factor(double m_iou, const TrendConfig& cfg);

/// Rescales omegas so the weighted regression loss sum equals the
/// unweighted sum. All-zero losses pass omegas through unchanged.
std::vector<double> normalize_weights(const std::vector<double>& omegas,
                                      const std::vector<double>& reg_losses);

/// Sum of weighted per-object regression losses plus the pass-through
/// classification and objectness terms.
double total_loss(const std::vector<double>& weights, const LossTerms& terms);

/// Full pipeline for one supervision frame: matching IoU, trend factors,
/// loss-preserving normalization.
TrendWeights compute_trend_weights(const std::vector<GroundTruthBox>& gts_next,
                                   const std::vector<GroundTruthBox>& gts_cur,
                                   const std::vector<double>& reg_losses,
                                   const TrendConfig& cfg);

}  // namespace streamperc
