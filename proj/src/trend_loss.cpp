#include "streamperc/trend_loss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace streamperc {

void TrendConfig::validate() const {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw std::invalid_argument("TrendConfig: tau must lie in (0, 1)");
  }
  if (!(nu > 0.0) || !std::isfinite(nu)) {
    throw std::invalid_argument("TrendConfig: nu must be positive and finite");
  }
}

std::vector<double> matching_iou(const std::vector<GroundTruthBox>& gts_next,
                                 const std::vector<GroundTruthBox>& gts_cur) {
  std::vector<double> out;
  out.reserve(gts_next.size());
  for (const GroundTruthBox& next : gts_next) {
    double best = 0.0;
    for (const GroundTruthBox& cur : gts_cur) {
      if (cur.category != next.category) continue;
      best = std::max(best, iou(next.box, cur.box));
    }
    out.push_back(best);
  }
  return out;
}

double trend_factor(double m_iou, const TrendConfig& cfg) {
  cfg.validate();
  if (!(m_iou >= 0.0 && m_iou <= 1.0)) {
    throw std::invalid_argument("trend_factor: m_iou must lie in [0, 1]");
  }
  return m_iou >= cfg.tau ? 1.0 / m_iou : 1.0 / cfg.nu;
}

std::vector<double> normalize_weights(const std::vector<double>& omegas,
                                      const std::vector<double>& reg_losses) {
  if (omegas.size() != reg_losses.size()) {
    throw std::invalid_argument("normalize_weights: length mismatch");
  }
  double loss_sum = 0.0;
  double weighted_sum = 0.0;
  for (std::size_t i = 0; i < omegas.size(); ++i) {
    loss_sum += reg_losses[i];
    weighted_sum += omegas[i] * reg_losses[i];
  }
  if (weighted_sum <= 0.0) return omegas;  // degenerate pass-through
  const double scale = loss_sum / weighted_sum;
  std::vector<double> out(omegas.size());
  for (std::size_t i = 0; i < omegas.size(); ++i) out[i] = omegas[i] * scale;
  return out;
}

double total_loss(const std::vector<double>& weights, const LossTerms& terms) {
  if (weights.size() != terms.reg_losses.size()) {
    throw std::invalid_argument("total_loss: length mismatch");
  }
  double reg = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    reg += weights[i] * terms.reg_losses[i];
  }
  return reg + terms.cls_loss + terms.obj_loss;
}

TrendWeights compute_trend_weights(const std::vector<GroundTruthBox>& gts_next,
                                   const std::vector<GroundTruthBox>& gts_cur,
                                   const std::vector<double>& reg_losses,
                                   const TrendConfig& cfg) {
  TrendWeights w;
  w.m_iou = matching_iou(gts_next, gts_cur);
  w.omega.reserve(w.m_iou.size());
  for (double m : w.m_iou) w.omega.push_back(trend_factor(m, cfg));
  w.omega_hat = normalize_weights(w.omega, reg_losses);
  return w;
}

}  // namespace streamperc
