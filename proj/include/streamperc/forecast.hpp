#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "streamperc/data.hpp"
#include "streamperc/stream_sim.hpp"
#include "streamperc/trend_loss.hpp"

namespace streamperc {

// ---------------------------------------------------------------------------
// Constant-velocity Kalman filter

struct KFConfig {
  double process_noise = 1.0;          // std-dev added per predict, px
  double measurement_noise = 1.0;      // measurement std-dev, px
  double initial_velocity_var = 100.0; // px^2 per frame^2
  double association_iou = 0.3;
  int max_age = 3;                     // frames a track survives unmatched
  bool two_point_velocity_init = true;

  void validate() const;
};

/// State layout: (cx, cy, w, h, vcx, vcy, vw, vh), px and px/frame.
struct KalmanTrack {
  Eigen::Matrix<double, 8, 1> state = Eigen::Matrix<double, 8, 1>::Zero();
  Eigen::Matrix<double, 8, 8> covariance = Eigen::Matrix<double, 8, 8>::Identity();
  int category = 0;
  int age = 0;
  int time_since_update = 0;
  int updates = 0;
  double score = 1.0;
  std::optional<Eigen::Vector4d> prev_measurement;

  BBox current_box() const;
  /// Box extrapolated one frame beyond the current state.
  BBox forecast_box() const;
};

KalmanTrack make_track(const BBox& measurement, int category, double score,
                       const KFConfig& cfg);

/// One predict step followed by an optional measurement update. The second
/// measurement of a track re-anchors the state from the two observations
/// when two-point init is enabled. Throws on a non-PSD covariance.
KalmanTrack kf_step(const KalmanTrack& track, const std::optional<BBox>& measurement,
                    const KFConfig& cfg);

/// Maps a frame to the detections the forecaster consumes. The default
/// (nullptr) is the oracle: the frame's ground truth at score 1.
using BaseDetector = std::function<std::vector<Detection>(const Frame&)>;

/// Agent that tracks detections with per-category greedy IoU association
/// and emits one-frame-ahead forecasts.
std::unique_ptr<DetectorAgent> make_kalman_agent(const KFConfig& cfg,
                                                 BaseDetector detector = nullptr);

/// Agent that reports the base detector's output unchanged (the
/// non-forecasting baseline; its outputs reach evaluation delayed).
std::unique_ptr<DetectorAgent> make_oracle_agent(BaseDetector detector = nullptr);

// ---------------------------------------------------------------------------
// Trainable linear box forecaster

/// Predicts the next box as cur + W * [prev; cur; 1] on center-size
/// coordinates normalized by image size.
struct LinearForecaster {
  Eigen::Matrix<double, 4, 9> weights = Eigen::Matrix<double, 4, 9>::Zero();

  Eigen::Vector4d predict(const Eigen::Vector4d& prev_norm,
                          const Eigen::Vector4d& cur_norm) const;
};

void save_forecaster(const LinearForecaster& model, const std::filesystem::path& path);
LinearForecaster load_forecaster(const std::filesystem::path& path);

/// One aligned object across a triplet, in normalized center-size form.
struct ForecastSample {
  Eigen::Vector4d prev;
  Eigen::Vector4d cur;
  Eigen::Vector4d target;
  double m_iou = 0.0;          // target box vs the current frame's gt
  std::size_t triplet = 0;     // supervision-frame grouping for TAL
};

/// Track-aligned samples; objects lacking a full prev/cur/target chain are
/// skipped. m_iou is computed against all current-frame boxes.
std::vector<ForecastSample> make_training_samples(const std::vector<Triplet>& triplets);

struct TrainConfig {
  double learning_rate = 0.5;
  int epochs = 200;
  std::uint64_t seed = 0;
  bool tal_enabled = false;
  TrendConfig trend;

  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double mean_w_fast = 1.0;  // samples with below-median matching IoU
  double mean_w_slow = 1.0;
};

struct TrainResult {
  LinearForecaster model;
  std::vector<EpochLog> log;
};

/// Per-sample L1 losses and their TAL (or uniform) weights at the given
/// parameters. Weights are normalized per supervision frame.
struct LossBreakdown {
  std::vector<double> losses;
  std::vector<double> weights;
  double total = 0.0;  // mean of weight * loss
};

LossBreakdown forecast_loss(const LinearForecaster& model,
                            const std::vector<ForecastSample>& samples,
                            const TrainConfig& cfg);

/// Same objective with the per-sample weights frozen (used by training and
/// by the finite-difference check).
double forecast_loss_fixed_weights(const LinearForecaster& model,
                                   const std::vector<ForecastSample>& samples,
                                   const std::vector<double>& weights);

/// Gradient of the mean weighted L1 loss w.r.t. the weight matrix, with
/// the TAL weights held constant.
Eigen::Matrix<double, 4, 9> forecast_gradient(const LinearForecaster& model,
                                              const std::vector<ForecastSample>& samples,
                                              const std::vector<double>& weights);

/// Full-batch subgradient descent on the (optionally TAL-weighted) L1 loss
/// with diminishing step sizes lr/sqrt(t+1); returns the best iterate seen.
TrainResult train_linear_forecaster(const std::vector<Triplet>& triplets,
                                    const TrainConfig& cfg);

/// Max elementwise relative error between the analytic gradient and central
/// finite differences (step 1e-5), weights frozen at the evaluation point.
double grad_check(const LinearForecaster& model,
                  const std::vector<ForecastSample>& samples, const TrainConfig& cfg);

/// Agent wrapping a trained forecaster: associates the current detections
/// to the previous frame's and applies the model; unmatched objects reuse
/// the current box as its own history.
std::unique_ptr<DetectorAgent> make_linear_forecast_agent(LinearForecaster model,
                                                          double association_iou = 0.3,
                                                          BaseDetector detector = nullptr);

}  // namespace streamperc
