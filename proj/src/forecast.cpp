#include "streamperc/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

namespace streamperc {

using Mat8 = Eigen::Matrix<double, 8, 8>;
using Vec8 = Eigen::Matrix<double, 8, 1>;
using Mat48 = Eigen::Matrix<double, 4, 8>;

void KFConfig::validate() const {
  if (!(process_noise > 0.0) || !(measurement_noise > 0.0)) {
    throw std::invalid_argument("KFConfig: noise scales must be positive");
  }
  if (!(association_iou > 0.0 && association_iou <= 1.0)) {
    throw std::invalid_argument("KFConfig: association_iou must lie in (0, 1]");
  }
  if (max_age < 0) throw std::invalid_argument("KFConfig: max_age must be >= 0");
}

namespace {

Mat8 transition_matrix() {
  Mat8 f = Mat8::Identity();
  f.topRightCorner<4, 4>() = Eigen::Matrix4d::Identity();
  return f;
}

Mat48 measurement_matrix() {
  Mat48 h = Mat48::Zero();
  h.leftCols<4>() = Eigen::Matrix4d::Identity();
  return h;
}

void check_psd(Mat8& p) {
  p = 0.5 * (p + p.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Mat8> es(p, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-9) {
    throw std::runtime_error("Kalman covariance lost positive semi-definiteness");
  }
}

std::vector<Detection> oracle_detections(const Frame& frame) {
  std::vector<Detection> dets;
  dets.reserve(frame.gt.size());
  for (const GroundTruthBox& g : frame.gt) dets.push_back({g.box, g.category, 1.0});
  return dets;
}

BaseDetector resolve_detector(BaseDetector detector) {
  if (detector) return detector;
  return oracle_detections;
}

BBox positive_extent_box(const Eigen::Vector4d& csz) {
  Eigen::Vector4d c = csz;
  c[2] = std::max(c[2], 1e-6);
  c[3] = std::max(c[3], 1e-6);
  return BBox::from_center_size(c);
}

}  // namespace

BBox KalmanTrack::current_box() const { return positive_extent_box(state.head<4>()); }

BBox KalmanTrack::forecast_box() const {
  return positive_extent_box(state.head<4>() + state.tail<4>());
}

KalmanTrack make_track(const BBox& measurement, int category, double score,
                       const KFConfig& cfg) {
  cfg.validate();
  KalmanTrack t;
  t.state.head<4>() = measurement.center_size();
  t.state.tail<4>().setZero();
  const double r = cfg.measurement_noise * cfg.measurement_noise;
  t.covariance = Mat8::Zero();
  t.covariance.topLeftCorner<4, 4>() = r * Eigen::Matrix4d::Identity();
  t.covariance.bottomRightCorner<4, 4>() =
      cfg.initial_velocity_var * Eigen::Matrix4d::Identity();
  t.category = category;
  t.score = score;
  t.updates = 1;
  t.prev_measurement = measurement.center_size();
  return t;
}

KalmanTrack kf_step(const KalmanTrack& track, const std::optional<BBox>& measurement,
                    const KFConfig& cfg) {
  cfg.validate();
  KalmanTrack t = track;
  const Mat8 f = transition_matrix();
  const double q = cfg.process_noise * cfg.process_noise;

  t.state = f * t.state;
  t.covariance = f * t.covariance * f.transpose() + q * Mat8::Identity();
  t.age += 1;
  t.time_since_update += 1;

  if (measurement) {
    validate_box(*measurement);
    const Eigen::Vector4d z = measurement->center_size();
    if (cfg.two_point_velocity_init && t.updates == 1 && t.prev_measurement) {
      // Re-anchor from the first two observations: exact position and
      // exact finite-difference velocity.
      t.state.head<4>() = z;
      t.state.tail<4>() = z - *t.prev_measurement;
      const double r = cfg.measurement_noise * cfg.measurement_noise;
      t.covariance = Mat8::Zero();
      t.covariance.topLeftCorner<4, 4>() = r * Eigen::Matrix4d::Identity();
      t.covariance.bottomRightCorner<4, 4>() = 2.0 * r * Eigen::Matrix4d::Identity();
    } else {
      const Mat48 h = measurement_matrix();
      const double r = cfg.measurement_noise * cfg.measurement_noise;
      const Eigen::Matrix4d s =
          h * t.covariance * h.transpose() + r * Eigen::Matrix4d::Identity();
      const Eigen::Matrix<double, 8, 4> k =
          t.covariance * h.transpose() * s.llt().solve(Eigen::Matrix4d::Identity());
      t.state += k * (z - h * t.state);
      const Mat8 ikh = Mat8::Identity() - k * h;
      // Joseph form keeps the update numerically symmetric.
      t.covariance = ikh * t.covariance * ikh.transpose() +
                     k * (r * Eigen::Matrix4d::Identity()) * k.transpose();
    }
    check_psd(t.covariance);
    t.updates += 1;
    t.time_since_update = 0;
    t.prev_measurement = z;
  } else {
    check_psd(t.covariance);
  }
  return t;
}

namespace {

class KalmanForecastAgent final : public DetectorAgent {
 public:
  KalmanForecastAgent(KFConfig cfg, BaseDetector detector)
      : cfg_(cfg), detector_(resolve_detector(std::move(detector))) {
    cfg_.validate();
  }

  std::vector<Detection> process(const Frame& frame) override {
    const std::vector<Detection> dets = detector_(frame);

    // Associate detections to where each track lands at this frame.
    std::vector<GroundTruthBox> predicted_boxes;
    predicted_boxes.reserve(tracks_.size());
    for (const KalmanTrack& t : tracks_) {
      predicted_boxes.push_back({t.forecast_box(), t.category, std::nullopt});
    }
    const auto matches = greedy_match(dets, predicted_boxes, cfg_.association_iou);

    std::vector<int> measurement_of(tracks_.size(), -1);
    std::vector<bool> det_used(dets.size(), false);
    for (const auto& [di, ti] : matches) {
      measurement_of[static_cast<std::size_t>(ti)] = di;
      det_used[static_cast<std::size_t>(di)] = true;
    }

    for (std::size_t ti = 0; ti < tracks_.size(); ++ti) {
      const int di = measurement_of[ti];
      if (di >= 0) {
        tracks_[ti] =
            kf_step(tracks_[ti], dets[static_cast<std::size_t>(di)].box, cfg_);
        tracks_[ti].score = dets[static_cast<std::size_t>(di)].score;
      } else {
        tracks_[ti] = kf_step(tracks_[ti], std::nullopt, cfg_);
      }
    }

    for (std::size_t di = 0; di < dets.size(); ++di) {
      if (!det_used[di]) {
        tracks_.push_back(
            make_track(dets[di].box, dets[di].category, dets[di].score, cfg_));
      }
    }

    std::erase_if(tracks_, [&](const KalmanTrack& t) {
      return t.time_since_update > cfg_.max_age;
    });

    std::vector<Detection> forecasts;
    forecasts.reserve(tracks_.size());
    for (const KalmanTrack& t : tracks_) {
      forecasts.push_back({t.forecast_box(), t.category, t.score});
    }
    return forecasts;
  }

 private:
  KFConfig cfg_;
  BaseDetector detector_;
  std::vector<KalmanTrack> tracks_;
};

class OracleAgent final : public DetectorAgent {
 public:
  explicit OracleAgent(BaseDetector detector)
      : detector_(resolve_detector(std::move(detector))) {}

  std::vector<Detection> process(const Frame& frame) override {
    return detector_(frame);
  }

 private:
  BaseDetector detector_;
};

}  // namespace

std::unique_ptr<DetectorAgent> make_kalman_agent(const KFConfig& cfg,
                                                 BaseDetector detector) {
  return std::make_unique<KalmanForecastAgent>(cfg, std::move(detector));
}

std::unique_ptr<DetectorAgent> make_oracle_agent(BaseDetector detector) {
  return std::make_unique<OracleAgent>(std::move(detector));
}

// ---------------------------------------------------------------------------
// Linear forecaster

Eigen::Vector4d LinearForecaster::predict(const Eigen::Vector4d& prev_norm,
                                          const Eigen::Vector4d& cur_norm) const {
  Eigen::Matrix<double, 9, 1> phi;
  phi << prev_norm, cur_norm, 1.0;
  return cur_norm + weights * phi;
}

void save_forecaster(const LinearForecaster& model, const std::filesystem::path& path) {
  nlohmann::json j;
  j["rows"] = 4;
  j["cols"] = 9;
  std::vector<double> flat;
  flat.reserve(36);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 9; ++c) flat.push_back(model.weights(r, c));
  j["weights"] = flat;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

LinearForecaster load_forecaster(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  nlohmann::json j;
  in >> j;
  if (j.at("rows").get<int>() != 4 || j.at("cols").get<int>() != 9) {
    throw std::runtime_error("forecaster file has unexpected shape");
  }
  const auto flat = j.at("weights").get<std::vector<double>>();
  if (flat.size() != 36) throw std::runtime_error("forecaster file has wrong size");
  LinearForecaster m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 9; ++c) m.weights(r, c) = flat[static_cast<std::size_t>(r * 9 + c)];
  return m;
}

namespace {

Eigen::Vector4d normalized_csz(const BBox& b, int width, int height) {
  Eigen::Vector4d c = b.center_size();
  c[0] /= width;
  c[2] /= width;
  c[1] /= height;
  c[3] /= height;
  return c;
}

const GroundTruthBox* find_track(const std::vector<GroundTruthBox>& gts,
                                 std::int64_t track_id) {
  for (const GroundTruthBox& g : gts) {
    if (g.track_id && *g.track_id == track_id) return &g;
  }
  return nullptr;
}

}  // namespace

std::vector<ForecastSample> make_training_samples(const std::vector<Triplet>& triplets) {
  std::vector<ForecastSample> samples;
  for (std::size_t ti = 0; ti < triplets.size(); ++ti) {
    const Triplet& t = triplets[ti];
    if (t.cur.width <= 0 || t.cur.height <= 0) {
      throw std::invalid_argument("make_training_samples: frame has no image size");
    }
    const std::vector<double> mious = matching_iou(t.target_gt, t.cur.gt);
    for (std::size_t gi = 0; gi < t.target_gt.size(); ++gi) {
      const GroundTruthBox& target = t.target_gt[gi];
      if (!target.track_id) continue;
      const GroundTruthBox* cur = find_track(t.cur.gt, *target.track_id);
      const GroundTruthBox* prev = find_track(t.prev.gt, *target.track_id);
      if (!cur || !prev) continue;
      ForecastSample s;
      s.prev = normalized_csz(prev->box, t.cur.width, t.cur.height);
      s.cur = normalized_csz(cur->box, t.cur.width, t.cur.height);
      s.target = normalized_csz(target.box, t.cur.width, t.cur.height);
      s.m_iou = mious[gi];
      s.triplet = ti;
      samples.push_back(std::move(s));
    }
  }
  return samples;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("TrainConfig: learning_rate must be positive");
  }
  if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
  trend.validate();
}

LossBreakdown forecast_loss(const LinearForecaster& model,
                            const std::vector<ForecastSample>& samples,
                            const TrainConfig& cfg) {
  LossBreakdown b;
  b.losses.reserve(samples.size());
  for (const ForecastSample& s : samples) {
    const Eigen::Vector4d r = model.predict(s.prev, s.cur) - s.target;
    b.losses.push_back(r.cwiseAbs().sum());
  }

  b.weights.assign(samples.size(), 1.0);
  if (cfg.tal_enabled) {
    // Normalize per supervision frame, Eq.-style loss-sum preservation.
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      groups[samples[i].triplet].push_back(i);
    }
    for (const auto& [triplet, idx] : groups) {
      std::vector<double> omegas, losses;
      for (std::size_t i : idx) {
        omegas.push_back(trend_factor(samples[i].m_iou, cfg.trend));
        losses.push_back(b.losses[i]);
      }
      const std::vector<double> hats = normalize_weights(omegas, losses);
      for (std::size_t k = 0; k < idx.size(); ++k) b.weights[idx[k]] = hats[k];
    }
  }

  b.total = forecast_loss_fixed_weights(model, samples, b.weights);
  return b;
}

double forecast_loss_fixed_weights(const LinearForecaster& model,
                                   const std::vector<ForecastSample>& samples,
                                   const std::vector<double>& weights) {
  if (samples.empty()) throw std::invalid_argument("forecast loss: empty batch");
  if (weights.size() != samples.size()) {
    throw std::invalid_argument("forecast loss: weight/sample length mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Eigen::Vector4d r =
        model.predict(samples[i].prev, samples[i].cur) - samples[i].target;
    total += weights[i] * r.cwiseAbs().sum();
  }
  return total / static_cast<double>(samples.size());
}

Eigen::Matrix<double, 4, 9> forecast_gradient(const LinearForecaster& model,
                                              const std::vector<ForecastSample>& samples,
                                              const std::vector<double>& weights) {
  if (weights.size() != samples.size()) {
    throw std::invalid_argument("forecast gradient: weight/sample length mismatch");
  }
  Eigen::Matrix<double, 4, 9> grad = Eigen::Matrix<double, 4, 9>::Zero();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Eigen::Matrix<double, 9, 1> phi;
    phi << samples[i].prev, samples[i].cur, 1.0;
    const Eigen::Vector4d r = samples[i].cur + model.weights * phi - samples[i].target;
    const Eigen::Vector4d sgn = r.unaryExpr([](double v) {
      return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
    });
    grad += weights[i] * (sgn * phi.transpose());
  }
  return grad / static_cast<double>(samples.size());
}

TrainResult train_linear_forecaster(const std::vector<Triplet>& triplets,
                                    const TrainConfig& cfg) {
  cfg.validate();
  const std::vector<ForecastSample> samples = make_training_samples(triplets);
  if (samples.empty()) {
    throw std::invalid_argument("train_linear_forecaster: no usable track-aligned samples");
  }

  // Median matching-IoU split, used only for the log's fast/slow columns.
  std::vector<double> mious;
  for (const ForecastSample& s : samples) mious.push_back(s.m_iou);
  std::vector<double> sorted = mious;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[sorted.size() / 2];

  // Subgradient method on the nonsmooth L1 objective: diminishing step
  // sizes lr/sqrt(t+1) and best-iterate tracking, the standard convergent
  // scheme (a fixed step oscillates in a band around the optimum).
  TrainResult result;
  LinearForecaster iterate;
  LinearForecaster best = iterate;
  double best_loss = std::numeric_limits<double>::infinity();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const LossBreakdown b = forecast_loss(iterate, samples, cfg);
    if (b.total < best_loss) {
      best_loss = b.total;
      best = iterate;
    }
    const Eigen::Matrix<double, 4, 9> grad =
        forecast_gradient(iterate, samples, b.weights);
    iterate.weights -= cfg.learning_rate / std::sqrt(epoch + 1.0) * grad;

    EpochLog log;
    log.epoch = epoch;
    log.loss = b.total;
    double wf = 0.0, ws = 0.0;
    int nf = 0, ns = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (mious[i] < median) {
        wf += b.weights[i];
        ++nf;
      } else {
        ws += b.weights[i];
        ++ns;
      }
    }
    log.mean_w_fast = nf > 0 ? wf / nf : 1.0;
    log.mean_w_slow = ns > 0 ? ws / ns : 1.0;
    result.log.push_back(log);
  }
  if (forecast_loss(iterate, samples, cfg).total < best_loss) best = iterate;
  result.model = best;
  return result;
}

double grad_check(const LinearForecaster& model,
                  const std::vector<ForecastSample>& samples, const TrainConfig& cfg) {
  const LossBreakdown b = forecast_loss(model, samples, cfg);
  const Eigen::Matrix<double, 4, 9> analytic =
      forecast_gradient(model, samples, b.weights);

  const double step = 1e-5;
  double max_err = 0.0;
  LinearForecaster probe = model;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 9; ++c) {
      const double saved = probe.weights(r, c);
      probe.weights(r, c) = saved + step;
      const double hi = forecast_loss_fixed_weights(probe, samples, b.weights);
      probe.weights(r, c) = saved - step;
      const double lo = forecast_loss_fixed_weights(probe, samples, b.weights);
      probe.weights(r, c) = saved;
      const double fd = (hi - lo) / (2.0 * step);
      const double a = analytic(r, c);
      const double err = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-8});
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

namespace {

class LinearForecastAgent final : public DetectorAgent {
 public:
  LinearForecastAgent(LinearForecaster model, double association_iou, BaseDetector detector)
      : model_(std::move(model)),
        association_iou_(association_iou),
        detector_(resolve_detector(std::move(detector))) {}

  std::vector<Detection> process(const Frame& frame) override {
    const std::vector<Detection> dets = detector_(frame);

    std::vector<GroundTruthBox> prev_boxes;
    prev_boxes.reserve(prev_.size());
    for (const Detection& d : prev_) prev_boxes.push_back({d.box, d.category, std::nullopt});
    const auto matches = greedy_match(dets, prev_boxes, association_iou_);
    std::vector<int> prev_of(dets.size(), -1);
    for (const auto& [di, pi] : matches) prev_of[static_cast<std::size_t>(di)] = pi;

    std::vector<Detection> forecasts;
    forecasts.reserve(dets.size());
    for (std::size_t di = 0; di < dets.size(); ++di) {
      const BBox& cur_box = dets[di].box;
      // Objects without history reuse the current box, mirroring the
      // duplicated first-frame buffer.
      const BBox& prev_box =
          prev_of[di] >= 0 ? prev_[static_cast<std::size_t>(prev_of[di])].box : cur_box;
      const Eigen::Vector4d pred = model_.predict(
          normalized_csz(prev_box, frame.width, frame.height),
          normalized_csz(cur_box, frame.width, frame.height));
      Eigen::Vector4d denorm = pred;
      denorm[0] *= frame.width;
      denorm[2] *= frame.width;
      denorm[1] *= frame.height;
      denorm[3] *= frame.height;
      forecasts.push_back({positive_extent_box(denorm), dets[di].category, dets[di].score});
    }
    prev_ = dets;
    return forecasts;
  }

 private:
  LinearForecaster model_;
  double association_iou_;
  BaseDetector detector_;
  std::vector<Detection> prev_;
};

}  // namespace

std::unique_ptr<DetectorAgent> make_linear_forecast_agent(LinearForecaster model,
                                                          double association_iou,
                                                          BaseDetector detector) {
  return std::make_unique<LinearForecastAgent>(std::move(model), association_iou,
                                               std::move(detector));
}

}  // namespace streamperc
