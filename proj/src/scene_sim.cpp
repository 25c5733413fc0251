#include "streamperc/scene_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace streamperc {

double gaussian_sample(std::mt19937_64& rng) {
  // Box-Muller, one deviate per call. u1 in (0, 1], u2 in [0, 1).
  const double scale = 1.0 / (static_cast<double>(std::mt19937_64::max()) + 1.0);
  const double u1 = (static_cast<double>(rng()) + 1.0) * scale;
  const double u2 = static_cast<double>(rng()) * scale;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

namespace {

double uniform_sample(std::mt19937_64& rng) {
  return static_cast<double>(rng()) /
         (static_cast<double>(std::mt19937_64::max()) + 1.0);
}

std::vector<MovingObject> spawn_random_objects(const SceneConfig& cfg) {
  std::mt19937_64 rng(cfg.rng_seed);
  std::vector<MovingObject> objects;
  objects.reserve(static_cast<std::size_t>(cfg.random_objects));
  for (int i = 0; i < cfg.random_objects; ++i) {
    MovingObject o;
    o.w = cfg.random_size_min + uniform_sample(rng) * (cfg.random_size_max - cfg.random_size_min);
    o.h = cfg.random_size_min + uniform_sample(rng) * (cfg.random_size_max - cfg.random_size_min);
    o.cx0 = uniform_sample(rng) * cfg.width;
    o.cy0 = uniform_sample(rng) * cfg.height;
    const double speed = cfg.random_speed_min +
                         uniform_sample(rng) * (cfg.random_speed_max - cfg.random_speed_min);
    const double angle = uniform_sample(rng) * 2.0 * std::numbers::pi;
    o.vx = speed * std::cos(angle);
    o.vy = speed * std::sin(angle);
    o.category = static_cast<int>(uniform_sample(rng) * cfg.random_categories);
    objects.push_back(o);
  }
  return objects;
}

}  // namespace

VideoStream generate_stream(const SceneConfig& cfg) {
  if (cfg.fps <= 0.0) throw std::invalid_argument("SceneConfig: fps must be positive");
  if (cfg.frame_count < 1) throw std::invalid_argument("SceneConfig: frame_count must be >= 1");
  std::vector<MovingObject> objects = cfg.objects;
  if (objects.empty() && cfg.random_objects > 0) {
    objects = spawn_random_objects(cfg);
  }
  for (const MovingObject& o : objects) {
    if (o.w <= 0.0 || o.h <= 0.0) {
      throw std::invalid_argument("MovingObject: size must be positive");
    }
  }

  VideoStream stream;
  stream.video_id = "scene";
  stream.fps = cfg.fps;
  stream.frames.reserve(static_cast<std::size_t>(cfg.frame_count));
  for (int t = 0; t < cfg.frame_count; ++t) {
    Frame f;
    f.frame_index = t;
    f.timestamp = static_cast<double>(t) / cfg.fps;
    f.width = cfg.width;
    f.height = cfg.height;
    for (std::size_t oi = 0; oi < objects.size(); ++oi) {
      const MovingObject& o = objects[oi];
      if (t < o.spawn_frame) continue;
      if (o.despawn_frame >= 0 && t >= o.despawn_frame) continue;
      const double cx = o.cx0 + static_cast<double>(t) * o.vx;
      const double cy = o.cy0 + static_cast<double>(t) * o.vy;
      BBox b{cx - 0.5 * o.w, cy - 0.5 * o.h, cx + 0.5 * o.w, cy + 0.5 * o.h};
      b.x1 = std::clamp(b.x1, 0.0, static_cast<double>(cfg.width));
      b.x2 = std::clamp(b.x2, 0.0, static_cast<double>(cfg.width));
      b.y1 = std::clamp(b.y1, 0.0, static_cast<double>(cfg.height));
      b.y2 = std::clamp(b.y2, 0.0, static_cast<double>(cfg.height));
      if (b.area() <= 0.0) continue;
      GroundTruthBox g;
      g.box = b;
      g.category = o.category;
      g.track_id = static_cast<std::int64_t>(oi);
      f.gt.push_back(std::move(g));
    }
    stream.frames.push_back(std::move(f));
  }
  return stream;
}

SceneConfig scale_velocities(SceneConfig cfg, double scale) {
  for (MovingObject& o : cfg.objects) {
    o.vx *= scale;
    o.vy *= scale;
  }
  cfg.random_speed_min *= scale;
  cfg.random_speed_max *= scale;
  return cfg;
}

std::vector<Detection> mock_detect(const Frame& frame, const MockDetectorConfig& cfg,
                                   std::mt19937_64& rng) {
  if (cfg.coordinate_noise_sigma < 0.0) {
    throw std::invalid_argument("MockDetectorConfig: sigma must be >= 0");
  }
  if (!(cfg.drop_probability >= 0.0 && cfg.drop_probability < 1.0)) {
    throw std::invalid_argument("MockDetectorConfig: drop_probability must lie in [0, 1)");
  }
  std::vector<Detection> dets;
  dets.reserve(frame.gt.size());
  for (const GroundTruthBox& g : frame.gt) {
    if (uniform_sample(rng) < cfg.drop_probability) continue;
    Detection d;
    const double s = cfg.coordinate_noise_sigma;
    double noise_mag = 0.0;
    auto perturb = [&](double v) {
      const double n = s * gaussian_sample(rng);
      noise_mag += std::abs(n);
      return v + n;
    };
    d.box.x1 = perturb(g.box.x1);
    d.box.y1 = perturb(g.box.y1);
    d.box.x2 = perturb(g.box.x2);
    d.box.y2 = perturb(g.box.y2);
    if (d.box.x2 < d.box.x1) std::swap(d.box.x1, d.box.x2);
    if (d.box.y2 < d.box.y1) std::swap(d.box.y1, d.box.y2);
    d.category = g.category;
    d.score = cfg.score_model == ScoreModel::Constant
                  ? cfg.constant_score
                  : std::clamp(1.0 / (1.0 + noise_mag), 0.0, 1.0);
    dets.push_back(std::move(d));
  }
  return dets;
}

}  // namespace streamperc
