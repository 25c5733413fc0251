#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "streamperc/data.hpp"

namespace streamperc {

struct MovingObject {
  double cx0 = 0.0, cy0 = 0.0;   // center at frame 0, px
  double vx = 0.0, vy = 0.0;     // px per frame
  double w = 0.0, h = 0.0;
  int category = 0;
  int spawn_frame = 0;
  int despawn_frame = -1;        // exclusive; -1 means never
};

struct SceneConfig {
  double fps = 30.0;
  int frame_count = 1;
  int width = 0, height = 0;
  std::vector<MovingObject> objects;
  // When objects is empty, spawn random_objects uniformly over the image.
  int random_objects = 0;
  double random_speed_min = 0.0, random_speed_max = 0.0;
  double random_size_min = 16.0, random_size_max = 64.0;
  int random_categories = 1;
  std::uint64_t rng_seed = 0;
};

enum class ScoreModel { Constant, NoiseDerived };

struct MockDetectorConfig {
  double coordinate_noise_sigma = 0.0;
  double drop_probability = 0.0;
  ScoreModel score_model = ScoreModel::Constant;
  double constant_score = 1.0;
};

/// Standard normal sample via Box-Muller over mt19937_64 uniforms.
/// Kept hand-rolled so results are identical across standard libraries.
double gaussian_sample(std::mt19937_64& rng);

/// Renders constant-velocity objects into per-frame ground truth. Boxes
/// are clipped to the image and omitted once the clipped area reaches
/// zero. Deterministic in (config, seed). track_id is the object index.
VideoStream generate_stream(const SceneConfig& cfg);

/// Same scene with every velocity multiplied by `scale` (0x/1x/2x speeds).
SceneConfig scale_velocities(SceneConfig cfg, double scale);

/// Noisy detector: drops each gt box independently, perturbs surviving
/// corners with Gaussian noise, assigns scores per the score model.
std::vector<Detection> mock_detect(const Frame& frame, const MockDetectorConfig& cfg,
                                   std::mt19937_64& rng);

}  // namespace streamperc
