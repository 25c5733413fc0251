#pragma once

#include <filesystem>
#include <string>

#include "streamperc/metrics.hpp"
#include "streamperc/scene_sim.hpp"
#include "streamperc/stream_sim.hpp"
#include "streamperc/trend_loss.hpp"

namespace streamperc {

/// Declarative experiment config, parsed from `key = value` lines.
/// Unknown keys are rejected; command-line flags override file values.
struct RunConfig {
  SceneConfig scene;
  MockDetectorConfig detector;
  std::string latency_kind = "constant";  // constant | jitter
  double latency_ms = 25.0;
  double latency_jitter_ms = 0.0;
  std::string agent = "oracle";  // oracle | delayed-oracle | kalman | linear-forecaster
  std::filesystem::path model_path;
  int speed_factor = 1;
  APParams ap = APParams::coco_defaults();
  TrendConfig trend;
  std::uint64_t seed = 1;

  LatencyModel latency_model() const;
  /// Scene with velocities scaled by the speed factor.
  SceneConfig scene_at_speed() const;
};

RunConfig parse_run_config(const std::filesystem::path& path);
RunConfig default_run_config();

void save_trace_json(const ScheduleTrace& trace, const std::filesystem::path& path);
void save_pairings_json(const std::vector<EvalPairing>& pairings,
                        const std::filesystem::path& path);
void save_result_json(const APResult& result, const std::filesystem::path& path);
std::string result_csv_row(const std::string& video_id, double latency_ms,
                           int speed_factor, const APResult& r);
std::string result_csv_header();

}  // namespace streamperc
