#pragma once

#include <optional>
#include <vector>

#include "streamperc/geometry.hpp"
#include "streamperc/stream_sim.hpp"

namespace streamperc {

/// COCO-style evaluation constants. Defaults: IoU 0.50:0.05:0.95,
/// 101 recall points, 32^2 / 96^2 area splits, 100 detections per instant.
struct APParams {
  std::vector<double> iou_thresholds;
  int recall_points = 101;
  double area_small_max = 32.0 * 32.0;
  double area_medium_max = 96.0 * 96.0;
  int max_dets = 100;

  static APParams coco_defaults();
};

/// Values are absent when the corresponding stratum contains no ground truth.
struct APResult {
  std::optional<double> ap;
  std::optional<double> ap50;
  std::optional<double> ap75;
  std::optional<double> ap_small;
  std::optional<double> ap_medium;
  std::optional<double> ap_large;
};

/// One evaluation instant: the detections judged against one ground-truth
/// snapshot.
struct InstantPairing {
  std::vector<Detection> detections;
  std::vector<GroundTruthBox> gts;
};

APResult evaluate_ap(const std::vector<InstantPairing>& instants, const APParams& params);

/// Resolve pairings into per-instant (detections, gt) pairs. EMPTY pairings
/// contribute their ground truth with zero detections.
std::vector<InstantPairing> resolve_pairings(const std::vector<EvalPairing>& pairings,
                                             const ScheduleTrace& trace,
                                             const VideoStream& stream);

/// pair_for_sap composed with evaluate_ap.
APResult streaming_ap(const ScheduleTrace& trace, const VideoStream& stream,
                      const APParams& params);

/// pair_offline composed with evaluate_ap (the conventional setting).
APResult offline_ap(const ScheduleTrace& trace, const VideoStream& stream,
                    const APParams& params);

}  // namespace streamperc
