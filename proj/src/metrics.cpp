#include "streamperc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

namespace streamperc {

APParams APParams::coco_defaults() {
  APParams p;
  for (int i = 0; i < 10; ++i) p.iou_thresholds.push_back(0.5 + 0.05 * i);
  return p;
}

namespace {

struct AreaRange {
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  bool contains(double area) const { return area >= lo && area < hi; }
};

// AP for one (category, IoU threshold, area range), or nullopt when the
// stratum holds no ground truth of the category.
std::optional<double> category_ap(const std::vector<InstantPairing>& instants,
                                  int category, double thr, const AreaRange& range,
                                  const APParams& params) {
  struct DetRef {
    double score;
    std::size_t instant;
    int index;          // index among the instant's same-category detections
    bool tp = false;
    bool ignored = false;
  };
  std::vector<DetRef> dets;
  std::size_t npos = 0;

  for (std::size_t ii = 0; ii < instants.size(); ++ii) {
    const InstantPairing& inst = instants[ii];

    std::vector<int> gt_idx;
    std::vector<bool> gt_ignored;
    for (std::size_t g = 0; g < inst.gts.size(); ++g) {
      if (inst.gts[g].category != category) continue;
      gt_idx.push_back(static_cast<int>(g));
      const bool ign = !range.contains(inst.gts[g].box.area());
      gt_ignored.push_back(ign);
      if (!ign) ++npos;
    }

    std::vector<int> det_idx;
    for (std::size_t d = 0; d < inst.detections.size(); ++d) {
      if (inst.detections[d].category == category) det_idx.push_back(static_cast<int>(d));
    }
    std::stable_sort(det_idx.begin(), det_idx.end(), [&](int a, int b) {
      return inst.detections[static_cast<std::size_t>(a)].score >
             inst.detections[static_cast<std::size_t>(b)].score;
    });
    if (static_cast<int>(det_idx.size()) > params.max_dets) {
      det_idx.resize(static_cast<std::size_t>(params.max_dets));
    }

    // Greedy matching within the instant, score order. Unignored ground
    // truth is preferred; a detection whose only match is ignored ground
    // truth is itself ignored.
    std::vector<bool> gt_used(gt_idx.size(), false);
    for (std::size_t rank = 0; rank < det_idx.size(); ++rank) {
      const Detection& d = inst.detections[static_cast<std::size_t>(det_idx[rank])];
      int best = -1;
      double best_iou = thr;
      for (std::size_t g = 0; g < gt_idx.size(); ++g) {
        if (gt_used[g]) continue;
        if (best >= 0 && !gt_ignored[static_cast<std::size_t>(best)] && gt_ignored[g]) {
          continue;  // never trade an unignored match for an ignored one
        }
        const double v = iou(d.box, inst.gts[static_cast<std::size_t>(gt_idx[g])].box);
        if (v < thr) continue;
        const bool upgrade =
            best >= 0 && gt_ignored[static_cast<std::size_t>(best)] && !gt_ignored[g];
        if (best < 0 || upgrade || v > best_iou) {
          best = static_cast<int>(g);
          best_iou = v;
        }
      }
      DetRef ref{d.score, ii, static_cast<int>(rank)};
      if (best >= 0) {
        gt_used[static_cast<std::size_t>(best)] = true;
        if (gt_ignored[static_cast<std::size_t>(best)]) {
          ref.ignored = true;
        } else {
          ref.tp = true;
        }
      } else if (!range.contains(d.box.area())) {
        ref.ignored = true;  // unmatched and outside the stratum
      }
      dets.push_back(ref);
    }
  }

  if (npos == 0) return std::nullopt;

  std::stable_sort(dets.begin(), dets.end(), [](const DetRef& a, const DetRef& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.instant != b.instant) return a.instant < b.instant;
    return a.index < b.index;
  });

  std::vector<double> precision;
  std::vector<double> recall;
  int tp = 0, fp = 0;
  for (const DetRef& d : dets) {
    if (d.ignored) continue;
    d.tp ? ++tp : ++fp;
    precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(npos));
  }
  for (std::size_t i = precision.size(); i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }

  double sum = 0.0;
  for (int k = 0; k < params.recall_points; ++k) {
    const double r = static_cast<double>(k) / static_cast<double>(params.recall_points - 1);
    const auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it != recall.end()) {
      sum += precision[static_cast<std::size_t>(it - recall.begin())];
    }
  }
  return sum / static_cast<double>(params.recall_points);
}

std::optional<double> stratum_ap(const std::vector<InstantPairing>& instants,
                                 const std::set<int>& categories,
                                 const std::vector<double>& thresholds,
                                 const AreaRange& range, const APParams& params) {
  double total = 0.0;
  int defined = 0;
  for (int cat : categories) {
    for (double thr : thresholds) {
      if (auto ap = category_ap(instants, cat, thr, range, params)) {
        total += *ap;
        ++defined;
      }
    }
  }
  if (defined == 0) return std::nullopt;
  return total / static_cast<double>(defined);
}

}  // namespace

APResult evaluate_ap(const std::vector<InstantPairing>& instants, const APParams& params) {
  if (params.iou_thresholds.empty() || params.recall_points < 2) {
    throw std::invalid_argument("APParams: need thresholds and >= 2 recall points");
  }
  for (std::size_t i = 1; i < params.iou_thresholds.size(); ++i) {
    if (params.iou_thresholds[i] <= params.iou_thresholds[i - 1]) {
      throw std::invalid_argument("APParams: thresholds must be strictly increasing");
    }
  }

  std::set<int> categories;
  for (const InstantPairing& inst : instants) {
    for (const GroundTruthBox& g : inst.gts) categories.insert(g.category);
  }

  const AreaRange all;
  const AreaRange small{0.0, params.area_small_max};
  const AreaRange medium{params.area_small_max, params.area_medium_max};
  const AreaRange large{params.area_medium_max, std::numeric_limits<double>::infinity()};

  APResult r;
  r.ap = stratum_ap(instants, categories, params.iou_thresholds, all, params);
  r.ap50 = stratum_ap(instants, categories, {0.50}, all, params);
  r.ap75 = stratum_ap(instants, categories, {0.75}, all, params);
  r.ap_small = stratum_ap(instants, categories, params.iou_thresholds, small, params);
  r.ap_medium = stratum_ap(instants, categories, params.iou_thresholds, medium, params);
  r.ap_large = stratum_ap(instants, categories, params.iou_thresholds, large, params);
  return r;
}

std::vector<InstantPairing> resolve_pairings(const std::vector<EvalPairing>& pairings,
                                             const ScheduleTrace& trace,
                                             const VideoStream& stream) {
  std::vector<InstantPairing> instants;
  instants.reserve(pairings.size());
  for (const EvalPairing& p : pairings) {
    InstantPairing inst;
    inst.gts = stream.frames.at(static_cast<std::size_t>(p.frame_index)).gt;
    if (p.record) {
      inst.detections = trace.records.at(static_cast<std::size_t>(*p.record)).detections;
    }
    instants.push_back(std::move(inst));
  }
  return instants;
}

APResult streaming_ap(const ScheduleTrace& trace, const VideoStream& stream,
                      const APParams& params) {
  return evaluate_ap(resolve_pairings(pair_for_sap(trace, stream), trace, stream), params);
}

APResult offline_ap(const ScheduleTrace& trace, const VideoStream& stream,
                    const APParams& params) {
  return evaluate_ap(resolve_pairings(pair_offline(trace, stream), trace, stream), params);
}

}  // namespace streamperc
