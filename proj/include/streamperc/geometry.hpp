#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace streamperc {

/// Axis-aligned box, top-left / bottom-right corners in continuous pixels.
/// Zero-area boxes are valid.
struct BBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }

  Eigen::Vector4d center_size() const {
    return {0.5 * (x1 + x2), 0.5 * (y1 + y2), width(), height()};
  }
  static BBox from_center_size(const Eigen::Vector4d& csz) {
    return {csz[0] - 0.5 * csz[2], csz[1] - 0.5 * csz[3],
            csz[0] + 0.5 * csz[2], csz[1] + 0.5 * csz[3]};
  }

  bool operator==(const BBox&) const = default;
};

struct Detection {
  BBox box;
  int category = 0;
  double score = 1.0;

  bool operator==(const Detection&) const = default;
};

struct GroundTruthBox {
  BBox box;
  int category = 0;
  std::optional<std::int64_t> track_id;

  bool operator==(const GroundTruthBox&) const = default;
};

/// Throws std::invalid_argument on non-finite or inverted corners.
void validate_box(const BBox& b);

/// Intersection over union. Zero-union pairs map to 0, never NaN.
double iou(const BBox& a, const BBox& b);

/// Pairwise IoU, entry (i, j) = iou(a[i], b[j]). Empty inputs give an
/// empty matrix with the matching zero dimension.
Eigen::MatrixXd iou_matrix(const std::vector<BBox>& a, const std::vector<BBox>& b);

/// Score-descending greedy matching (ties broken by ascending detection
/// index). Each detection claims the unmatched same-category ground truth
/// with the highest IoU >= thresh; each gt is used at most once.
std::vector<std::pair<int, int>> greedy_match(const std::vector<Detection>& dets,
                                              const std::vector<GroundTruthBox>& gts,
                                              double thresh);

}  // namespace streamperc
