#include "streamperc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace streamperc {

void validate_box(const BBox& b) {
  if (!(std::isfinite(b.x1) && std::isfinite(b.y1) && std::isfinite(b.x2) &&
        std::isfinite(b.y2))) {
    throw std::invalid_argument("BBox has non-finite coordinates");
  }
  if (b.x2 < b.x1 || b.y2 < b.y1) {
    throw std::invalid_argument("BBox corners are inverted");
  }
}

double iou(const BBox& a, const BBox& b) {
  validate_box(a);
  validate_box(b);
  const double ix = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double iy = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

Eigen::MatrixXd iou_matrix(const std::vector<BBox>& a, const std::vector<BBox>& b) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(a.size()),
                    static_cast<Eigen::Index>(b.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      m(i, j) = iou(a[static_cast<std::size_t>(i)], b[static_cast<std::size_t>(j)]);
    }
  }
  return m;
}

std::vector<std::pair<int, int>> greedy_match(const std::vector<Detection>& dets,
                                              const std::vector<GroundTruthBox>& gts,
                                              double thresh) {
  if (!(thresh > 0.0 && thresh <= 1.0)) {
    throw std::invalid_argument("greedy_match: thresh must lie in (0, 1]");
  }
  std::vector<int> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) {
    return dets[static_cast<std::size_t>(i)].score >
           dets[static_cast<std::size_t>(j)].score;
  });

  std::vector<std::pair<int, int>> matches;
  std::vector<bool> gt_used(gts.size(), false);
  for (int di : order) {
    const Detection& d = dets[static_cast<std::size_t>(di)];
    int best_gt = -1;
    double best_iou = thresh;
    for (std::size_t gi = 0; gi < gts.size(); ++gi) {
      if (gt_used[gi] || gts[gi].category != d.category) continue;
      const double v = iou(d.box, gts[gi].box);
      if (v > best_iou || (best_gt < 0 && v >= thresh)) {
        best_iou = v;
        best_gt = static_cast<int>(gi);
      }
    }
    if (best_gt >= 0) {
      gt_used[static_cast<std::size_t>(best_gt)] = true;
      matches.emplace_back(di, best_gt);
    }
  }
  return matches;
}

}  // namespace streamperc
