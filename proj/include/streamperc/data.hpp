#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "streamperc/geometry.hpp"

namespace streamperc {

struct Frame {
  int frame_index = 0;
  double timestamp = 0.0;  // seconds
  int width = 0;
  int height = 0;
  std::vector<GroundTruthBox> gt;
};

struct VideoStream {
  std::string video_id;
  double fps = 30.0;
  std::vector<Frame> frames;
};

/// Training unit (prev frame, current frame, supervision boxes).
struct Triplet {
  Frame prev;
  Frame cur;
  std::vector<GroundTruthBox> target_gt;
};

/// Detections keyed by (video_id, frame_index).
using PredictionDump = std::map<std::pair<std::string, int>, std::vector<Detection>>;

/// Reads a COCO-style annotation file: images carry video_id/frame_index,
/// annotations carry bbox [x, y, w, h]. Boxes are converted to TLBR.
std::vector<VideoStream> load_stream_dataset(const std::filesystem::path& path);

void save_stream_dataset(const std::vector<VideoStream>& streams,
                         const std::filesystem::path& path);

/// {(F_{t-1}, F_t, gt(F_{t+1}))} for t = 1 .. n-2. Streams shorter than
/// three frames yield nothing.
std::vector<Triplet> build_triplets(const VideoStream& stream);

/// Speed re-sampling. Factor 0 emits (F_t, F_t, gt(F_t)) for every frame,
/// factor 1 equals build_triplets, factor 2 emits (F_{t-2}, F_t, gt(F_{t+2})).
std::vector<Triplet> resample_speed(const VideoStream& stream, int factor);

void persist_predictions(const PredictionDump& dump, const std::filesystem::path& path);
PredictionDump load_predictions(const std::filesystem::path& path);

/// Throws if the dump references a (video, frame) pair absent from the dataset.
void validate_predictions(const PredictionDump& dump,
                          const std::vector<VideoStream>& streams);

}  // namespace streamperc
