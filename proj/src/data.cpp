#include "streamperc/data.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <set>
#include <stdexcept>

namespace streamperc {

using nlohmann::json;

namespace {

json box_to_xywh(const BBox& b) {
  return json::array({b.x1, b.y1, b.width(), b.height()});
}

BBox box_from_xywh(const json& arr, const std::string& where) {
  if (!arr.is_array() || arr.size() != 4) {
    throw std::runtime_error("malformed bbox in " + where);
  }
  const double x = arr[0].get<double>();
  const double y = arr[1].get<double>();
  const double w = arr[2].get<double>();
  const double h = arr[3].get<double>();
  if (w < 0 || h < 0) {
    throw std::runtime_error("negative bbox extent in " + where);
  }
  BBox b{x, y, x + w, y + h};
  validate_box(b);
  return b;
}

json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open file: " + path.string());
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed JSON in " + path.string() + ": " + e.what());
  }
  return j;
}

}  // namespace

std::vector<VideoStream> load_stream_dataset(const std::filesystem::path& path) {
  const json j = load_json_file(path);
  if (!j.contains("images") || !j.contains("annotations")) {
    throw std::runtime_error(path.string() + ": missing images/annotations arrays");
  }

  struct ImageRec {
    std::string video_id;
    int frame_index;
  };
  std::map<std::int64_t, ImageRec> by_image_id;
  std::map<std::string, VideoStream> videos;

  for (const json& im : j.at("images")) {
    const std::int64_t id = im.at("id").get<std::int64_t>();
    Frame f;
    f.frame_index = im.at("frame_index").get<int>();
    f.width = im.at("width").get<int>();
    f.height = im.at("height").get<int>();
    std::string vid;
    const json& v = im.at("video_id");
    vid = v.is_string() ? v.get<std::string>() : std::to_string(v.get<std::int64_t>());
    if (!by_image_id.emplace(id, ImageRec{vid, f.frame_index}).second) {
      throw std::runtime_error("duplicate image id " + std::to_string(id));
    }
    VideoStream& stream = videos[vid];
    stream.video_id = vid;
    if (im.contains("fps")) stream.fps = im.at("fps").get<double>();
    stream.frames.push_back(std::move(f));
  }

  for (auto& [vid, stream] : videos) {
    if (stream.fps <= 0) {
      throw std::runtime_error("video " + vid + ": fps must be positive");
    }
    std::sort(stream.frames.begin(), stream.frames.end(),
              [](const Frame& a, const Frame& b) { return a.frame_index < b.frame_index; });
    for (std::size_t i = 0; i < stream.frames.size(); ++i) {
      if (stream.frames[i].frame_index != static_cast<int>(i)) {
        throw std::runtime_error("video " + vid +
                                 ": frame indices not contiguous from 0");
      }
      stream.frames[i].timestamp = static_cast<double>(i) / stream.fps;
    }
  }

  for (const json& ann : j.at("annotations")) {
    const std::int64_t image_id = ann.at("image_id").get<std::int64_t>();
    auto it = by_image_id.find(image_id);
    if (it == by_image_id.end()) {
      throw std::runtime_error("annotation references unknown image id " +
                               std::to_string(image_id));
    }
    GroundTruthBox g;
    g.box = box_from_xywh(ann.at("bbox"), "annotation for image " + std::to_string(image_id));
    g.category = ann.at("category_id").get<int>();
    if (g.category < 0) {
      throw std::runtime_error("negative category_id on image " + std::to_string(image_id));
    }
    if (ann.contains("track_id") && !ann.at("track_id").is_null()) {
      g.track_id = ann.at("track_id").get<std::int64_t>();
    }
    Frame& f = videos.at(it->second.video_id)
                   .frames[static_cast<std::size_t>(it->second.frame_index)];
    if (g.track_id) {
      for (const GroundTruthBox& other : f.gt) {
        if (other.track_id == g.track_id) {
          throw std::runtime_error("duplicate track_id within one frame of video " +
                                   it->second.video_id);
        }
      }
    }
    f.gt.push_back(std::move(g));
  }

  std::vector<VideoStream> out;
  out.reserve(videos.size());
  for (auto& [vid, stream] : videos) out.push_back(std::move(stream));
  return out;
}

void save_stream_dataset(const std::vector<VideoStream>& streams,
                         const std::filesystem::path& path) {
  json images = json::array();
  json annotations = json::array();
  std::set<int> categories;
  std::int64_t image_id = 0;
  std::int64_t ann_id = 0;
  for (const VideoStream& s : streams) {
    for (const Frame& f : s.frames) {
      ++image_id;
      images.push_back({{"id", image_id},
                        {"file_name", s.video_id + "/" + std::to_string(f.frame_index) + ".jpg"},
                        {"width", f.width},
                        {"height", f.height},
                        {"video_id", s.video_id},
                        {"frame_index", f.frame_index},
                        {"fps", s.fps}});
      for (const GroundTruthBox& g : f.gt) {
        categories.insert(g.category);
        json ann{{"id", ++ann_id},
                 {"image_id", image_id},
                 {"bbox", box_to_xywh(g.box)},
                 {"category_id", g.category},
                 {"area", g.box.area()}};
        if (g.track_id) ann["track_id"] = *g.track_id;
        annotations.push_back(std::move(ann));
      }
    }
  }
  json cats = json::array();
  for (int c : categories) {
    cats.push_back({{"id", c}, {"name", "category_" + std::to_string(c)}});
  }
  json j{{"images", images}, {"annotations", annotations}, {"categories", cats}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<Triplet> build_triplets(const VideoStream& stream) {
  std::vector<Triplet> out;
  const std::size_t n = stream.frames.size();
  if (n < 3) return out;
  out.reserve(n - 2);
  for (std::size_t t = 1; t + 1 < n; ++t) {
    out.push_back({stream.frames[t - 1], stream.frames[t], stream.frames[t + 1].gt});
  }
  return out;
}

std::vector<Triplet> resample_speed(const VideoStream& stream, int factor) {
  const std::size_t n = stream.frames.size();
  std::vector<Triplet> out;
  switch (factor) {
    case 0:
      out.reserve(n);
      for (const Frame& f : stream.frames) out.push_back({f, f, f.gt});
      return out;
    case 1:
      return build_triplets(stream);
    case 2:
      if (n < 5) return out;
      out.reserve(n - 4);
      for (std::size_t t = 2; t + 2 < n; ++t) {
        out.push_back({stream.frames[t - 2], stream.frames[t], stream.frames[t + 2].gt});
      }
      return out;
    default:
      throw std::invalid_argument("resample_speed: factor must be 0, 1 or 2");
  }
}

void persist_predictions(const PredictionDump& dump, const std::filesystem::path& path) {
  json arr = json::array();
  for (const auto& [key, dets] : dump) {
    for (const Detection& d : dets) {
      arr.push_back({{"video_id", key.first},
                     {"frame_index", key.second},
                     {"bbox", box_to_xywh(d.box)},
                     {"category_id", d.category},
                     {"score", d.score}});
    }
    if (dets.empty()) {
      arr.push_back({{"video_id", key.first},
                     {"frame_index", key.second},
                     {"empty", true}});
    }
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << arr.dump(2) << '\n';
}

PredictionDump load_predictions(const std::filesystem::path& path) {
  const json arr = load_json_file(path);
  if (!arr.is_array()) {
    throw std::runtime_error(path.string() + ": expected a JSON array of predictions");
  }
  PredictionDump dump;
  for (const json& rec : arr) {
    const auto key = std::make_pair(rec.at("video_id").get<std::string>(),
                                    rec.at("frame_index").get<int>());
    auto& dets = dump[key];
    if (rec.contains("empty") && rec.at("empty").get<bool>()) continue;
    Detection d;
    d.box = box_from_xywh(rec.at("bbox"), "prediction record");
    d.category = rec.at("category_id").get<int>();
    d.score = rec.at("score").get<double>();
    if (!(d.score >= 0.0 && d.score <= 1.0)) {
      throw std::runtime_error("prediction score outside [0, 1]");
    }
    dets.push_back(std::move(d));
  }
  return dump;
}

void validate_predictions(const PredictionDump& dump,
                          const std::vector<VideoStream>& streams) {
  std::map<std::string, std::size_t> sizes;
  for (const VideoStream& s : streams) sizes[s.video_id] = s.frames.size();
  for (const auto& [key, dets] : dump) {
    auto it = sizes.find(key.first);
    if (it == sizes.end()) {
      throw std::runtime_error("predictions reference unknown video " + key.first);
    }
    if (key.second < 0 || static_cast<std::size_t>(key.second) >= it->second) {
      throw std::runtime_error("predictions reference missing frame " +
                               std::to_string(key.second) + " of video " + key.first);
    }
  }
}

}  // namespace streamperc
