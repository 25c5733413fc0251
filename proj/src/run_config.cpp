#include "streamperc/run_config.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

namespace streamperc {

using nlohmann::json;

LatencyModel RunConfig::latency_model() const {
  if (latency_kind == "constant") {
    return LatencyModel::constant_s(latency_ms / 1000.0);
  }
  if (latency_kind == "jitter") {
    return LatencyModel::jitter_s(latency_ms / 1000.0, latency_jitter_ms / 1000.0,
                                  seed ^ 0x9e3779b97f4a7c15ULL);
  }
  throw std::invalid_argument("latency kind must be 'constant' or 'jitter'");
}

SceneConfig RunConfig::scene_at_speed() const {
  return scale_velocities(scene, static_cast<double>(speed_factor));
}

RunConfig default_run_config() {
  RunConfig cfg;
  cfg.scene.fps = 30.0;
  cfg.scene.frame_count = 60;
  cfg.scene.width = 1024;
  cfg.scene.height = 1024;
  cfg.scene.random_objects = 4;
  cfg.scene.random_speed_min = 2.0;
  cfg.scene.random_speed_max = 6.0;
  cfg.scene.rng_seed = cfg.seed;
  return cfg;
}

namespace {

double parse_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': bad number '" + value + "'");
  }
  if (used != value.size()) {
    throw std::invalid_argument("config key '" + key + "': bad number '" + value + "'");
  }
  return v;
}

MovingObject parse_object(const std::string& value) {
  // cx,cy,vx,vy,w,h,category[,spawn,despawn]
  std::vector<double> nums;
  std::stringstream ss(value);
  std::string part;
  while (std::getline(ss, part, ',')) nums.push_back(parse_double("object", part));
  if (nums.size() != 7 && nums.size() != 9) {
    throw std::invalid_argument("config key 'object': expected 7 or 9 comma-separated values");
  }
  MovingObject o;
  o.cx0 = nums[0];
  o.cy0 = nums[1];
  o.vx = nums[2];
  o.vy = nums[3];
  o.w = nums[4];
  o.h = nums[5];
  o.category = static_cast<int>(nums[6]);
  if (nums.size() == 9) {
    o.spawn_frame = static_cast<int>(nums[7]);
    o.despawn_frame = static_cast<int>(nums[8]);
  }
  return o;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

RunConfig parse_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path.string());

  RunConfig cfg = default_run_config();
  cfg.scene.objects.clear();
  cfg.scene.random_objects = 0;

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    if (key == "fps") cfg.scene.fps = parse_double(key, value);
    else if (key == "frame_count") cfg.scene.frame_count = static_cast<int>(parse_double(key, value));
    else if (key == "width") cfg.scene.width = static_cast<int>(parse_double(key, value));
    else if (key == "height") cfg.scene.height = static_cast<int>(parse_double(key, value));
    else if (key == "object") cfg.scene.objects.push_back(parse_object(value));
    else if (key == "random_objects") cfg.scene.random_objects = static_cast<int>(parse_double(key, value));
    else if (key == "speed_min") cfg.scene.random_speed_min = parse_double(key, value);
    else if (key == "speed_max") cfg.scene.random_speed_max = parse_double(key, value);
    else if (key == "size_min") cfg.scene.random_size_min = parse_double(key, value);
    else if (key == "size_max") cfg.scene.random_size_max = parse_double(key, value);
    else if (key == "categories") cfg.scene.random_categories = static_cast<int>(parse_double(key, value));
    else if (key == "detector_sigma") cfg.detector.coordinate_noise_sigma = parse_double(key, value);
    else if (key == "detector_drop") cfg.detector.drop_probability = parse_double(key, value);
    else if (key == "detector_score") {
      if (value == "constant") cfg.detector.score_model = ScoreModel::Constant;
      else if (value == "noise") cfg.detector.score_model = ScoreModel::NoiseDerived;
      else throw std::runtime_error("detector_score must be 'constant' or 'noise'");
    }
    else if (key == "latency") cfg.latency_kind = value;
    else if (key == "latency_ms") cfg.latency_ms = parse_double(key, value);
    else if (key == "latency_jitter_ms") cfg.latency_jitter_ms = parse_double(key, value);
    else if (key == "agent") cfg.agent = value;
    else if (key == "model_path") cfg.model_path = value;
    else if (key == "speed") cfg.speed_factor = static_cast<int>(parse_double(key, value));
    else if (key == "max_dets") cfg.ap.max_dets = static_cast<int>(parse_double(key, value));
    else if (key == "tau") cfg.trend.tau = parse_double(key, value);
    else if (key == "nu") cfg.trend.nu = parse_double(key, value);
    else if (key == "seed") {
      cfg.seed = static_cast<std::uint64_t>(parse_double(key, value));
      cfg.scene.rng_seed = cfg.seed;
    }
    else {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": unknown config key '" + key + "'");
    }
  }
  return cfg;
}

namespace {

json detections_to_json(const std::vector<Detection>& dets) {
  json arr = json::array();
  for (const Detection& d : dets) {
    arr.push_back({{"bbox", {d.box.x1, d.box.y1, d.box.width(), d.box.height()}},
                   {"category_id", d.category},
                   {"score", d.score}});
  }
  return arr;
}

}  // namespace

void save_trace_json(const ScheduleTrace& trace, const std::filesystem::path& path) {
  json arr = json::array();
  for (const TraceRecord& r : trace.records) {
    arr.push_back({{"input_frame_index", r.input_frame_index},
                   {"start_time", r.start_time},
                   {"completion_time", r.completion_time},
                   {"detections", detections_to_json(r.detections)}});
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << arr.dump(2) << '\n';
}

void save_pairings_json(const std::vector<EvalPairing>& pairings,
                        const std::filesystem::path& path) {
  json arr = json::array();
  for (const EvalPairing& p : pairings) {
    json rec{{"frame_index", p.frame_index}};
    if (p.record) rec["record"] = *p.record;
    else rec["record"] = nullptr;
    arr.push_back(std::move(rec));
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << arr.dump(2) << '\n';
}

namespace {

json opt_to_json(const std::optional<double>& v) {
  if (v) return *v;
  return nullptr;
}

std::string opt_to_csv(const std::optional<double>& v) {
  return v ? std::to_string(*v) : "NA";
}

}  // namespace

void save_result_json(const APResult& r, const std::filesystem::path& path) {
  json j{{"ap", opt_to_json(r.ap)},       {"ap50", opt_to_json(r.ap50)},
         {"ap75", opt_to_json(r.ap75)},   {"ap_small", opt_to_json(r.ap_small)},
         {"ap_medium", opt_to_json(r.ap_medium)}, {"ap_large", opt_to_json(r.ap_large)}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::string result_csv_header() {
  return "video_id,latency_ms,speed_factor,ap,ap50,ap75,ap_s,ap_m,ap_l";
}

std::string result_csv_row(const std::string& video_id, double latency_ms,
                           int speed_factor, const APResult& r) {
  std::ostringstream ss;
  ss << video_id << ',' << latency_ms << ',' << speed_factor << ',' << opt_to_csv(r.ap)
     << ',' << opt_to_csv(r.ap50) << ',' << opt_to_csv(r.ap75) << ','
     << opt_to_csv(r.ap_small) << ',' << opt_to_csv(r.ap_medium) << ','
     << opt_to_csv(r.ap_large);
  return ss.str();
}

}  // namespace streamperc
