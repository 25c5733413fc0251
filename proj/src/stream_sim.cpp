#include "streamperc/stream_sim.hpp"

#include <cmath>
#include <stdexcept>

namespace streamperc {

LatencyModel LatencyModel::constant_s(double seconds) {
  LatencyModel m;
  m.kind = Kind::Constant;
  m.constant = seconds;
  return m;
}

LatencyModel LatencyModel::per_frame_s(std::vector<double> seconds) {
  LatencyModel m;
  m.kind = Kind::PerFrame;
  m.per_frame = std::move(seconds);
  return m;
}

LatencyModel LatencyModel::jitter_s(double mean, double jitter, std::uint64_t seed) {
  LatencyModel m;
  m.kind = Kind::Jitter;
  m.mean = mean;
  m.jitter = jitter;
  m.rng_seed = seed;
  return m;
}

namespace {

class LatencySampler {
 public:
  explicit LatencySampler(const LatencyModel& model) : model_(model), rng_(model.rng_seed) {}

  double sample(int frame_index) {
    double v = 0.0;
    switch (model_.kind) {
      case LatencyModel::Kind::Constant:
        v = model_.constant;
        break;
      case LatencyModel::Kind::PerFrame:
        if (frame_index < 0 ||
            static_cast<std::size_t>(frame_index) >= model_.per_frame.size()) {
          throw std::invalid_argument("LatencyModel: no per-frame latency for frame " +
                                      std::to_string(frame_index));
        }
        v = model_.per_frame[static_cast<std::size_t>(frame_index)];
        break;
      case LatencyModel::Kind::Jitter: {
        const double u = static_cast<double>(rng_()) /
                         (static_cast<double>(std::mt19937_64::max()) + 1.0);
        v = model_.mean + model_.jitter * (2.0 * u - 1.0);
        break;
      }
    }
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("LatencyModel: sampled latency must be positive and finite");
    }
    return v;
  }

 private:
  const LatencyModel& model_;
  std::mt19937_64 rng_;
};

}  // namespace

ScheduleTrace simulate(const VideoStream& stream, DetectorAgent& agent,
                       const LatencyModel& latency) {
  if (stream.frames.empty()) {
    throw std::invalid_argument("simulate: stream must be non-empty");
  }
  LatencySampler sampler(latency);
  ScheduleTrace trace;
  const int n = static_cast<int>(stream.frames.size());

  int frame = 0;
  double clock = stream.frames[0].timestamp;
  while (frame < n) {
    const Frame& f = stream.frames[static_cast<std::size_t>(frame)];
    TraceRecord rec;
    rec.input_frame_index = frame;
    rec.start_time = clock;
    rec.detections = agent.process(f);
    rec.completion_time = clock + sampler.sample(frame);
    clock = rec.completion_time;
    trace.records.push_back(std::move(rec));

    // Newest frame arrived by `clock`, else the next one to arrive.
    int next = frame + 1;
    for (int i = n - 1; i > frame; --i) {
      if (stream.frames[static_cast<std::size_t>(i)].timestamp <= clock) {
        next = i;
        break;
      }
    }
    frame = next;
    if (frame < n) {
      clock = std::max(clock, stream.frames[static_cast<std::size_t>(frame)].timestamp);
    }
  }
  return trace;
}

std::vector<EvalPairing> pair_for_sap(const ScheduleTrace& trace,
                                      const VideoStream& stream) {
  const int n = static_cast<int>(stream.frames.size());
  for (const TraceRecord& r : trace.records) {
    if (r.input_frame_index < 0 || r.input_frame_index >= n) {
      throw std::invalid_argument("pair_for_sap: trace does not match stream");
    }
  }
  std::vector<EvalPairing> pairings;
  pairings.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double t = stream.frames[static_cast<std::size_t>(i)].timestamp;
    EvalPairing p;
    p.frame_index = i;
    double best = -1.0;
    for (std::size_t r = 0; r < trace.records.size(); ++r) {
      const double c = trace.records[r].completion_time;
      if (c <= t && c > best) {
        best = c;
        p.record = static_cast<int>(r);
      }
    }
    pairings.push_back(p);
  }
  return pairings;
}

std::vector<EvalPairing> pair_offline(const ScheduleTrace& trace,
                                      const VideoStream& stream) {
  const int n = static_cast<int>(stream.frames.size());
  std::vector<EvalPairing> pairings(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) pairings[static_cast<std::size_t>(i)].frame_index = i;
  for (std::size_t r = 0; r < trace.records.size(); ++r) {
    const int i = trace.records[r].input_frame_index;
    if (i < 0 || i >= n) {
      throw std::invalid_argument("pair_offline: trace does not match stream");
    }
    pairings[static_cast<std::size_t>(i)].record = static_cast<int>(r);
  }
  return pairings;
}

}  // namespace streamperc
