#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "streamperc/data.hpp"

namespace streamperc {

/// Per-invocation processing latency in seconds. Samples must be strictly
/// positive.
struct LatencyModel {
  enum class Kind { Constant, PerFrame, Jitter };
  Kind kind = Kind::Constant;
  double constant = 0.0;                 // Constant
  std::vector<double> per_frame;         // PerFrame, indexed by frame
  double mean = 0.0, jitter = 0.0;       // Jitter: uniform in [mean-j, mean+j]
  std::uint64_t rng_seed = 0;

  static LatencyModel constant_s(double seconds);
  static LatencyModel per_frame_s(std::vector<double> seconds);
  static LatencyModel jitter_s(double mean, double jitter, std::uint64_t seed);
};

/// Stateful per-stream detector. The simulator constructs a fresh instance
/// per run via the factory and feeds frames in processing order, so
/// whatever state the agent keeps (feature buffers, tracks) threads from
/// one invocation to the next. The agent's constructor defines the
/// first-frame rule.
class DetectorAgent {
 public:
  virtual ~DetectorAgent() = default;
  virtual std::vector<Detection> process(const Frame& frame) = 0;
};

using AgentFactory = std::function<std::unique_ptr<DetectorAgent>()>;

struct TraceRecord {
  int input_frame_index = 0;
  double start_time = 0.0;
  double completion_time = 0.0;
  std::vector<Detection> detections;
};

struct ScheduleTrace {
  std::vector<TraceRecord> records;
};

/// Which trace record (if any) each ground-truth instant is judged against.
struct EvalPairing {
  int frame_index = 0;
  std::optional<int> record;  // index into trace.records; nullopt = EMPTY
};

/// Single-threaded blocking schedule: start frame 0 at its arrival; on each
/// completion pick the newest frame that has arrived since, skipping
/// intermediate arrivals; idle when caught up.
ScheduleTrace simulate(const VideoStream& stream, DetectorAgent& agent,
                       const LatencyModel& latency);

/// Streaming pairing: each frame is judged against the record with the
/// latest completion_time <= the frame's timestamp (completion exactly at
/// the timestamp counts as available), or EMPTY if none.
std::vector<EvalPairing> pair_for_sap(const ScheduleTrace& trace,
                                      const VideoStream& stream);

/// Offline pairing: each frame against its own output, EMPTY for frames
/// the schedule skipped.
std::vector<EvalPairing> pair_offline(const ScheduleTrace& trace,
                                      const VideoStream& stream);

}  // namespace streamperc
