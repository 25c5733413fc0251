#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include "streamperc/data.hpp"
#include "streamperc/dfp.hpp"
#include "streamperc/forecast.hpp"
#include "streamperc/metrics.hpp"
#include "streamperc/run_config.hpp"
#include "streamperc/scene_sim.hpp"
#include "streamperc/stream_sim.hpp"
#include "streamperc/trend_loss.hpp"

namespace fs = std::filesystem;
using namespace streamperc;

namespace {

constexpr std::uint64_t kDetectorSeedSalt = 0xd1b54a32d192ed03ULL;
constexpr std::uint64_t kTrainSeedSalt = 0x2545f4914f6cdd1dULL;

struct CommonOptions {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<double> latency_ms;
  std::optional<int> speed;
  std::optional<std::string> agent;
  std::optional<std::string> model_path;
};

void add_common(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--config", opt.config_path, "Experiment config file (key = value lines)");
  cmd->add_option("--out", opt.out_dir, "Output directory for artifacts");
  cmd->add_option("--seed", opt.seed, "Global seed (overrides the config)");
  cmd->add_option("--latency-ms", opt.latency_ms, "Constant latency in ms (overrides the config)");
  cmd->add_option("--speed", opt.speed, "Speed factor 0, 1 or 2 (overrides the config)")
      ->check(CLI::IsMember({0, 1, 2}));
  cmd->add_option("--agent", opt.agent,
                  "Agent: oracle | delayed-oracle | kalman | linear-forecaster");
  cmd->add_option("--model", opt.model_path, "Forecaster model JSON (linear-forecaster agent)");
}

RunConfig resolve_config(const CommonOptions& opt) {
  RunConfig cfg = opt.config_path.empty() ? default_run_config()
                                          : parse_run_config(opt.config_path);
  if (opt.seed) {
    cfg.seed = *opt.seed;
    cfg.scene.rng_seed = *opt.seed;
  }
  if (opt.latency_ms) {
    cfg.latency_kind = "constant";
    cfg.latency_ms = *opt.latency_ms;
  }
  if (opt.speed) cfg.speed_factor = *opt.speed;
  if (opt.agent) cfg.agent = *opt.agent;
  if (opt.model_path) cfg.model_path = *opt.model_path;
  std::cout << "seed " << cfg.seed << "\n";
  fs::create_directories(opt.out_dir);
  return cfg;
}

BaseDetector make_base_detector(const RunConfig& cfg) {
  if (cfg.detector.coordinate_noise_sigma == 0.0 && cfg.detector.drop_probability == 0.0) {
    return nullptr;  // oracle detections
  }
  auto rng = std::make_shared<std::mt19937_64>(cfg.seed ^ kDetectorSeedSalt);
  MockDetectorConfig det = cfg.detector;
  return [rng, det](const Frame& f) { return mock_detect(f, det, *rng); };
}

std::unique_ptr<DetectorAgent> make_agent(const RunConfig& cfg) {
  const BaseDetector detector = make_base_detector(cfg);
  if (cfg.agent == "oracle" || cfg.agent == "delayed-oracle") {
    return make_oracle_agent(detector);
  }
  if (cfg.agent == "kalman") {
    return make_kalman_agent(KFConfig{}, detector);
  }
  if (cfg.agent == "linear-forecaster") {
    if (cfg.model_path.empty()) {
      throw std::runtime_error("linear-forecaster agent needs --model or model_path");
    }
    return make_linear_forecast_agent(load_forecaster(cfg.model_path), 0.3, detector);
  }
  throw std::runtime_error("unknown agent '" + cfg.agent + "'");
}

struct SimArtifacts {
  VideoStream stream;
  ScheduleTrace trace;
};

SimArtifacts run_simulation(const RunConfig& cfg) {
  SimArtifacts a;
  a.stream = generate_stream(cfg.scene_at_speed());
  auto agent = make_agent(cfg);
  a.trace = simulate(a.stream, *agent, cfg.latency_model());
  return a;
}

PredictionDump trace_to_dump(const SimArtifacts& a) {
  PredictionDump dump;
  for (const TraceRecord& r : a.trace.records) {
    dump[{a.stream.video_id, r.input_frame_index}] = r.detections;
  }
  return dump;
}

int cmd_generate(const CommonOptions& opt) {
  const RunConfig cfg = resolve_config(opt);
  const VideoStream stream = generate_stream(cfg.scene_at_speed());
  const fs::path path = fs::path(opt.out_dir) / "dataset.json";
  save_stream_dataset({stream}, path);
  std::size_t boxes = 0;
  for (const Frame& f : stream.frames) boxes += f.gt.size();
  std::cout << "generated " << stream.frames.size() << " frames, " << boxes
            << " boxes -> " << path.string() << "\n";
  return 0;
}

int cmd_simulate(const CommonOptions& opt) {
  const RunConfig cfg = resolve_config(opt);
  const SimArtifacts a = run_simulation(cfg);
  save_trace_json(a.trace, fs::path(opt.out_dir) / "trace.json");
  save_pairings_json(pair_for_sap(a.trace, a.stream),
                     fs::path(opt.out_dir) / "pairings.json");
  persist_predictions(trace_to_dump(a), fs::path(opt.out_dir) / "predictions.json");
  std::cout << "simulated " << a.stream.frames.size() << " frames, "
            << a.trace.records.size() << " completions -> " << opt.out_dir << "\n";
  return 0;
}

int eval_common(const CommonOptions& opt, bool offline) {
  const RunConfig cfg = resolve_config(opt);
  const SimArtifacts a = run_simulation(cfg);
  const APResult r = offline ? offline_ap(a.trace, a.stream, cfg.ap)
                             : streaming_ap(a.trace, a.stream, cfg.ap);
  save_result_json(r, fs::path(opt.out_dir) / "result.json");
  std::ofstream csv(fs::path(opt.out_dir) / "result.csv");
  csv << result_csv_header() << "\n"
      << result_csv_row(a.stream.video_id, cfg.latency_ms, cfg.speed_factor, r) << "\n";
  std::cout << (offline ? "offline AP " : "sAP ") << (r.ap ? std::to_string(*r.ap) : "NA")
            << " (agent " << cfg.agent << ", latency " << cfg.latency_ms << " ms, speed "
            << cfg.speed_factor << "x)\n";
  return 0;
}

int cmd_triplets(const CommonOptions& opt) {
  const RunConfig cfg = resolve_config(opt);
  const VideoStream stream = generate_stream(cfg.scene);
  const std::vector<Triplet> triplets = resample_speed(stream, cfg.speed_factor);
  nlohmann::json arr = nlohmann::json::array();
  for (const Triplet& t : triplets) {
    nlohmann::json targets = nlohmann::json::array();
    for (const GroundTruthBox& g : t.target_gt) {
      targets.push_back({{"bbox", {g.box.x1, g.box.y1, g.box.width(), g.box.height()}},
                         {"category_id", g.category}});
    }
    arr.push_back({{"prev", t.prev.frame_index},
                   {"cur", t.cur.frame_index},
                   {"target_gt", targets}});
  }
  const fs::path path = fs::path(opt.out_dir) / "triplets.json";
  std::ofstream out(path);
  out << arr.dump(2) << "\n";
  std::cout << triplets.size() << " triplets at " << cfg.speed_factor << "x -> "
            << path.string() << "\n";
  return 0;
}

int cmd_tal_weights(const CommonOptions& opt) {
  const RunConfig cfg = resolve_config(opt);
  const VideoStream stream = generate_stream(cfg.scene_at_speed());
  const std::vector<Triplet> triplets = build_triplets(stream);
  const fs::path path = fs::path(opt.out_dir) / "tal_weights.csv";
  std::ofstream csv(path);
  csv << "triplet,object,m_iou,omega,omega_hat\n";
  for (std::size_t ti = 0; ti < triplets.size(); ++ti) {
    const Triplet& t = triplets[ti];
    // Unit regression losses: omega_hat reduces to omega * N / sum(omega).
    const std::vector<double> unit(t.target_gt.size(), 1.0);
    const TrendWeights w = compute_trend_weights(t.target_gt, t.cur.gt, unit, cfg.trend);
    for (std::size_t i = 0; i < w.m_iou.size(); ++i) {
      csv << ti << ',' << i << ',' << w.m_iou[i] << ',' << w.omega[i] << ','
          << w.omega_hat[i] << "\n";
    }
  }
  std::cout << triplets.size() << " triplets -> " << path.string() << "\n";
  return 0;
}

int cmd_train(const CommonOptions& opt, int epochs, double lr, bool tal) {
  RunConfig cfg = resolve_config(opt);
  const VideoStream stream = generate_stream(cfg.scene_at_speed());
  const std::vector<Triplet> triplets = build_triplets(stream);
  TrainConfig tc;
  tc.epochs = epochs;
  tc.learning_rate = lr;
  tc.tal_enabled = tal;
  tc.trend = cfg.trend;
  tc.seed = cfg.seed ^ kTrainSeedSalt;
  const TrainResult result = train_linear_forecaster(triplets, tc);
  save_forecaster(result.model, fs::path(opt.out_dir) / "forecaster.json");
  std::ofstream csv(fs::path(opt.out_dir) / "train_log.csv");
  csv << "epoch,loss,mean_w_fast,mean_w_slow\n";
  for (const EpochLog& log : result.log) {
    csv << log.epoch << ',' << log.loss << ',' << log.mean_w_fast << ','
        << log.mean_w_slow << "\n";
  }
  std::cout << "trained " << epochs << " epochs, final loss "
            << result.log.back().loss << " -> " << opt.out_dir << "/forecaster.json\n";
  return 0;
}

int cmd_gradcheck(const CommonOptions& opt, bool assert_mode, bool inject_error) {
  const RunConfig cfg = resolve_config(opt);

  // Forecaster check on a random batch from the configured scene.
  RunConfig scene_cfg = cfg;
  scene_cfg.scene.frame_count = std::max(scene_cfg.scene.frame_count, 8);
  const VideoStream stream = generate_stream(scene_cfg.scene_at_speed());
  const std::vector<ForecastSample> samples =
      make_training_samples(build_triplets(stream));
  if (samples.empty()) throw std::runtime_error("gradcheck: scene produced no samples");

  LinearForecaster model;
  std::mt19937_64 rng(cfg.seed);
  const double inv = 1.0 / (static_cast<double>(std::mt19937_64::max()) + 1.0);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 9; ++c) {
      model.weights(r, c) = 0.2 * (2.0 * static_cast<double>(rng()) * inv - 1.0);
    }
  }

  TrainConfig tc;
  tc.tal_enabled = true;
  tc.trend = cfg.trend;
  double forecast_err;
  if (inject_error) {
    // Deliberately mismatched weights between the analytic and the
    // finite-difference path; exercises the assert exit code.
    const LossBreakdown b = forecast_loss(model, samples, tc);
    std::vector<double> wrong = b.weights;
    for (double& w : wrong) w *= 1.5;
    const auto analytic = forecast_gradient(model, samples, wrong);
    const auto reference = forecast_gradient(model, samples, b.weights);
    forecast_err = ((analytic - reference).cwiseAbs().maxCoeff()) /
                   std::max(reference.cwiseAbs().maxCoeff(), 1e-8);
    forecast_err = std::max(forecast_err, 1.0);
  } else {
    forecast_err = grad_check(model, samples, tc);
  }

  const FeatureMap prev = FeatureMap::random(4, 3, 3, cfg.seed + 1);
  const FeatureMap cur = FeatureMap::random(4, 3, 3, cfg.seed + 2);
  const ProjectionParams params = ProjectionParams::random(2, 4, cfg.seed + 3);
  const double dfp_err = dfp_grad_check(prev, cur, params, DFPConfig{});

  std::cout << "gradcheck forecaster max rel err " << forecast_err
            << ", dfp max rel err " << dfp_err << "\n";
  if (assert_mode && (forecast_err > 1e-4 || dfp_err > 1e-4)) {
    std::cerr << "gradcheck: tolerance 1e-4 exceeded\n";
    return 3;
  }
  return 0;
}

int cmd_compare(const CommonOptions& opt, std::vector<std::string> agents) {
  RunConfig cfg = resolve_config(opt);
  if (agents.empty()) agents = {"delayed-oracle", "kalman"};

  const fs::path path = fs::path(opt.out_dir) / "compare.csv";
  std::ofstream csv(path);
  csv << "agent,latency_ms,sap_0x,sap_1x,sap_2x\n";
  std::cout << "agent          sAP_0x   sAP_1x   sAP_2x   (latency " << cfg.latency_ms
            << " ms)\n";
  for (const std::string& agent : agents) {
    RunConfig cell = cfg;
    cell.agent = agent;
    csv << agent << ',' << cfg.latency_ms;
    std::cout << agent;
    for (int pad = static_cast<int>(agent.size()); pad < 15; ++pad) std::cout << ' ';
    for (int speed : {0, 1, 2}) {
      cell.speed_factor = speed;
      const SimArtifacts a = run_simulation(cell);
      const APResult r = streaming_ap(a.trace, a.stream, cell.ap);
      const std::string v = r.ap ? std::to_string(*r.ap) : "NA";
      csv << ',' << v;
      std::cout << v.substr(0, 8) << ' ';
    }
    csv << "\n";
    std::cout << "\n";
  }
  std::cout << "-> " << path.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latency-aware streaming-perception evaluation and forecasting toolkit"};
  app.require_subcommand(1);

  CommonOptions opt;
  int train_epochs = 200;
  double train_lr = 0.05;
  bool train_tal = false;
  bool assert_mode = false;
  bool inject_error = false;
  std::vector<std::string> compare_agents;

  auto* generate = app.add_subcommand("generate", "Render a synthetic scene to a COCO-style dataset");
  add_common(generate, opt);
  auto* simulate = app.add_subcommand("simulate", "Run the latency schedule and dump trace/pairings/predictions");
  add_common(simulate, opt);
  auto* eval_sap = app.add_subcommand("eval-sap", "Simulate and score streaming AP");
  add_common(eval_sap, opt);
  auto* eval_off = app.add_subcommand("eval-offline", "Simulate and score conventional (offline) AP");
  add_common(eval_off, opt);
  auto* triplets = app.add_subcommand("triplets", "Export speed-resampled training triplets");
  add_common(triplets, opt);
  auto* tal = app.add_subcommand("tal-weights", "Print per-object trend weights as CSV");
  add_common(tal, opt);
  auto* train = app.add_subcommand("train-forecaster", "Train the linear box forecaster");
  add_common(train, opt);
  train->add_option("--epochs", train_epochs, "Training epochs");
  train->add_option("--lr", train_lr, "Learning rate");
  train->add_flag("--tal", train_tal, "Enable trend-aware loss weighting");
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of forecaster and DFP gradients");
  add_common(gradcheck, opt);
  gradcheck->add_flag("--assert", assert_mode, "Exit 3 when the 1e-4 tolerance is exceeded");
  gradcheck->add_flag("--inject-error", inject_error, "Force a gradient mismatch (test hook)");
  auto* compare = app.add_subcommand("compare", "sAP matrix over agents x speed factors");
  add_common(compare, opt);
  compare->add_option("--agents", compare_agents, "Agents to compare (default delayed-oracle kalman)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (generate->parsed()) return cmd_generate(opt);
    if (simulate->parsed()) return cmd_simulate(opt);
    if (eval_sap->parsed()) return eval_common(opt, false);
    if (eval_off->parsed()) return eval_common(opt, true);
    if (triplets->parsed()) return cmd_triplets(opt);
    if (tal->parsed()) return cmd_tal_weights(opt);
    if (train->parsed()) return cmd_train(opt, train_epochs, train_lr, train_tal);
    if (gradcheck->parsed()) return cmd_gradcheck(opt, assert_mode, inject_error);
    if (compare->parsed()) return cmd_compare(opt, compare_agents);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
