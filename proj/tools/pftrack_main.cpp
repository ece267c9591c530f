// Single-binary command line for the tracking engine: synthetic scenario
// generation, tracking in several modes, training, evaluation, complexity
// benchmarks, BEV plots, and a one-shot `repro` pipeline that regenerates
// the whole ablation study.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "pftrack/io.hpp"
#include "pftrack/manifest.hpp"
#include "pftrack/metrics.hpp"
#include "pftrack/model.hpp"
#include "pftrack/plot.hpp"
#include "pftrack/refine.hpp"
#include "pftrack/simulator.hpp"
#include "pftrack/tbd.hpp"
#include "pftrack/tracker.hpp"
#include "pftrack/training.hpp"

namespace fs = std::filesystem;
using namespace pftrack;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_file(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("no such file: " + path);
}

int worker_count() {
  if (const char* env = std::getenv("PFTRACK_WORKERS")) {
    const int n = std::atoi(env);
    if (n >= 1) return std::min(n, 64);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return std::clamp<int>(static_cast<int>(hw), 1, 8);
}

void parallel_for(size_t count, int workers, const std::function<void(size_t)>& fn) {
  if (workers <= 1 || count <= 1) {
    for (size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  const int n = std::min<int>(workers, static_cast<int>(count));
  for (int w = 0; w < n; ++w)
    pool.emplace_back([&]() {
      while (true) {
        const size_t i = next.fetch_add(1);
        if (i >= count) return;
        fn(i);
      }
    });
  for (auto& t : pool) t.join();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << content;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

std::string tracks_to_string(const std::vector<io::TrackRecord>& recs) {
  std::ostringstream os;
  io::write_tracks(os, recs);
  return os.str();
}

std::string detections_to_string(const std::vector<io::DetectionRecord>& recs) {
  std::ostringstream os;
  io::write_detections(os, recs);
  return os.str();
}

std::string forecasts_to_string(const std::vector<ForecastRecord>& recs) {
  std::ostringstream os;
  for (const auto& r : recs) {
    nlohmann::ordered_json j;
    j["frame"] = r.frame;
    j["id"] = r.id;
    auto steps = nlohmann::ordered_json::array();
    for (const auto& s : r.steps) steps.push_back({s.x, s.y});
    j["steps"] = steps;
    os << j.dump() << "\n";
  }
  return os.str();
}

std::vector<mot::ForecastSample> load_forecasts(const std::string& path,
                                                const std::vector<io::TrackRecord>& pred) {
  std::map<std::pair<int, TrackId>, Vec2> origin;
  for (const auto& r : pred) origin[{r.frame, r.id}] = {r.box.center.x, r.box.center.y};
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open forecasts file: " + path);
  std::vector<mot::ForecastSample> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::ordered_json::parse(line);
      mot::ForecastSample s;
      s.origin_frame = j.at("frame").get<int>();
      s.pred_id = j.at("id").get<TrackId>();
      for (const auto& st : j.at("steps")) s.steps.push_back({st[0].get<double>(), st[1].get<double>()});
      auto it = origin.find({s.origin_frame, s.pred_id});
      if (it == origin.end()) continue;  // forecast without an emitted box
      s.origin_xy = it->second;
      out.push_back(std::move(s));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad forecast record: " + e.what());
    }
  }
  return out;
}

std::vector<mot::ForecastSample> to_samples(const std::vector<ForecastRecord>& recs,
                                            const std::vector<io::TrackRecord>& pred) {
  std::map<std::pair<int, TrackId>, Vec2> origin;
  for (const auto& r : pred) origin[{r.frame, r.id}] = {r.box.center.x, r.box.center.y};
  std::vector<mot::ForecastSample> out;
  for (const auto& r : recs) {
    auto it = origin.find({r.frame, r.id});
    if (it == origin.end()) continue;
    mot::ForecastSample s;
    s.origin_frame = r.frame;
    s.pred_id = r.id;
    s.origin_xy = it->second;
    s.steps = r.steps;
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// training pipeline (shared by `train` and `repro`)
// ---------------------------------------------------------------------------

using train::TrainSpec;

train::TrainedModel train_pipeline(const std::vector<sim::SimResult>& sims,
                                   const TrackerConfig& cfg, std::uint64_t seed,
                                   const TrainSpec& spec) {
  std::vector<std::pair<std::vector<io::TrackRecord>, std::vector<io::DetectionRecord>>> logs;
  logs.reserve(sims.size());
  for (const auto& s : sims) logs.emplace_back(s.ground_truth, s.detections);
  return train::train_full(logs, cfg, seed, spec);
}

std::string curve_csv(const std::vector<double>& refine, const std::vector<double>& motion) {
  std::ostringstream os;
  os << "step,refine_loss,motion_loss\n";
  const size_t n = std::max(refine.size(), motion.size());
  for (size_t i = 0; i < n; ++i) {
    os << i << ",";
    if (i < refine.size()) os << io::fmt_double(refine[i]);
    os << ",";
    if (i < motion.size()) os << io::fmt_double(motion[i]);
    os << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// tracking dispatch
// ---------------------------------------------------------------------------

const std::vector<std::string> kModes = {"pftrack", "pftrack-no-ext", "velocity", "tbd-hungarian",
                                         "tbd-greedy"};

bool is_tbd_mode(const std::string& mode) { return mode.rfind("tbd-", 0) == 0; }

std::vector<io::TrackRecord> run_mode(const std::string& mode,
                                      const std::vector<io::DetectionRecord>& dets,
                                      const ModelParams& params, const TrackerConfig& cfg,
                                      const TbdConfig& tbd_cfg,
                                      std::vector<ForecastRecord>* forecasts = nullptr) {
  if (is_tbd_mode(mode)) return run_tbd(dets, tbd_assoc_from_string(mode), tbd_cfg);
  return run_sequence(dets, params, cfg, RunOptions::from_mode(mode), forecasts);
}

int detections_feature_dim(const std::vector<io::DetectionRecord>& dets) {
  for (const auto& d : dets)
    if (!d.feature.empty()) return static_cast<int>(d.feature.size());
  return 0;
}

// ---------------------------------------------------------------------------
// subcommand: simulate
// ---------------------------------------------------------------------------

void write_scenario_outputs(const fs::path& dir, const sim::ScenarioConfig& sc) {
  fs::create_directories(dir);
  auto res = sim::simulate(sc);
  write_file((dir / "scenario.json").string(), sim::to_json(sc).dump(2) + "\n");
  write_file((dir / "gt.jsonl").string(), tracks_to_string(res.ground_truth));
  write_file((dir / "detections.jsonl").string(), detections_to_string(res.detections));
}

int cmd_simulate(const std::string& scenario_file, const std::string& suite, int count,
                 std::uint64_t seed, const std::string& out_dir,
                 const std::vector<std::string>& raw_args) {
  WallClock clock;
  RunManifest manifest;
  manifest.command = "simulate";
  manifest.args = raw_args;
  manifest.seed = seed;
  fs::create_directories(out_dir);

  if (!scenario_file.empty()) {
    require_file(scenario_file);
    sim::ScenarioConfig sc;
    try {
      sc = sim::scenario_from_json(nlohmann::ordered_json::parse(read_file(scenario_file)));
    } catch (const std::exception& e) {
      throw UsageError(std::string("invalid scenario config: ") + e.what());
    }
    manifest.inputs.push_back(scenario_file);
    manifest.config_hash = hash_string(sim::to_json(sc).dump());
    write_scenario_outputs(out_dir, sc);
    manifest.outputs = {out_dir + "/gt.jsonl", out_dir + "/detections.jsonl"};
  } else {
    auto suite_cfgs = sim::scenario_suite(suite, count, seed);
    manifest.config_hash = hash_string(suite + std::to_string(count));
    parallel_for(suite_cfgs.size(), worker_count(), [&](size_t i) {
      char name[32];
      std::snprintf(name, sizeof(name), "scen%03zu", i);
      write_scenario_outputs(fs::path(out_dir) / name, suite_cfgs[i]);
    });
    for (size_t i = 0; i < suite_cfgs.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "scen%03zu", i);
      manifest.outputs.push_back((fs::path(out_dir) / name).string());
    }
  }
  manifest.wall_clock_s = clock.seconds();
  write_manifest((fs::path(out_dir) / "manifest.json").string(), manifest);
  return 0;
}

// ---------------------------------------------------------------------------
// subcommand: track
// ---------------------------------------------------------------------------

int cmd_track(const std::string& detections_file, const std::string& weights_file,
              const std::string& config_file, const std::string& mode, const std::string& out_file,
              const std::string& forecasts_out, const TbdConfig& tbd_cfg_in,
              const std::vector<std::string>& raw_args) {
  if (std::find(kModes.begin(), kModes.end(), mode) == kModes.end())
    throw UsageError("unknown mode: " + mode);
  require_file(detections_file);
  WallClock clock;

  TrackerConfig cfg;
  if (!config_file.empty()) {
    require_file(config_file);
    cfg = io::load_tracker_config(config_file);
  }
  auto dets = io::load_detections(detections_file);

  ModelParams params = make_model(cfg);
  if (!is_tbd_mode(mode)) {
    if (weights_file.empty()) throw UsageError("mode " + mode + " requires --weights");
    require_file(weights_file);
    const int det_d = detections_feature_dim(dets);
    if (det_d != 0 && det_d != cfg.d)
      throw UsageError("detections carry features of dim " + std::to_string(det_d) +
                       " but config/weights expect d=" + std::to_string(cfg.d));
    params = io::load_weights_file(weights_file, cfg);
  }
  TbdConfig tbd_cfg = tbd_cfg_in;
  tbd_cfg.period_s = cfg.period_s;

  std::vector<ForecastRecord> forecasts;
  auto tracks = run_mode(mode, dets, params, cfg, tbd_cfg,
                         forecasts_out.empty() ? nullptr : &forecasts);
  write_file(out_file, tracks_to_string(tracks));
  if (!forecasts_out.empty()) write_file(forecasts_out, forecasts_to_string(forecasts));

  RunManifest manifest;
  manifest.command = "track";
  manifest.args = raw_args;
  manifest.config_hash = hash_string(io::tracker_config_json(cfg).dump() + mode);
  manifest.inputs = {detections_file};
  if (!weights_file.empty()) manifest.inputs.push_back(weights_file);
  if (!config_file.empty()) manifest.inputs.push_back(config_file);
  manifest.outputs = {out_file};
  if (!forecasts_out.empty()) manifest.outputs.push_back(forecasts_out);
  manifest.wall_clock_s = clock.seconds();
  write_manifest(out_file + ".manifest.json", manifest);
  return 0;
}

// ---------------------------------------------------------------------------
// subcommand: eval
// ---------------------------------------------------------------------------

mot::MetricsReport evaluate_with_forecasts(const std::vector<mot::SequencePair>& pairs,
                                           const std::vector<std::vector<mot::ForecastSample>>& fsamples,
                                           int horizon, int n_recall, int workers) {
  auto rep = mot::metrics_report(pairs, n_recall, 2.0, workers);
  bool any = false;
  double ade_sum = 0.0, fde_sum = 0.0;
  long long samples = 0;
  double ade_acc = 0.0, fde_acc = 0.0;
  for (size_t i = 0; i < pairs.size(); ++i) {
    if (i >= fsamples.size() || fsamples[i].empty()) continue;
    auto r = mot::ade_fde(fsamples[i], pairs[i].gt, pairs[i].pred, horizon);
    if (r.samples == 0) continue;
    any = true;
    ade_acc += r.ade * r.samples;
    fde_acc += r.fde * r.samples;
    samples += r.samples;
  }
  if (any && samples > 0) {
    ade_sum = ade_acc / samples;
    fde_sum = fde_acc / samples;
    rep.aggregate.has_forecast = true;
    rep.aggregate.ade = ade_sum;
    rep.aggregate.fde = fde_sum;
  }
  return rep;
}

int cmd_eval(const std::string& gt_file, const std::string& pred_file, const std::string& report_file,
             const std::string& forecasts_file, int horizon, int n_recall,
             const std::vector<std::string>& raw_args) {
  require_file(gt_file);
  require_file(pred_file);
  WallClock clock;
  mot::SequencePair pair{io::load_tracks(gt_file), io::load_tracks(pred_file)};
  std::vector<std::vector<mot::ForecastSample>> fsamples;
  if (!forecasts_file.empty()) {
    require_file(forecasts_file);
    fsamples.push_back(load_forecasts(forecasts_file, pair.pred));
  }
  auto rep = evaluate_with_forecasts({pair}, fsamples, horizon, n_recall, worker_count());
  write_file(report_file, mot::report_json(rep).dump(2) + "\n");

  RunManifest manifest;
  manifest.command = "eval";
  manifest.args = raw_args;
  manifest.inputs = {gt_file, pred_file};
  if (!forecasts_file.empty()) manifest.inputs.push_back(forecasts_file);
  manifest.outputs = {report_file};
  manifest.wall_clock_s = clock.seconds();
  write_manifest(report_file + ".manifest.json", manifest);
  return 0;
}

// ---------------------------------------------------------------------------
// subcommand: bench
// ---------------------------------------------------------------------------

int cmd_bench(const std::vector<int>& ns, const std::vector<int>& taus, int d,
              const std::string& out_csv) {
  std::ostringstream os;
  os << "n,tau,d,global_madds,decoupled_madds,ratio\n";
  bool all_smaller = true;
  for (int n : ns)
    for (int tau : taus) {
      auto r = flop_compare(n, tau, d);
      os << n << "," << tau << "," << d << "," << r.global << "," << r.decoupled << ","
         << io::fmt_double(double(r.global) / double(r.decoupled)) << "\n";
      if (n >= 2 && tau >= 2 && r.decoupled >= r.global) all_smaller = false;
    }
  if (out_csv.empty())
    std::cout << os.str();
  else
    write_file(out_csv, os.str());
  if (!all_smaller) {
    std::cerr << "bench: decoupled layout failed to beat global attention\n";
    return 1;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// subcommand: plot
// ---------------------------------------------------------------------------

int cmd_plot(const std::string& gt_file, const std::string& pred_file, const std::string& out_svg) {
  require_file(gt_file);
  require_file(pred_file);
  auto gt = io::load_tracks(gt_file);
  auto pred = io::load_tracks(pred_file);
  write_file(out_svg, plot::bev_svg(gt, pred));
  return 0;
}

}  // namespace
namespace {

// ---------------------------------------------------------------------------
// subcommand: train
// ---------------------------------------------------------------------------

std::vector<sim::SimResult> simulate_suites(const std::vector<std::string>& suites, int count,
                                            std::uint64_t seed, int workers) {
  std::vector<sim::ScenarioConfig> cfgs;
  for (size_t s = 0; s < suites.size(); ++s) {
    auto part = sim::scenario_suite(suites[s], count, seed + 1000 * s);
    cfgs.insert(cfgs.end(), part.begin(), part.end());
  }
  std::vector<sim::SimResult> sims(cfgs.size());
  parallel_for(cfgs.size(), workers, [&](size_t i) { sims[i] = sim::simulate(cfgs[i]); });
  return sims;
}

int cmd_train(const std::vector<std::string>& suites, int count, std::uint64_t seed,
              const std::string& out_weights, const std::string& curve_file, const TrainSpec& spec,
              const std::vector<std::string>& raw_args) {
  WallClock clock;
  TrackerConfig cfg;
  auto sims = simulate_suites(suites, count, seed, worker_count());
  auto trained = train_pipeline(sims, cfg, seed, spec);
  io::save_weights_file(out_weights, trained.params);
  if (!curve_file.empty()) write_file(curve_file, curve_csv(trained.refine_curve, trained.motion_curve));

  RunManifest manifest;
  manifest.command = "train";
  manifest.args = raw_args;
  manifest.seed = seed;
  manifest.outputs = {out_weights};
  if (!curve_file.empty()) manifest.outputs.push_back(curve_file);
  manifest.wall_clock_s = clock.seconds();
  write_manifest(out_weights + ".manifest.json", manifest);
  return 0;
}

// ---------------------------------------------------------------------------
// subcommand: repro
// ---------------------------------------------------------------------------

struct AblationRow {
  std::string name;
  RunOptions options;
};

const std::vector<AblationRow> kAblationRows = {
    {"baseline", {false, false, false, false}},
    {"qr", {true, false, false, false}},
    {"qr-tr", {true, true, false, false}},
    {"pred", {false, false, true, false}},
    {"pred-ext", {false, false, true, true}},
    {"full", {true, true, true, true}},
};

struct SuiteRun {
  std::vector<std::vector<io::TrackRecord>> tracks;        // per scenario
  std::vector<std::vector<ForecastRecord>> forecasts;      // per scenario
};

SuiteRun run_suite(const std::vector<sim::SimResult>& sims, const RunOptions& opt,
                   const ModelParams& params, const TrackerConfig& cfg, int workers,
                   bool want_forecasts) {
  SuiteRun out;
  out.tracks.resize(sims.size());
  out.forecasts.resize(sims.size());
  parallel_for(sims.size(), workers, [&](size_t i) {
    out.tracks[i] = run_sequence(sims[i].detections, params, cfg, opt,
                                 want_forecasts ? &out.forecasts[i] : nullptr);
  });
  return out;
}

SuiteRun run_suite_tbd(const std::vector<sim::SimResult>& sims, TbdAssoc assoc,
                       const TbdConfig& tbd_cfg, int workers) {
  SuiteRun out;
  out.tracks.resize(sims.size());
  out.forecasts.resize(sims.size());
  parallel_for(sims.size(), workers, [&](size_t i) {
    out.tracks[i] = run_tbd(sims[i].detections, assoc, tbd_cfg);
  });
  return out;
}

std::vector<mot::SequencePair> make_pairs(const std::vector<sim::SimResult>& sims,
                                          const SuiteRun& run) {
  std::vector<mot::SequencePair> pairs;
  for (size_t i = 0; i < sims.size(); ++i) pairs.push_back({sims[i].ground_truth, run.tracks[i]});
  return pairs;
}

// history-based constant-velocity forecasts from emitted track positions
std::vector<mot::ForecastSample> cv_baseline_samples(const std::vector<io::TrackRecord>& pred,
                                                     int horizon) {
  std::map<TrackId, std::map<int, Vec2>> by_track;
  for (const auto& r : pred) by_track[r.id][r.frame] = {r.box.center.x, r.box.center.y};
  std::vector<mot::ForecastSample> out;
  for (const auto& [id, frames] : by_track) {
    for (auto it = frames.begin(); it != frames.end(); ++it) {
      auto prev = frames.find(it->first - 1);
      if (prev == frames.end()) continue;
      auto f = train::velocity_forecast_baseline({prev->second, it->second}, horizon);
      mot::ForecastSample s;
      s.origin_frame = it->first;
      s.pred_id = id;
      s.origin_xy = it->second;
      s.steps = f.steps;
      out.push_back(std::move(s));
    }
  }
  return out;
}

struct EvalSummary {
  double amota = 0.0, amotp = 0.0, mota = 0.0, recall = 0.0;
  long long ids = 0, fp = 0, fn = 0;
};

EvalSummary summarize(const mot::MetricsReport& rep) {
  EvalSummary s;
  s.amota = rep.aggregate.amota;
  s.amotp = rep.aggregate.amotp;
  s.mota = rep.aggregate.mota;
  s.recall = rep.aggregate.recall;
  s.ids = rep.aggregate.ids;
  s.fp = rep.aggregate.fp;
  s.fn = rep.aggregate.fn;
  return s;
}

nlohmann::ordered_json summary_json(const EvalSummary& s) {
  nlohmann::ordered_json j;
  j["amota"] = s.amota;
  j["amotp"] = s.amotp;
  j["mota"] = s.mota;
  j["recall"] = s.recall;
  j["ids"] = s.ids;
  j["fp"] = s.fp;
  j["fn"] = s.fn;
  return j;
}

int cmd_repro(std::uint64_t seed, const std::string& out_dir, int n_scenarios,
              const TrainSpec& spec, const std::vector<std::string>& raw_args) {
  WallClock clock;
  const int workers = worker_count();
  fs::create_directories(out_dir);
  const fs::path out(out_dir);

  TrackerConfig cfg;
  cfg.validate();
  write_file((out / "config.json").string(), io::tracker_config_json(cfg).dump(2) + "\n");

  // 1. simulate all suites
  const std::vector<std::pair<std::string, int>> suite_defs = {
      {"occlusion", n_scenarios},
      {"crowded", n_scenarios},
      {"turning", n_scenarios},
      {"handoff", std::max(2, n_scenarios / 5)},
  };
  std::map<std::string, std::vector<sim::SimResult>> sims;
  for (size_t sidx = 0; sidx < suite_defs.size(); ++sidx) {
    const auto& [name, count] = suite_defs[sidx];
    auto cfgs = sim::scenario_suite(name, count, seed + 1000 * sidx);
    auto& dst = sims[name];
    dst.resize(cfgs.size());
    parallel_for(cfgs.size(), workers, [&](size_t i) {
      dst[i] = sim::simulate(cfgs[i]);
      char scen[32];
      std::snprintf(scen, sizeof(scen), "scen%03zu", i);
      const fs::path dir = out / "suites" / name / scen;
      fs::create_directories(dir);
      write_file((dir / "scenario.json").string(), sim::to_json(cfgs[i]).dump(2) + "\n");
      write_file((dir / "gt.jsonl").string(), tracks_to_string(dst[i].ground_truth));
      write_file((dir / "detections.jsonl").string(), detections_to_string(dst[i].detections));
    });
  }

  // 2. toy-train the refinement and motion heads on the same scenario pool
  std::vector<sim::SimResult> train_pool;
  for (const auto& [name, count] : suite_defs)
    for (const auto& s : sims[name]) train_pool.push_back(s);
  auto trained = train_pipeline(train_pool, cfg, seed, spec);
  io::save_weights_file((out / "weights.json").string(), trained.params);
  write_file((out / "train_curve.csv").string(),
             curve_csv(trained.refine_curve, trained.motion_curve));

  TbdConfig tbd_cfg;
  tbd_cfg.period_s = cfg.period_s;

  nlohmann::ordered_json summary;
  summary["seed"] = seed;
  summary["scenarios_per_suite"] = n_scenarios;

  // 3. run every mode on every suite, write logs, evaluate pooled
  fs::create_directories(out / "reports");
  std::map<std::string, std::map<std::string, EvalSummary>> mode_results;
  std::map<std::string, SuiteRun> pftrack_runs, velocity_runs;
  for (const auto& [suite, count] : suite_defs) {
    const auto& suite_sims = sims[suite];
    for (const auto& mode : kModes) {
      const bool want_forecasts = mode == "pftrack" || mode == "velocity";
      SuiteRun run = is_tbd_mode(mode)
                         ? run_suite_tbd(suite_sims, tbd_assoc_from_string(mode), tbd_cfg, workers)
                         : run_suite(suite_sims, RunOptions::from_mode(mode), trained.params, cfg,
                                     workers, want_forecasts);
      const fs::path mode_dir = out / "tracks" / suite / mode;
      fs::create_directories(mode_dir);
      for (size_t i = 0; i < run.tracks.size(); ++i) {
        char scen[48];
        std::snprintf(scen, sizeof(scen), "scen%03zu.jsonl", i);
        write_file((mode_dir / scen).string(), tracks_to_string(run.tracks[i]));
        if (want_forecasts) {
          std::snprintf(scen, sizeof(scen), "scen%03zu.forecasts.jsonl", i);
          write_file((mode_dir / scen).string(), forecasts_to_string(run.forecasts[i]));
        }
      }
      auto rep = mot::metrics_report(make_pairs(suite_sims, run), 40, 2.0, workers);
      write_file((out / "reports" / (suite + "_" + mode + ".report.json")).string(),
                 mot::report_json(rep).dump(2) + "\n");
      mode_results[suite][mode] = summarize(rep);
      if (mode == "pftrack") pftrack_runs[suite] = std::move(run);
      if (mode == "velocity") velocity_runs[suite] = std::move(run);
    }
  }
  {
    nlohmann::ordered_json jm;
    for (const auto& [suite, modes] : mode_results) {
      nlohmann::ordered_json js;
      for (const auto& mode : kModes) js[mode] = summary_json(modes.at(mode));
      jm[suite] = js;
    }
    summary["modes"] = jm;
  }

  // 4. module ablation table on the crowded suite
  std::ostringstream ablation_csv;
  ablation_csv << "row,qr,tr,pred,ext,amota,amotp,ids,mota,recall,fp,fn\n";
  nlohmann::ordered_json jabl;
  for (const auto& row : kAblationRows) {
    auto run = run_suite(sims["crowded"], row.options, trained.params, cfg, workers, false);
    const fs::path dir = out / "tracks" / "crowded" / ("ablate-" + row.name);
    fs::create_directories(dir);
    for (size_t i = 0; i < run.tracks.size(); ++i) {
      char scen[48];
      std::snprintf(scen, sizeof(scen), "scen%03zu.jsonl", i);
      write_file((dir / scen).string(), tracks_to_string(run.tracks[i]));
    }
    auto rep = mot::metrics_report(make_pairs(sims["crowded"], run), 40, 2.0, workers);
    write_file((out / "reports" / ("crowded_ablate-" + row.name + ".report.json")).string(),
               mot::report_json(rep).dump(2) + "\n");
    auto s = summarize(rep);
    ablation_csv << row.name << "," << row.options.query_refinement << ","
                 << row.options.track_refinement << "," << row.options.learned_motion << ","
                 << row.options.extension << "," << io::fmt_double(s.amota) << ","
                 << io::fmt_double(s.amotp) << "," << s.ids << "," << io::fmt_double(s.mota) << ","
                 << io::fmt_double(s.recall) << "," << s.fp << "," << s.fn << "\n";
    jabl[row.name] = summary_json(s);
  }
  write_file((out / "ablation.csv").string(), ablation_csv.str());
  summary["ablation_crowded"] = jabl;

  // 5. extension-length sweep on the occlusion suite
  {
    std::ostringstream sweep_csv;
    sweep_csv << "tau_e,ids,amota,amotp\n";
    std::vector<double> xs;
    std::vector<double> ids_curve, amota_curve;
    nlohmann::ordered_json jsweep = nlohmann::ordered_json::array();
    for (int tau_e = 0; tau_e <= 6; ++tau_e) {
      TrackerConfig swept = cfg;
      swept.tau_e = tau_e;
      auto run = run_suite(sims["occlusion"], RunOptions::from_mode("pftrack"), trained.params,
                           swept, workers, false);
      auto rep = mot::metrics_report(make_pairs(sims["occlusion"], run), 40, 2.0, workers);
      auto s = summarize(rep);
      sweep_csv << tau_e << "," << s.ids << "," << io::fmt_double(s.amota) << ","
                << io::fmt_double(s.amotp) << "\n";
      xs.push_back(tau_e);
      ids_curve.push_back(double(s.ids));
      amota_curve.push_back(s.amota * 100.0);
      nlohmann::ordered_json row;
      row["tau_e"] = tau_e;
      row["ids"] = s.ids;
      row["amota"] = s.amota;
      jsweep.push_back(row);
    }
    write_file((out / "ext_sweep.csv").string(), sweep_csv.str());
    write_file((out / "ext_sweep.svg").string(),
               plot::line_chart_svg(xs, {ids_curve, amota_curve}, {"IDS", "AMOTA x100"},
                                    "extension length (frames)"));
    summary["ext_sweep"] = jsweep;
  }

  // 6. forecast quality on the turning suite: learned vs velocity vs
  //    constant-velocity extrapolation of emitted track positions
  {
    const auto& suite_sims = sims["turning"];
    const auto& learned = pftrack_runs["turning"];
    const auto& velo = velocity_runs["turning"];
    double acc[3][2] = {};
    long long cnt[3] = {};
    for (size_t i = 0; i < suite_sims.size(); ++i) {
      auto learned_s = to_samples(learned.forecasts[i], learned.tracks[i]);
      auto velo_s = to_samples(velo.forecasts[i], velo.tracks[i]);
      auto cv_s = cv_baseline_samples(learned.tracks[i], cfg.tau_f);
      const std::vector<std::vector<mot::ForecastSample>*> sets = {&learned_s, &velo_s, &cv_s};
      const std::vector<const std::vector<io::TrackRecord>*> preds = {
          &learned.tracks[i], &velo.tracks[i], &learned.tracks[i]};
      for (int k = 0; k < 3; ++k) {
        if (sets[k]->empty()) continue;
        auto r = mot::ade_fde(*sets[k], suite_sims[i].ground_truth, *preds[k], cfg.tau_f);
        acc[k][0] += r.ade * r.samples;
        acc[k][1] += r.fde * r.samples;
        cnt[k] += r.samples;
      }
    }
    nlohmann::ordered_json jf;
    const char* names[3] = {"learned", "velocity_mode", "cv_extrapolation"};
    for (int k = 0; k < 3; ++k) {
      nlohmann::ordered_json row;
      row["ade"] = cnt[k] ? acc[k][0] / cnt[k] : 0.0;
      row["fde"] = cnt[k] ? acc[k][1] / cnt[k] : 0.0;
      row["samples"] = cnt[k];
      jf[names[k]] = row;
    }
    summary["forecast_turning"] = jf;
  }

  // 7. BEV plots of the first scenario of each suite
  fs::create_directories(out / "plots");
  for (const auto& [suite, count] : suite_defs) {
    write_file((out / "plots" / (suite + "_scen000.svg")).string(),
               plot::bev_svg(sims[suite][0].ground_truth, pftrack_runs[suite].tracks[0]));
  }

  write_file((out / "summary.json").string(), summary.dump(2) + "\n");

  RunManifest manifest;
  manifest.command = "repro";
  manifest.args = raw_args;
  manifest.seed = seed;
  manifest.config_hash = hash_string(io::tracker_config_json(cfg).dump());
  manifest.outputs = {out_dir};
  manifest.wall_clock_s = clock.seconds();
  write_manifest((out / "manifest.json").string(), manifest);

  std::cout << "repro complete: " << out_dir << " (" << io::fmt_double(clock.seconds()) << " s)\n";
  return 0;
}

}  // namespace

// ---------------------------------------------------------------------------

int main(int argc, char** argv) {
  std::vector<std::string> raw_args(argv + 1, argv + argc);
  CLI::App app{"desk-scale multi-camera 3D multi-object tracking engine"};
  app.require_subcommand(1);

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "generate ground truth and detection logs");
  std::string scenario_file, suite_name = "occlusion", out_dir = "out";
  int count = 1;
  std::uint64_t seed = 0;
  auto* scen_opt = sim_cmd->add_option("--scenario", scenario_file, "scenario config json");
  sim_cmd->add_option("--suite", suite_name, "suite name: occlusion|turning|crowded|handoff");
  sim_cmd->add_option("--count", count, "scenarios in the suite");
  sim_cmd->add_option("--seed", seed, "random seed");
  sim_cmd->add_option("--out", out_dir, "output directory")->required();
  (void)scen_opt;

  // track
  auto* track_cmd = app.add_subcommand("track", "run a tracker over a detections log");
  std::string det_file, weights_file, config_file, mode = "pftrack", track_out, forecasts_out;
  TbdConfig tbd_cfg;
  track_cmd->add_option("--detections", det_file, "detections jsonl")->required();
  track_cmd->add_option("--weights", weights_file, "weights json");
  track_cmd->add_option("--config", config_file, "tracker config json");
  track_cmd->add_option("--mode", mode, "pftrack|pftrack-no-ext|velocity|tbd-hungarian|tbd-greedy");
  track_cmd->add_option("--out", track_out, "track log output")->required();
  track_cmd->add_option("--forecasts-out", forecasts_out, "forecast sidecar output");
  track_cmd->add_option("--score-thresh", tbd_cfg.score_thresh, "tbd: detection score threshold");
  track_cmd->add_option("--gate", tbd_cfg.gate, "tbd: association gate (m)");
  track_cmd->add_option("--max-age", tbd_cfg.max_age, "tbd: frames a track survives unmatched");
  track_cmd->add_option("--min-hits", tbd_cfg.min_hits, "tbd: hits before a track is reported");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "CLEAR/AMOTA evaluation of a track log");
  std::string gt_file, pred_file, report_file, forecasts_file;
  int horizon = 8, n_recall = 40;
  eval_cmd->add_option("--gt", gt_file, "ground-truth jsonl")->required();
  eval_cmd->add_option("--pred", pred_file, "predictions jsonl")->required();
  eval_cmd->add_option("--report", report_file, "metrics report output")->required();
  eval_cmd->add_option("--forecasts", forecasts_file, "forecast sidecar for ADE/FDE");
  eval_cmd->add_option("--horizon", horizon, "forecast horizon (frames)");
  eval_cmd->add_option("--n-recall", n_recall, "recall targets in the AMOTA sweep");

  // train
  auto* train_cmd = app.add_subcommand("train", "toy-train refinement and motion heads");
  std::vector<std::string> train_suites = {"occlusion", "crowded", "turning"};
  int train_count = 20;
  std::uint64_t train_seed = 0;
  std::string weights_out, curve_out;
  TrainSpec spec;
  train_cmd->add_option("--suite", train_suites, "suites to train on");
  train_cmd->add_option("--count", train_count, "scenarios per suite");
  train_cmd->add_option("--seed", train_seed, "random seed");
  train_cmd->add_option("--out", weights_out, "weights output")->required();
  train_cmd->add_option("--curve", curve_out, "loss curve csv output");
  train_cmd->add_option("--refine-steps", spec.refine_steps, "refinement training steps");
  train_cmd->add_option("--motion-steps", spec.motion_steps, "motion training steps");
  train_cmd->add_option("--refine-lr", spec.refine_lr, "refinement learning rate");
  train_cmd->add_option("--motion-lr", spec.motion_lr, "motion learning rate");

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "attention complexity comparison");
  std::vector<int> bench_n = {2, 4, 8, 16, 32, 64};
  std::vector<int> bench_tau = {2, 4, 8};
  int bench_d = 32;
  std::string bench_out;
  bench_cmd->add_option("--n", bench_n, "object counts");
  bench_cmd->add_option("--tau", bench_tau, "window lengths");
  bench_cmd->add_option("--d", bench_d, "feature dim");
  bench_cmd->add_option("--out", bench_out, "csv output (stdout if omitted)");

  // plot
  auto* plot_cmd = app.add_subcommand("plot", "BEV trajectory plot");
  std::string plot_gt, plot_pred, plot_out;
  plot_cmd->add_option("--gt", plot_gt, "ground-truth jsonl")->required();
  plot_cmd->add_option("--pred", plot_pred, "predictions jsonl")->required();
  plot_cmd->add_option("--out", plot_out, "svg output")->required();

  // repro
  auto* repro_cmd = app.add_subcommand("repro", "simulate + train + track + evaluate everything");
  std::uint64_t repro_seed = 17;
  std::string repro_out = "repro_out";
  int repro_scen = 50;
  TrainSpec repro_spec;
  repro_cmd->add_option("--seed", repro_seed, "random seed");
  repro_cmd->add_option("--out", repro_out, "output directory")->required();
  repro_cmd->add_option("--scenarios", repro_scen, "scenarios per suite");
  repro_cmd->add_option("--refine-steps", repro_spec.refine_steps, "refinement training steps");
  repro_cmd->add_option("--motion-steps", repro_spec.motion_steps, "motion training steps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (sim_cmd->parsed())
      return cmd_simulate(scenario_file, suite_name, count, seed, out_dir, raw_args);
    if (track_cmd->parsed())
      return cmd_track(det_file, weights_file, config_file, mode, track_out, forecasts_out,
                       tbd_cfg, raw_args);
    if (eval_cmd->parsed())
      return cmd_eval(gt_file, pred_file, report_file, forecasts_file, horizon, n_recall, raw_args);
    if (train_cmd->parsed())
      return cmd_train(train_suites, train_count, train_seed, weights_out, curve_out, spec, raw_args);
    if (bench_cmd->parsed()) return cmd_bench(bench_n, bench_tau, bench_d, bench_out);
    if (plot_cmd->parsed()) return cmd_plot(plot_gt, plot_pred, plot_out);
    if (repro_cmd->parsed()) return cmd_repro(repro_seed, repro_out, repro_scen, repro_spec, raw_args);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
