#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pftrack/io.hpp"
#include "pftrack/rng.hpp"
#include "pftrack/types.hpp"

namespace pftrack::sim {

using ordered_json = nlohmann::ordered_json;

enum class MotionModel { ConstantVelocity, ConstantTurnRate, Waypoint };

inline std::string to_string(MotionModel m) {
  switch (m) {
    case MotionModel::ConstantVelocity: return "constant-velocity";
    case MotionModel::ConstantTurnRate: return "constant-turn-rate";
    case MotionModel::Waypoint: return "waypoint";
  }
  return "?";
}

inline MotionModel motion_model_from_string(const std::string& s, const std::string& path) {
  if (s == "constant-velocity") return MotionModel::ConstantVelocity;
  if (s == "constant-turn-rate") return MotionModel::ConstantTurnRate;
  if (s == "waypoint") return MotionModel::Waypoint;
  throw std::invalid_argument(path + ": unknown motion model '" + s + "'");
}

struct AgentSpec {
  double x = 0.0, y = 0.0, z = 0.0, yaw = 0.0;
  MotionModel motion = MotionModel::ConstantVelocity;
  double speed = 1.0;
  double turn_rate = 0.0;  // rad/s, constant-turn-rate only
  double length = 4.5, width = 2.0, height = 1.6;
  int class_id = 0;
  std::uint64_t latent_seed = 0;
  std::vector<Vec2> waypoints;

  void validate(const std::string& path) const {
    if (!(speed >= 0.0)) throw std::invalid_argument(path + ".speed: must be >= 0");
    if (!(length > 0 && width > 0 && height > 0))
      throw std::invalid_argument(path + ".size: dimensions must be > 0");
    if (motion == MotionModel::Waypoint && waypoints.empty())
      throw std::invalid_argument(path + ".waypoints: required for waypoint motion");
    for (double v : {x, y, z, yaw, turn_rate})
      if (!std::isfinite(v)) throw std::invalid_argument(path + ": non-finite pose");
  }
};

struct OcclusionWindow {
  int agent = 0;
  int first_frame = 0;
  int last_frame = 0;
};

struct SensorSpec {
  double sigma_xy = 0.3;
  double sigma_z = 0.1;
  double sigma_v = 1.0;  // camera-grade velocity estimates are poor
  double score_mean = 0.75;
  double score_spread = 0.1;
  double dropout = 0.05;
  double fp_rate = 0.5;  // expected false positives per frame
  double sigma_f = 0.1;  // feature noise
  int feature_dim = 32;
  int camera_sectors = 6;
  std::vector<OcclusionWindow> occlusions;

  void validate(const std::string& path) const {
    for (auto [v, name] : {std::pair<double, const char*>{sigma_xy, ".sigma_xy"},
                           {sigma_z, ".sigma_z"},
                           {sigma_v, ".sigma_v"},
                           {sigma_f, ".sigma_f"},
                           {fp_rate, ".fp_rate"},
                           {score_spread, ".score_spread"}})
      if (!(v >= 0.0)) throw std::invalid_argument(path + name + ": must be >= 0");
    if (!(dropout >= 0.0 && dropout <= 1.0))
      throw std::invalid_argument(path + ".dropout: must be in [0,1]");
    if (feature_dim < 2) throw std::invalid_argument(path + ".feature_dim: must be >= 2");
    if (camera_sectors < 1) throw std::invalid_argument(path + ".camera_sectors: must be >= 1");
  }
};

struct ScenarioConfig {
  int frames = 40;
  double period_s = 0.5;
  std::vector<AgentSpec> agents;
  SensorSpec sensor;
  std::uint64_t seed = 0;

  void validate() const {
    if (frames < 1) throw std::invalid_argument("frames: must be >= 1");
    if (!(period_s > 0.0)) throw std::invalid_argument("period_s: must be > 0");
    for (size_t i = 0; i < agents.size(); ++i)
      agents[i].validate("agents[" + std::to_string(i) + "]");
    sensor.validate("sensor");
    for (size_t i = 0; i < sensor.occlusions.size(); ++i) {
      const auto& w = sensor.occlusions[i];
      const std::string p = "sensor.occlusions[" + std::to_string(i) + "]";
      if (w.agent < 0 || w.agent >= static_cast<int>(agents.size()))
        throw std::invalid_argument(p + ".agent: out of range");
      if (w.first_frame < 0 || w.last_frame < w.first_frame)
        throw std::invalid_argument(p + ": bad frame range");
    }
  }
};

// ---------------------------------------------------------------------------
// config JSON
// ---------------------------------------------------------------------------

inline ordered_json to_json(const ScenarioConfig& c) {
  ordered_json j;
  j["frames"] = c.frames;
  j["period_s"] = c.period_s;
  j["agents"] = ordered_json::array();
  for (const auto& a : c.agents) {
    ordered_json ja;
    ja["x"] = a.x;
    ja["y"] = a.y;
    ja["z"] = a.z;
    ja["yaw"] = a.yaw;
    ja["motion"] = to_string(a.motion);
    ja["speed"] = a.speed;
    ja["turn_rate"] = a.turn_rate;
    ja["l"] = a.length;
    ja["w"] = a.width;
    ja["h"] = a.height;
    ja["class"] = a.class_id;
    ja["latent_seed"] = a.latent_seed;
    if (!a.waypoints.empty()) {
      ordered_json wps = ordered_json::array();
      for (const auto& w : a.waypoints) wps.push_back({w.x, w.y});
      ja["waypoints"] = wps;
    }
    j["agents"].push_back(ja);
  }
  ordered_json js;
  js["sigma_xy"] = c.sensor.sigma_xy;
  js["sigma_z"] = c.sensor.sigma_z;
  js["sigma_v"] = c.sensor.sigma_v;
  js["score_mean"] = c.sensor.score_mean;
  js["score_spread"] = c.sensor.score_spread;
  js["dropout"] = c.sensor.dropout;
  js["fp_rate"] = c.sensor.fp_rate;
  js["sigma_f"] = c.sensor.sigma_f;
  js["feature_dim"] = c.sensor.feature_dim;
  js["camera_sectors"] = c.sensor.camera_sectors;
  js["occlusions"] = ordered_json::array();
  for (const auto& w : c.sensor.occlusions)
    js["occlusions"].push_back({{"agent", w.agent}, {"first", w.first_frame}, {"last", w.last_frame}});
  j["sensor"] = js;
  j["seed"] = c.seed;
  return j;
}

inline ScenarioConfig scenario_from_json(const ordered_json& j) {
  ScenarioConfig c;
  try {
    c.frames = j.at("frames").get<int>();
    c.period_s = j.at("period_s").get<double>();
    for (size_t i = 0; i < j.at("agents").size(); ++i) {
      const auto& ja = j.at("agents")[i];
      const std::string path = "agents[" + std::to_string(i) + "]";
      AgentSpec a;
      a.x = ja.at("x").get<double>();
      a.y = ja.at("y").get<double>();
      a.z = ja.value("z", 0.0);
      a.yaw = ja.at("yaw").get<double>();
      a.motion = motion_model_from_string(ja.at("motion").get<std::string>(), path + ".motion");
      a.speed = ja.at("speed").get<double>();
      a.turn_rate = ja.value("turn_rate", 0.0);
      a.length = ja.at("l").get<double>();
      a.width = ja.at("w").get<double>();
      a.height = ja.at("h").get<double>();
      a.class_id = ja.value("class", 0);
      a.latent_seed = ja.at("latent_seed").get<std::uint64_t>();
      if (ja.contains("waypoints"))
        for (const auto& w : ja.at("waypoints")) a.waypoints.push_back({w[0].get<double>(), w[1].get<double>()});
      c.agents.push_back(std::move(a));
    }
    const auto& js = j.at("sensor");
    c.sensor.sigma_xy = js.at("sigma_xy").get<double>();
    c.sensor.sigma_z = js.value("sigma_z", 0.1);
    c.sensor.sigma_v = js.value("sigma_v", 1.0);
    c.sensor.score_mean = js.at("score_mean").get<double>();
    c.sensor.score_spread = js.at("score_spread").get<double>();
    c.sensor.dropout = js.at("dropout").get<double>();
    c.sensor.fp_rate = js.at("fp_rate").get<double>();
    c.sensor.sigma_f = js.at("sigma_f").get<double>();
    c.sensor.feature_dim = js.at("feature_dim").get<int>();
    c.sensor.camera_sectors = js.value("camera_sectors", 6);
    if (js.contains("occlusions"))
      for (const auto& w : js.at("occlusions"))
        c.sensor.occlusions.push_back(
            {w.at("agent").get<int>(), w.at("first").get<int>(), w.at("last").get<int>()});
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const ordered_json::exception& e) {
    throw std::invalid_argument(std::string("scenario config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// simulation
// ---------------------------------------------------------------------------

struct AgentTrace {
  std::vector<Vec3> centers;
  std::vector<double> yaws;
  std::vector<Vec2> velocities;
};

inline AgentTrace roll_out(const AgentSpec& a, int frames, double dt) {
  AgentTrace tr;
  tr.centers.reserve(frames);
  double x = a.x, y = a.y, yaw = a.yaw;
  size_t wp = 0;
  for (int f = 0; f < frames; ++f) {
    if (a.motion == MotionModel::Waypoint) {
      while (wp < a.waypoints.size() && std::hypot(a.waypoints[wp].x - x, a.waypoints[wp].y - y) <
                                            a.speed * dt)
        ++wp;
      if (wp < a.waypoints.size())
        yaw = std::atan2(a.waypoints[wp].y - y, a.waypoints[wp].x - x);
    }
    const double vx = a.speed * std::cos(yaw);
    const double vy = a.speed * std::sin(yaw);
    tr.centers.push_back({x, y, a.height / 2.0});
    tr.yaws.push_back(normalize_yaw(yaw));
    tr.velocities.push_back({vx, vy});
    const bool last_wp_done = a.motion == MotionModel::Waypoint && wp >= a.waypoints.size();
    if (!last_wp_done) {
      x += vx * dt;
      y += vy * dt;
    }
    if (a.motion == MotionModel::ConstantTurnRate) yaw += a.turn_rate * dt;
  }
  return tr;
}

struct SimResult {
  std::vector<io::TrackRecord> ground_truth;      // id = agent index
  std::vector<io::DetectionRecord> detections;    // no identities
  int handoffs = 0;                                // camera-sector crossings
};

inline std::vector<double> agent_latent(std::uint64_t latent_seed, int dim) {
  SplitMix64 rng(latent_seed ^ 0xa5a5a5a5a5a5a5a5ULL);
  return rng.unit_vector(dim);
}

inline SimResult simulate(const ScenarioConfig& cfg) {
  cfg.validate();
  const int n = static_cast<int>(cfg.agents.size());
  std::vector<AgentTrace> traces;
  traces.reserve(n);
  for (const auto& a : cfg.agents) traces.push_back(roll_out(a, cfg.frames, cfg.period_s));

  std::vector<std::vector<char>> occluded(n, std::vector<char>(cfg.frames, 0));
  for (const auto& w : cfg.sensor.occlusions)
    for (int f = w.first_frame; f <= std::min(w.last_frame, cfg.frames - 1); ++f)
      occluded[w.agent][f] = 1;

  std::vector<std::vector<double>> latents;
  for (const auto& a : cfg.agents) latents.push_back(agent_latent(a.latent_seed, cfg.sensor.feature_dim));

  SplitMix64 rng(cfg.seed);
  SimResult out;
  const double sector_width = 2.0 * M_PI / cfg.sensor.camera_sectors;
  std::vector<int> last_sector(n, -1);

  for (int f = 0; f < cfg.frames; ++f) {
    for (int i = 0; i < n; ++i) {
      const auto& a = cfg.agents[i];
      const auto& tr = traces[i];
      Box3D gt;
      gt.center = tr.centers[f];
      gt.length = a.length;
      gt.width = a.width;
      gt.height = a.height;
      gt.yaw = tr.yaws[f];
      gt.vx = tr.velocities[f].x;
      gt.vy = tr.velocities[f].y;
      gt.score = 1.0;
      gt.class_id = a.class_id;
      out.ground_truth.push_back({f, i, gt});

      const int sector = static_cast<int>(
          std::floor((std::atan2(gt.center.y, gt.center.x) + M_PI) / sector_width));
      if (last_sector[i] >= 0 && sector != last_sector[i]) ++out.handoffs;
      last_sector[i] = sector;

      if (occluded[i][f]) continue;
      if (cfg.sensor.dropout > 0.0 && rng.uniform() < cfg.sensor.dropout) continue;

      io::DetectionRecord det;
      det.frame = f;
      det.box = gt;
      det.box.center.x += rng.gaussian(0.0, cfg.sensor.sigma_xy);
      det.box.center.y += rng.gaussian(0.0, cfg.sensor.sigma_xy);
      det.box.center.z += rng.gaussian(0.0, cfg.sensor.sigma_z);
      det.box.vx += rng.gaussian(0.0, cfg.sensor.sigma_v);
      det.box.vy += rng.gaussian(0.0, cfg.sensor.sigma_v);
      det.box.score = std::clamp(rng.gaussian(cfg.sensor.score_mean, cfg.sensor.score_spread), 0.0, 1.0);
      det.feature.resize(cfg.sensor.feature_dim);
      for (int c = 0; c < cfg.sensor.feature_dim; ++c)
        det.feature[c] = latents[i][c] + rng.gaussian(0.0, cfg.sensor.sigma_f);
      out.detections.push_back(std::move(det));
    }

    // clutter: random boxes with weak, unstable features
    const int fp_count = rng.poisson(cfg.sensor.fp_rate);
    for (int k = 0; k < fp_count; ++k) {
      io::DetectionRecord det;
      det.frame = f;
      det.box.center = {rng.uniform(-40.0, 40.0), rng.uniform(-40.0, 40.0), rng.uniform(0.2, 1.5)};
      det.box.length = rng.uniform(0.5, 5.0);
      det.box.width = rng.uniform(0.5, 2.5);
      det.box.height = rng.uniform(0.5, 2.0);
      det.box.yaw = normalize_yaw(rng.uniform(-M_PI, M_PI));
      det.box.vx = rng.gaussian(0.0, 1.0);
      det.box.vy = rng.gaussian(0.0, 1.0);
      det.box.score = rng.uniform(0.1, 0.9);
      det.box.class_id = rng.uniform() < 0.5 ? 0 : 1;
      const double norm = rng.uniform(0.2, 0.7);
      auto dir = rng.unit_vector(cfg.sensor.feature_dim);
      det.feature.resize(cfg.sensor.feature_dim);
      for (int c = 0; c < cfg.sensor.feature_dim; ++c) det.feature[c] = norm * dir[c];
      out.detections.push_back(std::move(det));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// scenario suites
// ---------------------------------------------------------------------------

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  SplitMix64 r(a ^ (b * 0x9e3779b97f4a7c15ULL));
  return r.next();
}

inline AgentSpec random_agent(SplitMix64& rng, std::uint64_t latent_seed, double max_speed,
                              bool pedestrian_allowed = true) {
  AgentSpec a;
  const bool ped = pedestrian_allowed && rng.uniform() < 0.3;
  a.class_id = ped ? 1 : 0;
  if (ped) {
    a.length = 0.8;
    a.width = 0.8;
    a.height = 1.8;
    a.speed = rng.uniform(0.6, 1.4);
  } else {
    a.length = rng.uniform(4.0, 5.0);
    a.width = rng.uniform(1.8, 2.2);
    a.height = rng.uniform(1.4, 1.8);
    a.speed = rng.uniform(1.0, max_speed);
  }
  a.x = rng.uniform(-18.0, 18.0);
  a.y = rng.uniform(-18.0, 18.0);
  a.z = a.height / 2.0;
  // head roughly toward the opposite side so paths stay in the region
  const double tx = rng.uniform(-12.0, 12.0), ty = rng.uniform(-12.0, 12.0);
  a.yaw = std::atan2(ty - a.y, tx - a.x);
  a.latent_seed = latent_seed;
  return a;
}

inline std::vector<ScenarioConfig> scenario_suite(const std::string& name, int count,
                                                  std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("scenario_suite: count must be >= 1");
  std::vector<ScenarioConfig> out;
  for (int s = 0; s < count; ++s) {
    SplitMix64 rng(mix_seed(seed, 1000 + s));
    ScenarioConfig c;
    c.frames = 40;
    c.period_s = 0.5;
    c.seed = mix_seed(seed, 5000 + s);
    auto latent = [&](int i) { return mix_seed(seed, (s + 1) * 131 + i); };

    if (name == "occlusion") {
      const int n = 5 + static_cast<int>(rng.uniform() * 3);  // 5..7
      for (int i = 0; i < n; ++i) {
        AgentSpec a = random_agent(rng, latent(i), 2.2);
        if (rng.uniform() < 0.3) {
          a.motion = MotionModel::ConstantTurnRate;
          a.turn_rate = rng.uniform(0.05, 0.15) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
        }
        c.agents.push_back(a);
      }
      const int windows = 1 + (rng.uniform() < 0.6 ? 1 : 0);
      for (int w = 0; w < windows; ++w) {
        OcclusionWindow ow;
        ow.agent = static_cast<int>(rng.uniform() * n);
        const int len = 3 + static_cast<int>(rng.uniform() * 4);  // 3..6
        ow.first_frame = 8 + static_cast<int>(rng.uniform() * 18);
        ow.last_frame = ow.first_frame + len - 1;
        c.sensor.occlusions.push_back(ow);
      }
    } else if (name == "turning") {
      const int n = 5 + static_cast<int>(rng.uniform() * 3);
      for (int i = 0; i < n; ++i) {
        AgentSpec a = random_agent(rng, latent(i), 3.5, /*pedestrian_allowed=*/false);
        a.x = rng.uniform(-14.0, 14.0);
        a.y = rng.uniform(-14.0, 14.0);
        a.motion = MotionModel::ConstantTurnRate;
        a.turn_rate = rng.uniform(0.2, 0.45) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
        a.speed = rng.uniform(2.0, 3.5);
        c.agents.push_back(a);
      }
      const int windows = 1 + (rng.uniform() < 0.5 ? 1 : 0);
      for (int w = 0; w < windows; ++w) {
        OcclusionWindow ow;
        ow.agent = static_cast<int>(rng.uniform() * n);
        const int len = 2 + static_cast<int>(rng.uniform() * 3);  // 2..4
        ow.first_frame = 8 + static_cast<int>(rng.uniform() * 18);
        ow.last_frame = ow.first_frame + len - 1;
        c.sensor.occlusions.push_back(ow);
      }
    } else if (name == "crowded") {
      const int n = 12 + static_cast<int>(rng.uniform() * 5);  // 12..16
      for (int i = 0; i < n; ++i) {
        AgentSpec a = random_agent(rng, latent(i), 2.0);
        a.x = rng.uniform(-15.0, 15.0);
        a.y = rng.uniform(-15.0, 15.0);
        if (rng.uniform() < 0.4) {
          a.motion = MotionModel::ConstantTurnRate;
          a.turn_rate = rng.uniform(0.05, 0.25) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
        }
        c.agents.push_back(a);
      }
    } else if (name == "handoff") {
      const int n = 4 + static_cast<int>(rng.uniform() * 3);
      for (int i = 0; i < n; ++i) {
        AgentSpec a = random_agent(rng, latent(i), 3.0, /*pedestrian_allowed=*/false);
        const double radius = rng.uniform(8.0, 15.0);
        const double phase = rng.uniform(0.0, 2.0 * M_PI);
        a.x = radius * std::cos(phase);
        a.y = radius * std::sin(phase);
        a.speed = rng.uniform(2.0, 3.0);
        a.motion = MotionModel::ConstantTurnRate;
        a.turn_rate = (a.speed / radius) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
        a.yaw = phase + (a.turn_rate > 0 ? M_PI / 2.0 : -M_PI / 2.0);
        c.agents.push_back(a);
      }
      OcclusionWindow ow;
      ow.agent = static_cast<int>(rng.uniform() * n);
      const int len = 2 + static_cast<int>(rng.uniform() * 2);
      ow.first_frame = 10 + static_cast<int>(rng.uniform() * 15);
      ow.last_frame = ow.first_frame + len - 1;
      c.sensor.occlusions.push_back(ow);
    } else {
      throw std::invalid_argument("scenario_suite: unknown suite '" + name + "'");
    }
    c.validate();
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace pftrack::sim
