#pragma once

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pftrack/model.hpp"
#include "pftrack/types.hpp"

namespace pftrack::io {

using ordered_json = nlohmann::ordered_json;

// %.17g round-trips doubles exactly.
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct DetectionRecord {
  int frame = 0;
  Box3D box;
  std::vector<double> feature;
};

struct TrackRecord {
  int frame = 0;
  TrackId id = 0;
  Box3D box;
};

inline ordered_json box_fields(const Box3D& b) {
  ordered_json j;
  j["x"] = b.center.x;
  j["y"] = b.center.y;
  j["z"] = b.center.z;
  j["l"] = b.length;
  j["w"] = b.width;
  j["h"] = b.height;
  j["yaw"] = b.yaw;
  j["vx"] = b.vx;
  j["vy"] = b.vy;
  j["score"] = b.score;
  j["class"] = b.class_id;
  return j;
}

inline Box3D box_from_json(const ordered_json& j) {
  Box3D b;
  b.center = {j.at("x").get<double>(), j.at("y").get<double>(), j.at("z").get<double>()};
  b.length = j.at("l").get<double>();
  b.width = j.at("w").get<double>();
  b.height = j.at("h").get<double>();
  b.yaw = j.at("yaw").get<double>();
  b.vx = j.at("vx").get<double>();
  b.vy = j.at("vy").get<double>();
  b.score = j.at("score").get<double>();
  b.class_id = j.at("class").get<int>();
  return b;
}

inline void write_detections(std::ostream& os, const std::vector<DetectionRecord>& dets) {
  for (const auto& d : dets) {
    ordered_json j;
    j["frame"] = d.frame;
    j.update(box_fields(d.box));
    j["feature"] = d.feature;
    os << j.dump() << "\n";
  }
}

inline void write_tracks(std::ostream& os, const std::vector<TrackRecord>& recs) {
  for (const auto& r : recs) {
    ordered_json j;
    j["frame"] = r.frame;
    j["id"] = r.id;
    j.update(box_fields(r.box));
    os << j.dump() << "\n";
  }
}

inline std::vector<DetectionRecord> read_detections(std::istream& is, const std::string& origin = "<stream>") {
  std::vector<DetectionRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = ordered_json::parse(line);
      DetectionRecord d;
      d.frame = j.at("frame").get<int>();
      d.box = box_from_json(j);
      if (j.contains("feature")) d.feature = j.at("feature").get<std::vector<double>>();
      out.push_back(std::move(d));
    } catch (const std::exception& e) {
      throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": bad detection record: " + e.what());
    }
  }
  return out;
}

inline std::vector<TrackRecord> read_tracks(std::istream& is, const std::string& origin = "<stream>") {
  std::vector<TrackRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = ordered_json::parse(line);
      TrackRecord r;
      r.frame = j.at("frame").get<int>();
      r.id = j.at("id").get<TrackId>();
      r.box = box_from_json(j);
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": bad track record: " + e.what());
    }
  }
  return out;
}

inline std::vector<DetectionRecord> load_detections(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open detections file: " + path);
  return read_detections(f, path);
}

inline std::vector<TrackRecord> load_tracks(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open track file: " + path);
  return read_tracks(f, path);
}

// ---------------------------------------------------------------------------
// weights file: {"d": int, "arrays": [{"name", "shape", "data"}, ...]}
// Floats are written with 17 significant digits so reload is bit-exact.
// ---------------------------------------------------------------------------

inline void save_weights(std::ostream& os, ModelParams& m) {
  auto refs = m.collect();
  os << "{\"d\": " << m.d << ", \"arrays\": [";
  for (size_t r = 0; r < refs.size(); ++r) {
    const auto& ref = refs[r];
    if (r) os << ",";
    os << "\n  {\"name\": \"" << ref.name << "\", \"shape\": [";
    for (size_t i = 0; i < ref.shape.size(); ++i) os << (i ? "," : "") << ref.shape[i];
    os << "], \"data\": [";
    for (size_t i = 0; i < ref.size; ++i) os << (i ? "," : "") << fmt_double(ref.data[i]);
    os << "]}";
  }
  os << "\n]}\n";
}

inline void save_weights_file(const std::string& path, ModelParams& m) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write weights file: " + path);
  save_weights(f, m);
}

// Loads into a model whose shapes were built from `cfg`; every named array in
// the file must match an existing parameter exactly.
inline ModelParams load_weights(std::istream& is, const TrackerConfig& cfg, const std::string& origin = "<weights>") {
  ordered_json j;
  try {
    j = ordered_json::parse(is);
  } catch (const std::exception& e) {
    throw std::runtime_error(origin + ": bad weights json: " + e.what());
  }
  const int d = j.at("d").get<int>();
  if (d != cfg.d)
    throw std::runtime_error(origin + ": weights have d=" + std::to_string(d) +
                             " but config expects d=" + std::to_string(cfg.d));
  ModelParams m = make_model(cfg);
  auto refs = m.collect();
  for (const auto& entry : j.at("arrays")) {
    const std::string name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<std::vector<int>>();
    const auto data = entry.at("data").get<std::vector<double>>();
    bool found = false;
    for (auto& ref : refs) {
      if (ref.name != name) continue;
      found = true;
      if (shape != ref.shape || data.size() != ref.size)
        throw std::runtime_error(origin + ": shape mismatch for array " + name);
      std::copy(data.begin(), data.end(), ref.data);
      break;
    }
    if (!found) throw std::runtime_error(origin + ": unknown array " + name);
  }
  return m;
}

inline ModelParams load_weights_file(const std::string& path, const TrackerConfig& cfg) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open weights file: " + path);
  return load_weights(f, cfg, path);
}

// ---------------------------------------------------------------------------
// tracker config JSON
// ---------------------------------------------------------------------------

inline ordered_json tracker_config_json(const TrackerConfig& c) {
  ordered_json j;
  j["d"] = c.d;
  j["tau_h"] = c.tau_h;
  j["tau_f"] = c.tau_f;
  j["tau_e"] = c.tau_e;
  j["theta_init"] = c.theta_init;
  j["theta_out"] = c.theta_out;
  j["theta_ext"] = c.theta_ext;
  j["max_output"] = c.max_output;
  j["region"] = {{"x", {c.bounds.x_min, c.bounds.x_max}},
                 {"y", {c.bounds.y_min, c.bounds.y_max}},
                 {"z", {c.bounds.z_min, c.bounds.z_max}}};
  j["period_s"] = c.period_s;
  j["gate_radius"] = c.gate_radius;
  j["feature_blend"] = c.feature_blend;
  j["coast_score_decay"] = c.coast_score_decay;
  j["attn_heads"] = c.attn_heads;
  j["attn_layers"] = c.attn_layers;
  j["ffn_mult"] = c.ffn_mult;
  j["head_hidden"] = c.head_hidden;
  j["detection_query_budget"] = 500;  // stub decoder does not enforce it
  return j;
}

inline TrackerConfig tracker_config_from_json(const ordered_json& j) {
  TrackerConfig c;
  c.d = j.value("d", c.d);
  c.tau_h = j.value("tau_h", c.tau_h);
  c.tau_f = j.value("tau_f", c.tau_f);
  c.tau_e = j.value("tau_e", c.tau_e);
  c.theta_init = j.value("theta_init", c.theta_init);
  c.theta_out = j.value("theta_out", c.theta_out);
  c.theta_ext = j.value("theta_ext", c.theta_ext);
  c.max_output = j.value("max_output", c.max_output);
  if (j.contains("region")) {
    const auto& r = j.at("region");
    c.bounds.x_min = r.at("x")[0].get<double>();
    c.bounds.x_max = r.at("x")[1].get<double>();
    c.bounds.y_min = r.at("y")[0].get<double>();
    c.bounds.y_max = r.at("y")[1].get<double>();
    c.bounds.z_min = r.at("z")[0].get<double>();
    c.bounds.z_max = r.at("z")[1].get<double>();
  }
  c.period_s = j.value("period_s", c.period_s);
  c.gate_radius = j.value("gate_radius", c.gate_radius);
  c.feature_blend = j.value("feature_blend", c.feature_blend);
  c.coast_score_decay = j.value("coast_score_decay", c.coast_score_decay);
  c.attn_heads = j.value("attn_heads", c.attn_heads);
  c.attn_layers = j.value("attn_layers", c.attn_layers);
  c.ffn_mult = j.value("ffn_mult", c.ffn_mult);
  c.head_hidden = j.value("head_hidden", c.head_hidden);
  c.validate();
  return c;
}

inline TrackerConfig load_tracker_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file: " + path);
  ordered_json j;
  try {
    j = ordered_json::parse(f);
  } catch (const std::exception& e) {
    throw std::invalid_argument(path + ": bad config json: " + e.what());
  }
  return tracker_config_from_json(j);
}

}  // namespace pftrack::io
