#pragma once

#include <chrono>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pftrack/rng.hpp"

namespace pftrack {

// Provenance sidecar written next to every command output. The manifest is
// the one artifact allowed to differ between reruns (it records wall-clock).
struct RunManifest {
  std::string command;
  std::vector<std::string> args;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string tool_version = "pftrack 1.0.0";
  double wall_clock_s = 0.0;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["args"] = args;
    j["seed"] = seed;
    j["config_hash"] = config_hash;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["tool_version"] = tool_version;
    j["wall_clock_s"] = wall_clock_s;
    return j;
  }
};

// write-to-temp + rename so readers never observe a partial manifest
inline void write_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + tmp);
    f << content;
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("cannot rename " + tmp + " to " + path);
}

inline void write_manifest(const std::string& path, const RunManifest& m) {
  write_atomic(path, m.to_json().dump(2) + "\n");
}

inline std::uint64_t hash_string(const std::string& s) { return fnv1a64(s.data(), s.size()); }

class WallClock {
 public:
  WallClock() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace pftrack
