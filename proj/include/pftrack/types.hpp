#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pftrack/geometry.hpp"

namespace pftrack {

using TrackId = std::int64_t;

// 3D bounding box in the global frame. Yaw is kept in (-pi, pi].
struct Box3D {
  Vec3 center;
  double length = 1.0;
  double width = 1.0;
  double height = 1.0;
  double yaw = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  double score = 0.0;
  int class_id = 0;

  bool valid() const {
    return length > 0 && width > 0 && height > 0 && score >= 0.0 && score <= 1.0 &&
           std::isfinite(center.x) && std::isfinite(center.y) && std::isfinite(center.z);
  }
};

// Ground-plane center distance; z is ignored on purpose (matching and
// evaluation both operate in BEV).
inline double center_distance_2d(const Box3D& a, const Box3D& b) {
  return std::hypot(a.center.x - b.center.x, a.center.y - b.center.y);
}

// One object at one frame: latent feature + 3D center. The feature carries
// identity and appearance, the center anchors all geometry.
struct Query {
  std::optional<TrackId> track_ref;
  std::vector<double> feature;
  Vec3 center;
  int timestamp = 0;
};

// Ring buffer of a track's last tau_h queries. Entries are stored densely;
// frames with no entry (e.g. coasted frames) simply leave a gap in the
// timestamps, which shows up as a hole in the attention window offsets.
class QueryQueue {
 public:
  explicit QueryQueue(int capacity = 3) : capacity_(capacity) {
    if (capacity < 1) throw std::invalid_argument("QueryQueue: capacity must be >= 1");
  }

  void push(const Query& q) {
    if (!entries_.empty() && q.timestamp <= entries_.back().timestamp)
      throw std::invalid_argument("QueryQueue: timestamps must be strictly increasing");
    entries_.push_back(q);
    while (static_cast<int>(entries_.size()) > capacity_) entries_.pop_front();
  }

  int size() const { return static_cast<int>(entries_.size()); }
  bool empty() const { return entries_.empty(); }
  int capacity() const { return capacity_; }
  const std::deque<Query>& entries() const { return entries_; }

 private:
  int capacity_;
  std::deque<Query> entries_;
};

// Per-frame XY movements predicted for the next tau_f frames.
// steps[0] moves the object from its origin frame to origin+1.
struct TrajectoryForecast {
  int origin_frame = 0;
  std::vector<Vec2> steps;

  // Drops the consumed first step and repeats the tail (constant-velocity
  // padding), keeping the horizon length fixed.
  TrajectoryForecast shifted() const {
    TrajectoryForecast out;
    out.origin_frame = origin_frame + 1;
    if (steps.empty()) return out;
    out.steps.assign(steps.begin() + 1, steps.end());
    out.steps.push_back(steps.back());
    return out;
  }
};

// Life-cycle state of one track. `query` holds the propagated query for the
// upcoming frame (its center is the predicted position), `forecast` the
// remaining predicted movements from that frame on. `shape` remembers the
// last confident box so coasted frames can be reported with a real extent.
struct TrackState {
  TrackId id = 0;
  bool active = true;
  int extension_count = 0;  // L in the extension algorithm
  int last_confident_frame = -1;
  Query query;
  TrajectoryForecast forecast;
  Box3D shape;
  double confident_score = 0.0;
};

struct RegionBounds {
  double x_min = -51.2, x_max = 51.2;
  double y_min = -51.2, y_max = 51.2;
  double z_min = -5.0, z_max = 3.0;
};

struct TrackerConfig {
  int d = 32;             // feature dimension
  int tau_h = 3;          // history frames kept in the query queue
  int tau_f = 8;          // forecast horizon in frames
  int tau_e = 4;          // max consecutive extension frames
  double theta_init = 0.4;  // min detection score to start a track
  double theta_out = 0.2;   // min score for output boxes
  double theta_ext = 0.4;   // refined-score threshold that triggers coasting
  int max_output = 300;
  RegionBounds bounds;
  double period_s = 0.5;
  double gate_radius = 2.0;    // detection-to-track association gate
  double feature_blend = 0.5;  // observation weight when updating query features
  double coast_score_decay = 0.9;
  int attn_heads = 4;
  int attn_layers = 2;
  int ffn_mult = 4;
  int head_hidden = 64;    // hidden width of the refinement head
  int decode_hidden = 192;  // hidden width of the movement decoder

  void validate() const {
    if (d < 2 || d % 2 != 0) throw std::invalid_argument("config: d must be even and >= 2");
    if (tau_h < 1) throw std::invalid_argument("config: tau_h must be >= 1");
    if (tau_f < 1) throw std::invalid_argument("config: tau_f must be >= 1");
    if (tau_e >= tau_f)
      throw std::invalid_argument("config: tau_e must be < tau_f (forecast padding would run out)");
    if (tau_e < 0) throw std::invalid_argument("config: tau_e must be >= 0");
    if (!(theta_out > 0.0 && theta_out <= theta_init && theta_init <= 1.0))
      throw std::invalid_argument("config: need 0 < theta_out <= theta_init <= 1");
    if (max_output < 1) throw std::invalid_argument("config: max_output must be >= 1");
    if (period_s <= 0.0) throw std::invalid_argument("config: period_s must be > 0");
    if (d % attn_heads != 0) throw std::invalid_argument("config: attn_heads must divide d");
  }
};

struct LossConfig {
  double lambda_box_d = 0.25;
  double lambda_cls_d = 2.0;
  double lambda_box_r = 0.25;
  double lambda_cls_r = 2.0;
  double lambda_f = 0.5;

  void validate() const {
    for (double v : {lambda_box_d, lambda_cls_d, lambda_box_r, lambda_cls_r, lambda_f})
      if (!(std::isfinite(v) && v >= 0.0))
        throw std::invalid_argument("loss config: weights must be finite and >= 0");
  }
};

}  // namespace pftrack
