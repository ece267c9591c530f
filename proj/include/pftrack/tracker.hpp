#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "pftrack/io.hpp"
#include "pftrack/model.hpp"
#include "pftrack/motion.hpp"
#include "pftrack/refine.hpp"
#include "pftrack/types.hpp"

namespace pftrack {

struct FrameDetections {
  int frame = 0;
  std::vector<io::DetectionRecord> items;
};

// Which stages of the pipeline run. The tracking-by-detection baselines live
// in tbd.hpp; these switches cover the query-based modes and ablations.
struct RunOptions {
  bool query_refinement = true;   // cross-frame + cross-object attention
  bool track_refinement = true;   // box refinement head
  bool learned_motion = true;     // false: constant-velocity propagation
  bool extension = true;          // false: terminate on first low-confidence frame

  static RunOptions from_mode(const std::string& mode) {
    RunOptions o;
    if (mode == "pftrack") return o;
    if (mode == "pftrack-no-ext") {
      o.extension = false;
      return o;
    }
    if (mode == "velocity") {
      o.learned_motion = false;
      return o;
    }
    throw std::invalid_argument("unknown tracker mode: " + mode);
  }
};

struct TrackerState {
  std::vector<TrackState> tracks;  // kept sorted by id
  std::map<TrackId, QueryQueue> queues;
  TrackId next_id = 1;
  int frame_index = -1;
  std::uint64_t pe_clamp_count = 0;
};

struct DecodeResult {
  struct PerTrack {
    Query query;
    Box3D box;
    bool matched = false;
  };
  std::vector<PerTrack> per_track;  // aligned with state.tracks
  std::vector<std::pair<Query, Box3D>> births;
};

// Geometric stand-in for a learned decoder: detections claim their nearest
// unclaimed track (highest score first) within the gate. Matched tracks blend
// the observed feature into the propagated one; unmatched tracks keep a
// zero-evidence blend and a score-0 box, which is what later drives coasting.
// Leftover detections above theta_init become track births.
inline DecodeResult decode_stub(const TrackerState& state, const FrameDetections& dets,
                                const TrackerConfig& cfg) {
  DecodeResult res;
  const double beta = cfg.feature_blend;
  const int nt = static_cast<int>(state.tracks.size());
  const int nd = static_cast<int>(dets.items.size());

  std::vector<int> order(nd);
  for (int i = 0; i < nd; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const auto& da = dets.items[a].box;
    const auto& db = dets.items[b].box;
    if (da.score != db.score) return da.score > db.score;
    if (da.center.x != db.center.x) return da.center.x < db.center.x;
    return da.center.y < db.center.y;
  });

  std::vector<int> track_for_det(nd, -1);
  std::vector<int> det_for_track(nt, -1);
  for (int oi : order) {
    const auto& det = dets.items[oi];
    int best = -1;
    double best_dist = cfg.gate_radius;
    for (int ti = 0; ti < nt; ++ti) {
      if (det_for_track[ti] >= 0) continue;
      Box3D probe;
      probe.center = state.tracks[ti].query.center;
      const double dist = center_distance_2d(probe, det.box);
      if (dist <= best_dist) {
        best_dist = dist;
        best = ti;
      }
    }
    if (best >= 0) {
      det_for_track[best] = oi;
      track_for_det[oi] = best;
    }
  }

  res.per_track.resize(nt);
  for (int ti = 0; ti < nt; ++ti) {
    const auto& track = state.tracks[ti];
    auto& out = res.per_track[ti];
    out.query.track_ref = track.id;
    out.query.timestamp = dets.frame;
    out.query.feature.resize(cfg.d);
    if (det_for_track[ti] >= 0) {
      const auto& det = dets.items[det_for_track[ti]];
      if (static_cast<int>(det.feature.size()) != cfg.d)
        throw std::runtime_error("decode_stub: detection feature dim != d");
      for (int c = 0; c < cfg.d; ++c)
        out.query.feature[c] = (1.0 - beta) * track.query.feature[c] + beta * det.feature[c];
      out.query.center = det.box.center;
      out.box = det.box;
      out.matched = true;
    } else {
      for (int c = 0; c < cfg.d; ++c) out.query.feature[c] = (1.0 - beta) * track.query.feature[c];
      out.query.center = track.query.center;
      out.box = track.shape;
      out.box.center = track.query.center;
      out.box.score = 0.0;
      out.matched = false;
    }
  }

  // births: unclaimed, confident, and outside every track's gate (a second
  // detection inside a gate would otherwise spawn a duplicate track on the
  // same object)
  std::vector<int> birth_idx;
  for (int i = 0; i < nd; ++i) {
    if (track_for_det[i] >= 0 || dets.items[i].box.score <= cfg.theta_init) continue;
    bool inside_gate = false;
    for (int ti = 0; ti < nt && !inside_gate; ++ti) {
      Box3D probe;
      probe.center = state.tracks[ti].query.center;
      inside_gate = center_distance_2d(probe, dets.items[i].box) <= cfg.gate_radius;
    }
    if (!inside_gate) birth_idx.push_back(i);
  }
  std::sort(birth_idx.begin(), birth_idx.end(), [&](int a, int b) {
    const auto& da = dets.items[a].box;
    const auto& db = dets.items[b].box;
    if (da.score != db.score) return da.score > db.score;
    if (da.center.x != db.center.x) return da.center.x < db.center.x;
    return da.center.y < db.center.y;
  });
  for (int i : birth_idx) {
    const auto& det = dets.items[i];
    if (static_cast<int>(det.feature.size()) != cfg.d)
      throw std::runtime_error("decode_stub: detection feature dim != d");
    Query q;
    q.feature = det.feature;
    q.center = det.box.center;
    q.timestamp = dets.frame;
    res.births.emplace_back(std::move(q), det.box);
  }
  return res;
}

struct TrackOutput {
  TrackId id = 0;
  Box3D box;
};

struct ForecastRecord {
  int frame = 0;
  TrackId id = 0;
  std::vector<Vec2> steps;
};

// Snapshot of one track's pass through a frame, for dataset building.
struct TrackStepView {
  int frame = 0;
  TrackId id = 0;
  QueryQueue queue;  // state before this frame's push
  Query decoded;     // stub query
  Box3D stub_box;
  Query refined;     // post-refinement query (center = refined box center)
  Box3D refined_box;
  bool matched = false;
  bool confident = false;
};

using StepObserver = std::function<void(const TrackStepView&)>;

// One frame of the pipeline: decode stub, query refinement, track
// refinement, motion prediction, extension / life cycle, output emission.
inline std::vector<TrackOutput> tracker_step(TrackerState& state, const FrameDetections& dets,
                                             const ModelParams& params, const TrackerConfig& cfg,
                                             const RunOptions& opt,
                                             std::vector<ForecastRecord>* forecasts = nullptr,
                                             const StepObserver* observer = nullptr) {
  if (state.frame_index >= 0 && dets.frame != state.frame_index + 1)
    throw std::invalid_argument("tracker_step: frames must advance by one (got " +
                                std::to_string(dets.frame) + " after " +
                                std::to_string(state.frame_index) + ")");
  const int t = dets.frame;

  auto decoded = decode_stub(state, dets, cfg);

  const int nt = static_cast<int>(state.tracks.size());
  std::vector<Query> refined(nt);
  if (opt.query_refinement && nt > 0) {
    std::vector<Query> after_cf(nt);
    for (int i = 0; i < nt; ++i)
      after_cf[i] = cross_frame_refine(state.queues.at(state.tracks[i].id),
                                       decoded.per_track[i].query, params.cross_frame, cfg.d);
    refined = cross_object_refine(after_cf, params.cross_object, cfg.d, cfg.bounds, nullptr,
                                  &state.pe_clamp_count);
  } else {
    for (int i = 0; i < nt; ++i) refined[i] = decoded.per_track[i].query;
  }

  std::vector<TrackOutput> outputs;
  std::vector<TrackState> next_tracks;
  std::map<TrackId, QueryQueue> next_queues;

  for (int i = 0; i < nt; ++i) {
    auto& track = state.tracks[i];
    Box3D box_r;
    if (opt.track_refinement) {
      box_r = refine_track(refined[i], decoded.per_track[i].box, params.refine_head).first;
    } else {
      box_r = decoded.per_track[i].box;
    }
    Query q_r = refined[i];
    q_r.center = box_r.center;

    TrajectoryForecast forecast =
        opt.learned_motion
            ? predict_motion(state.queues.at(track.id), q_r, params.motion_attn,
                             params.decode_head, cfg.tau_f, cfg.d)
            : velocity_forecast(box_r, t, cfg.tau_f, cfg.period_s);

    auto res = extension_step(track, {q_r, box_r, forecast}, cfg, opt.extension);

    if (observer) {
      TrackStepView view;
      view.frame = t;
      view.id = track.id;
      view.queue = state.queues.at(track.id);
      view.decoded = decoded.per_track[i].query;
      view.stub_box = decoded.per_track[i].box;
      view.refined = q_r;
      view.refined_box = box_r;
      view.matched = decoded.per_track[i].matched;
      view.confident = res.confident;
      (*observer)(view);
    }
    if (res.terminated) continue;

    QueryQueue queue = state.queues.at(track.id);
    if (res.confident) {
      queue.push(res.queue_entry);
      if (forecasts) forecasts->push_back({t, track.id, forecast.steps});
    }
    outputs.push_back({track.id, res.output});
    next_queues.emplace(track.id, std::move(queue));
    next_tracks.push_back(res.next);
  }

  for (auto& [q, box] : decoded.births) {
    TrackState tr;
    tr.id = state.next_id++;
    tr.query = q;
    tr.query.track_ref = tr.id;
    tr.shape = box;
    tr.confident_score = box.score;
    tr.last_confident_frame = t;
    QueryQueue queue(cfg.tau_h);
    TrajectoryForecast forecast =
        opt.learned_motion ? predict_motion(queue, tr.query, params.motion_attn,
                                            params.decode_head, cfg.tau_f, cfg.d)
                           : velocity_forecast(box, t, cfg.tau_f, cfg.period_s);
    tr.forecast = forecast;
    if (forecasts) forecasts->push_back({t, tr.id, forecast.steps});
    queue.push(tr.query);
    outputs.push_back({tr.id, box});
    TrackState propagated = propagate(tr);
    next_queues.emplace(tr.id, std::move(queue));
    next_tracks.push_back(propagated);
  }

  state.tracks = std::move(next_tracks);
  state.queues = std::move(next_queues);
  state.frame_index = t;

  // emit: score floor, then keep the top max_output by score
  std::vector<TrackOutput> emitted;
  for (auto& o : outputs)
    if (o.box.score >= cfg.theta_out) emitted.push_back(o);
  std::sort(emitted.begin(), emitted.end(), [](const TrackOutput& a, const TrackOutput& b) {
    if (a.box.score != b.box.score) return a.box.score > b.box.score;
    return a.id < b.id;
  });
  if (static_cast<int>(emitted.size()) > cfg.max_output) emitted.resize(cfg.max_output);
  std::sort(emitted.begin(), emitted.end(),
            [](const TrackOutput& a, const TrackOutput& b) { return a.id < b.id; });
  return emitted;
}

// Replays a detection log. Missing frame indices inside the span are treated
// as frames with no detections so track life cycles stay well-defined.
inline std::vector<io::TrackRecord> run_sequence(const std::vector<io::DetectionRecord>& dets,
                                                 const ModelParams& params, const TrackerConfig& cfg,
                                                 const RunOptions& opt,
                                                 std::vector<ForecastRecord>* forecasts = nullptr,
                                                 TrackerState* final_state = nullptr,
                                                 const StepObserver* observer = nullptr) {
  cfg.validate();
  std::vector<io::TrackRecord> out;
  if (dets.empty()) return out;

  int lo = dets.front().frame, hi = dets.front().frame;
  for (const auto& d : dets) {
    lo = std::min(lo, d.frame);
    hi = std::max(hi, d.frame);
  }
  std::map<int, FrameDetections> frames;
  for (int f = lo; f <= hi; ++f) frames[f].frame = f;
  for (const auto& d : dets) frames[d.frame].items.push_back(d);

  TrackerState state;
  for (auto& [f, fd] : frames) {
    auto outputs = tracker_step(state, fd, params, cfg, opt, forecasts, observer);
    for (const auto& o : outputs) out.push_back({f, o.id, o.box});
  }
  if (final_state) *final_state = state;
  return out;
}

}  // namespace pftrack
