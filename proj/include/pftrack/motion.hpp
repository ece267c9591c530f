#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "pftrack/model.hpp"
#include "pftrack/nn.hpp"
#include "pftrack/refine.hpp"
#include "pftrack/types.hpp"

namespace pftrack {

// tau_f x d embedding rows, one per future step.
struct MotionEmbedding {
  int origin_frame = 0;
  Tensor2D rows;
};

// Decodes tau_f per-step XY movements for one track. Motion embeddings start
// as zeros carrying only their step offset encoding; the history window
// (queue entries plus the refined current query) is the information source.
inline TrajectoryForecast predict_motion(const QueryQueue& queue, const Query& current,
                                         const nn::AttentionStackParams& attn,
                                         const nn::MlpParams& decode_head, int tau_f, int d,
                                         FlopCounter* counter = nullptr,
                                         nn::StackCache* attn_cache = nullptr,
                                         std::vector<nn::MlpCache>* decode_caches = nullptr) {
  if (tau_f < 1) throw std::invalid_argument("predict_motion: tau_f must be >= 1");
  auto window = build_cross_frame_window(queue, current, d);

  Tensor2D q_feats(tau_f, d);  // zeros
  Tensor2D q_pe(tau_f, time_pe_dim(d));
  for (int j = 0; j < tau_f; ++j) {
    auto pe = nn::sinusoidal_pe(static_cast<double>(j + 1), time_pe_dim(d));
    for (int c = 0; c < q_pe.cols; ++c) q_pe.at(j, c) = pe[c];
  }

  Tensor2D emb = nn::stack_forward(attn, q_feats, q_pe, window.feats, window.pe_raw, window.mask,
                                   /*self_attention=*/false, counter, attn_cache);

  TrajectoryForecast out;
  out.origin_frame = current.timestamp;
  out.steps.resize(tau_f);
  if (decode_caches) decode_caches->resize(tau_f);
  for (int j = 0; j < tau_f; ++j) {
    std::vector<double> row(emb.row(j), emb.row(j) + d);
    auto step = nn::mlp_forward(row, decode_head, decode_caches ? &(*decode_caches)[j] : nullptr);
    out.steps[j] = {step[0], step[1]};
  }
  return out;
}

// Constant-velocity forecast, used when learned motion is disabled.
inline TrajectoryForecast velocity_forecast(const Box3D& box, int origin_frame, int tau_f,
                                            double period_s) {
  TrajectoryForecast f;
  f.origin_frame = origin_frame;
  f.steps.assign(tau_f, Vec2{box.vx * period_s, box.vy * period_s});
  return f;
}

// Advances a track by one frame along its stored forecast: center moves by
// the first step, the feature is carried, the forecast shifts left with a
// duplicated tail.
inline TrackState propagate(const TrackState& track) {
  TrackState out = track;
  if (!track.forecast.steps.empty()) {
    out.query.center.x += track.forecast.steps.front().x;
    out.query.center.y += track.forecast.steps.front().y;
  }
  out.query.timestamp = track.query.timestamp + 1;
  out.forecast = track.forecast.shifted();
  return out;
}

inline std::vector<TrackState> propagate(const std::vector<TrackState>& tracks) {
  std::vector<TrackState> out;
  out.reserve(tracks.size());
  for (const auto& t : tracks) out.push_back(propagate(t));
  return out;
}

// Refined per-frame outputs for one track, fed into the extension step.
struct RefinedFrame {
  Query query;              // refined feature, center colocated with box
  Box3D box;                // refined box (the frame's output candidate)
  TrajectoryForecast forecast;
};

struct ExtensionResult {
  bool terminated = false;
  bool confident = false;
  TrackState next;    // propagated into the following frame
  Box3D output;       // box reported for the current frame
  Query queue_entry;  // valid only when confident
};

// One track-extension transition. Confident frames adopt the refined outputs
// and reset L. Low-confidence frames coast along the forecast frozen at the
// last confident frame (consuming one step per frame) until L reaches tau_e,
// then the track terminates. Coasted frames are still reported, with the
// last confident score decayed but kept at or above theta_out.
inline ExtensionResult extension_step(const TrackState& track, const RefinedFrame& refined,
                                      const TrackerConfig& cfg, bool extension_enabled = true) {
  ExtensionResult res;
  if (refined.box.score >= cfg.theta_ext) {
    res.confident = true;
    TrackState next = track;
    next.query = refined.query;
    next.query.center = refined.box.center;
    next.forecast = refined.forecast;
    next.shape = refined.box;
    next.confident_score = refined.box.score;
    next.last_confident_frame = refined.query.timestamp;
    next.extension_count = 0;
    res.next = propagate(next);
    res.output = refined.box;
    res.queue_entry = next.query;
    return res;
  }
  const int max_ext = extension_enabled ? cfg.tau_e : 0;
  if (track.extension_count >= max_ext) {
    res.terminated = true;
    return res;
  }
  // coast: keep the propagated query, consume the next frozen-forecast step
  TrackState next = track;
  next.extension_count = track.extension_count + 1;
  Box3D coasted = track.shape;
  coasted.center = track.query.center;  // predicted position for this frame
  double decayed = track.confident_score;
  for (int i = 0; i < next.extension_count; ++i) decayed *= cfg.coast_score_decay;
  coasted.score = std::max(cfg.theta_out, decayed);
  res.output = coasted;
  res.next = propagate(next);
  return res;
}

}  // namespace pftrack
