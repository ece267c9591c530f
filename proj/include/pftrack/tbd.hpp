#pragma once

#include <map>
#include <string>
#include <vector>

#include "pftrack/hungarian.hpp"
#include "pftrack/io.hpp"
#include "pftrack/kalman.hpp"
#include "pftrack/tracker.hpp"

namespace pftrack {

// Classic detect-then-associate baseline: score filter, Kalman predict,
// center-distance association within a gate, birth/death counters.
struct TbdConfig {
  double score_thresh = 0.2;
  double gate = 2.0;
  int max_age = 3;
  int min_hits = 1;
  double period_s = 0.5;
  KalmanNoise noise;
};

enum class TbdAssoc { Hungarian, Greedy };

inline TbdAssoc tbd_assoc_from_string(const std::string& s) {
  if (s == "tbd-hungarian" || s == "hungarian") return TbdAssoc::Hungarian;
  if (s == "tbd-greedy" || s == "greedy") return TbdAssoc::Greedy;
  throw std::invalid_argument("unknown tbd association mode: " + s);
}

inline std::vector<io::TrackRecord> run_tbd(const std::vector<io::DetectionRecord>& dets,
                                            TbdAssoc assoc, const TbdConfig& cfg) {
  std::vector<io::TrackRecord> out;
  if (dets.empty()) return out;

  int lo = dets.front().frame, hi = dets.front().frame;
  for (const auto& d : dets) {
    lo = std::min(lo, d.frame);
    hi = std::max(hi, d.frame);
  }
  std::map<int, std::vector<const io::DetectionRecord*>> frames;
  for (int f = lo; f <= hi; ++f) frames[f];
  for (const auto& d : dets)
    if (d.box.score >= cfg.score_thresh) frames[d.frame].push_back(&d);

  std::vector<KalmanTrack> tracks;
  TrackId next_id = 1;

  for (auto& [frame, frame_dets] : frames) {
    for (auto& t : tracks) t = kalman_predict(t, cfg.period_s, cfg.noise);

    const int nt = static_cast<int>(tracks.size());
    const int nd = static_cast<int>(frame_dets.size());
    std::vector<int> det_for_track(nt, -1);
    std::vector<char> det_used(nd, 0);
    if (nt > 0 && nd > 0) {
      Tensor2D cost(nt, nd, kForbiddenCost);
      for (int i = 0; i < nt; ++i) {
        const Box3D tb = kalman_box(tracks[i]);
        for (int j = 0; j < nd; ++j) {
          if (frame_dets[j]->box.class_id != tracks[i].class_id) continue;
          const double d = center_distance_2d(tb, frame_dets[j]->box);
          if (d <= cfg.gate) cost.at(i, j) = d;
        }
      }
      const Assignment a = assoc == TbdAssoc::Hungarian ? hungarian(cost) : greedy_assign(cost);
      for (int i = 0; i < nt; ++i) {
        if (a.row_to_col[i] >= 0) {
          det_for_track[i] = a.row_to_col[i];
          det_used[a.row_to_col[i]] = 1;
        }
      }
    }

    std::vector<KalmanTrack> survivors;
    for (int i = 0; i < nt; ++i) {
      KalmanTrack& t = tracks[i];
      if (det_for_track[i] >= 0) {
        t = kalman_update(t, frame_dets[det_for_track[i]]->box, cfg.noise);
        if (t.hits >= cfg.min_hits) out.push_back({frame, t.id, kalman_box(t)});
      } else {
        t.misses += 1;
      }
      if (t.misses <= cfg.max_age) survivors.push_back(t);
    }
    for (int j = 0; j < nd; ++j) {
      if (det_used[j]) continue;
      KalmanTrack t = kalman_init(frame_dets[j]->box, next_id++, cfg.noise);
      if (t.hits >= cfg.min_hits) out.push_back({frame, t.id, kalman_box(t)});
      survivors.push_back(t);
    }
    tracks = std::move(survivors);
  }
  return out;
}

// Query pipeline with constant-velocity propagation instead of the learned
// forecast; everything else identical, so detection logs are shared.
inline std::vector<io::TrackRecord> run_velocity_variant(
    const std::vector<io::DetectionRecord>& dets, const ModelParams& params,
    const TrackerConfig& cfg, std::vector<ForecastRecord>* forecasts = nullptr) {
  RunOptions opt = RunOptions::from_mode("velocity");
  return run_sequence(dets, params, cfg, opt, forecasts);
}

}  // namespace pftrack
