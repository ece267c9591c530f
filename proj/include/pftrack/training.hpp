#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "pftrack/hungarian.hpp"
#include "pftrack/metrics.hpp"
#include "pftrack/model.hpp"
#include "pftrack/motion.hpp"
#include "pftrack/refine.hpp"
#include "pftrack/tracker.hpp"

namespace pftrack::train {

// One motion-prediction sample: the track's attention window at a confident
// frame (oldest..current, offsets <= 0) plus the gt per-frame movements.
struct TrainSample {
  int origin_frame = 0;
  std::vector<std::vector<double>> history_feats;
  std::vector<Vec3> history_centers;
  std::vector<int> history_offsets;
  std::vector<Vec2> movements;  // tau_f steps
};

// One track's inputs to the refinement pass plus its labels, captured at a
// single frame. Whole frames are the training unit because cross-object
// attention couples every track in the frame. The score target is
// `positive()`: the track must have real evidence this frame (a matched
// detection) that lies near a gt object. Gt proximity alone is not enough --
// a coasted track sitting on an occluded object carries no evidence, and its
// score must fall so the extension logic can take over.
struct RefineTrackSample {
  QueryQueue queue{3};
  Query decoded;
  Box3D stub_box;
  bool matched = false;  // stub found a detection this frame
  bool has_gt = false;   // refined box within the match gate of a gt box
  Box3D gt_box;

  bool positive() const { return matched && has_gt; }
};

struct RefineFrameSample {
  std::vector<RefineTrackSample> tracks;
};

struct Dataset {
  std::vector<TrainSample> motion;
  std::vector<RefineFrameSample> refine;
};

// Replays the tracker over a simulated sequence and collects samples from
// true-positive tracks (gate-matched to gt). Motion samples additionally
// need a filled history window and the full gt future.
inline Dataset build_dataset(const std::vector<io::TrackRecord>& gt,
                             const std::vector<io::DetectionRecord>& dets,
                             const ModelParams& params, const TrackerConfig& cfg,
                             const RunOptions& opt = {}) {
  std::map<int, std::vector<const io::TrackRecord*>> gt_frames;
  std::map<std::pair<int, TrackId>, Vec2> gt_pos;
  int max_frame = -1;
  for (const auto& r : gt) {
    gt_frames[r.frame].push_back(&r);
    gt_pos[{r.frame, r.id}] = {r.box.center.x, r.box.center.y};
    max_frame = std::max(max_frame, r.frame);
  }

  std::map<int, std::vector<TrackStepView>> views;
  StepObserver obs = [&](const TrackStepView& v) { views[v.frame].push_back(v); };
  run_sequence(dets, params, cfg, opt, nullptr, nullptr, &obs);

  Dataset ds;
  for (auto& [frame, frame_views] : views) {
    // gate-match refined boxes to gt for labels
    const auto git = gt_frames.find(frame);
    const int ng = git == gt_frames.end() ? 0 : static_cast<int>(git->second.size());
    const int nt = static_cast<int>(frame_views.size());
    std::vector<int> gt_of(nt, -1);
    if (ng > 0 && nt > 0) {
      Tensor2D cost(nt, ng, kForbiddenCost);
      for (int i = 0; i < nt; ++i)
        for (int j = 0; j < ng; ++j) {
          const double d = center_distance_2d(frame_views[i].refined_box, git->second[j]->box);
          if (d < 2.0) cost.at(i, j) = d;
        }
      auto a = hungarian(cost);
      for (int i = 0; i < nt; ++i) gt_of[i] = a.row_to_col[i];
    }

    RefineFrameSample frame_sample;
    for (int i = 0; i < nt; ++i) {
      const auto& v = frame_views[i];
      RefineTrackSample ts;
      ts.queue = v.queue;
      ts.decoded = v.decoded;
      ts.stub_box = v.stub_box;
      ts.matched = v.matched;
      if (gt_of[i] >= 0) {
        ts.has_gt = true;
        ts.gt_box = git->second[gt_of[i]]->box;
      }
      frame_sample.tracks.push_back(std::move(ts));

      // motion sample: confident, labeled, window filled, future covered
      if (!v.confident || gt_of[i] < 0) continue;
      if (v.queue.size() + 1 < cfg.tau_h) continue;
      if (frame + cfg.tau_f > max_frame) continue;
      const TrackId gt_id = git->second[gt_of[i]]->id;
      bool complete = true;
      for (int j = 0; j <= cfg.tau_f; ++j)
        if (!gt_pos.count({frame + j, gt_id})) {
          complete = false;
          break;
        }
      if (!complete) continue;
      TrainSample s;
      s.origin_frame = frame;
      for (const auto& q : v.queue.entries()) {
        s.history_feats.push_back(q.feature);
        s.history_centers.push_back(q.center);
        s.history_offsets.push_back(q.timestamp - frame);
      }
      s.history_feats.push_back(v.refined.feature);
      s.history_centers.push_back(v.refined.center);
      s.history_offsets.push_back(0);
      for (int j = 1; j <= cfg.tau_f; ++j) {
        const Vec2 a = gt_pos.at({frame + j - 1, gt_id});
        const Vec2 b = gt_pos.at({frame + j, gt_id});
        s.movements.push_back(b - a);
      }
      ds.motion.push_back(std::move(s));
    }
    if (!frame_sample.tracks.empty()) ds.refine.push_back(std::move(frame_sample));
  }
  return ds;
}

// Repeats the last observed per-frame displacement.
inline TrajectoryForecast velocity_forecast_baseline(const std::vector<Vec2>& history_centers,
                                                     int horizon) {
  if (history_centers.size() < 2)
    throw std::invalid_argument("velocity_forecast_baseline: need at least 2 history points");
  const Vec2 step = history_centers.back() - history_centers[history_centers.size() - 2];
  TrajectoryForecast f;
  f.steps.assign(horizon, step);
  return f;
}

// ---------------------------------------------------------------------------
// optimization
// ---------------------------------------------------------------------------

struct Momentum {
  double lr = 1e-2;
  double mu = 0.9;
  double max_grad_norm = 1.0;  // global-norm clip keeps the first steps sane
  std::vector<std::vector<double>> velocity;

  void step(std::vector<nn::ParamRef>& params, std::vector<nn::ParamRef>& grads) {
    if (velocity.empty()) {
      velocity.resize(params.size());
      for (size_t i = 0; i < params.size(); ++i) velocity[i].assign(params[i].size, 0.0);
    }
    double norm2 = 0.0;
    for (const auto& g : grads)
      for (size_t k = 0; k < g.size; ++k) norm2 += g.data[k] * g.data[k];
    const double norm = std::sqrt(norm2);
    const double scale = (max_grad_norm > 0.0 && norm > max_grad_norm) ? max_grad_norm / norm : 1.0;
    for (size_t i = 0; i < params.size(); ++i) {
      for (size_t k = 0; k < params[i].size; ++k) {
        velocity[i][k] = mu * velocity[i][k] - lr * scale * grads[i].data[k];
        params[i].data[k] += velocity[i][k];
      }
    }
  }
};

inline QueryQueue window_to_queue(const TrainSample& s, int tau_h, Query* current) {
  QueryQueue q(tau_h);
  const int n = static_cast<int>(s.history_feats.size());
  for (int i = 0; i < n - 1; ++i) {
    Query e;
    e.feature = s.history_feats[i];
    e.center = s.history_centers[i];
    e.timestamp = s.history_offsets[i];
    q.push(e);
  }
  current->feature = s.history_feats[n - 1];
  current->center = s.history_centers[n - 1];
  current->timestamp = 0;
  return q;
}

struct TrainResult {
  std::vector<double> loss_curve;
};

inline double motion_sample_loss(const TrainSample& s, const ModelParams& m,
                                 const TrackerConfig& cfg, const LossConfig& loss,
                                 ModelParams* grads) {
  Query current;
  QueryQueue queue = window_to_queue(s, cfg.tau_h, &current);
  nn::StackCache attn_cache;
  std::vector<nn::MlpCache> decode_caches;
  auto forecast = predict_motion(queue, current, m.motion_attn, m.decode_head, cfg.tau_f, cfg.d,
                                 nullptr, grads ? &attn_cache : nullptr,
                                 grads ? &decode_caches : nullptr);
  std::vector<double> pred, target;
  for (int j = 0; j < cfg.tau_f; ++j) {
    pred.push_back(forecast.steps[j].x);
    pred.push_back(forecast.steps[j].y);
    target.push_back(s.movements[j].x);
    target.push_back(s.movements[j].y);
  }
  const double value = loss.lambda_f * nn::l1_loss(pred, target);
  if (!grads) return value;

  auto dpred = nn::l1_loss_grad(pred, target);
  for (double& g : dpred) g *= loss.lambda_f;
  Tensor2D demb(cfg.tau_f, cfg.d);
  for (int j = 0; j < cfg.tau_f; ++j) {
    std::vector<double> drow = {dpred[2 * j], dpred[2 * j + 1]};
    auto dx = nn::mlp_backward(m.decode_head, decode_caches[j], drow, grads->decode_head);
    for (int c = 0; c < cfg.d; ++c) demb.at(j, c) = dx[c];
  }
  nn::stack_backward(m.motion_attn, attn_cache, demb, grads->motion_attn);
  return value;
}

// Momentum descent on the L1 movement loss through the motion attention and
// decode head. Deterministic under seed; single-threaded.
inline TrainResult train_motion_head(const std::vector<TrainSample>& dataset, int steps, double lr,
                                     std::uint64_t seed, ModelParams& m, const TrackerConfig& cfg,
                                     const LossConfig& loss = {}, int batch = 16,
                                     double max_grad_norm = 5.0) {
  if (dataset.empty()) throw std::invalid_argument("train_motion_head: empty dataset");
  Momentum opt;
  opt.lr = lr;
  opt.max_grad_norm = max_grad_norm;
  SplitMix64 rng(seed);
  TrainResult res;
  for (int step = 0; step < steps; ++step) {
    // step decay settles the L1 objective after the bulk of the fitting
    const double frac = static_cast<double>(step) / steps;
    opt.lr = lr * (frac < 0.6 ? 1.0 : frac < 0.85 ? 0.3 : 0.1);
    ModelParams grads = make_model(cfg);
    double total = 0.0;
    for (int b = 0; b < batch; ++b) {
      const auto& s = dataset[rng.next() % dataset.size()];
      total += motion_sample_loss(s, m, cfg, loss, &grads);
    }
    const double inv = 1.0 / batch;
    auto grefs = grads.collect();
    for (auto& g : grefs)
      for (size_t k = 0; k < g.size; ++k) g.data[k] *= inv;
    auto prefs = m.collect();
    // only the future.* parameters move here
    std::vector<nn::ParamRef> psel, gsel;
    for (size_t i = 0; i < prefs.size(); ++i) {
      if (prefs[i].name.rfind("future.", 0) == 0) {
        psel.push_back(prefs[i]);
        gsel.push_back(grefs[i]);
      }
    }
    opt.step(psel, gsel);
    res.loss_curve.push_back(total / batch);
  }
  return res;
}

// ---------------------------------------------------------------------------
// refinement training (query refinement attention + refinement head)
// ---------------------------------------------------------------------------

struct RefineForward {
  double loss = 0.0;
};

inline double refine_frame_loss(const RefineFrameSample& fs, const ModelParams& m,
                                const TrackerConfig& cfg, const LossConfig& loss,
                                ModelParams* grads) {
  const int nt = static_cast<int>(fs.tracks.size());
  std::vector<nn::StackCache> cf_caches(nt);
  std::vector<Query> after_cf(nt);
  for (int i = 0; i < nt; ++i)
    after_cf[i] = cross_frame_refine(fs.tracks[i].queue, fs.tracks[i].decoded, m.cross_frame,
                                     cfg.d, nullptr, grads ? &cf_caches[i] : nullptr);
  nn::StackCache co_cache;
  std::vector<Query> refined(nt);
  {
    Tensor2D feats(nt, cfg.d);
    Tensor2D pe_raw(nt, center_pe_dim(cfg.d));
    const auto region = to_region(cfg.bounds);
    for (int i = 0; i < nt; ++i) {
      for (int c = 0; c < cfg.d; ++c) feats.at(i, c) = after_cf[i].feature[c];
      auto pe = nn::positional_encoding_3d(after_cf[i].center.x, after_cf[i].center.y,
                                           after_cf[i].center.z, region, center_pe_dim(cfg.d));
      for (int c = 0; c < pe_raw.cols; ++c) pe_raw.at(i, c) = pe[c];
    }
    std::vector<char> mask(nt, 1);
    Tensor2D out = nn::stack_forward(m.cross_object, feats, pe_raw, Tensor2D(), Tensor2D(), mask,
                                     true, nullptr, grads ? &co_cache : nullptr);
    for (int i = 0; i < nt; ++i) {
      refined[i] = after_cf[i];
      refined[i].feature.assign(out.row(i), out.row(i) + cfg.d);
    }
  }

  double total = 0.0;
  const double inv_nt = 1.0 / nt;
  Tensor2D dstream(nt, cfg.d);
  std::vector<nn::MlpCache> head_caches(nt);
  for (int i = 0; i < nt; ++i) {
    const auto& ts = fs.tracks[i];
    auto raw = nn::mlp_forward(refined[i].feature, m.refine_head, grads ? &head_caches[i] : nullptr);
    RefinementOutput ro = decode_refinement(raw);
    const int target = ts.positive() ? 1 : 0;
    total += loss.lambda_cls_r * nn::focal_loss(ro.score, target);

    std::vector<double> draw(10, 0.0);
    if (grads) {
      const double dscore = loss.lambda_cls_r * nn::focal_loss_dp(ro.score, target);
      draw[9] = dscore * ro.score * (1.0 - ro.score);  // sigmoid chain
    }
    if (ts.positive()) {
      std::vector<double> pred = {ts.stub_box.center.x + ro.residual.x,
                                  ts.stub_box.center.y + ro.residual.y,
                                  ts.stub_box.center.z + ro.residual.z,
                                  ro.length,
                                  ro.width,
                                  ro.height,
                                  normalize_yaw(ro.yaw - ts.gt_box.yaw),
                                  ro.vx,
                                  ro.vy};
      std::vector<double> target_v = {ts.gt_box.center.x, ts.gt_box.center.y, ts.gt_box.center.z,
                                      ts.gt_box.length,   ts.gt_box.width,    ts.gt_box.height,
                                      0.0,                ts.gt_box.vx,       ts.gt_box.vy};
      total += loss.lambda_box_r * nn::l1_loss(pred, target_v);
      if (grads) {
        auto dl = nn::l1_loss_grad(pred, target_v);
        for (double& g : dl) g *= loss.lambda_box_r;
        draw[0] += dl[0];
        draw[1] += dl[1];
        draw[2] += dl[2];
        draw[3] += dl[3] * nn::softplus_dx(raw[3]);
        draw[4] += dl[4] * nn::softplus_dx(raw[4]);
        draw[5] += dl[5] * nn::softplus_dx(raw[5]);
        draw[6] += dl[6];  // wrap shift has unit slope
        draw[7] += dl[7];
        draw[8] += dl[8];
      }
    }
    if (grads) {
      for (double& g : draw) g *= inv_nt;  // frame loss is the per-track mean
      auto dfeat = nn::mlp_backward(m.refine_head, head_caches[i], draw, grads->refine_head);
      for (int c = 0; c < cfg.d; ++c) dstream.at(i, c) = dfeat[c];
    }
  }
  total /= nt;

  if (grads) {
    auto co_in = nn::stack_backward(m.cross_object, co_cache, dstream, grads->cross_object);
    for (int i = 0; i < nt; ++i) {
      Tensor2D drow(1, cfg.d);
      for (int c = 0; c < cfg.d; ++c) drow.at(0, c) = co_in.d_query_feats.at(i, c);
      nn::stack_backward(m.cross_frame, cf_caches[i], drow, grads->cross_frame);
    }
  }
  return total;
}

// Trains past.* parameters (both attention stacks and the refinement head)
// with focal score loss plus L1 box regression on gt-matched tracks.
inline TrainResult train_refine(const std::vector<RefineFrameSample>& dataset, int steps,
                                double lr, std::uint64_t seed, ModelParams& m,
                                const TrackerConfig& cfg, const LossConfig& loss = {},
                                bool head_only = false) {
  if (dataset.empty()) throw std::invalid_argument("train_refine: empty dataset");
  Momentum opt;
  opt.lr = lr;
  SplitMix64 rng(seed);
  TrainResult res;
  const char* prefix = head_only ? "past.refine_head" : "past.";
  for (int step = 0; step < steps; ++step) {
    ModelParams grads = make_model(cfg);
    const auto& fs = dataset[rng.next() % dataset.size()];
    const double value = refine_frame_loss(fs, m, cfg, loss, &grads);
    auto prefs = m.collect();
    auto grefs = grads.collect();
    std::vector<nn::ParamRef> psel, gsel;
    for (size_t i = 0; i < prefs.size(); ++i) {
      if (prefs[i].name.rfind(prefix, 0) == 0) {
        psel.push_back(prefs[i]);
        gsel.push_back(grefs[i]);
      }
    }
    opt.step(psel, gsel);
    res.loss_curve.push_back(value);
  }
  return res;
}

// ---------------------------------------------------------------------------
// full training pipeline
// ---------------------------------------------------------------------------

struct TrainSpec {
  int refine_rounds = 2;   // round 1 on stub-score runs, later rounds on the
                           // states the partially trained tracker itself visits
  int refine_steps = 3000; // per round
  double refine_lr = 1e-2;
  int motion_steps = 6000;
  double motion_lr = 3e-2;
  int motion_batch = 8;
  double motion_clip = 5.0;
};

struct TrainedModel {
  ModelParams params;
  std::vector<double> refine_curve;
  std::vector<double> motion_curve;
};

// Two-phase toy training. Refinement trains the head only; the attention
// stacks stay at their (residual-friendly) initialization so the recurrent
// feature pipeline is stationary and the evidence scale of features is
// preserved across frames. Rounds rebuild the dataset with the current
// weights so the head also sees the states its own decisions create:
// surviving clutter tracks, coasting, re-acquisitions. The motion head is
// then trained on windows rebuilt with the final refinement, matching the
// feature distribution it will see at inference.
inline TrainedModel train_full(const std::vector<std::pair<std::vector<io::TrackRecord>,
                                                           std::vector<io::DetectionRecord>>>& logs,
                               const TrackerConfig& cfg, std::uint64_t seed,
                               const TrainSpec& spec = {}) {
  TrainedModel out{make_model_seeded(cfg, seed)};
  LossConfig loss;

  for (int round = 0; round < spec.refine_rounds; ++round) {
    RunOptions opt;
    opt.learned_motion = false;          // motion head is untrained here
    opt.track_refinement = round > 0;    // round 1 runs on stub scores
    std::vector<RefineFrameSample> refine_ds;
    for (const auto& [gt, dets] : logs) {
      auto d = build_dataset(gt, dets, out.params, cfg, opt);
      for (auto& f : d.refine) refine_ds.push_back(std::move(f));
    }
    if (refine_ds.empty()) continue;
    auto r = train_refine(refine_ds, spec.refine_steps, spec.refine_lr,
                          seed ^ (0x5151u + round), out.params, cfg, loss,
                          /*head_only=*/true);
    out.refine_curve.insert(out.refine_curve.end(), r.loss_curve.begin(), r.loss_curve.end());
  }

  std::vector<TrainSample> motion_ds;
  {
    RunOptions opt;
    opt.learned_motion = false;
    for (const auto& [gt, dets] : logs) {
      auto d = build_dataset(gt, dets, out.params, cfg, opt);
      for (auto& m : d.motion) motion_ds.push_back(std::move(m));
    }
  }
  if (!motion_ds.empty()) {
    auto r = train_motion_head(motion_ds, spec.motion_steps, spec.motion_lr, seed ^ 0x9a9a,
                               out.params, cfg, loss, spec.motion_batch, spec.motion_clip);
    out.motion_curve = std::move(r.loss_curve);
  }
  return out;
}

}  // namespace pftrack::train
