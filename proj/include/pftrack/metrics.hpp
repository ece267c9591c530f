#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "pftrack/hungarian.hpp"
#include "pftrack/io.hpp"
#include "pftrack/types.hpp"

namespace pftrack::mot {

using ordered_json = nlohmann::ordered_json;

struct FrameMatch {
  int frame = 0;
  TrackId gt_id = 0;
  TrackId pred_id = 0;
  double distance = 0.0;
};

struct MotTally {
  long long tp = 0, fp = 0, fn = 0, ids = 0;
  long long gt_count = 0;
  double matched_distance_sum = 0.0;
  std::vector<FrameMatch> matches;

  double recall() const { return gt_count > 0 ? static_cast<double>(tp) / gt_count : 0.0; }
  double mota() const {
    if (gt_count == 0) return fp == 0 ? 1.0 : 0.0;
    return 1.0 - static_cast<double>(fp + fn + ids) / static_cast<double>(gt_count);
  }
  double motp() const { return tp > 0 ? matched_distance_sum / tp : 0.0; }
};

namespace detail {

struct GroupedLogs {
  std::map<int, std::vector<const io::TrackRecord*>> gt;
  std::map<int, std::vector<const io::TrackRecord*>> pred;
  std::set<int> frames;
  long long gt_count = 0;
};

inline GroupedLogs group_frames(const std::vector<io::TrackRecord>& gt,
                                const std::vector<io::TrackRecord>& pred) {
  GroupedLogs g;
  g.gt_count = static_cast<long long>(gt.size());
  std::set<std::pair<int, TrackId>> seen_gt, seen_pred;
  for (const auto& r : gt) {
    if (!seen_gt.insert({r.frame, r.id}).second)
      throw std::invalid_argument("clear_mot: duplicate (frame,id) in ground truth");
    g.gt[r.frame].push_back(&r);
    g.frames.insert(r.frame);
  }
  for (const auto& r : pred) {
    if (!seen_pred.insert({r.frame, r.id}).second)
      throw std::invalid_argument("clear_mot: duplicate (frame,id) in predictions");
    g.pred[r.frame].push_back(&r);
    g.frames.insert(r.frame);
  }
  return g;
}

// CLEAR pass over pre-grouped logs; predictions below `threshold` are
// ignored. One code path serves both the plain tally and the score sweep.
inline MotTally clear_core(const GroupedLogs& g, double threshold, double match_dist,
                           bool keep_matches) {
  MotTally tally;
  tally.gt_count = g.gt_count;
  std::map<TrackId, TrackId> last_match;
  static const std::vector<const io::TrackRecord*> kEmpty;

  std::vector<const io::TrackRecord*> preds;
  for (int frame : g.frames) {
    auto git = g.gt.find(frame);
    const auto& gs = git == g.gt.end() ? kEmpty : git->second;
    auto pit = g.pred.find(frame);
    preds.clear();
    if (pit != g.pred.end())
      for (const auto* p : pit->second)
        if (p->box.score >= threshold) preds.push_back(p);

    const int ng = static_cast<int>(gs.size());
    const int np = static_cast<int>(preds.size());
    std::vector<int> gt_match(ng, -1);
    std::vector<char> pred_used(np, 0);

    // continuity pass: keep an existing pairing while it stays inside the gate
    for (int gi = 0; gi < ng; ++gi) {
      auto it = last_match.find(gs[gi]->id);
      if (it == last_match.end()) continue;
      for (int pi = 0; pi < np; ++pi) {
        if (pred_used[pi] || preds[pi]->id != it->second) continue;
        if (preds[pi]->box.class_id != gs[gi]->box.class_id) continue;
        const double d = center_distance_2d(gs[gi]->box, preds[pi]->box);
        if (d < match_dist) {
          gt_match[gi] = pi;
          pred_used[pi] = 1;
        }
        break;
      }
    }

    // min-cost assignment for the rest
    std::vector<int> free_gt, free_pred;
    for (int gi = 0; gi < ng; ++gi)
      if (gt_match[gi] < 0) free_gt.push_back(gi);
    for (int pi = 0; pi < np; ++pi)
      if (!pred_used[pi]) free_pred.push_back(pi);
    if (!free_gt.empty() && !free_pred.empty()) {
      Tensor2D cost(static_cast<int>(free_gt.size()), static_cast<int>(free_pred.size()),
                    kForbiddenCost);
      for (size_t r = 0; r < free_gt.size(); ++r)
        for (size_t c = 0; c < free_pred.size(); ++c) {
          const auto* gtr = gs[free_gt[r]];
          const auto* prr = preds[free_pred[c]];
          if (gtr->box.class_id != prr->box.class_id) continue;
          const double d = center_distance_2d(gtr->box, prr->box);
          if (d < match_dist) cost.at(static_cast<int>(r), static_cast<int>(c)) = d;
        }
      const Assignment a = hungarian(cost);
      for (size_t r = 0; r < free_gt.size(); ++r)
        if (a.row_to_col[r] >= 0) {
          gt_match[free_gt[r]] = free_pred[a.row_to_col[r]];
          pred_used[free_pred[a.row_to_col[r]]] = 1;
        }
    }

    for (int gi = 0; gi < ng; ++gi) {
      if (gt_match[gi] < 0) {
        ++tally.fn;
        continue;
      }
      const auto* g_rec = gs[gi];
      const auto* p_rec = preds[gt_match[gi]];
      ++tally.tp;
      const double d = center_distance_2d(g_rec->box, p_rec->box);
      tally.matched_distance_sum += d;
      auto it = last_match.find(g_rec->id);
      if (it != last_match.end() && it->second != p_rec->id) ++tally.ids;
      last_match[g_rec->id] = p_rec->id;
      if (keep_matches) tally.matches.push_back({frame, g_rec->id, p_rec->id, d});
    }
    for (int pi = 0; pi < np; ++pi)
      if (!pred_used[pi]) ++tally.fp;
  }
  return tally;
}

}  // namespace detail

// CLEAR rules with the standard continuity preference: a gt keeps its
// previously matched prediction id whenever that prediction is still within
// the cutoff; leftover boxes go through min-cost assignment. Matching is
// strict (< cutoff), ground-plane, class-aware. An ID switch is counted
// whenever a gt's matched prediction id differs from its last matched id.
inline MotTally clear_mot(const std::vector<io::TrackRecord>& gt,
                          const std::vector<io::TrackRecord>& pred, double match_dist = 2.0,
                          bool keep_matches = false) {
  auto grouped = detail::group_frames(gt, pred);
  return detail::clear_core(grouped, -std::numeric_limits<double>::infinity(), match_dist,
                            keep_matches);
}

// ---------------------------------------------------------------------------
// AMOTA / AMOTP recall sweep
// ---------------------------------------------------------------------------

struct SequencePair {
  std::vector<io::TrackRecord> gt;
  std::vector<io::TrackRecord> pred;
};

struct SweepRow {
  double recall_target = 0.0;
  bool achieved = false;
  double threshold = 0.0;
  double recall = 0.0;
  double motar = 0.0;
  double motp = 0.0;
  long long tp = 0, fp = 0, fn = 0, ids = 0;
};

struct AmotaResult {
  double amota = 0.0;
  double amotp = 0.0;
  std::vector<SweepRow> table;
};

namespace detail {

// Per-sequence tallies are piecewise constant in the score threshold: they
// only change at that sequence's own distinct scores. Tallies are evaluated
// once per breakpoint and looked up for any pooled threshold.
struct SequenceCurve {
  std::vector<double> breakpoints;  // descending distinct scores
  std::vector<MotTally> tallies;    // tally at threshold = breakpoints[i]
  MotTally empty_tally;             // threshold above every score

  const MotTally& at(double threshold) const {
    // index of the smallest breakpoint >= threshold
    auto it = std::lower_bound(breakpoints.begin(), breakpoints.end(), threshold,
                               [](double bp, double t) { return bp >= t; });
    // `it` points at the first breakpoint < threshold
    if (it == breakpoints.begin()) return empty_tally;
    return tallies[static_cast<size_t>(it - breakpoints.begin()) - 1];
  }
};

inline SequenceCurve build_curve(const SequencePair& pair, double match_dist) {
  SequenceCurve curve;
  auto grouped = group_frames(pair.gt, pair.pred);
  std::set<double, std::greater<double>> scores;
  for (const auto& r : pair.pred) scores.insert(r.box.score);
  curve.breakpoints.assign(scores.begin(), scores.end());
  curve.empty_tally.gt_count = grouped.gt_count;
  curve.empty_tally.fn = grouped.gt_count;
  curve.tallies.reserve(curve.breakpoints.size());
  for (double s : curve.breakpoints)
    curve.tallies.push_back(clear_core(grouped, s, match_dist, false));
  return curve;
}

inline MotTally pooled_tally(const std::vector<SequenceCurve>& curves, double threshold) {
  MotTally out;
  for (const auto& c : curves) {
    const MotTally& t = c.at(threshold);
    out.tp += t.tp;
    out.fp += t.fp;
    out.fn += t.fn;
    out.ids += t.ids;
    out.gt_count += t.gt_count;
    out.matched_distance_sum += t.matched_distance_sum;
  }
  return out;
}

inline std::vector<SequenceCurve> build_curves(const std::vector<SequencePair>& pairs,
                                               double match_dist, int workers) {
  std::vector<SequenceCurve> curves(pairs.size());
  if (workers <= 1 || pairs.size() <= 1) {
    for (size_t i = 0; i < pairs.size(); ++i) curves[i] = build_curve(pairs[i], match_dist);
    return curves;
  }
  std::vector<std::thread> pool;
  std::atomic<size_t> next{0};
  const int n = std::min<int>(workers, static_cast<int>(pairs.size()));
  for (int w = 0; w < n; ++w)
    pool.emplace_back([&]() {
      while (true) {
        const size_t i = next.fetch_add(1);
        if (i >= pairs.size()) return;
        curves[i] = build_curve(pairs[i], match_dist);
      }
    });
  for (auto& t : pool) t.join();
  return curves;
}

}  // namespace detail

// Recall-target sweep over all pooled distinct scores. For each target the
// highest threshold reaching the target recall is used; targets with no such
// threshold contribute MOTAR = 0. MOTAR is the recall-normalized accuracy
// clipped into [0,1] (the scaled variant, which keeps AMOTA itself in [0,1]).
inline AmotaResult amota(const std::vector<SequencePair>& pairs, int n_recall = 40,
                         double match_dist = 2.0, int workers = 1) {
  if (n_recall < 1) throw std::invalid_argument("amota: n_recall must be >= 1");
  for (const auto& p : pairs)
    for (const auto& r : p.pred)
      if (!(r.box.score >= 0.0 && r.box.score <= 1.0))
        throw std::invalid_argument("amota: predictions must carry scores in [0,1]");

  auto curves = detail::build_curves(pairs, match_dist, workers);
  long long total_gt = 0;
  std::set<double, std::greater<double>> pooled_scores;
  for (const auto& p : pairs) {
    total_gt += static_cast<long long>(p.gt.size());
    for (const auto& r : p.pred) pooled_scores.insert(r.box.score);
  }

  std::vector<double> thresholds(pooled_scores.begin(), pooled_scores.end());
  std::vector<MotTally> tallies;
  tallies.reserve(thresholds.size());
  for (double t : thresholds) tallies.push_back(detail::pooled_tally(curves, t));

  AmotaResult res;
  double amotp_sum = 0.0;
  int amotp_count = 0;
  for (int k = 0; k < n_recall; ++k) {
    const double target = static_cast<double>(k + 1) / n_recall;
    SweepRow row;
    row.recall_target = target;
    for (size_t i = 0; i < thresholds.size(); ++i) {  // descending thresholds
      const MotTally& t = tallies[i];
      const double rec = total_gt > 0 ? static_cast<double>(t.tp) / total_gt : 0.0;
      if (rec >= target) {
        row.achieved = true;
        row.threshold = thresholds[i];
        row.recall = rec;
        row.tp = t.tp;
        row.fp = t.fp;
        row.fn = t.fn;
        row.ids = t.ids;
        row.motp = t.motp();
        const double p = static_cast<double>(total_gt);
        const double raw =
            1.0 - (static_cast<double>(t.ids + t.fp + t.fn) - (1.0 - target) * p) / (target * p);
        row.motar = std::clamp(raw, 0.0, 1.0);
        break;
      }
    }
    if (row.achieved) {
      amotp_sum += row.motp;
      ++amotp_count;
    }
    res.amota += row.motar;
    res.table.push_back(row);
  }
  res.amota /= n_recall;
  res.amotp = amotp_count > 0 ? amotp_sum / amotp_count : match_dist;
  return res;
}

// ---------------------------------------------------------------------------
// forecast displacement errors
// ---------------------------------------------------------------------------

struct ForecastSample {
  int origin_frame = 0;
  TrackId pred_id = 0;
  Vec2 origin_xy;
  std::vector<Vec2> steps;
};

struct AdeFde {
  double ade = 0.0;
  double fde = 0.0;
  long long samples = 0;
};

// Forecasts are anchored at the matched prediction's position and compared
// with the gt agent's future positions over `horizon` steps. Only forecasts
// whose origin frame has a gate match and whose gt covers the whole horizon
// are scored.
inline AdeFde ade_fde(const std::vector<ForecastSample>& forecasts,
                      const std::vector<io::TrackRecord>& gt,
                      const std::vector<io::TrackRecord>& pred, int horizon,
                      double match_dist = 2.0) {
  if (horizon < 1) throw std::invalid_argument("ade_fde: horizon must be >= 1");
  for (const auto& f : forecasts)
    if (static_cast<int>(f.steps.size()) < horizon)
      throw std::invalid_argument("ade_fde: horizon exceeds forecast length");

  // (frame, pred id) -> matched gt id, via the full CLEAR matching
  MotTally tally = clear_mot(gt, pred, match_dist, /*keep_matches=*/true);
  std::map<std::pair<int, TrackId>, TrackId> match_of;
  for (const auto& m : tally.matches) match_of[{m.frame, m.pred_id}] = m.gt_id;

  std::map<std::pair<int, TrackId>, Vec2> gt_pos;
  for (const auto& r : gt) gt_pos[{r.frame, r.id}] = {r.box.center.x, r.box.center.y};

  AdeFde out;
  double ade_sum = 0.0, fde_sum = 0.0;
  long long ade_terms = 0;
  for (const auto& f : forecasts) {
    auto it = match_of.find({f.origin_frame, f.pred_id});
    if (it == match_of.end()) continue;
    const TrackId gt_id = it->second;
    bool complete = true;
    for (int j = 1; j <= horizon; ++j)
      if (!gt_pos.count({f.origin_frame + j, gt_id})) {
        complete = false;
        break;
      }
    if (!complete) continue;
    Vec2 pos = f.origin_xy;
    double last_err = 0.0;
    for (int j = 1; j <= horizon; ++j) {
      pos = pos + f.steps[j - 1];
      const Vec2 g = gt_pos.at({f.origin_frame + j, gt_id});
      last_err = (pos - g).norm();
      ade_sum += last_err;
      ++ade_terms;
    }
    fde_sum += last_err;
    ++out.samples;
  }
  if (ade_terms > 0) out.ade = ade_sum / ade_terms;
  if (out.samples > 0) out.fde = fde_sum / out.samples;
  return out;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct ClassMetrics {
  double amota = 0.0, amotp = 0.0, mota = 0.0, recall = 0.0;
  long long ids = 0, fp = 0, fn = 0;
  bool has_forecast = false;
  double ade = 0.0, fde = 0.0;
};

struct MetricsReport {
  std::map<int, ClassMetrics> per_class;
  ClassMetrics aggregate;  // macro mean over classes present in gt
  int n_recall = 40;
  double match_dist = 2.0;
};

inline ClassMetrics compute_class_metrics(const std::vector<SequencePair>& pairs, int n_recall,
                                          double match_dist, int workers = 1) {
  ClassMetrics m;
  auto res = amota(pairs, n_recall, match_dist, workers);
  m.amota = res.amota;
  m.amotp = res.amotp;
  MotTally full;
  for (const auto& p : pairs) {
    MotTally t = clear_mot(p.gt, p.pred, match_dist);
    full.tp += t.tp;
    full.fp += t.fp;
    full.fn += t.fn;
    full.ids += t.ids;
    full.gt_count += t.gt_count;
    full.matched_distance_sum += t.matched_distance_sum;
  }
  m.mota = full.mota();
  m.recall = full.recall();
  m.ids = full.ids;
  m.fp = full.fp;
  m.fn = full.fn;
  return m;
}

inline MetricsReport metrics_report(const std::vector<SequencePair>& pairs, int n_recall = 40,
                                    double match_dist = 2.0, int workers = 1) {
  MetricsReport rep;
  rep.n_recall = n_recall;
  rep.match_dist = match_dist;
  std::set<int> classes;
  for (const auto& p : pairs)
    for (const auto& r : p.gt) classes.insert(r.box.class_id);

  for (int c : classes) {
    std::vector<SequencePair> filtered;
    for (const auto& p : pairs) {
      SequencePair f;
      for (const auto& r : p.gt)
        if (r.box.class_id == c) f.gt.push_back(r);
      for (const auto& r : p.pred)
        if (r.box.class_id == c) f.pred.push_back(r);
      filtered.push_back(std::move(f));
    }
    rep.per_class[c] = compute_class_metrics(filtered, n_recall, match_dist, workers);
  }
  if (!rep.per_class.empty()) {
    auto& a = rep.aggregate;
    for (const auto& [c, m] : rep.per_class) {
      a.amota += m.amota;
      a.amotp += m.amotp;
      a.mota += m.mota;
      a.recall += m.recall;
      a.ids += m.ids;
      a.fp += m.fp;
      a.fn += m.fn;
    }
    const double n = static_cast<double>(rep.per_class.size());
    a.amota /= n;
    a.amotp /= n;
    a.mota /= n;
    a.recall /= n;
  }
  return rep;
}

inline ordered_json class_metrics_json(const ClassMetrics& m) {
  ordered_json j;
  j["amota"] = m.amota;
  j["amotp"] = m.amotp;
  j["mota"] = m.mota;
  j["ids"] = m.ids;
  j["recall"] = m.recall;
  j["fp"] = m.fp;
  j["fn"] = m.fn;
  j["ade"] = m.has_forecast ? ordered_json(m.ade) : ordered_json(nullptr);
  j["fde"] = m.has_forecast ? ordered_json(m.fde) : ordered_json(nullptr);
  return j;
}

inline ordered_json report_json(const MetricsReport& rep) {
  ordered_json j;
  j["amotp_definition"] =
      "mean over achieved recall targets of the mean matched ground-plane center distance";
  j["n_recall"] = rep.n_recall;
  j["match_dist"] = rep.match_dist;
  ordered_json pc;
  for (const auto& [c, m] : rep.per_class) pc[std::to_string(c)] = class_metrics_json(m);
  j["per_class"] = pc;
  j["aggregate"] = class_metrics_json(rep.aggregate);
  return j;
}

}  // namespace pftrack::mot
