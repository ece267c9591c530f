#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pftrack/simulator.hpp"
#include "pftrack/training.hpp"

using namespace pftrack;
using train::TrainSample;

namespace {

TrackerConfig train_config() {
  TrackerConfig cfg;
  cfg.d = 8;
  cfg.attn_heads = 2;
  cfg.attn_layers = 2;
  cfg.ffn_mult = 2;
  cfg.head_hidden = 12;
  cfg.tau_h = 3;
  cfg.tau_f = 8;
  cfg.tau_e = 4;
  return cfg;
}

sim::ScenarioConfig straight_line_scenario(int frames, std::uint64_t seed) {
  sim::ScenarioConfig c;
  c.frames = frames;
  c.period_s = 0.5;
  c.seed = seed;
  sim::AgentSpec a;
  a.x = -8.0;
  a.y = 1.0;
  a.yaw = 0.0;
  a.speed = 1.5;
  a.latent_seed = seed * 7 + 1;
  c.agents.push_back(a);
  c.sensor.sigma_xy = 0.0;
  c.sensor.sigma_z = 0.0;
  c.sensor.sigma_f = 0.0;
  c.sensor.dropout = 0.0;
  c.sensor.fp_rate = 0.0;
  c.sensor.score_mean = 0.9;
  c.sensor.score_spread = 0.0;
  c.sensor.feature_dim = 8;
  return c;
}

train::Dataset dataset_for(const sim::ScenarioConfig& sc, const TrackerConfig& cfg,
                           const ModelParams& params) {
  auto res = sim::simulate(sc);
  RunOptions opt;
  opt.track_refinement = false;  // stub scores drive confidence while untrained
  opt.learned_motion = false;
  return train::build_dataset(res.ground_truth, res.detections, params, cfg, opt);
}

}  // namespace

TEST_CASE("dataset window arithmetic on a 12-frame noiseless track", "[training]") {
  auto cfg = train_config();
  ModelParams params = make_model_seeded(cfg, 3);
  auto ds = dataset_for(straight_line_scenario(12, 5), cfg, params);
  // full window needs tau_h frames including the current one (t >= 2) and
  // tau_f future movements (t <= 3): exactly frames 2 and 3
  REQUIRE(ds.motion.size() == 2);
  CHECK(ds.motion[0].origin_frame == 2);
  CHECK(ds.motion[1].origin_frame == 3);
  for (const auto& s : ds.motion) {
    CHECK(s.movements.size() == size_t(cfg.tau_f));
    for (const auto& mv : s.movements) {
      CHECK(mv.x == Catch::Approx(1.5 * 0.5));
      CHECK(mv.y == Catch::Approx(0.0).margin(1e-12));
    }
  }
  // refine samples exist for every tracked frame
  CHECK(ds.refine.size() >= 10);
}

TEST_CASE("occluded frames contribute no motion samples", "[training]") {
  auto cfg = train_config();
  ModelParams params = make_model_seeded(cfg, 3);
  auto sc = straight_line_scenario(20, 6);
  sc.sensor.occlusions.push_back({0, 5, 7});
  auto ds = dataset_for(sc, cfg, params);
  for (const auto& s : ds.motion) {
    CHECK(s.origin_frame != 5);
    CHECK(s.origin_frame != 6);
    CHECK(s.origin_frame != 7);
  }
}

TEST_CASE("dataset construction is deterministic", "[training]") {
  auto cfg = train_config();
  ModelParams params = make_model_seeded(cfg, 3);
  auto a = dataset_for(straight_line_scenario(14, 9), cfg, params);
  auto b = dataset_for(straight_line_scenario(14, 9), cfg, params);
  REQUIRE(a.motion.size() == b.motion.size());
  for (size_t i = 0; i < a.motion.size(); ++i) {
    REQUIRE(a.motion[i].history_feats == b.motion[i].history_feats);
    for (size_t j = 0; j < a.motion[i].movements.size(); ++j) {
      REQUIRE(a.motion[i].movements[j].x == b.motion[i].movements[j].x);
      REQUIRE(a.motion[i].movements[j].y == b.motion[i].movements[j].y);
    }
  }
}

TEST_CASE("velocity forecast baseline", "[training]") {
  auto f0 = train::velocity_forecast_baseline({{1, 1}, {1, 1}}, 5);
  for (const auto& s : f0.steps) {
    CHECK(s.x == 0.0);
    CHECK(s.y == 0.0);
  }
  auto f1 = train::velocity_forecast_baseline({{0, 0}, {1, 0}}, 4);
  REQUIRE(f1.steps.size() == 4);
  for (const auto& s : f1.steps) CHECK(s.x == 1.0);
  CHECK_THROWS_AS(train::velocity_forecast_baseline({{0, 0}}, 3), std::invalid_argument);

  // circular motion: extrapolating the last chord against the true circle
  const double radius = 10.0, omega = 0.2, dt = 0.5;
  auto pos = [&](int k) {
    return Vec2{radius * std::cos(omega * dt * k), radius * std::sin(omega * dt * k)};
  };
  auto fc = train::velocity_forecast_baseline({pos(0), pos(1)}, 8);
  Vec2 p = pos(1);
  for (int j = 0; j < 8; ++j) p = p + fc.steps[j];
  const double fde = (p - pos(9)).norm();
  // closed form: |p1 + 8*(p1-p0) - p9| with points on the circle
  const Vec2 expected = pos(1) + (pos(1) - pos(0)) * 8.0;
  CHECK(fde == Catch::Approx((expected - pos(9)).norm()).epsilon(1e-12));
  CHECK(fde > 0.1);
}

TEST_CASE("motion and refinement losses match finite differences", "[training][gradcheck]") {
  auto cfg = train_config();
  cfg.d = 6;
  cfg.attn_heads = 2;
  cfg.tau_f = 3;
  cfg.tau_e = 2;
  ModelParams m = make_model_seeded(cfg, 12);
  LossConfig lc;
  SplitMix64 rng(9);

  TrainSample s;
  s.origin_frame = 2;
  for (int k = 0; k < 3; ++k) {
    std::vector<double> f(cfg.d);
    for (double& v : f) v = rng.uniform(-1, 1);
    s.history_feats.push_back(f);
    s.history_centers.push_back({rng.uniform(-5, 5), rng.uniform(-5, 5), 0.5});
    s.history_offsets.push_back(k - 2);
  }
  for (int j = 0; j < cfg.tau_f; ++j) s.movements.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});

  ModelParams grads = make_model(cfg);
  train::motion_sample_loss(s, m, cfg, lc, &grads);
  auto prefs = m.collect();
  auto grefs = grads.collect();
  const double h = 1e-5;
  int checked = 0, bad = 0;
  for (size_t i = 0; i < prefs.size(); ++i) {
    if (prefs[i].name.rfind("future.", 0) != 0) continue;
    for (size_t k = 0; k < prefs[i].size; k += 7) {  // sparse sweep keeps it quick
      const double keep = prefs[i].data[k];
      prefs[i].data[k] = keep + h;
      const double up = train::motion_sample_loss(s, m, cfg, lc, nullptr);
      prefs[i].data[k] = keep - h;
      const double down = train::motion_sample_loss(s, m, cfg, lc, nullptr);
      prefs[i].data[k] = keep;
      const double numeric = (up - down) / (2 * h);
      const double analytic = grefs[i].data[k];
      const double denom = std::max(std::abs(analytic) + std::abs(numeric), 1e-6);
      if (std::abs(analytic - numeric) / denom > 1e-4) ++bad;
      ++checked;
    }
  }
  CHECK(checked > 100);
  CHECK(bad == 0);

  // refinement loss path, including the box terms
  train::RefineFrameSample fs;
  for (int i = 0; i < 3; ++i) {
    train::RefineTrackSample ts;
    ts.queue = QueryQueue(cfg.tau_h);
    Query hq;
    hq.feature.resize(cfg.d);
    for (double& v : hq.feature) v = rng.uniform(-1, 1);
    hq.center = {rng.uniform(-3, 3), rng.uniform(-3, 3), 0.5};
    hq.timestamp = -1;
    ts.queue.push(hq);
    ts.decoded.feature.resize(cfg.d);
    for (double& v : ts.decoded.feature) v = rng.uniform(-1, 1);
    ts.decoded.center = {rng.uniform(-3, 3), rng.uniform(-3, 3), 0.5};
    ts.decoded.timestamp = 0;
    ts.stub_box.center = ts.decoded.center;
    ts.matched = true;
    ts.has_gt = i != 1;
    ts.gt_box.center = {ts.stub_box.center.x + rng.uniform(-0.4, 0.4),
                        ts.stub_box.center.y + rng.uniform(-0.4, 0.4), 0.5};
    ts.gt_box.length = 4.2;
    ts.gt_box.width = 1.9;
    ts.gt_box.height = 1.6;
    ts.gt_box.yaw = rng.uniform(-1, 1);
    ts.gt_box.vx = rng.uniform(-1, 1);
    ts.gt_box.vy = rng.uniform(-1, 1);
    fs.tracks.push_back(std::move(ts));
  }
  ModelParams rgrads = make_model(cfg);
  train::refine_frame_loss(fs, m, cfg, lc, &rgrads);
  auto rgrefs = rgrads.collect();
  checked = 0;
  bad = 0;
  for (size_t i = 0; i < prefs.size(); ++i) {
    if (prefs[i].name.rfind("past.", 0) != 0) continue;
    for (size_t k = 0; k < prefs[i].size; k += 11) {
      const double keep = prefs[i].data[k];
      prefs[i].data[k] = keep + h;
      const double up = train::refine_frame_loss(fs, m, cfg, lc, nullptr);
      prefs[i].data[k] = keep - h;
      const double down = train::refine_frame_loss(fs, m, cfg, lc, nullptr);
      prefs[i].data[k] = keep;
      const double numeric = (up - down) / (2 * h);
      const double analytic = rgrefs[i].data[k];
      const double denom = std::max(std::abs(analytic) + std::abs(numeric), 1e-6);
      if (std::abs(analytic - numeric) / denom > 1e-4) ++bad;
      ++checked;
    }
  }
  CHECK(checked > 100);
  CHECK(bad == 0);
}

TEST_CASE("training drives the loss down and is seed-deterministic", "[training]") {
  auto cfg = train_config();
  ModelParams params = make_model_seeded(cfg, 3);
  auto ds = dataset_for(straight_line_scenario(16, 21), cfg, params);
  REQUIRE(!ds.motion.empty());

  // representable target: all-zero movements
  auto zeros = ds.motion;
  for (auto& s : zeros)
    for (auto& mv : s.movements) mv = {0.0, 0.0};
  ModelParams mz = make_model_seeded(cfg, 101);
  auto rz = train::train_motion_head(zeros, 150, 1e-2, 5, mz, cfg);
  CHECK(rz.loss_curve.back() < rz.loss_curve.front());
  Query cur;
  QueryQueue q = train::window_to_queue(zeros[0], cfg.tau_h, &cur);
  auto f = predict_motion(q, cur, mz.motion_attn, mz.decode_head, cfg.tau_f, cfg.d);
  for (const auto& s : f.steps) {
    CHECK(std::abs(s.x) < 0.05);
    CHECK(std::abs(s.y) < 0.05);
  }

  // constant-velocity motion is learnable to tight accuracy on the train set
  ModelParams mcv = make_model_seeded(cfg, 102);
  auto rcv = train::train_motion_head(ds.motion, 400, 1e-2, 6, mcv, cfg);
  CHECK(rcv.loss_curve.back() < rcv.loss_curve.front());
  double worst_ade = 0.0;
  for (const auto& s : ds.motion) {
    Query c2;
    QueryQueue q2 = train::window_to_queue(s, cfg.tau_h, &c2);
    auto pred = predict_motion(q2, c2, mcv.motion_attn, mcv.decode_head, cfg.tau_f, cfg.d);
    double err = 0.0;
    Vec2 p{0, 0}, g{0, 0};
    for (int j = 0; j < cfg.tau_f; ++j) {
      p = p + pred.steps[j];
      g = g + s.movements[j];
      err += (p - g).norm();
    }
    worst_ade = std::max(worst_ade, err / cfg.tau_f);
  }
  CHECK(worst_ade < 0.05);

  // bit-determinism under a fixed seed
  ModelParams ma = make_model_seeded(cfg, 103);
  ModelParams mb = make_model_seeded(cfg, 103);
  auto ra = train::train_motion_head(ds.motion, 50, 1e-2, 7, ma, cfg);
  auto rb = train::train_motion_head(ds.motion, 50, 1e-2, 7, mb, cfg);
  REQUIRE(ra.loss_curve == rb.loss_curve);
  auto pa = ma.collect();
  auto pb = mb.collect();
  for (size_t i = 0; i < pa.size(); ++i)
    for (size_t k = 0; k < pa[i].size; ++k) REQUIRE(pa[i].data[k] == pb[i].data[k]);

  CHECK_THROWS_AS(train::train_motion_head({}, 10, 1e-2, 1, ma, cfg), std::invalid_argument);
}

TEST_CASE("refinement training separates real tracks from weak-evidence ones", "[training]") {
  auto cfg = train_config();
  ModelParams params = make_model_seeded(cfg, 3);
  // mix of matched and junk samples from a cluttered scenario
  auto sc = straight_line_scenario(20, 33);
  sc.sensor.fp_rate = 1.0;
  sc.sensor.sigma_xy = 0.2;
  sc.sensor.sigma_f = 0.1;
  sc.agents.push_back(sc.agents[0]);
  sc.agents[1].y = -4.0;
  sc.agents[1].latent_seed = 991;
  auto res = sim::simulate(sc);
  RunOptions opt;
  opt.track_refinement = false;
  opt.learned_motion = false;
  auto ds = train::build_dataset(res.ground_truth, res.detections, params, cfg, opt);
  REQUIRE(!ds.refine.empty());

  ModelParams m = make_model_seeded(cfg, 104);
  auto r = train::train_refine(ds.refine, 1500, 1e-2, 11, m, cfg, LossConfig{}, /*head_only=*/true);
  CHECK(r.loss_curve.back() < r.loss_curve.front());

  // scores after training: evidence-backed tracks high, junk/coasting low
  double matched_score_sum = 0.0, junk_score_sum = 0.0;
  int matched_n = 0, junk_n = 0;
  for (const auto& fs : ds.refine) {
    std::vector<Query> after(fs.tracks.size());
    for (size_t i = 0; i < fs.tracks.size(); ++i)
      after[i] = cross_frame_refine(fs.tracks[i].queue, fs.tracks[i].decoded, m.cross_frame, cfg.d);
    auto refined = cross_object_refine(after, m.cross_object, cfg.d, cfg.bounds);
    for (size_t i = 0; i < fs.tracks.size(); ++i) {
      auto ro = refine_track(refined[i], fs.tracks[i].stub_box, m.refine_head).second;
      if (fs.tracks[i].positive()) {
        matched_score_sum += ro.score;
        ++matched_n;
      } else {
        junk_score_sum += ro.score;
        ++junk_n;
      }
    }
  }
  REQUIRE(matched_n > 0);
  REQUIRE(junk_n > 0);
  CHECK(matched_score_sum / matched_n > junk_score_sum / junk_n + 0.2);
}
