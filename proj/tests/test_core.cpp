#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "pftrack/geometry.hpp"
#include "pftrack/io.hpp"
#include "pftrack/model.hpp"
#include "pftrack/rng.hpp"
#include "pftrack/types.hpp"

using namespace pftrack;

TEST_CASE("normalize_yaw basics", "[core]") {
  CHECK(normalize_yaw(0.0) == 0.0);
  CHECK(normalize_yaw(3.0 * M_PI) == Catch::Approx(M_PI));
  CHECK(normalize_yaw(-M_PI) == Catch::Approx(M_PI));
  CHECK_THROWS_AS(normalize_yaw(std::nan("")), std::invalid_argument);
  CHECK_THROWS_AS(normalize_yaw(INFINITY), std::invalid_argument);
}

TEST_CASE("normalize_yaw is idempotent and lands in (-pi, pi]", "[core]") {
  SplitMix64 rng(11);
  for (int i = 0; i < 500; ++i) {
    const double theta = rng.uniform(-50.0, 50.0);
    const double r = normalize_yaw(theta);
    CHECK(r > -M_PI);
    CHECK(r <= M_PI);
    CHECK(normalize_yaw(r) == r);
    // equivalent mod 2*pi
    CHECK(std::remainder(theta - r, 2.0 * M_PI) == Catch::Approx(0.0).margin(1e-9));
  }
}

TEST_CASE("center_distance_2d ignores z and matches the direct formula", "[core]") {
  Box3D a, b;
  CHECK(center_distance_2d(a, a) == 0.0);
  b.center = {3.0, 4.0, 9.0};
  CHECK(center_distance_2d(a, b) == Catch::Approx(5.0));
  CHECK(center_distance_2d(b, a) == Catch::Approx(5.0));

  SplitMix64 rng(3);
  for (int i = 0; i < 200; ++i) {
    Box3D p, q;
    p.center = {rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-5, 5)};
    q.center = {rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-5, 5)};
    const double dx = p.center.x - q.center.x;
    const double dy = p.center.y - q.center.y;
    CHECK(center_distance_2d(p, q) == Catch::Approx(std::sqrt(dx * dx + dy * dy)));
  }
}

TEST_CASE("tracker config validation", "[core]") {
  TrackerConfig cfg;
  CHECK_NOTHROW(cfg.validate());

  TrackerConfig bad = cfg;
  bad.tau_e = bad.tau_f;  // padding would exhaust the forecast
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = cfg;
  bad.theta_out = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = cfg;
  bad.theta_out = 0.5;
  bad.theta_init = 0.4;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = cfg;
  bad.tau_h = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("query queue keeps a bounded, strictly increasing window", "[core]") {
  QueryQueue q(3);
  for (int t = 0; t < 6; ++t) {
    Query e;
    e.timestamp = t;
    e.feature = {double(t)};
    q.push(e);
    CHECK(q.size() <= 3);
  }
  CHECK(q.entries().front().timestamp == 3);
  CHECK(q.entries().back().timestamp == 5);
  Query stale;
  stale.timestamp = 4;
  CHECK_THROWS_AS(q.push(stale), std::invalid_argument);
}

TEST_CASE("forecast shift duplicates the tail", "[core]") {
  TrajectoryForecast f;
  f.origin_frame = 7;
  f.steps = {{1, 0}, {2, 0}, {3, 1}};
  auto s = f.shifted();
  CHECK(s.origin_frame == 8);
  REQUIRE(s.steps.size() == 3);
  CHECK(s.steps[0].x == 2.0);
  CHECK(s.steps[1].x == 3.0);
  CHECK(s.steps[2].x == 3.0);
  CHECK(s.steps[2].y == 1.0);
}

TEST_CASE("detections and track logs round-trip byte-identically", "[core][io]") {
  SplitMix64 rng(17);
  std::vector<io::DetectionRecord> dets;
  for (int i = 0; i < 20; ++i) {
    io::DetectionRecord d;
    d.frame = i / 4;
    d.box.center = {rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-3, 2)};
    d.box.length = rng.uniform(0.5, 5);
    d.box.width = rng.uniform(0.5, 2);
    d.box.height = rng.uniform(0.5, 2);
    d.box.yaw = normalize_yaw(rng.uniform(-4, 4));
    d.box.vx = rng.gaussian();
    d.box.vy = rng.gaussian();
    d.box.score = rng.uniform();
    d.box.class_id = int(rng.next() % 3);
    for (int c = 0; c < 8; ++c) d.feature.push_back(rng.gaussian());
    dets.push_back(d);
  }
  std::ostringstream first;
  io::write_detections(first, dets);
  std::istringstream in(first.str());
  auto parsed = io::read_detections(in);
  std::ostringstream second;
  io::write_detections(second, parsed);
  CHECK(first.str() == second.str());

  std::vector<io::TrackRecord> tracks;
  for (int i = 0; i < 15; ++i) {
    io::TrackRecord t;
    t.frame = i / 3;
    t.id = i % 5;
    t.box.center = {rng.uniform(-50, 50), rng.uniform(-50, 50), 0.5};
    t.box.score = rng.uniform();
    tracks.push_back(t);
  }
  std::ostringstream tfirst;
  io::write_tracks(tfirst, tracks);
  std::istringstream tin(tfirst.str());
  auto tparsed = io::read_tracks(tin);
  std::ostringstream tsecond;
  io::write_tracks(tsecond, tparsed);
  CHECK(tfirst.str() == tsecond.str());
}

TEST_CASE("malformed log lines are reported with line numbers", "[core][io]") {
  std::istringstream in("{\"frame\": 0, \"id\": 1, \"x\": 0}\n");
  try {
    io::read_tracks(in, "log.jsonl");
    FAIL("expected a parse error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("log.jsonl:1") != std::string::npos);
  }
}

TEST_CASE("weights file round-trips bit-exactly", "[core][io]") {
  TrackerConfig cfg;
  cfg.d = 8;
  cfg.attn_heads = 2;
  cfg.head_hidden = 6;
  ModelParams m = make_model_seeded(cfg, 123);
  std::ostringstream first;
  io::save_weights(first, m);

  std::istringstream in(first.str());
  ModelParams loaded = io::load_weights(in, cfg);
  std::ostringstream second;
  io::save_weights(second, loaded);
  CHECK(first.str() == second.str());

  auto ra = m.collect();
  auto rb = loaded.collect();
  REQUIRE(ra.size() == rb.size());
  for (size_t i = 0; i < ra.size(); ++i)
    for (size_t k = 0; k < ra[i].size; ++k) REQUIRE(ra[i].data[k] == rb[i].data[k]);
}

TEST_CASE("weights loader rejects dimension mismatches", "[core][io]") {
  TrackerConfig cfg;
  cfg.d = 8;
  cfg.attn_heads = 2;
  ModelParams m = make_model_seeded(cfg, 5);
  std::ostringstream out;
  io::save_weights(out, m);
  TrackerConfig other = cfg;
  other.d = 16;
  std::istringstream in(out.str());
  CHECK_THROWS_AS(io::load_weights(in, other), std::runtime_error);
}

TEST_CASE("splitmix64 streams are reproducible", "[core]") {
  SplitMix64 a(42), b(42);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next() == b.next());
  SplitMix64 c(43);
  CHECK(SplitMix64(42).next() != c.next());
}
