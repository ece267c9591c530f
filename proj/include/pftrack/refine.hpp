#pragma once

#include <cstdint>
#include <vector>

#include "pftrack/model.hpp"
#include "pftrack/nn.hpp"
#include "pftrack/types.hpp"

namespace pftrack {

// Eq-style output of the track refinement head: center residuals plus
// absolute size / yaw / velocity / score.
struct RefinementOutput {
  Vec3 residual;
  double length = 0.0, width = 0.0, height = 0.0;
  double yaw = 0.0;
  double vx = 0.0, vy = 0.0;
  double score = 0.0;
};

inline nn::Region to_region(const RegionBounds& b) {
  return {b.x_min, b.x_max, b.y_min, b.y_max, b.z_min, b.z_max};
}

// Attention window for one track: history entries (ascending timestamps)
// followed by the current query. PE is the relative frame offset, <= 0.
struct CrossFrameWindow {
  Tensor2D feats;
  Tensor2D pe_raw;
  std::vector<char> mask;  // all live; gaps simply have no row
};

inline CrossFrameWindow build_cross_frame_window(const QueryQueue& queue, const Query& current, int d) {
  CrossFrameWindow w;
  const int n = queue.size() + 1;
  w.feats = Tensor2D(n, d);
  w.pe_raw = Tensor2D(n, time_pe_dim(d));
  w.mask.assign(n, 1);
  int r = 0;
  for (const auto& q : queue.entries()) {
    for (int c = 0; c < d; ++c) w.feats.at(r, c) = q.feature[c];
    auto pe = nn::sinusoidal_pe(static_cast<double>(q.timestamp - current.timestamp), time_pe_dim(d));
    for (int c = 0; c < w.pe_raw.cols; ++c) w.pe_raw.at(r, c) = pe[c];
    ++r;
  }
  for (int c = 0; c < d; ++c) w.feats.at(r, c) = current.feature[c];
  auto pe0 = nn::sinusoidal_pe(0.0, time_pe_dim(d));
  for (int c = 0; c < w.pe_raw.cols; ++c) w.pe_raw.at(r, c) = pe0[c];
  return w;
}

// Refines one track's feature against its own history window. The center is
// untouched; an empty history degenerates to attention over the current
// query alone.
inline Query cross_frame_refine(const QueryQueue& queue, const Query& current,
                                const nn::AttentionStackParams& stack, int d,
                                FlopCounter* counter = nullptr, nn::StackCache* cache = nullptr) {
  auto w = build_cross_frame_window(queue, current, d);
  Tensor2D q_feats(1, d);
  for (int c = 0; c < d; ++c) q_feats.at(0, c) = current.feature[c];
  Tensor2D q_pe(1, time_pe_dim(d));
  auto pe0 = nn::sinusoidal_pe(0.0, time_pe_dim(d));
  for (int c = 0; c < q_pe.cols; ++c) q_pe.at(0, c) = pe0[c];

  Tensor2D out = nn::stack_forward(stack, q_feats, q_pe, w.feats, w.pe_raw, w.mask,
                                   /*self_attention=*/false, counter, cache);
  Query refined = current;
  refined.feature.assign(out.row(0), out.row(0) + d);
  return refined;
}

// Feature exchange across all objects of one frame, guided by 3D positional
// encodings of their centers. Order in == order out; centers untouched.
inline std::vector<Query> cross_object_refine(const std::vector<Query>& queries,
                                              const nn::AttentionStackParams& stack, int d,
                                              const RegionBounds& bounds,
                                              FlopCounter* counter = nullptr,
                                              std::uint64_t* clamp_count = nullptr,
                                              nn::StackCache* cache = nullptr) {
  if (queries.empty()) return {};
  const int n = static_cast<int>(queries.size());
  Tensor2D feats(n, d);
  Tensor2D pe_raw(n, center_pe_dim(d));
  const auto region = to_region(bounds);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < d; ++c) feats.at(i, c) = queries[i].feature[c];
    bool clamped = false;
    auto pe = nn::positional_encoding_3d(queries[i].center.x, queries[i].center.y,
                                         queries[i].center.z, region, center_pe_dim(d), &clamped);
    if (clamped && clamp_count) ++*clamp_count;
    for (int c = 0; c < pe_raw.cols; ++c) pe_raw.at(i, c) = pe[c];
  }
  std::vector<char> mask(n, 1);
  Tensor2D out = nn::stack_forward(stack, feats, pe_raw, Tensor2D(), Tensor2D(), mask,
                                   /*self_attention=*/true, counter, cache);
  std::vector<Query> result = queries;
  for (int i = 0; i < n; ++i) result[i].feature.assign(out.row(i), out.row(i) + d);
  return result;
}

inline RefinementOutput decode_refinement(const std::vector<double>& raw) {
  RefinementOutput r;
  r.residual = {raw[0], raw[1], raw[2]};
  r.length = nn::softplus(raw[3]);
  r.width = nn::softplus(raw[4]);
  r.height = nn::softplus(raw[5]);
  r.yaw = normalize_yaw(raw[6]);
  r.vx = raw[7];
  r.vy = raw[8];
  r.score = nn::sigmoid(raw[9]);
  return r;
}

// Head over the refined feature: center moves by the predicted residual,
// everything else is replaced outright. Features are not modified here.
inline std::pair<Box3D, RefinementOutput> refine_track(const Query& query, const Box3D& box,
                                                       const nn::MlpParams& head,
                                                       nn::MlpCache* cache = nullptr) {
  auto raw = nn::mlp_forward(query.feature, head, cache);
  RefinementOutput r = decode_refinement(raw);
  Box3D out = box;
  out.center = box.center + r.residual;
  out.length = r.length;
  out.width = r.width;
  out.height = r.height;
  out.yaw = r.yaw;
  out.vx = r.vx;
  out.vy = r.vy;
  out.score = r.score;
  return {out, r};
}

// Closed-form multiply-add count of the attention interaction for one call.
inline std::uint64_t mha_interaction_madds(int rq, int rk, int d) {
  return 2ull * rq * rk * d;
}

struct FlopComparison {
  std::uint64_t global = 0;
  std::uint64_t decoupled = 0;
};

// Measures one joint attention over all N*tau window tokens against the
// decoupled layout: N per-track windows (1 query x tau keys) plus one
// object-level exchange (N x N).
inline FlopComparison flop_compare(int n, int tau, int d) {
  if (n < 1 || tau < 1) throw std::invalid_argument("flop_compare: n and tau must be >= 1");
  nn::AttentionParams params;
  params.heads = 1;
  params.wq = Tensor2D(d, d);
  params.wk = Tensor2D(d, d);
  params.wv = Tensor2D(d, d);
  params.wo = Tensor2D(d, d);
  SplitMix64 rng(7);
  for (Tensor2D* t : {&params.wq, &params.wk, &params.wv, &params.wo})
    for (double& v : t->data) v = rng.uniform(-0.1, 0.1);

  auto random_feats = [&](int rows) {
    Tensor2D t(rows, d);
    for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
    return t;
  };
  const Tensor2D no_pe;
  const std::vector<char> no_mask;

  FlopComparison out;
  {
    FlopCounter c;
    Tensor2D tokens = random_feats(n * tau);
    nn::mha_forward(tokens, tokens, tokens, no_pe, no_pe, no_mask, params, &c);
    out.global = c.madds;
  }
  {
    FlopCounter c;
    for (int i = 0; i < n; ++i) {
      Tensor2D q = random_feats(1);
      Tensor2D k = random_feats(tau);
      nn::mha_forward(q, k, k, no_pe, no_pe, no_mask, params, &c);
    }
    Tensor2D objs = random_feats(n);
    nn::mha_forward(objs, objs, objs, no_pe, no_pe, no_mask, params, &c);
    out.decoupled = c.madds;
  }
  return out;
}

}  // namespace pftrack
