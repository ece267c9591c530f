#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "pftrack/nn.hpp"
#include "pftrack/rng.hpp"
#include "pftrack/types.hpp"

namespace pftrack {

// Raw dimensionality of the sinusoidal encodings before the learned
// projection into model space. Time offsets use the model dim directly;
// 3D centers need a multiple of 6.
inline int time_pe_dim(int d) { return d; }
inline int center_pe_dim(int d) { return ((d + 5) / 6) * 6; }

// All learnable parameters of the tracker: the history-attention and
// object-attention stacks plus the box refinement head ("past.*"), and the
// motion attention stack plus the movement decode head ("future.*").
struct ModelParams {
  int d = 32;
  nn::AttentionStackParams cross_frame;
  nn::AttentionStackParams cross_object;
  nn::MlpParams refine_head;  // d -> hidden -> 10
  nn::AttentionStackParams motion_attn;
  nn::MlpParams decode_head;  // d -> hidden -> 2

  std::vector<nn::ParamRef> collect() {
    std::vector<nn::ParamRef> refs;
    nn::collect_params(cross_frame, "past.cross_frame", refs);
    nn::collect_params(cross_object, "past.cross_object", refs);
    nn::collect_params(refine_head, "past.refine_head", refs);
    nn::collect_params(motion_attn, "future.motion_attn", refs);
    nn::collect_params(decode_head, "future.decode_head", refs);
    return refs;
  }
};

inline ModelParams make_model(const TrackerConfig& cfg) {
  ModelParams m;
  m.d = cfg.d;
  const int ffn_hidden = cfg.ffn_mult * cfg.d;
  m.cross_frame = nn::make_stack(time_pe_dim(cfg.d), cfg.d, cfg.attn_heads, cfg.attn_layers, ffn_hidden);
  m.cross_object = nn::make_stack(center_pe_dim(cfg.d), cfg.d, cfg.attn_heads, cfg.attn_layers, ffn_hidden);
  m.refine_head = nn::make_mlp({cfg.d, cfg.head_hidden, 10},
                               {nn::Activation::Relu, nn::Activation::Identity});
  m.motion_attn = nn::make_stack(time_pe_dim(cfg.d), cfg.d, cfg.attn_heads, cfg.attn_layers, ffn_hidden);
  m.decode_head = nn::make_mlp({cfg.d, cfg.decode_hidden, 2},
                               {nn::Activation::Relu, nn::Activation::Identity});
  return m;
}

inline ModelParams make_model_seeded(const TrackerConfig& cfg, std::uint64_t seed) {
  ModelParams m = make_model(cfg);
  SplitMix64 rng(seed);
  auto refs = m.collect();
  nn::init_params(refs, rng);
  // Residual-stream-friendly init for the refinement stacks: their write-side
  // projections start small so each stack begins near identity and the
  // feature scale (the evidence signal the score head reads) survives the
  // recurrent queue loop. The motion stack is not part of that loop and
  // keeps full-strength routing.
  for (auto& r : refs) {
    const bool write_side = r.name.find(".pe_proj") != std::string::npos ||
                            r.name.find(".attn.wo") != std::string::npos ||
                            r.name.find(".ffn.w1") != std::string::npos;
    if (write_side && r.name.rfind("past.", 0) == 0)
      for (std::size_t i = 0; i < r.size; ++i) r.data[i] *= 0.1;
  }
  return m;
}

// Zero-filled parameter set with identical shapes, used as a gradient buffer.
inline ModelParams make_grads_like(const TrackerConfig& cfg) { return make_model(cfg); }

inline void zero_params(ModelParams& m) {
  for (auto& r : m.collect())
    for (std::size_t i = 0; i < r.size; ++i) r.data[i] = 0.0;
}

}  // namespace pftrack
