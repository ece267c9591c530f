#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "pftrack/rng.hpp"
#include "pftrack/tensor.hpp"

namespace pftrack::nn {

// ---------------------------------------------------------------------------
// positional encodings
// ---------------------------------------------------------------------------

// Interleaved [sin(v/base^(2k/dim)), cos(v/base^(2k/dim))], k = 0..dim/2-1.
inline std::vector<double> sinusoidal_pe(double value, int dim, double base = 10000.0) {
  if (dim <= 0 || dim % 2 != 0) throw std::invalid_argument("sinusoidal_pe: dim must be even and > 0");
  if (!(base > 1.0)) throw std::invalid_argument("sinusoidal_pe: base must be > 1");
  std::vector<double> out(dim);
  for (int k = 0; k < dim / 2; ++k) {
    const double freq = std::pow(base, -2.0 * k / dim);
    out[2 * k] = std::sin(value * freq);
    out[2 * k + 1] = std::cos(value * freq);
  }
  return out;
}

struct Region {
  double x_min, x_max, y_min, y_max, z_min, z_max;
};

// Per-axis normalization into [0, 1] followed by per-axis sinusoidal
// encodings of dim/3 each. Out-of-region centers are clamped, not rejected;
// the caller can watch `clamped` to log them.
inline std::vector<double> positional_encoding_3d(double x, double y, double z, const Region& r,
                                                  int dim, bool* clamped = nullptr) {
  if (dim <= 0 || dim % 6 != 0) throw std::invalid_argument("positional_encoding_3d: dim must be divisible by 6");
  auto norm = [&](double v, double lo, double hi) {
    double n = (v - lo) / (hi - lo);
    if (n < 0.0 || n > 1.0) {
      if (clamped) *clamped = true;
      n = std::clamp(n, 0.0, 1.0);
    }
    return n;
  };
  std::vector<double> out;
  out.reserve(dim);
  for (double n : {norm(x, r.x_min, r.x_max), norm(y, r.y_min, r.y_max), norm(z, r.z_min, r.z_max)}) {
    auto part = sinusoidal_pe(n, dim / 3);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// MLP
// ---------------------------------------------------------------------------

enum class Activation { Relu, Identity };

struct MlpLayer {
  Tensor2D w;  // in x out
  std::vector<double> b;
  Activation act = Activation::Identity;
};

struct MlpParams {
  std::vector<MlpLayer> layers;

  int in_dim() const { return layers.empty() ? 0 : layers.front().w.rows; }
  int out_dim() const { return layers.empty() ? 0 : layers.back().w.cols; }

  void validate() const {
    for (size_t i = 0; i + 1 < layers.size(); ++i)
      if (layers[i].w.cols != layers[i + 1].w.rows)
        throw std::invalid_argument("MlpParams: layer dimensions do not chain");
    for (const auto& l : layers)
      if (static_cast<int>(l.b.size()) != l.w.cols)
        throw std::invalid_argument("MlpParams: bias size mismatch");
  }
};

struct MlpCache {
  std::vector<std::vector<double>> inputs;  // input of each layer
  std::vector<std::vector<double>> pre;     // pre-activation of each layer
};

inline std::vector<double> mlp_forward(const std::vector<double>& x, const MlpParams& p,
                                       MlpCache* cache = nullptr) {
  std::vector<double> cur = x;
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  for (const auto& layer : p.layers) {
    if (static_cast<int>(cur.size()) != layer.w.rows)
      throw std::invalid_argument("mlp_forward: input dimension mismatch");
    if (cache) cache->inputs.push_back(cur);
    std::vector<double> next(layer.w.cols);
    for (int j = 0; j < layer.w.cols; ++j) next[j] = layer.b[j];
    for (int i = 0; i < layer.w.rows; ++i) {
      const double xi = cur[i];
      if (xi == 0.0) continue;
      const double* wr = layer.w.row(i);
      for (int j = 0; j < layer.w.cols; ++j) next[j] += xi * wr[j];
    }
    if (cache) cache->pre.push_back(next);
    if (layer.act == Activation::Relu)
      for (double& v : next) v = v > 0.0 ? v : 0.0;
    cur = std::move(next);
  }
  return cur;
}

// Gradients accumulate into `grads` (same shape as params); returns dL/dx.
inline std::vector<double> mlp_backward(const MlpParams& p, const MlpCache& cache,
                                        const std::vector<double>& dout, MlpParams& grads) {
  if (grads.layers.size() != p.layers.size())
    throw std::invalid_argument("mlp_backward: grads shape mismatch");
  std::vector<double> d = dout;
  for (int li = static_cast<int>(p.layers.size()) - 1; li >= 0; --li) {
    const auto& layer = p.layers[li];
    auto& glayer = grads.layers[li];
    if (static_cast<int>(d.size()) != layer.w.cols)
      throw std::invalid_argument("mlp_backward: upstream dimension mismatch");
    if (layer.act == Activation::Relu) {
      const auto& pre = cache.pre[li];
      for (int j = 0; j < layer.w.cols; ++j)
        if (pre[j] <= 0.0) d[j] = 0.0;
    }
    const auto& x = cache.inputs[li];
    for (int j = 0; j < layer.w.cols; ++j) glayer.b[j] += d[j];
    std::vector<double> dx(layer.w.rows, 0.0);
    for (int i = 0; i < layer.w.rows; ++i) {
      const double* wr = layer.w.row(i);
      double* gwr = glayer.w.row(i);
      double s = 0.0;
      for (int j = 0; j < layer.w.cols; ++j) {
        gwr[j] += x[i] * d[j];
        s += wr[j] * d[j];
      }
      dx[i] = s;
    }
    d = std::move(dx);
  }
  return d;
}

// ---------------------------------------------------------------------------
// multi-head attention
// ---------------------------------------------------------------------------

struct AttentionParams {
  int heads = 1;
  Tensor2D wq, wk, wv, wo;  // all model_dim x model_dim

  int model_dim() const { return wq.rows; }

  void validate() const {
    const int d = wq.rows;
    for (const Tensor2D* t : {&wq, &wk, &wv, &wo})
      if (t->rows != d || t->cols != d) throw std::invalid_argument("AttentionParams: projections must be square and equal");
    if (heads < 1 || d % heads != 0)
      throw std::invalid_argument("AttentionParams: head count must divide model dim");
  }
};

struct MhaCache {
  Tensor2D q_in, k_in, v_raw;  // inputs after PE add
  Tensor2D q_proj, k_proj, v_proj;
  Tensor2D weights;  // (heads*Rq) x Rk softmax weights, masked entries exactly 0
  std::vector<char> mask;
  int heads = 0;
};

// Single attention op:
//   out = (queries + q_pe) + Wo * sum_j softmax_j(QK^T/sqrt(dh)) * (values Wv)
// PE tensors may be empty (treated as zero). Masked keys are skipped
// entirely, so their weight is exactly zero. Key-indexed reductions use
// order-canonical summation, making the output bit-identical under any
// simultaneous permutation of keys/values/k_pe/mask.
inline Tensor2D mha_forward(const Tensor2D& queries, const Tensor2D& keys, const Tensor2D& values,
                            const Tensor2D& q_pe, const Tensor2D& k_pe, const std::vector<char>& mask,
                            const AttentionParams& params, FlopCounter* counter = nullptr,
                            MhaCache* cache = nullptr) {
  params.validate();
  const int d = params.model_dim();
  const int rq = queries.rows;
  const int rk = keys.rows;
  if (queries.cols != d || keys.cols != d) throw std::invalid_argument("mha_forward: feature dim mismatch");
  if (values.rows != rk || values.cols != d) throw std::invalid_argument("mha_forward: key/value row mismatch");
  if (q_pe.rows != 0 && !q_pe.same_shape(queries)) throw std::invalid_argument("mha_forward: q_pe shape mismatch");
  if (k_pe.rows != 0 && !k_pe.same_shape(keys)) throw std::invalid_argument("mha_forward: k_pe shape mismatch");
  if (!mask.empty() && static_cast<int>(mask.size()) != rk)
    throw std::invalid_argument("mha_forward: mask length mismatch");

  int live_keys = 0;
  for (int j = 0; j < rk; ++j)
    if (mask.empty() || mask[j]) ++live_keys;
  if (rq > 0 && live_keys == 0) throw std::invalid_argument("mha_forward: all keys masked");

  Tensor2D q_in = q_pe.rows ? add(queries, q_pe) : queries;
  Tensor2D k_in = k_pe.rows ? add(keys, k_pe) : keys;

  Tensor2D q_proj = matmul(q_in, params.wq);
  Tensor2D k_proj = matmul(k_in, params.wk);
  Tensor2D v_proj = matmul(values, params.wv);

  const int heads = params.heads;
  const int dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  if (counter) counter->add(2ull * rq * rk * d);

  Tensor2D weights(heads * rq, rk);
  Tensor2D ctx(rq, d);
  std::vector<double> terms;
  for (int h = 0; h < heads; ++h) {
    const int off = h * dh;
    for (int i = 0; i < rq; ++i) {
      double maxlogit = -std::numeric_limits<double>::infinity();
      std::vector<double> logits(rk, 0.0);
      for (int j = 0; j < rk; ++j) {
        if (!mask.empty() && !mask[j]) continue;
        double s = 0.0;
        const double* qr = q_proj.row(i) + off;
        const double* kr = k_proj.row(j) + off;
        for (int t = 0; t < dh; ++t) s += qr[t] * kr[t];
        s *= scale;
        logits[j] = s;
        maxlogit = std::max(maxlogit, s);
      }
      terms.clear();
      for (int j = 0; j < rk; ++j)
        if (mask.empty() || mask[j]) terms.push_back(std::exp(logits[j] - maxlogit));
      const std::vector<double> expv = terms;  // key-order copy; sum_sorted reorders
      const double denom = sum_sorted(terms);
      double* wrow = weights.row(h * rq + i);
      {
        int t = 0;
        for (int j = 0; j < rk; ++j) {
          if (!mask.empty() && !mask[j]) {
            wrow[j] = 0.0;
            continue;
          }
          wrow[j] = expv[t++] / denom;
        }
      }
      double* crow = ctx.row(i) + off;
      for (int t = 0; t < dh; ++t) {
        terms.clear();
        for (int j = 0; j < rk; ++j) {
          if (wrow[j] == 0.0) continue;
          terms.push_back(wrow[j] * v_proj.at(j, off + t));
        }
        crow[t] = sum_sorted(terms);
      }
    }
  }

  Tensor2D out = add(q_in, matmul(ctx, params.wo));

  if (cache) {
    cache->q_in = q_in;
    cache->k_in = k_in;
    cache->v_raw = values;
    cache->q_proj = q_proj;
    cache->k_proj = k_proj;
    cache->v_proj = v_proj;
    cache->weights = weights;
    cache->mask = mask;
    cache->heads = heads;
  }
  return out;
}

struct MhaInputGrads {
  Tensor2D d_queries;  // also dL/d(q_pe)
  Tensor2D d_keys;     // also dL/d(k_pe)
  Tensor2D d_values;
};

inline MhaInputGrads mha_backward(const AttentionParams& params, const MhaCache& cache,
                                  const Tensor2D& dout, AttentionParams& grads) {
  const int d = params.model_dim();
  const int rq = cache.q_in.rows;
  const int rk = cache.k_in.rows;
  if (dout.rows != rq || dout.cols != d) throw std::invalid_argument("mha_backward: upstream shape mismatch");
  const int heads = cache.heads;
  const int dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  // out = q_in + ctx * Wo
  Tensor2D dctx(rq, d);
  add_A_Bt(dctx, dout, params.wo);  // dctx = dout * Wo^T
  // ctx reconstruction for dWo
  Tensor2D ctx(rq, d);
  for (int h = 0; h < heads; ++h) {
    const int off = h * dh;
    for (int i = 0; i < rq; ++i) {
      const double* wrow = cache.weights.row(h * rq + i);
      double* crow = ctx.row(i) + off;
      for (int j = 0; j < rk; ++j) {
        if (wrow[j] == 0.0) continue;
        const double* vr = cache.v_proj.row(j) + off;
        for (int t = 0; t < dh; ++t) crow[t] += wrow[j] * vr[t];
      }
    }
  }
  add_At_B(grads.wo, ctx, dout);

  Tensor2D dq_proj(rq, d), dk_proj(rk, d), dv_proj(rk, d);
  for (int h = 0; h < heads; ++h) {
    const int off = h * dh;
    for (int i = 0; i < rq; ++i) {
      const double* wrow = cache.weights.row(h * rq + i);
      const double* dcr = dctx.row(i) + off;
      // dS_ij = dctx_i . v_j ; softmax jacobian
      std::vector<double> ds(rk, 0.0);
      double dot_ws = 0.0;
      for (int j = 0; j < rk; ++j) {
        if (wrow[j] == 0.0) continue;
        const double* vr = cache.v_proj.row(j) + off;
        double s = 0.0;
        for (int t = 0; t < dh; ++t) s += dcr[t] * vr[t];
        ds[j] = s;
        dot_ws += wrow[j] * s;
        // value grad: dV_j += w_ij * dctx_i
        double* dvr = dv_proj.row(j) + off;
        for (int t = 0; t < dh; ++t) dvr[t] += wrow[j] * dcr[t];
      }
      for (int j = 0; j < rk; ++j) {
        if (wrow[j] == 0.0) continue;
        const double dlogit = wrow[j] * (ds[j] - dot_ws) * scale;
        const double* kr = cache.k_proj.row(j) + off;
        const double* qr = cache.q_proj.row(i) + off;
        double* dqr = dq_proj.row(i) + off;
        double* dkr = dk_proj.row(j) + off;
        for (int t = 0; t < dh; ++t) {
          dqr[t] += dlogit * kr[t];
          dkr[t] += dlogit * qr[t];
        }
      }
    }
  }

  add_At_B(grads.wq, cache.q_in, dq_proj);
  add_At_B(grads.wk, cache.k_in, dk_proj);
  add_At_B(grads.wv, cache.v_raw, dv_proj);

  MhaInputGrads out;
  out.d_queries = dout;  // residual path
  add_A_Bt(out.d_queries, dq_proj, params.wq);
  out.d_keys = Tensor2D(rk, d);
  add_A_Bt(out.d_keys, dk_proj, params.wk);
  out.d_values = Tensor2D(rk, d);
  add_A_Bt(out.d_values, dv_proj, params.wv);
  return out;
}

// ---------------------------------------------------------------------------
// attention stack: learned PE projection + N x (attention + feedforward)
// ---------------------------------------------------------------------------

struct AttentionLayerParams {
  AttentionParams attn;
  MlpParams ffn;  // d -> hidden -> d, residual
};

struct AttentionStackParams {
  Tensor2D pe_proj;  // raw PE dim x model dim
  std::vector<AttentionLayerParams> layers;
};

struct StackCache {
  Tensor2D q_pe_raw, k_pe_raw;
  Tensor2D memory_keys;    // key features + projected PE
  Tensor2D memory_values;  // raw key features
  bool self_attention = false;
  std::vector<MhaCache> attn;
  std::vector<std::vector<MlpCache>> ffn;      // per layer, per row
  std::vector<Tensor2D> ffn_inputs;            // stream entering each FFN
};

// Positional content is projected once. On the query side it is added into
// the stream and rides through every residual; on the key side it steers the
// attention logits only, values stay raw features.
inline Tensor2D stack_forward(const AttentionStackParams& p, const Tensor2D& query_feats,
                              const Tensor2D& q_pe_raw, const Tensor2D& key_feats,
                              const Tensor2D& k_pe_raw, const std::vector<char>& mask,
                              bool self_attention, FlopCounter* counter = nullptr,
                              StackCache* cache = nullptr) {
  Tensor2D stream = q_pe_raw.rows ? add(query_feats, matmul(q_pe_raw, p.pe_proj)) : query_feats;
  Tensor2D memory_keys, memory_values;
  if (!self_attention) {
    memory_keys = k_pe_raw.rows ? add(key_feats, matmul(k_pe_raw, p.pe_proj)) : key_feats;
    memory_values = key_feats;
  }
  if (cache) {
    cache->q_pe_raw = q_pe_raw;
    cache->k_pe_raw = k_pe_raw;
    cache->memory_keys = memory_keys;
    cache->memory_values = memory_values;
    cache->self_attention = self_attention;
    cache->attn.resize(p.layers.size());
    cache->ffn.resize(p.layers.size());
    cache->ffn_inputs.resize(p.layers.size());
  }
  const Tensor2D empty;
  for (size_t li = 0; li < p.layers.size(); ++li) {
    const auto& layer = p.layers[li];
    const Tensor2D& mem_k = self_attention ? stream : memory_keys;
    const Tensor2D& mem_v = self_attention ? stream : memory_values;
    stream = mha_forward(stream, mem_k, mem_v, empty, empty, mask, layer.attn, counter,
                         cache ? &cache->attn[li] : nullptr);
    if (cache) {
      cache->ffn_inputs[li] = stream;
      cache->ffn[li].resize(stream.rows);
    }
    for (int r = 0; r < stream.rows; ++r) {
      std::vector<double> row(stream.row(r), stream.row(r) + stream.cols);
      auto y = mlp_forward(row, layer.ffn, cache ? &cache->ffn[li][r] : nullptr);
      for (int c = 0; c < stream.cols; ++c) stream.at(r, c) += y[c];
    }
  }
  return stream;
}

struct StackInputGrads {
  Tensor2D d_query_feats;
  Tensor2D d_q_pe_raw;
  Tensor2D d_key_feats;
  Tensor2D d_k_pe_raw;
};

inline StackInputGrads stack_backward(const AttentionStackParams& p, const StackCache& cache,
                                      const Tensor2D& dout, AttentionStackParams& grads) {
  Tensor2D dstream = dout;
  Tensor2D dmem_keys(cache.memory_keys.rows, cache.memory_keys.cols);
  Tensor2D dmem_values(cache.memory_values.rows, cache.memory_values.cols);
  for (int li = static_cast<int>(p.layers.size()) - 1; li >= 0; --li) {
    const auto& layer = p.layers[li];
    // y = x + ffn(x)  =>  dx = dy + ffn'(dy)
    Tensor2D dattn_out = dstream;
    for (int r = 0; r < dstream.rows; ++r) {
      std::vector<double> drow(dstream.row(r), dstream.row(r) + dstream.cols);
      auto dx = mlp_backward(layer.ffn, cache.ffn[li][r], drow, grads.layers[li].ffn);
      for (int c = 0; c < dstream.cols; ++c) dattn_out.at(r, c) = drow[c] + dx[c];
    }
    auto ig = mha_backward(layer.attn, cache.attn[li], dattn_out, grads.layers[li].attn);
    if (cache.self_attention) {
      dstream = ig.d_queries;
      for (size_t i = 0; i < dstream.data.size(); ++i)
        dstream.data[i] += ig.d_keys.data[i] + ig.d_values.data[i];
    } else {
      dstream = ig.d_queries;
      for (size_t i = 0; i < dmem_keys.data.size(); ++i) dmem_keys.data[i] += ig.d_keys.data[i];
      for (size_t i = 0; i < dmem_values.data.size(); ++i)
        dmem_values.data[i] += ig.d_values.data[i];
    }
  }
  StackInputGrads out;
  out.d_query_feats = dstream;
  if (cache.q_pe_raw.rows) {
    out.d_q_pe_raw = Tensor2D(cache.q_pe_raw.rows, cache.q_pe_raw.cols);
    add_A_Bt(out.d_q_pe_raw, dstream, p.pe_proj);
    add_At_B(grads.pe_proj, cache.q_pe_raw, dstream);
  }
  if (!cache.self_attention) {
    // keys = feats + pe_proj(pe), values = feats
    out.d_key_feats = dmem_keys;
    for (size_t i = 0; i < out.d_key_feats.data.size(); ++i)
      out.d_key_feats.data[i] += dmem_values.data[i];
    if (cache.k_pe_raw.rows) {
      out.d_k_pe_raw = Tensor2D(cache.k_pe_raw.rows, cache.k_pe_raw.cols);
      add_A_Bt(out.d_k_pe_raw, dmem_keys, p.pe_proj);
      add_At_B(grads.pe_proj, cache.k_pe_raw, dmem_keys);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// losses
// ---------------------------------------------------------------------------

constexpr double kProbEps = 1e-7;

inline double focal_loss(double p, int target, double alpha = 0.25, double gamma = 2.0) {
  p = std::clamp(p, kProbEps, 1.0 - kProbEps);
  const double pt = target == 1 ? p : 1.0 - p;
  const double at = target == 1 ? alpha : 1.0 - alpha;
  return -at * std::pow(1.0 - pt, gamma) * std::log(pt);
}

// dL/dp; zero outside the clamp band so sigmoid outputs keep finite grads.
inline double focal_loss_dp(double p, int target, double alpha = 0.25, double gamma = 2.0) {
  if (p <= kProbEps || p >= 1.0 - kProbEps) return 0.0;
  const double pt = target == 1 ? p : 1.0 - p;
  const double at = target == 1 ? alpha : 1.0 - alpha;
  const double dpt = at * (gamma * std::pow(1.0 - pt, gamma - 1.0) * std::log(pt) -
                           std::pow(1.0 - pt, gamma) / pt);
  return target == 1 ? dpt : -dpt;
}

inline double l1_loss(const std::vector<double>& pred, const std::vector<double>& target) {
  if (pred.size() != target.size()) throw std::invalid_argument("l1_loss: length mismatch");
  if (pred.empty()) return 0.0;
  double s = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - target[i]);
  return s / static_cast<double>(pred.size());
}

inline std::vector<double> l1_loss_grad(const std::vector<double>& pred,
                                        const std::vector<double>& target) {
  if (pred.size() != target.size()) throw std::invalid_argument("l1_loss_grad: length mismatch");
  std::vector<double> g(pred.size(), 0.0);
  const double inv = pred.empty() ? 0.0 : 1.0 / static_cast<double>(pred.size());
  for (size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    g[i] = d > 0.0 ? inv : (d < 0.0 ? -inv : 0.0);
  }
  return g;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
inline double softplus_dx(double x) { return sigmoid(x); }

// ---------------------------------------------------------------------------
// parameter construction / enumeration
// ---------------------------------------------------------------------------

struct ParamRef {
  std::string name;
  std::vector<int> shape;
  double* data;
  std::size_t size;
};

inline void collect_params(MlpParams& p, const std::string& prefix, std::vector<ParamRef>& out) {
  for (size_t i = 0; i < p.layers.size(); ++i) {
    auto& l = p.layers[i];
    out.push_back({prefix + ".w" + std::to_string(i), {l.w.rows, l.w.cols}, l.w.data.data(), l.w.data.size()});
    out.push_back({prefix + ".b" + std::to_string(i), {static_cast<int>(l.b.size())}, l.b.data(), l.b.size()});
  }
}

inline void collect_params(AttentionStackParams& p, const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".pe_proj", {p.pe_proj.rows, p.pe_proj.cols}, p.pe_proj.data.data(), p.pe_proj.data.size()});
  for (size_t i = 0; i < p.layers.size(); ++i) {
    auto& l = p.layers[i];
    const std::string lp = prefix + ".layer" + std::to_string(i);
    out.push_back({lp + ".attn.wq", {l.attn.wq.rows, l.attn.wq.cols}, l.attn.wq.data.data(), l.attn.wq.data.size()});
    out.push_back({lp + ".attn.wk", {l.attn.wk.rows, l.attn.wk.cols}, l.attn.wk.data.data(), l.attn.wk.data.size()});
    out.push_back({lp + ".attn.wv", {l.attn.wv.rows, l.attn.wv.cols}, l.attn.wv.data.data(), l.attn.wv.data.size()});
    out.push_back({lp + ".attn.wo", {l.attn.wo.rows, l.attn.wo.cols}, l.attn.wo.data.data(), l.attn.wo.data.size()});
    collect_params(l.ffn, lp + ".ffn", out);
  }
}

inline MlpParams make_mlp(const std::vector<int>& dims, const std::vector<Activation>& acts) {
  if (acts.size() + 1 != dims.size()) throw std::invalid_argument("make_mlp: dims/acts mismatch");
  MlpParams p;
  for (size_t i = 0; i + 1 < dims.size(); ++i) {
    MlpLayer l;
    l.w = Tensor2D(dims[i], dims[i + 1]);
    l.b.assign(dims[i + 1], 0.0);
    l.act = acts[i];
    p.layers.push_back(std::move(l));
  }
  return p;
}

inline AttentionStackParams make_stack(int pe_dim, int d, int heads, int layers, int ffn_hidden) {
  AttentionStackParams p;
  p.pe_proj = Tensor2D(pe_dim, d);
  for (int i = 0; i < layers; ++i) {
    AttentionLayerParams l;
    l.attn.heads = heads;
    l.attn.wq = Tensor2D(d, d);
    l.attn.wk = Tensor2D(d, d);
    l.attn.wv = Tensor2D(d, d);
    l.attn.wo = Tensor2D(d, d);
    l.ffn = make_mlp({d, ffn_hidden, d}, {Activation::Relu, Activation::Identity});
    p.layers.push_back(std::move(l));
  }
  return p;
}

// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)); fan_in = first shape dim
inline void init_params(std::vector<ParamRef>& refs, SplitMix64& rng) {
  for (auto& r : refs) {
    const int fan_in = r.shape.front() > 0 ? r.shape.front() : 1;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    if (r.shape.size() == 1) {
      for (std::size_t i = 0; i < r.size; ++i) r.data[i] = 0.0;  // biases start at zero
    } else {
      for (std::size_t i = 0; i < r.size; ++i) r.data[i] = rng.uniform(-bound, bound);
    }
  }
}

}  // namespace pftrack::nn
