#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>

#include "pftrack/nn.hpp"
#include "pftrack/rng.hpp"

using namespace pftrack;

namespace {

constexpr double kStep = 1e-5;
constexpr double kTol = 1e-4;

bool close(double analytic, double numeric) {
  const double denom = std::max(std::abs(analytic) + std::abs(numeric), 1e-6);
  return std::abs(analytic - numeric) / denom <= kTol;
}

// Central finite differences over every entry reachable through `eval`,
// compared against the analytic gradient already stored in `grad`.
int check_block(double* data, const double* grad, std::size_t n,
                const std::function<double()>& eval) {
  int bad = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double keep = data[i];
    data[i] = keep + kStep;
    const double up = eval();
    data[i] = keep - kStep;
    const double down = eval();
    data[i] = keep;
    const double numeric = (up - down) / (2.0 * kStep);
    if (!close(grad[i], numeric)) ++bad;
  }
  return bad;
}

Tensor2D random_tensor(SplitMix64& rng, int r, int c, double scale = 0.8) {
  Tensor2D t(r, c);
  for (double& v : t.data) v = rng.uniform(-scale, scale);
  return t;
}

double weighted_sum(const Tensor2D& out, const Tensor2D& g) {
  double s = 0.0;
  for (size_t i = 0; i < out.data.size(); ++i) s += out.data[i] * g.data[i];
  return s;
}

}  // namespace

TEST_CASE("attention gradients match finite differences", "[gradcheck]") {
  SplitMix64 rng(1234);
  int instances = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const int d = (trial % 2) ? 4 : 8;
    const int heads = (trial % 3 == 0) ? 1 : 2;
    const int rq = 1 + int(rng.next() % 3);
    const int rk = 1 + int(rng.next() % 4);

    nn::AttentionParams p;
    p.heads = heads;
    p.wq = random_tensor(rng, d, d);
    p.wk = random_tensor(rng, d, d);
    p.wv = random_tensor(rng, d, d);
    p.wo = random_tensor(rng, d, d);
    Tensor2D q = random_tensor(rng, rq, d);
    Tensor2D k = random_tensor(rng, rk, d);
    Tensor2D v = random_tensor(rng, rk, d);
    Tensor2D qpe = random_tensor(rng, rq, d, 0.3);
    Tensor2D kpe = random_tensor(rng, rk, d, 0.3);
    std::vector<char> mask(rk, 1);
    if (rk > 1) mask[rng.next() % rk] = 0;
    const Tensor2D g = random_tensor(rng, rq, d);

    auto eval = [&]() {
      return weighted_sum(nn::mha_forward(q, k, v, qpe, kpe, mask, p), g);
    };

    nn::MhaCache cache;
    nn::mha_forward(q, k, v, qpe, kpe, mask, p, nullptr, &cache);
    nn::AttentionParams grads;
    grads.heads = heads;
    grads.wq = Tensor2D(d, d);
    grads.wk = Tensor2D(d, d);
    grads.wv = Tensor2D(d, d);
    grads.wo = Tensor2D(d, d);
    auto ig = nn::mha_backward(p, cache, g, grads);

    int bad = 0;
    bad += check_block(p.wq.data.data(), grads.wq.data.data(), p.wq.data.size(), eval);
    bad += check_block(p.wk.data.data(), grads.wk.data.data(), p.wk.data.size(), eval);
    bad += check_block(p.wv.data.data(), grads.wv.data.data(), p.wv.data.size(), eval);
    bad += check_block(p.wo.data.data(), grads.wo.data.data(), p.wo.data.size(), eval);
    bad += check_block(q.data.data(), ig.d_queries.data.data(), q.data.size(), eval);
    bad += check_block(k.data.data(), ig.d_keys.data.data(), k.data.size(), eval);
    bad += check_block(v.data.data(), ig.d_values.data.data(), v.data.size(), eval);
    // PE enters additively: shares the query/key gradients
    bad += check_block(qpe.data.data(), ig.d_queries.data.data(), qpe.data.size(), eval);
    bad += check_block(kpe.data.data(), ig.d_keys.data.data(), kpe.data.size(), eval);
    REQUIRE(bad == 0);

    // masked key contributes exactly nothing
    if (rk > 1) {
      int masked_j = -1;
      for (int j = 0; j < rk; ++j)
        if (!mask[j]) masked_j = j;
      if (masked_j >= 0)
        for (int c = 0; c < d; ++c) REQUIRE(ig.d_values.at(masked_j, c) == 0.0);
    }
    ++instances;
  }
  CHECK(instances == 40);
}

TEST_CASE("zero upstream gradient produces zero gradients", "[gradcheck]") {
  SplitMix64 rng(55);
  const int d = 8;
  nn::AttentionParams p;
  p.heads = 2;
  p.wq = random_tensor(rng, d, d);
  p.wk = random_tensor(rng, d, d);
  p.wv = random_tensor(rng, d, d);
  p.wo = random_tensor(rng, d, d);
  Tensor2D q = random_tensor(rng, 2, d);
  Tensor2D k = random_tensor(rng, 3, d);
  nn::MhaCache cache;
  nn::mha_forward(q, k, k, {}, {}, {}, p, nullptr, &cache);
  nn::AttentionParams grads;
  grads.heads = 2;
  grads.wq = Tensor2D(d, d);
  grads.wk = Tensor2D(d, d);
  grads.wv = Tensor2D(d, d);
  grads.wo = Tensor2D(d, d);
  auto ig = nn::mha_backward(p, cache, Tensor2D(2, d), grads);
  for (double v : grads.wq.data) REQUIRE(v == 0.0);
  for (double v : grads.wo.data) REQUIRE(v == 0.0);
  for (double v : ig.d_keys.data) REQUIRE(v == 0.0);
}

TEST_CASE("mlp gradients match finite differences", "[gradcheck]") {
  SplitMix64 rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const int in = 2 + int(rng.next() % 4);
    const int hidden = 2 + int(rng.next() % 5);
    const int out_dim = 1 + int(rng.next() % 3);
    auto p = nn::make_mlp({in, hidden, out_dim}, {nn::Activation::Relu, nn::Activation::Identity});
    for (auto& l : p.layers) {
      for (double& v : l.w.data) v = rng.uniform(-1, 1);
      for (double& v : l.b) v = rng.uniform(-0.5, 0.5);
    }
    std::vector<double> x(in), g(out_dim);
    for (double& v : x) v = rng.uniform(-1, 1);
    for (double& v : g) v = rng.uniform(-1, 1);

    auto eval = [&]() {
      auto y = nn::mlp_forward(x, p);
      double s = 0.0;
      for (int i = 0; i < out_dim; ++i) s += y[i] * g[i];
      return s;
    };

    nn::MlpCache cache;
    nn::mlp_forward(x, p, &cache);
    auto grads = nn::make_mlp({in, hidden, out_dim}, {nn::Activation::Relu, nn::Activation::Identity});
    auto dx = nn::mlp_backward(p, cache, g, grads);

    int bad = 0;
    for (size_t li = 0; li < p.layers.size(); ++li) {
      bad += check_block(p.layers[li].w.data.data(), grads.layers[li].w.data.data(),
                         p.layers[li].w.data.size(), eval);
      bad += check_block(p.layers[li].b.data(), grads.layers[li].b.data(),
                         p.layers[li].b.size(), eval);
    }
    bad += check_block(x.data(), dx.data(), x.size(), eval);
    REQUIRE(bad == 0);
  }
}

TEST_CASE("attention stack gradients (pe projection, ffn, layers)", "[gradcheck]") {
  SplitMix64 rng(4242);
  for (int trial = 0; trial < 12; ++trial) {
    const int d = 4;
    const int pe_dim = 6;
    const bool self_attn = trial % 2 == 0;
    auto p = nn::make_stack(pe_dim, d, 2, 2, 6);
    {
      auto refs = std::vector<nn::ParamRef>{};
      nn::collect_params(p, "s", refs);
      for (auto& r : refs)
        for (size_t i = 0; i < r.size; ++i) r.data[i] = rng.uniform(-0.7, 0.7);
    }
    const int rq = 1 + int(rng.next() % 3);
    const int rk = self_attn ? rq : 1 + int(rng.next() % 3);
    Tensor2D qf = random_tensor(rng, rq, d);
    Tensor2D qpe = random_tensor(rng, rq, pe_dim, 0.5);
    Tensor2D kf = self_attn ? Tensor2D() : random_tensor(rng, rk, d);
    Tensor2D kpe = self_attn ? Tensor2D() : random_tensor(rng, rk, pe_dim, 0.5);
    std::vector<char> mask(rk, 1);
    const Tensor2D g = random_tensor(rng, rq, d);

    auto eval = [&]() {
      return weighted_sum(nn::stack_forward(p, qf, qpe, kf, kpe, mask, self_attn), g);
    };

    nn::StackCache cache;
    nn::stack_forward(p, qf, qpe, kf, kpe, mask, self_attn, nullptr, &cache);
    auto grads = nn::make_stack(pe_dim, d, 2, 2, 6);
    auto ig = nn::stack_backward(p, cache, g, grads);

    std::vector<nn::ParamRef> prefs, grefs;
    nn::collect_params(p, "s", prefs);
    nn::collect_params(grads, "s", grefs);
    int bad = 0;
    for (size_t i = 0; i < prefs.size(); ++i)
      bad += check_block(prefs[i].data, grefs[i].data, prefs[i].size, eval);
    bad += check_block(qf.data.data(), ig.d_query_feats.data.data(), qf.data.size(), eval);
    bad += check_block(qpe.data.data(), ig.d_q_pe_raw.data.data(), qpe.data.size(), eval);
    if (!self_attn) {
      bad += check_block(kf.data.data(), ig.d_key_feats.data.data(), kf.data.size(), eval);
      bad += check_block(kpe.data.data(), ig.d_k_pe_raw.data.data(), kpe.data.size(), eval);
    }
    REQUIRE(bad == 0);
  }
}

TEST_CASE("loss gradients match finite differences", "[gradcheck]") {
  SplitMix64 rng(31337);
  for (int trial = 0; trial < 20; ++trial) {
    const double p = rng.uniform(0.05, 0.95);
    const int target = rng.uniform() < 0.5 ? 1 : 0;
    const double alpha = rng.uniform(0.1, 0.9);
    const double gamma = rng.uniform(0.5, 3.0);
    const double numeric = (nn::focal_loss(p + kStep, target, alpha, gamma) -
                            nn::focal_loss(p - kStep, target, alpha, gamma)) /
                           (2.0 * kStep);
    REQUIRE(close(nn::focal_loss_dp(p, target, alpha, gamma), numeric));
  }
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + int(rng.next() % 5);
    std::vector<double> a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = rng.uniform(-2, 2);
      b[i] = rng.uniform(-2, 2);
      if (std::abs(a[i] - b[i]) < 1e-3) a[i] += 0.1;  // keep away from the kink
    }
    auto grad = nn::l1_loss_grad(a, b);
    int bad = 0;
    auto eval = [&]() { return nn::l1_loss(a, b); };
    bad += check_block(a.data(), grad.data(), a.size(), eval);
    REQUIRE(bad == 0);
  }
}
