#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

#include "pftrack/geometry.hpp"
#include "pftrack/tensor.hpp"
#include "pftrack/types.hpp"

namespace pftrack {

// Constant-velocity filter over (x, y, z, yaw, l, w, h, vx, vy).
// The first 7 components are measured, velocities are inferred.
struct KalmanTrack {
  static constexpr int kStateDim = 9;
  static constexpr int kMeasDim = 7;

  std::array<double, kStateDim> state{};
  Tensor2D cov{kStateDim, kStateDim};
  TrackId id = 0;
  int age = 0;
  int hits = 0;
  int misses = 0;
  double score = 0.0;
  int class_id = 0;
};

struct KalmanNoise {
  double process_sigma = 0.1;      // per-dimension process noise (m)
  double measurement_sigma = 0.5;  // per-dimension measurement noise (m)
};

inline KalmanTrack kalman_init(const Box3D& box, TrackId id, const KalmanNoise& noise) {
  KalmanTrack t;
  t.id = id;
  t.state = {box.center.x, box.center.y, box.center.z, box.yaw,
             box.length,   box.width,    box.height,   box.vx,  box.vy};
  for (int i = 0; i < KalmanTrack::kMeasDim; ++i)
    t.cov.at(i, i) = noise.measurement_sigma * noise.measurement_sigma;
  t.cov.at(7, 7) = 1.0;
  t.cov.at(8, 8) = 1.0;
  t.score = box.score;
  t.class_id = box.class_id;
  t.hits = 1;
  return t;
}

inline Box3D kalman_box(const KalmanTrack& t) {
  Box3D b;
  b.center = {t.state[0], t.state[1], t.state[2]};
  b.yaw = normalize_yaw(t.state[3]);
  b.length = std::max(t.state[4], 1e-3);
  b.width = std::max(t.state[5], 1e-3);
  b.height = std::max(t.state[6], 1e-3);
  b.vx = t.state[7];
  b.vy = t.state[8];
  b.score = t.score;
  b.class_id = t.class_id;
  return b;
}

inline KalmanTrack kalman_predict(const KalmanTrack& track, double dt,
                                  const KalmanNoise& noise = {}) {
  if (!(dt > 0.0)) throw std::invalid_argument("kalman_predict: dt must be > 0");
  constexpr int n = KalmanTrack::kStateDim;
  KalmanTrack out = track;
  out.state[0] += track.state[7] * dt;
  out.state[1] += track.state[8] * dt;
  // P' = F P F^T + Q with F = I except F[0][7] = F[1][8] = dt
  Tensor2D f(n, n);
  for (int i = 0; i < n; ++i) f.at(i, i) = 1.0;
  f.at(0, 7) = dt;
  f.at(1, 8) = dt;
  Tensor2D fp = matmul(f, track.cov);
  Tensor2D p(n, n);
  add_A_Bt(p, fp, f);
  const double q = noise.process_sigma * noise.process_sigma;
  for (int i = 0; i < n; ++i) p.at(i, i) += q;
  // keep symmetric against accumulation drift
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double s = 0.5 * (p.at(i, j) + p.at(j, i));
      p.at(i, j) = s;
      p.at(j, i) = s;
    }
  out.cov = p;
  out.age += 1;
  return out;
}

// Gauss-Jordan inverse for the small innovation matrix.
inline Tensor2D invert(const Tensor2D& m) {
  const int n = m.rows;
  Tensor2D a = m;
  Tensor2D inv(n, n);
  for (int i = 0; i < n; ++i) inv.at(i, i) = 1.0;
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a.at(r, col)) > std::abs(a.at(pivot, col))) pivot = r;
    if (std::abs(a.at(pivot, col)) < 1e-12) throw std::runtime_error("invert: singular matrix");
    if (pivot != col)
      for (int c = 0; c < n; ++c) {
        std::swap(a.at(pivot, c), a.at(col, c));
        std::swap(inv.at(pivot, c), inv.at(col, c));
      }
    const double piv = a.at(col, col);
    for (int c = 0; c < n; ++c) {
      a.at(col, c) /= piv;
      inv.at(col, c) /= piv;
    }
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double factor = a.at(r, col);
      if (factor == 0.0) continue;
      for (int c = 0; c < n; ++c) {
        a.at(r, c) -= factor * a.at(col, c);
        inv.at(r, c) -= factor * inv.at(col, c);
      }
    }
  }
  return inv;
}

inline KalmanTrack kalman_update(const KalmanTrack& track, const Box3D& meas,
                                 const KalmanNoise& noise = {}) {
  constexpr int n = KalmanTrack::kStateDim;
  constexpr int m = KalmanTrack::kMeasDim;
  std::array<double, m> z = {meas.center.x, meas.center.y, meas.center.z,
                             meas.yaw,      meas.length,   meas.width,  meas.height};
  std::array<double, m> innov{};
  for (int i = 0; i < m; ++i) innov[i] = z[i] - track.state[i];
  innov[3] = normalize_yaw(innov[3]);  // wrap the angle residual

  // H picks the first m state components
  Tensor2D s(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) s.at(i, j) = track.cov.at(i, j);
  const double r = noise.measurement_sigma * noise.measurement_sigma;
  for (int i = 0; i < m; ++i) s.at(i, i) += r;
  Tensor2D s_inv = invert(s);

  Tensor2D pht(n, m);  // P H^T = first m columns of P
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) pht.at(i, j) = track.cov.at(i, j);
  Tensor2D k = matmul(pht, s_inv);  // n x m

  KalmanTrack out = track;
  for (int i = 0; i < n; ++i) {
    double dx = 0.0;
    for (int j = 0; j < m; ++j) dx += k.at(i, j) * innov[j];
    out.state[i] += dx;
  }
  out.state[3] = normalize_yaw(out.state[3]);

  // Joseph form: P = (I-KH) P (I-KH)^T + K R K^T
  Tensor2D ikh(n, n);
  for (int i = 0; i < n; ++i) ikh.at(i, i) = 1.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) ikh.at(i, j) -= k.at(i, j);
  Tensor2D tmp = matmul(ikh, track.cov);
  Tensor2D p(n, n);
  add_A_Bt(p, tmp, ikh);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double krk = 0.0;
      for (int t = 0; t < m; ++t) krk += k.at(i, t) * r * k.at(j, t);
      p.at(i, j) += krk;
    }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double sym = 0.5 * (p.at(i, j) + p.at(j, i));
      p.at(i, j) = sym;
      p.at(j, i) = sym;
    }
  out.cov = p;
  out.hits += 1;
  out.misses = 0;
  out.score = meas.score;
  return out;
}

}  // namespace pftrack
