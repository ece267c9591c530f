#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace pftrack {

// Row-major dense matrix of doubles. Small and boring on purpose: the
// interesting parts of this project are the algorithms on top, and gradient
// checks need double precision anyway.
struct Tensor2D {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor2D() = default;
  Tensor2D(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {
    if (r < 0 || c < 0) throw std::invalid_argument("Tensor2D: negative shape");
  }

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  double* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
  const double* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }

  bool same_shape(const Tensor2D& o) const { return rows == o.rows && cols == o.cols; }

  bool finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

// Counts attention-interaction multiply-adds (query-key logits and value
// mixing). These are the terms that grow quadratically with token count and
// are what the decoupled-attention comparison measures; per-token projection
// work is excluded since it scales identically in every layout.
struct FlopCounter {
  std::uint64_t madds = 0;
  void add(std::uint64_t n) { madds += n; }
};

inline Tensor2D matmul(const Tensor2D& a, const Tensor2D& b) {
  if (a.cols != b.rows) throw std::invalid_argument("matmul: inner dimensions differ");
  Tensor2D out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    const double* ar = a.row(i);
    double* orow = out.row(i);
    for (int k = 0; k < a.cols; ++k) {
      const double av = ar[k];
      if (av == 0.0) continue;
      const double* br = b.row(k);
      for (int j = 0; j < b.cols; ++j) orow[j] += av * br[j];
    }
  }
  return out;
}

// out += a^T * b
inline void add_At_B(Tensor2D& out, const Tensor2D& a, const Tensor2D& b) {
  if (a.rows != b.rows || out.rows != a.cols || out.cols != b.cols)
    throw std::invalid_argument("add_At_B: shape mismatch");
  for (int k = 0; k < a.rows; ++k) {
    const double* ar = a.row(k);
    const double* br = b.row(k);
    for (int i = 0; i < a.cols; ++i) {
      double* orow = out.row(i);
      const double av = ar[i];
      for (int j = 0; j < b.cols; ++j) orow[j] += av * br[j];
    }
  }
}

// out += a * b^T
inline void add_A_Bt(Tensor2D& out, const Tensor2D& a, const Tensor2D& b) {
  if (a.cols != b.cols || out.rows != a.rows || out.cols != b.rows)
    throw std::invalid_argument("add_A_Bt: shape mismatch");
  for (int i = 0; i < a.rows; ++i) {
    const double* ar = a.row(i);
    double* orow = out.row(i);
    for (int j = 0; j < b.rows; ++j) {
      const double* br = b.row(j);
      double s = 0.0;
      for (int k = 0; k < a.cols; ++k) s += ar[k] * br[k];
      orow[j] += s;
    }
  }
}

inline Tensor2D add(const Tensor2D& a, const Tensor2D& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("add: shape mismatch");
  Tensor2D out = a;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

// Order-canonical sum: addends are sorted by value before accumulation, so
// the result is bit-identical under any permutation of the inputs.
inline double sum_sorted(std::vector<double>& terms) {
  std::sort(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += t;
  return s;
}

}  // namespace pftrack
