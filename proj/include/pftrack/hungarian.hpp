#pragma once

#include <limits>
#include <stdexcept>
#include <vector>

#include "pftrack/tensor.hpp"

namespace pftrack {

// Sentinel for forbidden pairs (outside gate, wrong class). Large enough
// that one extra real match always beats any reshuffle of forbidden ones.
constexpr double kForbiddenCost = 1e9;

struct Assignment {
  std::vector<int> row_to_col;  // -1 when unassigned / forbidden
  double total_cost = 0.0;      // sum over kept (non-forbidden) pairs
};

// Min-cost one-to-one assignment (shortest augmenting path, O(n^3)).
// Rectangular inputs are padded internally; pairs at or above
// kForbiddenCost are dropped from the result.
inline Assignment hungarian(const Tensor2D& cost) {
  const int nr = cost.rows, nc = cost.cols;
  Assignment out;
  out.row_to_col.assign(nr, -1);
  if (nr == 0 || nc == 0) return out;
  for (double v : cost.data)
    if (!std::isfinite(v)) throw std::invalid_argument("hungarian: costs must be finite");

  const int n = std::max(nr, nc);
  auto cell = [&](int r, int c) -> double {
    if (r < nr && c < nc) return cost.at(r, c);
    return kForbiddenCost;  // padding
  };

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = 0;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cell(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }

  for (int j = 1; j <= n; ++j) {
    const int i = p[j];
    if (i >= 1 && i <= nr && j <= nc && cost.at(i - 1, j - 1) < kForbiddenCost) {
      out.row_to_col[i - 1] = j - 1;
      out.total_cost += cost.at(i - 1, j - 1);
    }
  }
  return out;
}

// Repeatedly takes the globally cheapest remaining pair below the sentinel.
inline Assignment greedy_assign(const Tensor2D& cost) {
  Assignment out;
  out.row_to_col.assign(cost.rows, -1);
  std::vector<char> row_used(cost.rows, 0), col_used(cost.cols, 0);
  while (true) {
    double best = kForbiddenCost;
    int br = -1, bc = -1;
    for (int r = 0; r < cost.rows; ++r) {
      if (row_used[r]) continue;
      for (int c = 0; c < cost.cols; ++c) {
        if (col_used[c]) continue;
        if (cost.at(r, c) < best) {
          best = cost.at(r, c);
          br = r;
          bc = c;
        }
      }
    }
    if (br < 0) break;
    row_used[br] = 1;
    col_used[bc] = 1;
    out.row_to_col[br] = bc;
    out.total_cost += best;
  }
  return out;
}

}  // namespace pftrack
