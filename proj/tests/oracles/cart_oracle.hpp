#pragma once
// Brute-force reference CART. Deliberately naive: every candidate split is
// scored by a fresh two-pass SSE over the node rows.

#include <algorithm>
#include <cstddef>
#include <memory>
#include <set>
#include <vector>

namespace oracle {

struct CartNode {
  int feature = -1;
  double threshold = 0.0;
  double mean = 0.0;
  std::size_t count = 0;
  std::unique_ptr<CartNode> left, right;
};

inline double node_mean(const std::vector<double>& y, const std::vector<std::size_t>& rows) {
  double s = 0.0;
  for (auto r : rows) s += y[r];
  return s / static_cast<double>(rows.size());
}

inline double node_sse(const std::vector<double>& y, const std::vector<std::size_t>& rows) {
  if (rows.empty()) return 0.0;
  const double m = node_mean(y, rows);
  double s = 0.0;
  for (auto r : rows) s += (y[r] - m) * (y[r] - m);
  return s;
}

// x is row-major with p columns. rows must be ascending.
inline std::unique_ptr<CartNode> cart(const std::vector<double>& x, std::size_t p, const std::vector<double>& y,
                                      const std::vector<std::size_t>& rows, double tie_tol = 1e-10) {
  auto node = std::make_unique<CartNode>();
  node->mean = node_mean(y, rows);
  node->count = rows.size();
  if (rows.size() < 2) return node;
  const double parent = node_sse(y, rows);
  if (parent <= 0.0) return node;

  struct Cand {
    std::size_t f;
    double t;
    double sse;
  };
  std::vector<Cand> cands;
  for (std::size_t f = 0; f < p; ++f) {
    std::set<double> vals;
    for (auto r : rows) vals.insert(x[r * p + f]);
    std::vector<double> v(vals.begin(), vals.end());
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
      double t = 0.5 * (v[i] + v[i + 1]);
      if (!(t < v[i + 1])) t = v[i];
      std::vector<std::size_t> l, r;
      for (auto row : rows) (x[row * p + f] <= t ? l : r).push_back(row);
      cands.push_back({f, t, node_sse(y, l) + node_sse(y, r)});
    }
  }
  if (cands.empty()) return node;
  double best = cands.front().sse;
  for (const auto& c : cands) best = std::min(best, c.sse);
  const double tol = tie_tol * parent;
  if (!(best < parent - tol)) return node;
  const Cand* pick = nullptr;
  for (const auto& c : cands) {
    if (c.sse <= best + tol) {
      pick = &c;
      break;
    }
  }
  node->feature = static_cast<int>(pick->f);
  node->threshold = pick->t;
  std::vector<std::size_t> l, r;
  for (auto row : rows) (x[row * p + pick->f] <= pick->t ? l : r).push_back(row);
  node->left = cart(x, p, y, l, tie_tol);
  node->right = cart(x, p, y, r, tie_tol);
  return node;
}

}  // namespace oracle
