#pragma once

// Test-side oracles, independent of the library's solver paths.

#include <cmath>
#include <queue>
#include <vector>

#include "ohm/dense.hpp"
#include "ohm/network.hpp"

namespace oracle {

// Dense Gaussian elimination with partial pivoting.
inline ohm::Vec dense_solve(ohm::Mat a, ohm::Vec b) {
  const int n = a.rows();
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
    if (std::abs(a(pivot, col)) < 1e-300) throw std::runtime_error("dense_solve: singular");
    if (pivot != col) {
      for (int k = 0; k < n; ++k) std::swap(a(col, k), a(pivot, k));
      std::swap(b[col], b[pivot]);
    }
    for (int r = col + 1; r < n; ++r) {
      const double f = a(r, col) / a(col, col);
      if (f == 0.0) continue;
      for (int k = col; k < n; ++k) a(r, k) -= f * a(col, k);
      b[r] -= f * b[col];
    }
  }
  ohm::Vec x(n, 0.0);
  for (int r = n - 1; r >= 0; --r) {
    double s = b[r];
    for (int k = r + 1; k < n; ++k) s -= a(r, k) * x[k];
    x[r] = s / a(r, r);
  }
  return x;
}

// Breadth-first reachability over network edges.
inline std::vector<char> bfs_reachable(const ohm::ResistorNetwork& net,
                                       const std::vector<int>& sources) {
  std::vector<std::vector<int>> adj(net.n_nodes());
  for (const auto& e : net.edges) {
    adj[e.i].push_back(e.j);
    adj[e.j].push_back(e.i);
  }
  std::vector<char> seen(net.n_nodes(), 0);
  std::queue<int> q;
  for (int s : sources) {
    seen[s] = 1;
    q.push(s);
  }
  while (!q.empty()) {
    const int v = q.front();
    q.pop();
    for (int w : adj[v])
      if (!seen[w]) {
        seen[w] = 1;
        q.push(w);
      }
  }
  return seen;
}

// Exact conductivity of a 1-d series chain: inverse of the summed resistance.
inline double series_sigma(const std::vector<double>& conductances) {
  double r = 0.0;
  for (double c : conductances) r += 1.0 / c;
  return 1.0 / r;
}

}  // namespace oracle
