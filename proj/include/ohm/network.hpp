#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ohm/cell_list.hpp"
#include "ohm/env.hpp"
#include "ohm/errors.hpp"
#include "ohm/geometry.hpp"
#include "ohm/union_find.hpp"

namespace ohm {

enum class NodeClass : std::uint8_t { Interior, InteriorIsolated, LeftReservoir, RightReservoir };

inline const char* node_class_name(NodeClass c) {
  switch (c) {
    case NodeClass::Interior: return "Interior";
    case NodeClass::InteriorIsolated: return "InteriorIsolated";
    case NodeClass::LeftReservoir: return "LeftReservoir";
    case NodeClass::RightReservoir: return "RightReservoir";
  }
  return "?";
}

struct NetworkEdge {
  int i = 0, j = 0;  // node ids, i < j
  double c = 0.0;
};

// Finite resistor network on the truncated stripe: classified nodes in
// network coordinates plus positive-conductance edges, each with at least one
// endpoint in the interior box.
struct ResistorNetwork {
  int dim = 0;
  double ell = 0.0;
  double margin = 0.0;
  DirectionFrame frame;  // geometry the network was built in
  Vec coords;            // flat node coordinates, network frame
  std::vector<NodeClass> classes;
  std::vector<NetworkEdge> edges;
  bool classified = false;
  bool aggregated = false;
  double tail_bound = 0.0;  // analytic bound on conductance ignored beyond the margin

  int n_nodes() const { return dim == 0 ? 0 : static_cast<int>(coords.size()) / dim; }
  std::span<const double> node(int i) const {
    return std::span<const double>(coords).subspan(static_cast<std::size_t>(i) * dim, dim);
  }
  double slab(int i) const { return frame.slab(node(i)); }

  std::vector<std::vector<int>> adjacency() const {
    std::vector<std::vector<int>> adj(n_nodes());
    for (std::size_t e = 0; e < edges.size(); ++e) {
      adj[edges[e].i].push_back(static_cast<int>(e));
      adj[edges[e].j].push_back(static_cast<int>(e));
    }
    return adj;
  }
};

namespace detail {

// Expected conductance reaching the interior from beyond the truncation, per
// unit of interior boundary mass: intensity * surface * int_R^inf e^(-2r/g) r^(d-1) dr.
inline double ma_residual_tail(const MillerAbrahams& ma, int dim, double intensity, double margin,
                               int n_interior) {
  const double s = 2.0 / ma.gamma;
  const int n = dim - 1;
  // int_R^inf r^n e^(-s r) dr = (n!/s^(n+1)) e^(-sR) sum_{k<=n} (sR)^k / k!
  double fact = 1.0;
  for (int k = 2; k <= n; ++k) fact *= k;
  double series = 0.0, term = 1.0;
  for (int k = 0; k <= n; ++k) {
    series += term;
    term *= s * margin / (k + 1);
  }
  const double integral = fact / std::pow(s, n + 1) * std::exp(-s * margin) * series;
  const double surface = 2.0 * std::pow(M_PI, dim / 2.0) / std::tgamma(dim / 2.0);
  return n_interior * intensity * surface * integral;
}

}  // namespace detail

// Builds (RN)_ell on the stripe truncated to |w.x| <= T + margin. Nodes are
// environment points mapped through the inverse rotation; edges are pairs of
// positive conductance with at least one endpoint in the interior box.
inline ResistorNetwork build_network(const Environment& env, const DirectionFrame& frame, double ell,
                                     double margin = -1.0) {
  if (!(ell > 0.0)) throw ParameterError("build_network: ell must be positive");
  if (frame.dim() != env.dim()) throw ParameterError("build_network: dimension mismatch");
  const double radius = env.cutoff_radius();
  if (margin < 0.0) {
    if (!std::isfinite(radius))
      throw ParameterError("build_network: model has unbounded range, pass an explicit margin");
    margin = radius;
  }

  const Box needed = frame.required_physical_box(ell, margin);
  if (!needed.inside(env.cloud().window))
    throw GeometryError("build_network: environment window does not cover the truncated stripe");

  ResistorNetwork net;
  net.dim = env.dim();
  net.ell = ell;
  net.margin = margin;
  net.frame = frame;

  // collect stripe nodes in network coordinates
  const double t_half = frame.slab_halfwidth(ell);
  std::vector<int> env_index;
  Vec coords;
  for (int i = 0; i < env.cloud().n_points(); ++i) {
    Vec q = frame.to_network(env.cloud().point(i));
    if (!frame.in_stripe(q, ell)) continue;
    const double s = frame.slab(q);
    if (std::abs(s) > t_half + margin) continue;
    env_index.push_back(i);
    coords.insert(coords.end(), q.begin(), q.end());
  }

  // stable lexicographic node order
  const int n = static_cast<int>(env_index.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto node_at = [&](int r) {
    return std::span<const double>(coords).subspan(static_cast<std::size_t>(r) * net.dim, net.dim);
  };
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    auto pa = node_at(a), pb = node_at(b);
    return std::lexicographical_compare(pa.begin(), pa.end(), pb.begin(), pb.end());
  });

  std::vector<int> env_of(n);
  net.coords.resize(coords.size());
  net.classes.resize(n);
  for (int r = 0; r < n; ++r) {
    const int src = order[r];
    env_of[r] = env_index[src];
    auto p = node_at(src);
    std::copy(p.begin(), p.end(), net.coords.begin() + static_cast<std::size_t>(r) * net.dim);
    const double s = frame.slab(p);
    if (s <= -t_half)
      net.classes[r] = NodeClass::LeftReservoir;
    else if (s >= t_half)
      net.classes[r] = NodeClass::RightReservoir;
    else
      net.classes[r] = NodeClass::Interior;
  }

  // pair enumeration: cell list out to the cutoff radius, all-pairs fallback
  // for unbounded-range fields
  auto try_edge = [&](int a, int b) {
    if (a > b) std::swap(a, b);
    const bool a_in = net.classes[a] == NodeClass::Interior;
    const bool b_in = net.classes[b] == NodeClass::Interior;
    if (!a_in && !b_in) return;
    const double c = env.conductance_by_index(env_of[a], env_of[b]);
    if (c > 0.0) net.edges.push_back({a, b, c});
  };
  if (std::isfinite(radius) && n > 0) {
    CellList cells(net.coords, net.dim, std::max(radius, 1e-9));
    for (int a = 0; a < n; ++a) {
      const auto pa = net.node(a);
      cells.for_candidates_near(pa, radius, [&](int b) {
        if (b <= a) return;
        const auto pb = net.node(b);
        double r2 = 0.0;
        for (int k = 0; k < net.dim; ++k) r2 += (pa[k] - pb[k]) * (pa[k] - pb[k]);
        if (r2 > radius * radius * (1.0 + 1e-12)) return;
        try_edge(a, b);
      });
    }
  } else {
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) try_edge(a, b);
  }
  std::sort(net.edges.begin(), net.edges.end(), [](const NetworkEdge& x, const NetworkEdge& y) {
    return x.i != y.i ? x.i < y.i : x.j < y.j;
  });

  if (const auto* ma = std::get_if<MillerAbrahams>(&env.model())) {
    int n_interior = 0;
    for (auto c : net.classes) n_interior += c == NodeClass::Interior;
    const double intensity =
        env.cloud().n_points() / std::max(env.cloud().window.volume(), 1e-300);
    net.tail_bound = detail::ma_residual_tail(*ma, net.dim, intensity, margin, n_interior);
  }
  return net;
}

// Union-find classification: interior nodes whose component never leaves the
// interior box become InteriorIsolated; reservoir nodes with no incident edge
// are dropped. Idempotent.
inline ResistorNetwork classify_and_prune(const ResistorNetwork& net) {
  const int n = net.n_nodes();
  UnionFind uf(n);
  for (const auto& e : net.edges) uf.unite(e.i, e.j);

  std::vector<char> touches_reservoir(n, 0);
  for (int v = 0; v < n; ++v)
    if (net.classes[v] == NodeClass::LeftReservoir || net.classes[v] == NodeClass::RightReservoir)
      touches_reservoir[uf.find(v)] = 1;

  std::vector<int> degree(n, 0);
  for (const auto& e : net.edges) {
    ++degree[e.i];
    ++degree[e.j];
  }

  ResistorNetwork out;
  out.dim = net.dim;
  out.ell = net.ell;
  out.margin = net.margin;
  out.frame = net.frame;
  out.tail_bound = net.tail_bound;
  out.classified = true;
  out.aggregated = net.aggregated;

  std::vector<int> remap(n, -1);
  for (int v = 0; v < n; ++v) {
    NodeClass cls = net.classes[v];
    const bool reservoir = cls == NodeClass::LeftReservoir || cls == NodeClass::RightReservoir;
    if (reservoir && degree[v] == 0) continue;  // dangling reservoir node
    if (!reservoir) cls = touches_reservoir[uf.find(v)] ? NodeClass::Interior : NodeClass::InteriorIsolated;
    remap[v] = out.n_nodes();
    auto p = net.node(v);
    out.coords.insert(out.coords.end(), p.begin(), p.end());
    out.classes.push_back(cls);
  }
  out.edges.reserve(net.edges.size());
  for (const auto& e : net.edges) out.edges.push_back({remap[e.i], remap[e.j], e.c});
  return out;
}

// Collapses each reservoir side to a single super-node placed on its face;
// parallel edges merge by summing conductances. Exact for the conductivity
// because reservoir nodes share a clamped potential.
inline ResistorNetwork aggregate_reservoirs(const ResistorNetwork& net) {
  if (!net.classified) throw ContractError("aggregate_reservoirs: classify_and_prune first");
  const int n = net.n_nodes();
  const double t_half = net.frame.slab_halfwidth(net.ell);

  ResistorNetwork out;
  out.dim = net.dim;
  out.ell = net.ell;
  out.margin = net.margin;
  out.frame = net.frame;
  out.tail_bound = net.tail_bound;
  out.classified = true;
  out.aggregated = true;

  bool has_left = false, has_right = false;
  for (int v = 0; v < n; ++v) {
    has_left |= net.classes[v] == NodeClass::LeftReservoir;
    has_right |= net.classes[v] == NodeClass::RightReservoir;
  }

  std::vector<int> remap(n, -1);
  for (int v = 0; v < n; ++v) {
    if (net.classes[v] == NodeClass::LeftReservoir || net.classes[v] == NodeClass::RightReservoir)
      continue;
    remap[v] = out.n_nodes();
    auto p = net.node(v);
    out.coords.insert(out.coords.end(), p.begin(), p.end());
    out.classes.push_back(net.classes[v]);
  }
  int left_id = -1, right_id = -1;
  auto add_super = [&](NodeClass cls, double sign) {
    const int id = out.n_nodes();
    Vec p(net.dim, 0.0);
    // super-node sits on the face: slab coordinate +-T, transverse origin
    for (int k = 0; k < net.dim; ++k) p[k] = sign * t_half * net.frame.w()[k];
    out.coords.insert(out.coords.end(), p.begin(), p.end());
    out.classes.push_back(cls);
    return id;
  };
  if (has_left) left_id = add_super(NodeClass::LeftReservoir, -1.0);
  if (has_right) right_id = add_super(NodeClass::RightReservoir, 1.0);
  for (int v = 0; v < n; ++v) {
    if (net.classes[v] == NodeClass::LeftReservoir) remap[v] = left_id;
    if (net.classes[v] == NodeClass::RightReservoir) remap[v] = right_id;
  }

  std::map<std::pair<int, int>, double> merged;
  for (const auto& e : net.edges) {
    int a = remap[e.i], b = remap[e.j];
    if (a == b) continue;  // edge inside one reservoir side (cannot happen by the edge rule)
    if (a > b) std::swap(a, b);
    merged[{a, b}] += e.c;
  }
  out.edges.reserve(merged.size());
  for (const auto& [key, c] : merged) out.edges.push_back({key.first, key.second, c});
  return out;
}

}  // namespace ohm
