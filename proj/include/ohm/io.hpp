#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ohm/errors.hpp"
#include "ohm/network.hpp"
#include "ohm/solver.hpp"

namespace ohm {

// Shortest representation that round-trips exactly.
inline std::string fmt_double(double v) {
  char buf[40];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

// Full-precision scientific notation, also round-trip exact.
inline std::string fmt_double_sci(double v) {
  char buf[48];
  auto r = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::scientific);
  return std::string(buf, r.ptr);
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw IoError("parse_double: malformed number '" + s + "'");
  return v;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << content;
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// --------------------------------------------------------------------------
// Point cloud dump: one line per point, whitespace-separated coordinates.

inline std::string dump_point_cloud(const PointCloud& cloud) {
  std::string out;
  for (int i = 0; i < cloud.n_points(); ++i) {
    const auto p = cloud.point(i);
    for (int k = 0; k < cloud.dim; ++k) {
      if (k) out += ' ';
      out += fmt_double(p[k]);
    }
    out += '\n';
  }
  return out;
}

inline PointCloud parse_point_cloud(const std::string& text) {
  PointCloud cloud;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    Vec row;
    std::string tok;
    while (ls >> tok) row.push_back(parse_double(tok));
    if (cloud.dim == 0) {
      cloud.dim = static_cast<int>(row.size());
      cloud.window.lo.assign(cloud.dim, 0.0);
      cloud.window.hi.assign(cloud.dim, 0.0);
    }
    if (static_cast<int>(row.size()) != cloud.dim)
      throw IoError("parse_point_cloud: inconsistent dimension");
    for (int k = 0; k < cloud.dim; ++k) {
      if (cloud.n_points() == 0 || row[k] < cloud.window.lo[k]) cloud.window.lo[k] = row[k];
      if (cloud.n_points() == 0 || row[k] > cloud.window.hi[k]) cloud.window.hi[k] = row[k];
    }
    cloud.coords.insert(cloud.coords.end(), row.begin(), row.end());
  }
  return cloud;
}

// --------------------------------------------------------------------------
// Network dump: header `d ell n_nodes n_edges`, nodes `id x1..xd class`,
// edges `i j c` with c in full-precision scientific notation.

inline std::string dump_network(const ResistorNetwork& net) {
  std::string out = std::to_string(net.dim) + " " + fmt_double(net.ell) + " " +
                    std::to_string(net.n_nodes()) + " " + std::to_string(net.edges.size()) + "\n";
  for (int v = 0; v < net.n_nodes(); ++v) {
    out += std::to_string(v);
    const auto p = net.node(v);
    for (int k = 0; k < net.dim; ++k) {
      out += ' ';
      out += fmt_double(p[k]);
    }
    out += ' ';
    out += node_class_name(net.classes[v]);
    out += '\n';
  }
  for (const auto& e : net.edges) {
    out += std::to_string(e.i) + " " + std::to_string(e.j) + " " + fmt_double_sci(e.c) + "\n";
  }
  return out;
}

inline ResistorNetwork parse_network(const std::string& text) {
  std::istringstream in(text);
  ResistorNetwork net;
  int n_nodes = 0;
  std::size_t n_edges = 0;
  std::string ell_tok;
  if (!(in >> net.dim >> ell_tok >> n_nodes >> n_edges)) throw IoError("parse_network: bad header");
  net.ell = parse_double(ell_tok);
  net.frame = DirectionFrame::box_stripe(net.dim);
  net.coords.resize(static_cast<std::size_t>(n_nodes) * net.dim);
  net.classes.resize(n_nodes);
  for (int v = 0; v < n_nodes; ++v) {
    int id = 0;
    if (!(in >> id) || id != v) throw IoError("parse_network: node ids must be 0..n-1 in order");
    std::string tok;
    for (int k = 0; k < net.dim; ++k) {
      if (!(in >> tok)) throw IoError("parse_network: truncated node line");
      net.coords[static_cast<std::size_t>(v) * net.dim + k] = parse_double(tok);
    }
    std::string cls;
    if (!(in >> cls)) throw IoError("parse_network: missing node class");
    if (cls == "Interior")
      net.classes[v] = NodeClass::Interior;
    else if (cls == "InteriorIsolated")
      net.classes[v] = NodeClass::InteriorIsolated;
    else if (cls == "LeftReservoir")
      net.classes[v] = NodeClass::LeftReservoir;
    else if (cls == "RightReservoir")
      net.classes[v] = NodeClass::RightReservoir;
    else
      throw IoError("parse_network: unknown node class '" + cls + "'");
  }
  for (std::size_t e = 0; e < n_edges; ++e) {
    NetworkEdge edge;
    std::string tok;
    if (!(in >> edge.i >> edge.j >> tok)) throw IoError("parse_network: truncated edge line");
    edge.c = parse_double(tok);
    net.edges.push_back(edge);
  }
  net.classified = true;
  return net;
}

// --------------------------------------------------------------------------
// Solution dump: `id potential` per node.

inline std::string dump_solution(const PotentialSolution& sol) {
  std::string out;
  for (std::size_t v = 0; v < sol.values.size(); ++v)
    out += std::to_string(v) + " " + fmt_double(sol.values[v]) + "\n";
  return out;
}

}  // namespace ohm
