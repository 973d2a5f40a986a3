#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "ohm/rng.hpp"

namespace ohm {

// Uniform-grid neighbor search over a flat coordinate array. Cell side equals
// the interaction radius, so candidate pairs come from adjacent cells only.
class CellList {
 public:
  CellList(std::span<const double> coords, int dim, double cell_size)
      : coords_(coords), dim_(dim), h_(cell_size) {
    const std::size_t n = coords.size() / dim;
    cells_.reserve(n);
    for (std::size_t i = 0; i < n; ++i) cells_[cell_key_(point_(i))].push_back(static_cast<int>(i));
  }

  // Visits every stored index j with |x_j - p| possibly <= radius; the caller
  // applies the exact distance test.
  template <typename F>
  void for_candidates_near(std::span<const double> p, double radius, F&& f) const {
    const int reach = static_cast<int>(std::ceil(radius / h_));
    std::vector<std::int64_t> base(dim_), idx(dim_);
    for (int k = 0; k < dim_; ++k) base[k] = coord_cell_(p[k]);
    walk_(0, base, idx, reach, f);
  }

  std::span<const double> point_(std::size_t i) const {
    return coords_.subspan(i * dim_, dim_);
  }

 private:
  std::int64_t coord_cell_(double x) const { return static_cast<std::int64_t>(std::floor(x / h_)); }

  std::uint64_t cell_key_(std::span<const double> p) const {
    rng::Key k(0x6365'6c6cULL);
    for (int a = 0; a < dim_; ++a) k.absorb(static_cast<std::uint64_t>(coord_cell_(p[a])));
    return k.bits(0);
  }

  std::uint64_t cell_key_from_idx_(const std::vector<std::int64_t>& idx) const {
    rng::Key k(0x6365'6c6cULL);
    for (int a = 0; a < dim_; ++a) k.absorb(static_cast<std::uint64_t>(idx[a]));
    return k.bits(0);
  }

  template <typename F>
  void walk_(int axis, const std::vector<std::int64_t>& base, std::vector<std::int64_t>& idx,
             int reach, F&& f) const {
    if (axis == dim_) {
      auto it = cells_.find(cell_key_from_idx_(idx));
      if (it == cells_.end()) return;
      for (int j : it->second) f(j);
      return;
    }
    for (std::int64_t o = -reach; o <= reach; ++o) {
      idx[axis] = base[axis] + o;
      walk_(axis + 1, base, idx, reach, f);
    }
  }

  std::span<const double> coords_;
  int dim_;
  double h_;
  std::unordered_map<std::uint64_t, std::vector<int>> cells_;
};

}  // namespace ohm
