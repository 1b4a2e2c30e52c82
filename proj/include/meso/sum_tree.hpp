#pragma once

// Binary sum tree over channel rates: O(log) update and categorical draw,
// O(1) total-rate lookup. Leaves are padded to a power of two.

#include <cstddef>
#include <cstdint>
#include <vector>

namespace meso::sim {

class RateTree {
 public:
  RateTree() = default;

  explicit RateTree(std::size_t channels) { reset(channels); }

  void reset(std::size_t channels) {
    channels_ = channels;
    leaf_count_ = 1;
    while (leaf_count_ < channels) leaf_count_ <<= 1;
    offset_ = leaf_count_ - 1;
    nodes_.assign(offset_ + leaf_count_, 0.0);
  }

  std::size_t size() const { return channels_; }
  double total() const { return nodes_.empty() ? 0.0 : nodes_[0]; }
  double rate(std::size_t i) const { return nodes_[offset_ + i]; }

  void set(std::size_t i, double value) {
    std::size_t node = offset_ + i;
    nodes_[node] = value;
    propagate(node);
  }

  /// Update a contiguous block of leaves, then recompute the shared
  /// ancestors once. Cheaper than per-leaf set() when a cell's channels
  /// are stored contiguously.
  void set_block(std::size_t first, std::size_t count, const double* values) {
    for (std::size_t k = 0; k < count; ++k) nodes_[offset_ + first + k] = values[k];
    std::size_t lo = offset_ + first;
    std::size_t hi = offset_ + first + (count ? count - 1 : 0);
    while (lo > 0) {
      lo = (lo - 1) / 2;
      hi = (hi - 1) / 2;
      for (std::size_t p = lo; p <= hi; ++p)
        nodes_[p] = nodes_[2 * p + 1] + nodes_[2 * p + 2];
    }
  }

  /// Channel whose cumulative-rate bin contains `value` in [0, total).
  std::size_t find(double value) const {
    std::size_t node = 0;
    while (node < offset_) {
      std::size_t left = 2 * node + 1;
      if (value <= nodes_[left] || nodes_[left + 1] <= 0.0) {
        node = left;
      } else {
        value -= nodes_[left];
        node = left + 1;
      }
    }
    return node - offset_;
  }

  /// Recompute every internal node from the leaves (audit path).
  void rebuild() {
    for (std::size_t p = offset_; p-- > 0;)
      nodes_[p] = nodes_[2 * p + 1] + nodes_[2 * p + 2];
  }

 private:
  void propagate(std::size_t node) {
    while (node > 0) {
      node = (node - 1) / 2;
      nodes_[node] = nodes_[2 * node + 1] + nodes_[2 * node + 2];
    }
  }

  std::size_t channels_ = 0;
  std::size_t leaf_count_ = 0;
  std::size_t offset_ = 0;
  std::vector<double> nodes_;
};

}  // namespace meso::sim
