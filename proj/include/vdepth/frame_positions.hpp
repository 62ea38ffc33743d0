#pragma once

#include <vector>

#include "vdepth/tensor.hpp"

namespace vdepth {

// Original frame indices of a clip fragment. Temporal attention encodes
// these indices, so fragments sampled from a longer clip keep their source
// positions and true temporal gaps.
struct FramePositions {
  std::vector<int> indices;

  FramePositions() = default;
  explicit FramePositions(std::vector<int> idx) : indices(std::move(idx)) { validate(); }

  static FramePositions iota(int t) {
    std::vector<int> v(static_cast<size_t>(t));
    for (int i = 0; i < t; ++i) v[static_cast<size_t>(i)] = i;
    return FramePositions(std::move(v));
  }

  int size() const { return static_cast<int>(indices.size()); }

  void validate() const {
    check_arg(!indices.empty(), "FramePositions: empty");
    check_arg(indices.front() >= 0, "FramePositions: indices must be nonnegative");
    for (size_t i = 1; i < indices.size(); ++i)
      check_arg(indices[i] > indices[i - 1], "FramePositions: indices must be strictly increasing");
  }

  FramePositions shifted(int s) const {
    std::vector<int> v = indices;
    for (int& x : v) x += s;
    return FramePositions(std::move(v));
  }
};

}  // namespace vdepth
