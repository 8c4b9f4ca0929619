#pragma once

#include <vector>

#include "rotamatch/geometry.hpp"
#include "rotamatch/tensor.hpp"

namespace rotamatch {

// Keypoints of one image. Positions are raw pixel coordinates in
// [0,W]x[0,H]; descriptors (n x d, rows unit-norm) are attached by the
// descriptor network and stay undefined until then.
struct KeypointSet {
  std::vector<geom::Vector2d> positions;
  Tensor descriptors;
  int width = 0, height = 0;

  size_t size() const { return positions.size(); }
};

// GT match: keypoint index in image a paired with index in image b.
struct MatchPair {
  int a = -1, b = -1;
};

}  // namespace rotamatch
