#pragma once

#include <Eigen/Dense>
#include <vector>

#include "rotamatch/geometry.hpp"
#include "rotamatch/pipeline.hpp"

namespace rotamatch::viz {

// Rank-3 color projection of descriptor space: centered SVD components mapped
// to RGB with per-channel min-max scaling. Fitted once on one image, then
// applied unchanged to others for side-by-side comparison.
struct VizProjection {
  Eigen::Matrix<double, 3, Eigen::Dynamic> basis;  // orthonormal rows
  Eigen::RowVectorXd mean;
  double lo[3] = {0, 0, 0}, hi[3] = {0, 0, 0};
};

// Pixel-center grid positions with the given stride, row-major. For stride
// dividing both image sides the grid maps onto itself under quarter rotations.
std::vector<geom::Vector2d> grid_positions(int width, int height, int stride);

VizProjection fit_projection(const Tensor& descriptors);

// One output pixel per grid cell, channels clamped to [0,1].
geom::Image render_projection(const Tensor& descriptors, const VizProjection& proj,
                              int cells_x, int cells_y);

geom::Image rotate_image_quarter(const geom::Image& im, int angle_deg);

double mean_rgb_distance(const geom::Image& a, const geom::Image& b);

struct DescVizResult {
  geom::Image upright;          // rendering of the upright image
  geom::Image rotated;          // rendering of the rotated image, same projection
  geom::Image rotated_upright;  // upright rendering rotated afterward (reference)
  double discrepancy = 0;       // mean per-pixel RGB distance, rotated vs reference
};

// Dense descriptor rendering for an image and its quarter-rotated copy under
// one shared projection. A rotation-invariant descriptor makes rotated and
// rotated_upright identical; the discrepancy measures how far from that a
// trained descriptor is.
DescVizResult visualize_descriptors(const pipeline::DescriptorNet& net,
                                    const geom::Image& image, int angle_deg = 180,
                                    int stride = 4);

}  // namespace rotamatch::viz
