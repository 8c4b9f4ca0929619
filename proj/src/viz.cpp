#include "rotamatch/viz.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rotamatch::viz {

using Eigen::MatrixXd;

std::vector<geom::Vector2d> grid_positions(int width, int height, int stride) {
  std::vector<geom::Vector2d> out;
  for (int cy = 0; cy * stride < height; ++cy)
    for (int cx = 0; cx * stride < width; ++cx)
      out.emplace_back((cx + 0.5) * stride, (cy + 0.5) * stride);
  return out;
}

VizProjection fit_projection(const Tensor& descriptors) {
  const auto n = descriptors.rows();
  const auto d = descriptors.cols();
  MatrixXd m(n, d);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < d; ++j) m(i, j) = descriptors.at(i, j);
  VizProjection proj;
  proj.mean = m.colwise().mean();
  MatrixXd centered = m.rowwise() - proj.mean;
  Eigen::JacobiSVD<MatrixXd> svd(centered, Eigen::ComputeThinV);
  proj.basis = svd.matrixV().leftCols(3).transpose();
  MatrixXd comps = centered * proj.basis.transpose();
  for (int c = 0; c < 3; ++c) {
    proj.lo[c] = comps.col(c).minCoeff();
    proj.hi[c] = comps.col(c).maxCoeff();
  }
  return proj;
}

geom::Image render_projection(const Tensor& descriptors, const VizProjection& proj,
                              int cells_x, int cells_y) {
  if (descriptors.rows() != static_cast<int64_t>(cells_x) * cells_y)
    throw std::invalid_argument("descriptor count does not match grid");
  const auto d = descriptors.cols();
  geom::Image im = geom::Image::zeros(cells_y, cells_x, 3);
  Eigen::RowVectorXd row(d);
  for (int i = 0; i < cells_y; ++i)
    for (int j = 0; j < cells_x; ++j) {
      int64_t k = static_cast<int64_t>(i) * cells_x + j;
      for (int64_t c = 0; c < d; ++c) row(c) = descriptors.at(k, c);
      Eigen::Vector3d comp = proj.basis * (row - proj.mean).transpose();
      for (int c = 0; c < 3; ++c) {
        double denom = std::max(proj.hi[c] - proj.lo[c], 1e-12);
        im.at(i, j, c) = std::clamp((comp(c) - proj.lo[c]) / denom, 0.0, 1.0);
      }
    }
  return im;
}

geom::Image rotate_image_quarter(const geom::Image& im, int angle_deg) {
  int a = ((angle_deg % 360) + 360) % 360;
  if (a % 90 != 0) throw std::invalid_argument("quarter rotation only");
  if (a == 0) return im;
  const int h = im.h, w = im.w;
  geom::Image out = a == 180 ? geom::Image::zeros(h, w, im.c)
                             : geom::Image::zeros(w, h, im.c);
  for (int i = 0; i < out.h; ++i)
    for (int j = 0; j < out.w; ++j)
      for (int c = 0; c < im.c; ++c) {
        double v = a == 90    ? im.at(j, w - 1 - i, c)
                   : a == 180 ? im.at(h - 1 - i, w - 1 - j, c)
                              : im.at(h - 1 - j, i, c);
        out.at(i, j, c) = v;
      }
  return out;
}

double mean_rgb_distance(const geom::Image& a, const geom::Image& b) {
  if (a.h != b.h || a.w != b.w || a.c != b.c)
    throw std::invalid_argument("image shape mismatch");
  double sum = 0;
  for (int i = 0; i < a.h; ++i)
    for (int j = 0; j < a.w; ++j) {
      double d2 = 0;
      for (int c = 0; c < a.c; ++c) {
        double d = a.at(i, j, c) - b.at(i, j, c);
        d2 += d * d;
      }
      sum += std::sqrt(d2);
    }
  return sum / (static_cast<double>(a.h) * a.w);
}

DescVizResult visualize_descriptors(const pipeline::DescriptorNet& net,
                                    const geom::Image& image, int angle_deg,
                                    int stride) {
  if (image.w % stride != 0 || image.h % stride != 0)
    throw std::invalid_argument("stride must divide image size");
  const int cx = image.w / stride, cy = image.h / stride;
  auto pos = grid_positions(image.w, image.h, stride);
  KeypointSet up = pipeline::describe(nullptr, net, image, pos);
  VizProjection proj = fit_projection(up.descriptors);

  geom::Image rot_im = rotate_image_quarter(image, angle_deg);
  auto rpos = grid_positions(rot_im.w, rot_im.h, stride);
  KeypointSet rot = pipeline::describe(nullptr, net, rot_im, rpos);

  DescVizResult res;
  res.upright = render_projection(up.descriptors, proj, cx, cy);
  res.rotated = render_projection(rot.descriptors, proj, rot_im.w / stride,
                                  rot_im.h / stride);
  res.rotated_upright = rotate_image_quarter(res.upright, angle_deg);
  res.discrepancy = mean_rgb_distance(res.rotated, res.rotated_upright);
  return res;
}

}  // namespace rotamatch::viz
