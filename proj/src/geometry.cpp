#include "rotamatch/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace rotamatch::geom {

namespace {

std::atomic<uint64_t> g_rotation_ops{0};

constexpr double kPi = 3.14159265358979323846;

Matrix3d rz_for_quarter(int angle) {
  // Camera-frame z-rotation absorbing the in-plane pixel map; entries are
  // exact 0/±1 so repeated application stays bit-exact.
  Matrix3d q = Matrix3d::Identity();
  switch (angle) {
    case 0:
      break;
    case 90:
      q << 0, 1, 0, -1, 0, 0, 0, 0, 1;
      break;
    case 180:
      q << -1, 0, 0, 0, -1, 0, 0, 0, 1;
      break;
    case 270:
      q << 0, -1, 0, 1, 0, 0, 0, 0, 1;
      break;
    default:
      throw std::invalid_argument("quarter rotation angle must be 0/90/180/270");
  }
  return q;
}

int normalize_quarter(double angle_deg) {
  double a = std::fmod(angle_deg, 360.0);
  if (a < 0) a += 360.0;
  int ai = static_cast<int>(std::lround(a));
  if (ai == 360) ai = 0;
  if (ai != 0 && ai != 90 && ai != 180 && ai != 270)
    throw std::invalid_argument("quarter rotation angle must be 0/90/180/270, got " +
                                std::to_string(angle_deg));
  return ai;
}

Image rotate_image_quarter(const Image& im, int angle) {
  if (angle == 0) return im;
  const int h = im.h, w = im.w, c = im.c;
  Image out;
  out.c = c;
  if (angle == 180) {
    out.h = h;
    out.w = w;
    out.px.resize(im.px.size());
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j)
        for (int k = 0; k < c; ++k)
          out.at(i, j, k) = im.at(h - 1 - i, w - 1 - j, k);
    return out;
  }
  out.h = w;
  out.w = h;
  out.px.resize(im.px.size());
  if (angle == 90) {
    for (int i = 0; i < out.h; ++i)
      for (int j = 0; j < out.w; ++j)
        for (int k = 0; k < c; ++k) out.at(i, j, k) = im.at(j, w - 1 - i, k);
  } else {  // 270
    for (int i = 0; i < out.h; ++i)
      for (int j = 0; j < out.w; ++j)
        for (int k = 0; k < c; ++k) out.at(i, j, k) = im.at(h - 1 - j, i, k);
  }
  return out;
}

DepthMap rotate_depth_quarter(const DepthMap& d, int angle) {
  if (angle == 0) return d;
  const int h = d.h, w = d.w;
  DepthMap out;
  if (angle == 180) {
    out = DepthMap::zeros(h, w);
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) out.at(i, j) = d.at(h - 1 - i, w - 1 - j);
    return out;
  }
  out = DepthMap::zeros(w, h);
  if (angle == 90) {
    for (int i = 0; i < out.h; ++i)
      for (int j = 0; j < out.w; ++j) out.at(i, j) = d.at(j, w - 1 - i);
  } else {
    for (int i = 0; i < out.h; ++i)
      for (int j = 0; j < out.w; ++j) out.at(i, j) = d.at(h - 1 - j, i);
  }
  return out;
}

Camera rotate_camera_quarter(const Camera& cam, int angle) {
  Camera out = cam;
  const double w = cam.width, h = cam.height;
  switch (angle) {
    case 0:
      return out;
    case 90:
      out.fx = cam.fy;
      out.fy = cam.fx;
      out.cx = cam.cy;
      out.cy = w - cam.cx;
      out.width = cam.height;
      out.height = cam.width;
      break;
    case 180:
      out.cx = w - cam.cx;
      out.cy = h - cam.cy;
      break;
    case 270:
      out.fx = cam.fy;
      out.fy = cam.fx;
      out.cx = h - cam.cy;
      out.cy = cam.cx;
      out.width = cam.height;
      out.height = cam.width;
      break;
  }
  Matrix3d q = rz_for_quarter(angle);
  out.R = q * cam.R;
  out.t = q * cam.t;
  return out;
}

}  // namespace

Image Image::zeros(int h, int w, int c) {
  Image im;
  im.h = h;
  im.w = w;
  im.c = c;
  im.px.assign(static_cast<size_t>(h) * w * c, 0.0);
  return im;
}

double Image::sample(double x, double y, int ch) const {
  const double u = x - 0.5, v = y - 0.5;
  const double fx0 = std::floor(u), fy0 = std::floor(v);
  const int x0 = static_cast<int>(fx0), y0 = static_cast<int>(fy0);
  const double ax = u - fx0, ay = v - fy0;
  auto read = [&](int yy, int xx) -> double {
    if (xx < 0 || xx >= w || yy < 0 || yy >= h) return 0.0;
    return at(yy, xx, ch);
  };
  return (1 - ax) * (1 - ay) * read(y0, x0) + ax * (1 - ay) * read(y0, x0 + 1) +
         (1 - ax) * ay * read(y0 + 1, x0) + ax * ay * read(y0 + 1, x0 + 1);
}

DepthMap DepthMap::zeros(int h, int w) {
  DepthMap d;
  d.h = h;
  d.w = w;
  d.z.assign(static_cast<size_t>(h) * w, 0.0);
  return d;
}

double DepthMap::lookup(double x, double y) const {
  const int ix = static_cast<int>(std::floor(x));
  const int iy = static_cast<int>(std::floor(y));
  if (ix < 0 || ix >= w || iy < 0 || iy >= h) return 0.0;
  return at(iy, ix);
}

void Camera::validate() const {
  if (!(fx > 0) || !(fy > 0))
    throw std::invalid_argument("camera: focal lengths must be positive");
  if (cx < 0 || cx > width || cy < 0 || cy > height)
    throw std::invalid_argument("camera: principal point outside image");
  Matrix3d err = R.transpose() * R - Matrix3d::Identity();
  if (err.cwiseAbs().maxCoeff() > 1e-9)
    throw std::invalid_argument("camera: R is not orthonormal");
  if (std::abs(R.determinant() - 1.0) > 1e-9)
    throw std::invalid_argument("camera: det(R) != +1");
}

PixelDepth project(const Camera& cam, const Vector3d& point_world) {
  Vector3d pc = cam.R * point_world + cam.t;
  if (pc.z() <= 0)
    throw BehindCameraError("project: point behind camera (z=" +
                            std::to_string(pc.z()) + ")");
  return {Vector2d(cam.fx * pc.x() / pc.z() + cam.cx,
                   cam.fy * pc.y() / pc.z() + cam.cy),
          pc.z()};
}

Vector3d unproject(const Camera& cam, const Vector2d& pixel, double depth) {
  if (!(depth > 0)) throw InvalidDepthError("unproject: depth must be positive");
  Vector3d pc((pixel.x() - cam.cx) / cam.fx * depth,
              (pixel.y() - cam.cy) / cam.fy * depth, depth);
  return cam.R.transpose() * (pc - cam.t);
}

Correspondence gt_correspondence(const ViewPair& pair, const Vector2d& pixel_a,
                                 double occlusion_rel_tol) {
  const double za = pair.depth_a.lookup(pixel_a.x(), pixel_a.y());
  if (za <= 0) return {CorrStatus::kNoDepth, {}};
  Vector3d pw = unproject(pair.camera_a, pixel_a, za);
  Vector3d pc = pair.camera_b.R * pw + pair.camera_b.t;
  if (pc.z() <= 0) return {CorrStatus::kOccluded, {}};
  Vector2d pb(pair.camera_b.fx * pc.x() / pc.z() + pair.camera_b.cx,
              pair.camera_b.fy * pc.y() / pc.z() + pair.camera_b.cy);
  if (pb.x() < 0 || pb.x() > pair.camera_b.width || pb.y() < 0 ||
      pb.y() > pair.camera_b.height)
    return {CorrStatus::kOccluded, {}};
  const double zb = pair.depth_b.lookup(pb.x(), pb.y());
  if (zb <= 0) return {CorrStatus::kNoDepth, {}};
  if (std::abs(pc.z() - zb) > occlusion_rel_tol * zb)
    return {CorrStatus::kOccluded, {}};
  return {CorrStatus::kOk, pb};
}

PixelMap PixelMap::inverse() const {
  PixelMap inv;
  inv.A = A.inverse();
  inv.offset = -(inv.A * offset);
  return inv;
}

PixelMap quarter_pixel_map(int angle_deg, int width, int height) {
  const double w = width, h = height;
  PixelMap m;
  switch (normalize_quarter(angle_deg)) {
    case 0:
      break;
    case 90:
      m.A << 0, 1, -1, 0;
      m.offset = Vector2d(0, w);
      break;
    case 180:
      m.A << -1, 0, 0, -1;
      m.offset = Vector2d(w, h);
      break;
    case 270:
      m.A << 0, -1, 1, 0;
      m.offset = Vector2d(h, 0);
      break;
  }
  return m;
}

PixelMap arbitrary_pixel_map(double angle_deg, int width, int height) {
  const double a = angle_deg * kPi / 180.0;
  const double ca = std::cos(a), sa = std::sin(a);
  PixelMap m;
  // Counterclockwise in the viewed image; y grows downward, hence the sign.
  m.A << ca, sa, -sa, ca;
  Vector2d c(width / 2.0, height / 2.0);
  m.offset = c - m.A * c;
  return m;
}

ViewPair rotate_quarter(const ViewPair& pair, const RotationSpec& spec) {
  g_rotation_ops.fetch_add(1, std::memory_order_relaxed);
  if (spec.mode != RotMode::kQuarter)
    throw std::invalid_argument("rotate_quarter: spec mode must be quarter-turn");
  const int aa = normalize_quarter(spec.alpha_a);
  const int ab = normalize_quarter(spec.alpha_b);
  if (aa == 0 && ab == 0) return pair;
  ViewPair out;
  out.pair_id = pair.pair_id;
  out.image_a = rotate_image_quarter(pair.image_a, aa);
  out.depth_a = rotate_depth_quarter(pair.depth_a, aa);
  out.camera_a = rotate_camera_quarter(pair.camera_a, aa);
  out.image_b = rotate_image_quarter(pair.image_b, ab);
  out.depth_b = rotate_depth_quarter(pair.depth_b, ab);
  out.camera_b = rotate_camera_quarter(pair.camera_b, ab);
  return out;
}

namespace {

struct ArbSide {
  Image image;
  DepthMap depth;
  Camera camera;
  std::vector<uint8_t> valid;
};

ArbSide rotate_side_arbitrary(const Image& im, const DepthMap& dm, const Camera& cam,
                              double angle_deg) {
  if (std::abs(cam.fx - cam.fy) > 1e-9 * std::max(cam.fx, cam.fy))
    throw std::invalid_argument(
        "rotate_arbitrary: requires square pixels (fx == fy)");
  const int w = im.w, h = im.h, c = im.c;
  const double radius = std::min(w, h) / 2.0;
  const Vector2d center(w / 2.0, h / 2.0);
  PixelMap fwd = arbitrary_pixel_map(angle_deg, w, h);
  PixelMap inv = fwd.inverse();

  ArbSide out;
  out.image = Image::zeros(h, w, c);
  out.depth = DepthMap::zeros(h, w);
  out.valid.assign(static_cast<size_t>(h) * w, 0);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      Vector2d p_out(j + 0.5, i + 0.5);
      if ((p_out - center).norm() > radius) continue;  // circular crop, fill = 0
      Vector2d p_src = inv(p_out);
      double z = dm.lookup(p_src.x(), p_src.y());  // nearest neighbor
      out.depth.at(i, j) = z;
      for (int k = 0; k < c; ++k)
        out.image.at(i, j, k) = im.sample(p_src.x(), p_src.y(), k);
      out.valid[static_cast<size_t>(i) * w + j] = 1;
    }
  }

  const double a = angle_deg * kPi / 180.0;
  const double ca = std::cos(a), sa = std::sin(a);
  Matrix3d q;  // R_z(-alpha): x' = cos*x + sin*y, y' = -sin*x + cos*y
  q << ca, sa, 0, -sa, ca, 0, 0, 0, 1;
  out.camera = cam;
  out.camera.cx = ca * (cam.cx - center.x()) + sa * (cam.cy - center.y()) + center.x();
  out.camera.cy = -sa * (cam.cx - center.x()) + ca * (cam.cy - center.y()) + center.y();
  out.camera.R = q * cam.R;
  out.camera.t = q * cam.t;
  return out;
}

}  // namespace

MaskedViewPair rotate_arbitrary(const ViewPair& pair, const RotationSpec& spec) {
  g_rotation_ops.fetch_add(1, std::memory_order_relaxed);
  if (spec.mode != RotMode::kArbitrary)
    throw std::invalid_argument("rotate_arbitrary: spec mode must be arbitrary");
  ArbSide a = rotate_side_arbitrary(pair.image_a, pair.depth_a, pair.camera_a,
                                    spec.alpha_a);
  ArbSide b = rotate_side_arbitrary(pair.image_b, pair.depth_b, pair.camera_b,
                                    spec.alpha_b);
  MaskedViewPair out;
  out.pair.pair_id = pair.pair_id;
  out.pair.image_a = std::move(a.image);
  out.pair.depth_a = std::move(a.depth);
  out.pair.camera_a = a.camera;
  out.pair.image_b = std::move(b.image);
  out.pair.depth_b = std::move(b.depth);
  out.pair.camera_b = b.camera;
  out.valid_a = std::move(a.valid);
  out.valid_b = std::move(b.valid);
  return out;
}

RotationSpec sample_rotation(Rng& rng, RotSampling sampling) {
  g_rotation_ops.fetch_add(1, std::memory_order_relaxed);
  RotationSpec spec;
  spec.mode = RotMode::kQuarter;
  spec.sampling = sampling;
  spec.alpha_a = 90.0 * static_cast<double>(rng.index(4));
  spec.alpha_b = sampling == RotSampling::kJoint
                     ? spec.alpha_a
                     : 90.0 * static_cast<double>(rng.index(4));
  return spec;
}

RelativePose relative_pose(const Camera& a, const Camera& b) {
  RelativePose rp;
  rp.R = b.R * a.R.transpose();
  rp.t = b.t - rp.R * a.t;
  double n = rp.t.norm();
  rp.t_unit = n > 1e-15 ? Vector3d(rp.t / n) : Vector3d::Zero();
  return rp;
}

uint64_t rotation_ops_invoked() { return g_rotation_ops.load(std::memory_order_relaxed); }
void reset_rotation_op_counter() { g_rotation_ops.store(0, std::memory_order_relaxed); }

}  // namespace rotamatch::geom
