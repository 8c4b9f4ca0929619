#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rotamatch/rng.hpp"

namespace rotamatch::geom {

using Eigen::Matrix3d;
using Eigen::Vector2d;
using Eigen::Vector3d;

// H×W×C image, row-major, channel-minor, values in [0,1].
struct Image {
  int h = 0, w = 0, c = 0;
  std::vector<double> px;

  static Image zeros(int h, int w, int c);
  double at(int y, int x, int ch) const {
    return px[static_cast<size_t>((y * w + x) * c + ch)];
  }
  double& at(int y, int x, int ch) {
    return px[static_cast<size_t>((y * w + x) * c + ch)];
  }
  // Bilinear sample at continuous (x, y), top-left-corner origin, pixel
  // centers at integer + 0.5. Out-of-bounds reads as 0.
  double sample(double x, double y, int ch) const;
};

// Per-pixel depth (camera-frame z at the pixel center); 0 marks invalid.
struct DepthMap {
  int h = 0, w = 0;
  std::vector<double> z;

  static DepthMap zeros(int h, int w);
  double at(int y, int x) const { return z[static_cast<size_t>(y * w + x)]; }
  double& at(int y, int x) { return z[static_cast<size_t>(y * w + x)]; }
  // Depth of the pixel containing continuous point (x, y); 0 if outside.
  double lookup(double x, double y) const;
};

// Pinhole camera. Pixel coordinates are continuous with the origin at the
// image's top-left corner (no half-pixel offset); x_cam = R * X_world + t.
struct Camera {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  Matrix3d R = Matrix3d::Identity();
  Vector3d t = Vector3d::Zero();
  int width = 0, height = 0;

  void validate() const;  // throws on non-orthonormal R or bad intrinsics
};

struct ViewPair {
  Image image_a, image_b;
  DepthMap depth_a, depth_b;
  Camera camera_a, camera_b;
  std::string pair_id;
};

enum class RotMode { kQuarter, kArbitrary };
enum class RotSampling { kIndependent, kJoint };

struct RotationSpec {
  double alpha_a = 0.0;  // degrees, counterclockwise
  double alpha_b = 0.0;
  RotMode mode = RotMode::kQuarter;
  RotSampling sampling = RotSampling::kIndependent;
};

// --- projection ---------------------------------------------------------

struct PixelDepth {
  Vector2d pixel;
  double depth;
};

// Pinhole projection; throws behind_camera_error for camera-frame z <= 0.
PixelDepth project(const Camera& cam, const Vector3d& point_world);
// Inverse of project through the pixel at the given camera-frame depth.
Vector3d unproject(const Camera& cam, const Vector2d& pixel, double depth);

struct BehindCameraError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvalidDepthError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --- ground-truth correspondence ---------------------------------------

enum class CorrStatus { kOk, kOccluded, kNoDepth };

struct Correspondence {
  CorrStatus status = CorrStatus::kNoDepth;
  Vector2d pixel_b = Vector2d::Zero();  // valid when status == kOk
};

// Transfers pixel_a into view b through depth_a. Occlusion is declared when
// the reprojected depth disagrees with depth_b by more than 2% relative, or
// the point leaves image b / falls behind camera b.
Correspondence gt_correspondence(const ViewPair& pair, const Vector2d& pixel_a,
                                 double occlusion_rel_tol = 0.02);

// --- rotation augmentation ---------------------------------------------

// Continuous pixel map applied by an in-place rotation: p -> A(p - c_in) + c_out.
struct PixelMap {
  Eigen::Matrix2d A = Eigen::Matrix2d::Identity();
  Vector2d offset = Vector2d::Zero();
  Vector2d operator()(const Vector2d& p) const { return A * p + offset; }
  PixelMap inverse() const;
};

PixelMap quarter_pixel_map(int angle_deg, int width, int height);
PixelMap arbitrary_pixel_map(double angle_deg, int width, int height);

// Lossless quarter-turn rotation of images, depths, and cameras. Angle 0
// returns the input unchanged. Width/height swap at 90 and 270.
ViewPair rotate_quarter(const ViewPair& pair, const RotationSpec& spec);

struct MaskedViewPair {
  ViewPair pair;
  std::vector<uint8_t> valid_a, valid_b;  // inscribed-circle masks, H×W
};

// Arbitrary-angle rotation about the image center: bilinear image resampling,
// nearest-neighbor depth, and an inscribed-circle crop applied at every angle
// including 0. Requires fx == fy (square pixels).
MaskedViewPair rotate_arbitrary(const ViewPair& pair, const RotationSpec& spec);

RotationSpec sample_rotation(Rng& rng, RotSampling sampling);

struct RelativePose {
  Matrix3d R;        // R_ab = R_b * R_a^T
  Vector3d t;        // t_ab = t_b - R_ab * t_a
  Vector3d t_unit;   // unit direction (zero if t is zero)
};

RelativePose relative_pose(const Camera& a, const Camera& b);

// Rotation-op invocation counter; training regimes assert on it.
uint64_t rotation_ops_invoked();
void reset_rotation_op_counter();

}  // namespace rotamatch::geom
