#include <cmath>

#include "doctest.h"
#include "rotamatch/geometry.hpp"
#include "rotamatch/scenes.hpp"

using namespace rotamatch;
using geom::Vector2d;
using geom::Vector3d;

namespace {

scenes::SceneConfig small_scene(uint64_t seed) {
  scenes::SceneConfig cfg;
  cfg.n_scenes = 2;
  cfg.image_size = 64;
  cfg.seed = seed;
  return cfg;
}

// Plane z = depth in front of camera a at the origin; camera b translated and
// rolled about its optical axis. Depth maps are constant, so correspondence
// has no rasterization error in either direction.
geom::ViewPair constant_depth_pair(double depth, double roll_deg) {
  const int n = 64;
  geom::ViewPair p;
  p.pair_id = "const_depth";
  p.image_a = geom::Image::zeros(n, n, 3);
  p.image_b = geom::Image::zeros(n, n, 3);
  p.depth_a = geom::DepthMap::zeros(n, n);
  p.depth_b = geom::DepthMap::zeros(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      p.depth_a.at(i, j) = depth;
      p.depth_b.at(i, j) = depth;
    }
  auto cam = [&](const geom::Matrix3d& r, const Vector3d& t) {
    geom::Camera c;
    c.fx = c.fy = 80;
    c.cx = c.cy = n / 2.0;
    c.width = c.height = n;
    c.R = r;
    c.t = t;
    return c;
  };
  double g = roll_deg * M_PI / 180.0;
  geom::Matrix3d rz;
  rz << std::cos(g), std::sin(g), 0, -std::sin(g), std::cos(g), 0, 0, 0, 1;
  p.camera_a = cam(geom::Matrix3d::Identity(), Vector3d::Zero());
  // x_b = Rz x - Rz t0 keeps camera-frame z and hence the constant depth.
  p.camera_b = cam(rz, rz * Vector3d(-0.25, 0.1, 0.0));
  return p;
}

}  // namespace

TEST_CASE("project and unproject invert each other") {
  geom::Camera c;
  c.fx = 100;
  c.fy = 110;
  c.cx = 32;
  c.cy = 30;
  c.width = 64;
  c.height = 60;
  Rng rng(4);
  for (int k = 0; k < 50; ++k) {
    Vector3d x(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.5, 3.0));
    auto pd = geom::project(c, x);
    Vector3d back = geom::unproject(c, pd.pixel, pd.depth);
    CHECK((back - x).norm() < 1e-12);
  }
  CHECK_THROWS_AS(geom::project(c, Vector3d(0, 0, -1)), geom::BehindCameraError);
  CHECK_THROWS_AS(geom::unproject(c, Vector2d(1, 1), 0.0), geom::InvalidDepthError);
}

TEST_CASE("bilinear sampling interpolates between pixel centers") {
  geom::Image im = geom::Image::zeros(2, 2, 1);
  im.at(0, 0, 0) = 1.0;
  im.at(0, 1, 0) = 3.0;
  im.at(1, 0, 0) = 5.0;
  im.at(1, 1, 0) = 7.0;
  CHECK(im.sample(0.5, 0.5, 0) == 1.0);           // exact center
  CHECK(im.sample(1.0, 0.5, 0) == 2.0);           // midpoint of top row
  CHECK(im.sample(1.0, 1.0, 0) == 4.0);           // center of the quad
  CHECK(im.sample(-5.0, 0.5, 0) == 0.0);          // outside reads zero
}

TEST_CASE("depth lookup uses pixel containment") {
  geom::DepthMap d = geom::DepthMap::zeros(2, 2);
  d.at(0, 0) = 1.0;
  d.at(0, 1) = 2.0;
  d.at(1, 1) = 3.0;
  CHECK(d.lookup(0.9, 0.9) == 1.0);
  CHECK(d.lookup(1.1, 0.2) == 2.0);
  CHECK(d.lookup(1.99, 1.99) == 3.0);
  CHECK(d.lookup(-0.1, 0.5) == 0.0);
  CHECK(d.lookup(2.01, 0.5) == 0.0);
}

TEST_CASE("camera validation rejects bad rotations and intrinsics") {
  geom::Camera c;
  c.fx = c.fy = 50;
  c.cx = c.cy = 16;
  c.width = c.height = 32;
  CHECK_NOTHROW(c.validate());
  geom::Camera bad = c;
  bad.R(0, 0) = 1.5;
  CHECK_THROWS(bad.validate());
  bad = c;
  bad.fx = -1;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("four quarter turns restore the pair bit for bit") {
  auto pair = scenes::generate_pair(small_scene(11), 0);
  geom::ViewPair r = pair;
  geom::RotationSpec spec;
  spec.alpha_a = 90;
  spec.alpha_b = 90;
  for (int k = 0; k < 4; ++k) r = geom::rotate_quarter(r, spec);
  CHECK(r.image_a.px == pair.image_a.px);
  CHECK(r.image_b.px == pair.image_b.px);
  CHECK(r.depth_a.z == pair.depth_a.z);
  CHECK(r.camera_a.fx == pair.camera_a.fx);
  CHECK(r.camera_a.cx == pair.camera_a.cx);
  CHECK(r.camera_a.cy == pair.camera_a.cy);
  CHECK((r.camera_a.R - pair.camera_a.R).cwiseAbs().maxCoeff() == 0.0);
  CHECK((r.camera_b.t - pair.camera_b.t).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("180 equals two 90 turns exactly") {
  auto pair = scenes::generate_pair(small_scene(12), 0);
  geom::RotationSpec s90{90, 90, geom::RotMode::kQuarter, geom::RotSampling::kIndependent};
  geom::RotationSpec s180{180, 180, geom::RotMode::kQuarter,
                          geom::RotSampling::kIndependent};
  auto twice = geom::rotate_quarter(geom::rotate_quarter(pair, s90), s90);
  auto once = geom::rotate_quarter(pair, s180);
  CHECK(twice.image_a.px == once.image_a.px);
  CHECK(twice.depth_b.z == once.depth_b.z);
  CHECK((twice.camera_b.R - once.camera_b.R).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("quarter pixel maps agree with the array rotation") {
  auto pair = scenes::generate_pair(small_scene(13), 1);
  for (int angle : {90, 180, 270}) {
    geom::RotationSpec spec;
    spec.alpha_a = angle;
    spec.alpha_b = 0;
    auto rot = geom::rotate_quarter(pair, spec);
    auto map = geom::quarter_pixel_map(angle, pair.image_a.w, pair.image_a.h);
    Rng rng(77);
    for (int k = 0; k < 200; ++k) {
      // stay a pixel away from the border so bilinear support matches
      Vector2d p(rng.uniform(1.0, pair.image_a.w - 1.0),
                 rng.uniform(1.0, pair.image_a.h - 1.0));
      Vector2d q = map(p);
      for (int ch = 0; ch < 3; ++ch)
        CHECK(rot.image_a.sample(q.x(), q.y(), ch) ==
              doctest::Approx(pair.image_a.sample(p.x(), p.y(), ch)).epsilon(1e-12));
      CHECK(rot.depth_a.lookup(q.x(), q.y()) ==
            doctest::Approx(pair.depth_a.lookup(p.x(), p.y())).epsilon(1e-12));
    }
    // maps invert exactly
    auto inv = map.inverse();
    Vector2d probe(3.25, 7.5);
    CHECK((inv(map(probe)) - probe).norm() < 1e-12);
  }
}

TEST_CASE("correspondence commutes with quarter rotation") {
  auto pair = scenes::generate_pair(small_scene(14), 0);
  geom::RotationSpec spec;
  spec.alpha_a = 90;
  spec.alpha_b = 270;
  auto rot = geom::rotate_quarter(pair, spec);
  auto map_a = geom::quarter_pixel_map(90, pair.image_a.w, pair.image_a.h);
  auto map_b = geom::quarter_pixel_map(270, pair.image_b.w, pair.image_b.h);
  Rng rng(5);
  int checked = 0;
  for (int k = 0; k < 400 && checked < 100; ++k) {
    Vector2d p(rng.uniform(0.0, pair.image_a.w), rng.uniform(0.0, pair.image_a.h));
    auto c0 = geom::gt_correspondence(pair, p);
    if (c0.status != geom::CorrStatus::kOk) continue;
    auto c1 = geom::gt_correspondence(rot, map_a(p));
    REQUIRE(c1.status == geom::CorrStatus::kOk);
    CHECK((c1.pixel_b - map_b(c0.pixel_b)).norm() < 1e-4);
    ++checked;
  }
  CHECK(checked >= 100);
}

TEST_CASE("correspondence commutes with arbitrary rotation") {
  auto pair = scenes::generate_pair(small_scene(15), 1);
  geom::RotationSpec spec;
  spec.alpha_a = 0;
  spec.alpha_b = 37.0;
  spec.mode = geom::RotMode::kArbitrary;
  auto rot = geom::rotate_arbitrary(pair, spec);
  auto map_b = geom::arbitrary_pixel_map(37.0, pair.image_b.w, pair.image_b.h);
  const double r_ok = std::min(pair.image_b.w, pair.image_b.h) / 2.0 - 2.0;
  Vector2d center(pair.image_b.w / 2.0, pair.image_b.h / 2.0);
  Rng rng(6);
  int checked = 0;
  for (int k = 0; k < 800 && checked < 100; ++k) {
    Vector2d p(rng.uniform(0.0, pair.image_a.w), rng.uniform(0.0, pair.image_a.h));
    auto c0 = geom::gt_correspondence(pair, p);
    if (c0.status != geom::CorrStatus::kOk) continue;
    if ((c0.pixel_b - center).norm() > r_ok) continue;  // keep inside the crop
    auto c1 = geom::gt_correspondence(rot.pair, p);
    if (c1.status != geom::CorrStatus::kOk) continue;
    CHECK((c1.pixel_b - map_b(c0.pixel_b)).norm() < 1e-4);
    ++checked;
  }
  CHECK(checked >= 60);
}

TEST_CASE("correspondence is symmetric on constant-depth geometry") {
  auto pair = constant_depth_pair(2.0, 23.0);
  geom::ViewPair flipped;
  flipped.image_a = pair.image_b;
  flipped.image_b = pair.image_a;
  flipped.depth_a = pair.depth_b;
  flipped.depth_b = pair.depth_a;
  flipped.camera_a = pair.camera_b;
  flipped.camera_b = pair.camera_a;
  Rng rng(7);
  int checked = 0;
  for (int k = 0; k < 300 && checked < 100; ++k) {
    Vector2d p(rng.uniform(2.0, 62.0), rng.uniform(2.0, 62.0));
    auto fwd = geom::gt_correspondence(pair, p);
    if (fwd.status != geom::CorrStatus::kOk) continue;
    auto back = geom::gt_correspondence(flipped, fwd.pixel_b);
    REQUIRE(back.status == geom::CorrStatus::kOk);
    CHECK((back.pixel_b - p).norm() < 1e-4);
    ++checked;
  }
  CHECK(checked >= 80);
}

TEST_CASE("round-trip transfer stays near the start on rendered heightfields") {
  auto pair = scenes::generate_pair(small_scene(16), 0);
  geom::ViewPair flipped;
  flipped.image_a = pair.image_b;
  flipped.image_b = pair.image_a;
  flipped.depth_a = pair.depth_b;
  flipped.depth_b = pair.depth_a;
  flipped.camera_a = pair.camera_b;
  flipped.camera_b = pair.camera_a;
  Rng rng(8);
  double sum = 0;
  int n = 0;
  for (int k = 0; k < 600 && n < 150; ++k) {
    Vector2d p(rng.uniform(0.0, 64.0), rng.uniform(0.0, 64.0));
    auto fwd = geom::gt_correspondence(pair, p);
    if (fwd.status != geom::CorrStatus::kOk) continue;
    auto back = geom::gt_correspondence(flipped, fwd.pixel_b);
    if (back.status != geom::CorrStatus::kOk) continue;
    double err = (back.pixel_b - p).norm();
    // depth is rasterized per pixel, so the round trip carries up to about a
    // pixel of quantization, never more than a few
    CHECK(err < 3.0);
    sum += err;
    ++n;
  }
  REQUIRE(n >= 50);
  CHECK(sum / n < 0.5);
}

TEST_CASE("arbitrary rotation crops the inscribed circle at every angle") {
  auto pair = scenes::generate_pair(small_scene(17), 0);
  for (double angle : {0.0, 30.0}) {
    geom::RotationSpec spec;
    spec.alpha_a = angle;
    spec.alpha_b = angle;
    spec.mode = geom::RotMode::kArbitrary;
    auto rot = geom::rotate_arbitrary(pair, spec);
    const auto& im = rot.pair.image_a;
    double r = std::min(im.w, im.h) / 2.0;
    Vector2d c(im.w / 2.0, im.h / 2.0);
    for (int i = 0; i < im.h; ++i)
      for (int j = 0; j < im.w; ++j) {
        bool inside = (Vector2d(j + 0.5, i + 0.5) - c).norm() <= r;
        if (!inside) {
          CHECK(im.at(i, j, 0) == 0.0);
          CHECK(rot.pair.depth_a.at(i, j) == 0.0);
          CHECK(rot.valid_a[static_cast<size_t>(i) * im.w + j] == 0);
        }
      }
  }
}

TEST_CASE("arbitrary rotation requires square pixels") {
  auto pair = scenes::generate_pair(small_scene(18), 0);
  pair.camera_a.fy = pair.camera_a.fx * 1.5;
  geom::RotationSpec spec;
  spec.alpha_a = 10;
  spec.alpha_b = 0;
  CHECK_THROWS(geom::rotate_arbitrary(pair, spec));
}

TEST_CASE("relative pose composes and matches a constructed case") {
  auto pair = scenes::generate_pair(small_scene(19), 0);
  auto ab = geom::relative_pose(pair.camera_a, pair.camera_b);
  auto ba = geom::relative_pose(pair.camera_b, pair.camera_a);
  CHECK((ab.R * ba.R - geom::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((ab.R * ab.R.transpose() - geom::Matrix3d::Identity()).cwiseAbs().maxCoeff() <
        1e-12);
  // x_b = R_ab x_a + t_ab maps camera-a origin into b
  Vector3d origin_in_a = -pair.camera_a.R.transpose() * pair.camera_a.t;
  Vector3d in_b = pair.camera_b.R * origin_in_a + pair.camera_b.t;
  CHECK((ab.R * Vector3d::Zero() + ab.t - in_b).norm() < 1e-12);
}

TEST_CASE("rotation ops are counted") {
  auto pair = scenes::generate_pair(small_scene(20), 0);
  geom::reset_rotation_op_counter();
  CHECK(geom::rotation_ops_invoked() == 0);
  geom::RotationSpec spec;
  spec.alpha_a = 90;
  spec.alpha_b = 0;
  (void)geom::rotate_quarter(pair, spec);
  Rng rng(1);
  (void)geom::sample_rotation(rng, geom::RotSampling::kIndependent);
  CHECK(geom::rotation_ops_invoked() == 2);
  geom::reset_rotation_op_counter();
  CHECK(geom::rotation_ops_invoked() == 0);
}

TEST_CASE("reprojection through rotated cameras stays consistent") {
  auto pair = scenes::generate_pair(small_scene(21), 1);
  geom::RotationSpec spec;
  spec.alpha_a = 270;
  spec.alpha_b = 180;
  auto rot = geom::rotate_quarter(pair, spec);
  Rng rng(9);
  int checked = 0;
  for (int k = 0; k < 400 && checked < 100; ++k) {
    Vector2d p(rng.uniform(0.0, rot.image_a.w), rng.uniform(0.0, rot.image_a.h));
    double d = rot.depth_a.lookup(p.x(), p.y());
    if (d <= 0) continue;
    // unproject in the rotated frame, reproject: identity to machine precision
    Vector3d x = geom::unproject(rot.camera_a, p, d);
    auto back = geom::project(rot.camera_a, x);
    CHECK((back.pixel - p).norm() < 1e-9);
    CHECK(back.depth == doctest::Approx(d).epsilon(1e-12));
    ++checked;
  }
  CHECK(checked >= 100);
}
