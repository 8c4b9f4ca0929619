#include "rotamatch/scenes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_map>

#include "json.hpp"
#include "rotamatch/viewpair_io.hpp"

namespace rotamatch::scenes {

namespace {

using geom::Camera;
using geom::DepthMap;
using geom::Image;
using geom::Matrix3d;
using geom::Vector2d;
using geom::Vector3d;
using geom::ViewPair;

constexpr double kPi = 3.14159265358979323846;
constexpr double kCovisFloor = 0.30;
constexpr int kMaxCameraAttempts = 100;

// Intrinsics snap to 1/64 px so quarter-turn updates (W - cx etc.) round-trip
// bit-exactly.
double quantize64(double v) { return std::round(v * 64.0) / 64.0; }

double deg2rad(double d) { return d * kPi / 180.0; }

double hash01(uint64_t seed, uint64_t a, uint64_t b, uint64_t c) {
  uint64_t h = Rng::splitmix(seed + 0x9e3779b97f4a7c15ull * a);
  h = Rng::splitmix(h ^ (b * 0xb5297a4dull + 0x68e31da4ull));
  h = Rng::splitmix(h ^ (c * 0x1b56c4e9ull + 0x7feb352dull));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

// Lattice value noise, 3 octaves, deterministic in (seed, position).
double value_noise(uint64_t seed, double x, double y) {
  static constexpr double freq[3] = {3.0, 6.0, 12.0};
  static constexpr double amp[3] = {0.55, 0.30, 0.15};
  double v = 0.0;
  for (int o = 0; o < 3; ++o) {
    double fx = x * freq[o], fy = y * freq[o];
    double ix = std::floor(fx), iy = std::floor(fy);
    double tx = smooth(fx - ix), ty = smooth(fy - iy);
    auto lat = [&](double dx, double dy) {
      return hash01(seed + static_cast<uint64_t>(o) * 0x51ab3f2ull,
                    static_cast<uint64_t>(static_cast<int64_t>(ix + dx) + (1 << 20)),
                    static_cast<uint64_t>(static_cast<int64_t>(iy + dy) + (1 << 20)),
                    17);
    };
    double a = lat(0, 0), b = lat(1, 0), c = lat(0, 1), d = lat(1, 1);
    v += amp[o] * ((1 - tx) * (1 - ty) * a + tx * (1 - ty) * b +
                   (1 - tx) * ty * c + tx * ty * d);
  }
  return v;
}

struct Poly {
  Vector2d v0, v1, v2;
  double color[3];
};

struct TextureFn {
  Texture kind = Texture::kValueNoise;
  uint64_t seed = 0;
  double col_a[3] = {0.15, 0.15, 0.15}, col_b[3] = {0.85, 0.85, 0.85};
  std::vector<Poly> polys;

  void color(double x, double y, double out[3]) const {
    switch (kind) {
      case Texture::kChecker: {
        const double cell = 0.25;
        int64_t p = static_cast<int64_t>(std::floor(x / cell)) +
                    static_cast<int64_t>(std::floor(y / cell));
        const double* c = (p & 1) ? col_b : col_a;
        out[0] = c[0];
        out[1] = c[1];
        out[2] = c[2];
        return;
      }
      case Texture::kValueNoise:
        for (int ch = 0; ch < 3; ++ch)
          out[ch] = 0.12 + 0.76 * value_noise(seed + 0x85ebca6bull * ch, x, y);
        return;
      case Texture::kPolygons: {
        for (int ch = 0; ch < 3; ++ch)
          out[ch] = 0.3 + 0.4 * value_noise(seed + 0x85ebca6bull * ch, x, y);
        Vector2d p(x, y);
        auto side = [](const Vector2d& a, const Vector2d& b, const Vector2d& q) {
          return (b.x() - a.x()) * (q.y() - a.y()) - (b.y() - a.y()) * (q.x() - a.x());
        };
        for (const auto& t : polys) {
          double s0 = side(t.v0, t.v1, p), s1 = side(t.v1, t.v2, p),
                 s2 = side(t.v2, t.v0, p);
          bool neg = (s0 < 0) || (s1 < 0) || (s2 < 0);
          bool pos = (s0 > 0) || (s1 > 0) || (s2 > 0);
          if (!(neg && pos)) {
            out[0] = t.color[0];
            out[1] = t.color[1];
            out[2] = t.color[2];
          }
        }
        return;
      }
    }
  }
};

struct Bump {
  double cx, cy, sigma, amp;
};

struct Surface {
  Geometry kind = Geometry::kHeightfield;
  std::vector<Bump> bumps;
  double grad_bound = 0.0;  // max |grad h| over the field

  double height(double x, double y) const {
    if (kind == Geometry::kPlane) return 0.0;
    double h = 0.0;
    for (const auto& b : bumps) {
      double dx = x - b.cx, dy = y - b.cy;
      h += b.amp * std::exp(-0.5 * (dx * dx + dy * dy) / (b.sigma * b.sigma));
    }
    return h;
  }
};

// First intersection of ray o + s*d with the surface z = h(x,y), walking in
// the camera-depth parameter s (d has camera-z component 1, so depth = s).
// Sphere-traces against the gradient bound, so steps never jump the surface.
// Returns 0 when the ray misses (points above the horizon).
double cast_ray(const Surface& surf, const Vector3d& o, const Vector3d& d) {
  if (d.z() >= -1e-12) return 0.0;
  const double s_plane = -o.z() / d.z();
  if (s_plane <= 0) return 0.0;
  if (surf.kind == Geometry::kPlane) return s_plane;

  const double lip =
      std::abs(d.z()) + surf.grad_bound * std::hypot(d.x(), d.y());
  double s = 0.0;
  double g = o.z() - surf.height(o.x(), o.y());
  if (g <= 0) return 0.0;  // camera inside terrain; treat as miss
  double last_step = 0.0;
  for (int it = 0; it < 4000 && s < s_plane; ++it) {
    last_step = std::max(0.999 * g / lip, 1e-5);
    s += last_step;
    if (s >= s_plane) break;
    g = (o.z() + s * d.z()) - surf.height(o.x() + s * d.x(), o.y() + s * d.y());
    if (g <= 1e-10) {
      if (g >= -1e-12) return s;
      break;  // overshoot from the minimum step; bracket found
    }
  }
  // Bisect [s - last_step, min(s, s_plane)]; the far end is at or below the
  // surface (g(s_plane) = -h <= 0).
  double lo = std::max(0.0, s - last_step), hi = std::min(s, s_plane);
  for (int it = 0; it < 80; ++it) {
    double mid = 0.5 * (lo + hi);
    double gm = (o.z() + mid * d.z()) -
                surf.height(o.x() + mid * d.x(), o.y() + mid * d.y());
    if (gm > 0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

Matrix3d look_at_rows(const Vector3d& pos, const Vector3d& target, double roll_rad) {
  Vector3d zc = (target - pos).normalized();
  Vector3d up = std::abs(zc.y()) < 0.95 ? Vector3d(0, 1, 0) : Vector3d(1, 0, 0);
  Vector3d xc = up.cross(zc).normalized();
  Vector3d yc = zc.cross(xc);
  Matrix3d r;
  r.row(0) = xc;
  r.row(1) = yc;
  r.row(2) = zc;
  Matrix3d rz;
  const double c = std::cos(roll_rad), s = std::sin(roll_rad);
  rz << c, -s, 0, s, c, 0, 0, 0, 1;
  return rz * r;
}

struct CameraDraw {
  Camera cam;
  Vector3d pos;
  double dist;
};

double draw_roll(Rng& rng, const SceneConfig& cfg) {
  if (rng.uniform() < cfg.full_roll_prob) return deg2rad(rng.uniform(-180.0, 180.0));
  return deg2rad(rng.uniform(-cfg.roll_jitter_deg, cfg.roll_jitter_deg));
}

Camera finish_camera(const SceneConfig& cfg, Rng& rng, const Vector3d& pos,
                     const Vector3d& target, double roll) {
  Camera cam;
  cam.width = cfg.image_size;
  cam.height = cfg.image_size;
  const double f = quantize64(cfg.image_size * rng.uniform(1.15, 1.45));
  cam.fx = f;
  cam.fy = f;  // square pixels; arbitrary-angle rotation depends on this
  cam.cx = quantize64(cfg.image_size / 2.0 + rng.uniform(-2.0, 2.0));
  cam.cy = quantize64(cfg.image_size / 2.0 + rng.uniform(-2.0, 2.0));
  cam.R = look_at_rows(pos, target, roll);
  cam.t = -(cam.R * pos);
  return cam;
}

CameraDraw sample_camera_a(const SceneConfig& cfg, Rng& rng, const Vector3d& target) {
  const double theta = deg2rad(rng.uniform(0.0, cfg.rotation_range_3d_deg));
  const double phi = rng.uniform(0.0, 2.0 * kPi);
  const double dist = rng.uniform(1.7, 2.3);
  Vector3d pos = dist * Vector3d(std::sin(theta) * std::cos(phi),
                                 std::sin(theta) * std::sin(phi), std::cos(theta));
  return {finish_camera(cfg, rng, pos, target, draw_roll(rng, cfg)), pos, dist};
}

CameraDraw sample_camera_b(const SceneConfig& cfg, Rng& rng, const CameraDraw& a,
                           const Vector3d& target) {
  const double baseline = rng.uniform(cfg.baseline_lo, cfg.baseline_hi);
  const double chi = 2.0 * std::asin(std::min(1.0, baseline / 2.0));
  Vector3d dir = a.pos.normalized();
  Vector3d seed_axis(rng.normal(), rng.normal(), rng.normal());
  Vector3d axis = dir.cross(seed_axis);
  if (axis.norm() < 1e-9) axis = dir.cross(Vector3d(1, 0, 0));
  axis.normalize();
  // Rodrigues rotation of the view direction about a perpendicular axis
  Vector3d dir_b = std::cos(chi) * dir + std::sin(chi) * axis.cross(dir) +
                   (1 - std::cos(chi)) * axis.dot(dir) * axis;
  const double dist = a.dist * rng.uniform(0.92, 1.08);
  Vector3d pos = dist * dir_b;
  return {finish_camera(cfg, rng, pos, target, draw_roll(rng, cfg)), pos, dist};
}

Vector3d pixel_ray_world(const Camera& cam, double x, double y) {
  Vector3d dc((x - cam.cx) / cam.fx, (y - cam.cy) / cam.fy, 1.0);
  return cam.R.transpose() * dc;
}

// Visibility probe without rendering: casts the grid ray in one view, projects
// the hit into the other view and re-casts there, comparing depths directly.
double covis_fraction_oneway(const Surface& surf, const Camera& ca,
                             const Vector3d& pos_a, const Camera& cb,
                             const Vector3d& pos_b) {
  const int grid = 14;
  int valid = 0, ok = 0;
  for (int gi = 0; gi < grid; ++gi)
    for (int gj = 0; gj < grid; ++gj) {
      double x = (gj + 0.5) * ca.width / grid, y = (gi + 0.5) * ca.height / grid;
      Vector3d d = pixel_ray_world(ca, x, y);
      double s = cast_ray(surf, pos_a, d);
      if (s <= 0) continue;
      ++valid;
      Vector3d xw = pos_a + s * d;
      Vector3d pc = cb.R * xw + cb.t;
      if (pc.z() <= 0) continue;
      double px = cb.fx * pc.x() / pc.z() + cb.cx;
      double py = cb.fy * pc.y() / pc.z() + cb.cy;
      if (px < 0 || px > cb.width || py < 0 || py > cb.height) continue;
      double sb = cast_ray(surf, pos_b, pixel_ray_world(cb, px, py));
      if (sb <= 0) continue;
      if (std::abs(pc.z() - sb) <= 0.02 * sb) ++ok;
    }
  if (valid < 20) return 0.0;
  return static_cast<double>(ok) / valid;
}

void render_view(const Surface& surf, const TextureFn& tex, const Camera& cam,
                 const Vector3d& pos, Image& image, DepthMap& depth) {
  image = Image::zeros(cam.height, cam.width, 3);
  depth = DepthMap::zeros(cam.height, cam.width);
  const Matrix3d rt = cam.R.transpose();
  for (int i = 0; i < cam.height; ++i)
    for (int j = 0; j < cam.width; ++j) {
      Vector3d dc((j + 0.5 - cam.cx) / cam.fx, (i + 0.5 - cam.cy) / cam.fy, 1.0);
      Vector3d d = rt * dc;
      double s = cast_ray(surf, pos, d);
      if (s <= 0) continue;  // sky: depth 0 (invalid), black pixel
      depth.at(i, j) = s;
      Vector3d xw = pos + s * d;
      double col[3];
      tex.color(xw.x(), xw.y(), col);
      for (int ch = 0; ch < 3; ++ch)
        image.at(i, j, ch) = std::round(std::clamp(col[ch], 0.0, 1.0) * 255.0) / 255.0;
    }
}

Surface draw_surface(const SceneConfig& cfg, Rng& rng) {
  Surface surf;
  surf.kind = cfg.geometry;
  if (cfg.geometry == Geometry::kPlane) return surf;
  double total = 0.0;
  for (int k = 0; k < 5; ++k) {
    Bump b;
    b.cx = rng.uniform(-0.9, 0.9);
    b.cy = rng.uniform(-0.9, 0.9);
    b.sigma = rng.uniform(0.14, 0.32);
    b.amp = rng.uniform(0.06, 0.2);
    total += b.amp;
    surf.bumps.push_back(b);
  }
  if (total > 0.55)  // keep terrain well below the camera shell
    for (auto& b : surf.bumps) b.amp *= 0.55 / total;
  surf.grad_bound = 0.0;
  for (const auto& b : surf.bumps)
    surf.grad_bound += b.amp * std::exp(-0.5) / b.sigma;
  return surf;
}

TextureFn draw_texture(const SceneConfig& cfg, Rng& rng) {
  TextureFn tex;
  tex.kind = cfg.texture;
  tex.seed = rng.next_u64();
  if (cfg.texture == Texture::kChecker) {
    for (int ch = 0; ch < 3; ++ch) {
      tex.col_a[ch] = rng.uniform(0.08, 0.35);
      tex.col_b[ch] = rng.uniform(0.6, 0.92);
    }
  } else if (cfg.texture == Texture::kPolygons) {
    for (int k = 0; k < 14; ++k) {
      Poly p;
      Vector2d c(rng.uniform(-1.6, 1.6), rng.uniform(-1.6, 1.6));
      p.v0 = c + Vector2d(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
      p.v1 = c + Vector2d(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
      p.v2 = c + Vector2d(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
      for (int ch = 0; ch < 3; ++ch) p.color[ch] = rng.uniform(0.1, 0.9);
      tex.polys.push_back(p);
    }
  }
  return tex;
}

}  // namespace

std::string texture_name(Texture t) {
  switch (t) {
    case Texture::kChecker: return "checker";
    case Texture::kValueNoise: return "value_noise";
    case Texture::kPolygons: return "polygons";
  }
  return "value_noise";
}

std::string geometry_name(Geometry g) {
  return g == Geometry::kPlane ? "plane" : "heightfield";
}

Texture texture_from_name(const std::string& s) {
  if (s == "checker") return Texture::kChecker;
  if (s == "value_noise") return Texture::kValueNoise;
  if (s == "polygons") return Texture::kPolygons;
  throw std::invalid_argument("unknown texture: " + s);
}

Geometry geometry_from_name(const std::string& s) {
  if (s == "plane") return Geometry::kPlane;
  if (s == "heightfield") return Geometry::kHeightfield;
  throw std::invalid_argument("unknown geometry: " + s);
}

ViewPair generate_pair(const SceneConfig& config, Rng& rng,
                       const std::string& pair_id) {
  Surface surf = draw_surface(config, rng);
  TextureFn tex = draw_texture(config, rng);

  for (int attempt = 0; attempt < kMaxCameraAttempts; ++attempt) {
    Vector3d target(rng.uniform(-0.15, 0.15), rng.uniform(-0.15, 0.15), 0.0);
    CameraDraw a = sample_camera_a(config, rng, target);
    CameraDraw b = sample_camera_b(config, rng, a, target);
    double cab = covis_fraction_oneway(surf, a.cam, a.pos, b.cam, b.pos);
    if (cab < kCovisFloor) continue;
    double cba = covis_fraction_oneway(surf, b.cam, b.pos, a.cam, a.pos);
    if (cba < kCovisFloor) continue;

    ViewPair pair;
    pair.pair_id = pair_id;
    pair.camera_a = a.cam;
    pair.camera_b = b.cam;
    render_view(surf, tex, a.cam, a.pos, pair.image_a, pair.depth_a);
    render_view(surf, tex, b.cam, b.pos, pair.image_b, pair.depth_b);
    return pair;
  }
  throw GenerationError("generate_pair: co-visibility floor unreachable after " +
                        std::to_string(kMaxCameraAttempts) + " attempts (" +
                        pair_id + ")");
}

ViewPair generate_pair(const SceneConfig& config, uint64_t pair_index) {
  Rng rng = Rng::derive(config.seed, {kStreamScene, pair_index});
  char buf[32];
  std::snprintf(buf, sizeof(buf), "pair_%04llu",
                static_cast<unsigned long long>(pair_index));
  return generate_pair(config, rng, buf);
}

namespace {

// Spatial hash enforcing the 2px minimum spacing between keypoints.
class SpacingGrid {
 public:
  explicit SpacingGrid(double radius) : r2_(radius * radius), cell_(radius) {}

  bool far_enough(const Vector2d& p) const {
    int64_t cx = static_cast<int64_t>(std::floor(p.x() / cell_));
    int64_t cy = static_cast<int64_t>(std::floor(p.y() / cell_));
    for (int64_t dy = -1; dy <= 1; ++dy)
      for (int64_t dx = -1; dx <= 1; ++dx) {
        auto it = cells_.find(key(cx + dx, cy + dy));
        if (it == cells_.end()) continue;
        for (const auto& q : it->second)
          if ((q - p).squaredNorm() < r2_) return false;
      }
    return true;
  }

  void add(const Vector2d& p) {
    cells_[key(static_cast<int64_t>(std::floor(p.x() / cell_)),
               static_cast<int64_t>(std::floor(p.y() / cell_)))]
        .push_back(p);
  }

 private:
  static uint64_t key(int64_t cx, int64_t cy) {
    return (static_cast<uint64_t>(cx) << 32) ^ static_cast<uint64_t>(cy & 0xffffffff);
  }
  double r2_, cell_;
  std::unordered_map<uint64_t, std::vector<Vector2d>> cells_;
};

}  // namespace

std::pair<KeypointSet, KeypointSet> sample_keypoints(const ViewPair& pair, int n,
                                                     Rng& rng, double matched_ratio) {
  if (n < 2) throw std::invalid_argument("sample_keypoints: n must be >= 2");
  const int wa = pair.image_a.w, ha = pair.image_a.h;
  const int wb = pair.image_b.w, hb = pair.image_b.h;
  if (4.0 * n > static_cast<double>(wa) * ha)
    throw std::invalid_argument("sample_keypoints: n exceeds valid pixels");

  const double kSpacing = 2.0;
  SpacingGrid grid_a(kSpacing), grid_b(kSpacing);
  std::vector<Vector2d> pts_a, pts_b;
  pts_a.reserve(static_cast<size_t>(n));
  pts_b.reserve(static_cast<size_t>(n));

  const int n_matched = static_cast<int>(std::lround(n * matched_ratio));
  const int64_t cap = 2000LL * n;
  int64_t draws = 0;
  while (static_cast<int>(pts_a.size()) < n_matched && draws < cap) {
    ++draws;
    Vector2d p(rng.uniform(0.0, wa), rng.uniform(0.0, ha));
    auto corr = geom::gt_correspondence(pair, p);
    if (corr.status != geom::CorrStatus::kOk) continue;
    if (!grid_a.far_enough(p) || !grid_b.far_enough(corr.pixel_b)) continue;
    grid_a.add(p);
    grid_b.add(corr.pixel_b);
    pts_a.push_back(p);
    pts_b.push_back(corr.pixel_b);
  }
  // Short matched quota (heavy masking, low texture) degrades to distractors;
  // a hard failure below still catches images without room for n keypoints.
  auto fill_distractors = [&](std::vector<Vector2d>& pts, SpacingGrid& grid, int w,
                              int h) {
    int64_t local = 0;
    const int64_t local_cap = 2000LL * n;
    while (static_cast<int>(pts.size()) < n && local < local_cap) {
      ++local;
      Vector2d p(rng.uniform(0.0, w), rng.uniform(0.0, h));
      if (!grid.far_enough(p)) continue;
      grid.add(p);
      pts.push_back(p);
    }
    if (static_cast<int>(pts.size()) < n)
      throw std::runtime_error("sample_keypoints: n exceeds valid pixels");
  };
  fill_distractors(pts_a, grid_a, wa, ha);
  fill_distractors(pts_b, grid_b, wb, hb);

  rng.shuffle(pts_a);
  rng.shuffle(pts_b);

  KeypointSet ka, kb;
  ka.positions = std::move(pts_a);
  ka.width = wa;
  ka.height = ha;
  kb.positions = std::move(pts_b);
  kb.width = wb;
  kb.height = hb;
  return {std::move(ka), std::move(kb)};
}

std::vector<MatchPair> gt_matches(const ViewPair& pair, const KeypointSet& kps_a,
                                  const KeypointSet& kps_b, double px_thresh) {
  struct Cand {
    double d;
    int i, j;
  };
  std::vector<Cand> cands;
  for (int i = 0; i < static_cast<int>(kps_a.size()); ++i) {
    auto corr = geom::gt_correspondence(pair, kps_a.positions[static_cast<size_t>(i)]);
    if (corr.status != geom::CorrStatus::kOk) continue;
    int best_j = -1;
    double best_d = px_thresh;
    for (int j = 0; j < static_cast<int>(kps_b.size()); ++j) {
      double d = (kps_b.positions[static_cast<size_t>(j)] - corr.pixel_b).norm();
      if (d < best_d) {
        best_d = d;
        best_j = j;
      }
    }
    if (best_j >= 0) cands.push_back({best_d, i, best_j});
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) {
    if (x.d != y.d) return x.d < y.d;
    if (x.i != y.i) return x.i < y.i;
    return x.j < y.j;
  });
  std::vector<char> used_a(kps_a.size(), 0), used_b(kps_b.size(), 0);
  std::vector<MatchPair> out;
  for (const auto& c : cands) {
    if (used_a[static_cast<size_t>(c.i)] || used_b[static_cast<size_t>(c.j)]) continue;
    used_a[static_cast<size_t>(c.i)] = 1;
    used_b[static_cast<size_t>(c.j)] = 1;
    out.push_back({c.i, c.j});
  }
  return out;
}

Dataset build_dataset(const SceneConfig& config, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw std::invalid_argument("build_dataset: fraction must be in (0,1]");
  int m = std::max(1, static_cast<int>(std::lround(fraction * config.n_scenes)));
  m = std::min(m, config.n_scenes);
  Dataset ds;
  ds.config = config;
  ds.pairs.reserve(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i)
    ds.pairs.push_back(generate_pair(config, static_cast<uint64_t>(i)));
  return ds;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  for (const auto& p : ds.pairs) io::write_view_pair(out_dir / p.pair_id, p);
  nlohmann::json j{{"format", "rotamatch-dataset-v1"},
                   {"n_scenes", ds.config.n_scenes},
                   {"n_pairs", ds.pairs.size()},
                   {"image_size", ds.config.image_size},
                   {"texture", texture_name(ds.config.texture)},
                   {"geometry", geometry_name(ds.config.geometry)},
                   {"baseline_lo", ds.config.baseline_lo},
                   {"baseline_hi", ds.config.baseline_hi},
                   {"rotation_range_3d_deg", ds.config.rotation_range_3d_deg},
                   {"roll_jitter_deg", ds.config.roll_jitter_deg},
                   {"full_roll_prob", ds.config.full_roll_prob},
                   {"seed", ds.config.seed}};
  std::ofstream f(out_dir / "manifest.json", std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write dataset manifest");
  f << j.dump(2) << "\n";
}

SceneConfig read_dataset_manifest(const std::filesystem::path& dir) {
  std::ifstream f(dir / "manifest.json");
  if (!f)
    throw std::runtime_error("missing dataset manifest in " + dir.string());
  nlohmann::json j = nlohmann::json::parse(f);
  SceneConfig c;
  c.n_scenes = j.at("n_scenes").get<int>();
  c.image_size = j.at("image_size").get<int>();
  c.texture = texture_from_name(j.at("texture").get<std::string>());
  c.geometry = geometry_from_name(j.at("geometry").get<std::string>());
  c.baseline_lo = j.at("baseline_lo").get<double>();
  c.baseline_hi = j.at("baseline_hi").get<double>();
  c.rotation_range_3d_deg = j.at("rotation_range_3d_deg").get<double>();
  c.roll_jitter_deg = j.at("roll_jitter_deg").get<double>();
  c.full_roll_prob = j.at("full_roll_prob").get<double>();
  c.seed = j.at("seed").get<uint64_t>();
  return c;
}

Dataset load_dataset(const std::filesystem::path& dir, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw std::invalid_argument("load_dataset: fraction must be in (0,1]");
  Dataset ds;
  ds.config = read_dataset_manifest(dir);
  auto pair_dirs = io::list_pair_dirs(dir);
  size_t m = std::max<size_t>(
      1, static_cast<size_t>(std::llround(fraction * pair_dirs.size())));
  m = std::min(m, pair_dirs.size());
  for (size_t i = 0; i < m; ++i) ds.pairs.push_back(io::read_view_pair(pair_dirs[i]));
  return ds;
}

}  // namespace rotamatch::scenes
