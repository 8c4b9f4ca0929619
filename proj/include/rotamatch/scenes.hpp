#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "rotamatch/geometry.hpp"
#include "rotamatch/keypoints.hpp"
#include "rotamatch/rng.hpp"

namespace rotamatch::scenes {

enum class Texture { kChecker, kValueNoise, kPolygons };
enum class Geometry { kPlane, kHeightfield };

struct SceneConfig {
  int n_scenes = 48;
  int image_size = 128;
  Texture texture = Texture::kValueNoise;
  Geometry geometry = Geometry::kHeightfield;
  double baseline_lo = 0.15, baseline_hi = 0.45;  // relative translation magnitude
  double rotation_range_3d_deg = 25.0;            // max out-of-plane viewpoint change
  // In-plane camera roll mix. Most views get a small jitter; a minority get a
  // full roll, standing in for the orientation diversity of aerial captures.
  double roll_jitter_deg = 10.0;
  double full_roll_prob = 0.15;
  uint64_t seed = 0;
};

std::string texture_name(Texture t);
std::string geometry_name(Geometry g);
Texture texture_from_name(const std::string& s);
Geometry geometry_from_name(const std::string& s);

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Renders one two-view pair by ray casting; depth maps are exact. Cameras are
// resampled until the views share >= 30% co-visible area (at most 100 tries).
geom::ViewPair generate_pair(const SceneConfig& config, Rng& rng,
                             const std::string& pair_id);

// Derives the pair's RNG stream from (config.seed, pair_index).
geom::ViewPair generate_pair(const SceneConfig& config, uint64_t pair_index);

// Per image: matched_ratio of the n keypoints sit on pixels with a valid
// cross-view correspondence, the rest are uniform distractors. All keypoints
// in one image are at least 2px apart.
std::pair<KeypointSet, KeypointSet> sample_keypoints(const geom::ViewPair& pair,
                                                     int n, Rng& rng,
                                                     double matched_ratio = 0.5);

// GT positives: a-keypoints whose correspondence lands within px_thresh of a
// b-keypoint, nearest-first with both sides used at most once (partial
// permutation).
std::vector<MatchPair> gt_matches(const geom::ViewPair& pair,
                                  const KeypointSet& kps_a,
                                  const KeypointSet& kps_b,
                                  double px_thresh = 3.0);

struct Dataset {
  SceneConfig config;
  std::vector<geom::ViewPair> pairs;
};

// fraction sub-samples scenes deterministically by index; fraction=1 keeps all.
Dataset build_dataset(const SceneConfig& config, double fraction = 1.0);

void write_dataset(const Dataset& ds, const std::filesystem::path& out_dir);
Dataset load_dataset(const std::filesystem::path& dir, double fraction = 1.0);
SceneConfig read_dataset_manifest(const std::filesystem::path& dir);

}  // namespace rotamatch::scenes
