#pragma once

#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rotamatch/geometry.hpp"
#include "rotamatch/pipeline.hpp"
#include "rotamatch/scenes.hpp"

namespace rotamatch::eval {

using PixelMatch = std::pair<geom::Vector2d, geom::Vector2d>;

struct PoseEstimate {
  bool ok = false;
  geom::Matrix3d R;
  geom::Vector3d t;  // unit direction
  std::vector<char> inlier_mask;
  int n_inliers = 0;
};

// 8-point essential RANSAC on intrinsics-normalized coordinates with
// rank-2 equal-singular-value projection, local consensus refits, and
// cheirality disambiguation. Fails (ok = false) below 8 matches or when
// every sample is degenerate; callers score failures as infinite pose error.
PoseEstimate estimate_essential_ransac(const std::vector<PixelMatch>& matches,
                                       const geom::Camera& cam_a,
                                       const geom::Camera& cam_b, int iters = 1000,
                                       double inlier_thresh = 1e-3,
                                       uint64_t seed = 0);

// max(rotation angle, translation-direction angle) in degrees; the
// translation dot product is taken absolute since E leaves the sign free.
double pose_error_deg(const geom::Matrix3d& r_est, const geom::Vector3d& t_est,
                      const geom::Matrix3d& r_gt, const geom::Vector3d& t_gt);

// Area under the recall-vs-threshold step curve on [0, thresh], normalized,
// times 100. Infinite errors count in the denominator only.
double auc(const std::vector<double>& errors, double thresh);

constexpr double kInfError = std::numeric_limits<double>::infinity();

struct PrecisionStats {
  double precision = 0.0;  // fraction below px_thresh
  int n_scored = 0;        // matches with a measurable GT transfer
  int n_matches = 0;
};

// Fraction of predicted matches whose GT transfer error is below px_thresh.
// Matches whose source pixel has no depth are excluded from the denominator;
// occluded sources count as incorrect.
PrecisionStats matching_precision(const pipeline::AssignmentMatrix& am,
                                  const KeypointSet& kps_a, const KeypointSet& kps_b,
                                  const geom::ViewPair& pair, double px_thresh);

struct HomographyEstimate {
  bool ok = false;
  geom::Matrix3d H;
  int n_inliers = 0;
};

// Normalized DLT fit on all given correspondences (no robustness).
HomographyEstimate fit_homography_dlt(const std::vector<PixelMatch>& matches);

HomographyEstimate estimate_homography_ransac(const std::vector<PixelMatch>& matches,
                                              int iters = 1000,
                                              double inlier_thresh_px = 3.0,
                                              uint64_t seed = 0);

// Mean reprojection distance of the four image corners under the two maps.
double homography_corner_error(const geom::Matrix3d& h_est,
                               const geom::Matrix3d& h_gt, int width, int height);

// DLT fit over a grid of GT correspondences. Returns the induced homography
// when one exists (planar scene: residual < 1e-3 px), otherwise nullopt.
std::optional<geom::Matrix3d> gt_plane_homography(const geom::ViewPair& pair);

struct Protocol {
  enum class Kind { kUpright, kRotQuarter, kFixedAngle };
  Kind kind = Kind::kUpright;
  double angle_deg = 0.0;  // fixed-angle only; image A stays upright
  // Testing hook: forces the quarter protocol's sampled angles (a,b) when
  // both are >= 0, instead of drawing them per pair.
  int quarter_override_a = -1, quarter_override_b = -1;
};

Protocol protocol_from_string(const std::string& s);  // upright | rot90 | angle:<deg>
std::string protocol_name(const Protocol& p);

struct EvalConfig {
  int n_keypoints = 512;
  double tau = 0.1;
  int stop_layer = 0;  // 0 = full depth
  int ransac_iters = 1000;
  double ransac_thresh = 1e-3;
  uint64_t seed = 0;
};

struct PairRecord {
  std::string pair_id;
  double pose_error_deg = kInfError;
  int n_matches = 0;
  int n_inliers = 0;
  double precision3px = 0.0;
  double maa5 = 0.0, maa10 = 0.0;
  // Corner error vs the GT plane-induced homography; NaN when the scene is
  // not planar (no single GT homography exists), inf when estimation failed.
  double homography_err_px = std::numeric_limits<double>::quiet_NaN();
  bool pose_failed = true;
  bool no_matches = false;
};

struct MetricReport {
  std::string regime;
  std::string protocol;
  int stop_layer = 0;
  int n_pairs = 0;
  double auc5 = 0, auc10 = 0, auc20 = 0;
  double maa5 = 0, maa10 = 0;
  double precision3px = 0;
  int failures = 0;
  // AUC of corner errors at 10px over pairs with a GT homography; 0 when the
  // dataset has none (non-planar geometry).
  double homography_auc10 = 0;
  // audit trail
  int n_keypoints = 0;
  double tau = 0;
  int ransac_iters = 0;
  double ransac_thresh = 0;
  uint64_t seed = 0;
  std::vector<PairRecord> pairs;

  std::string to_json() const;  // stable key order, no timestamps
  void write_json(const std::filesystem::path& path) const;
  void write_csv(const std::filesystem::path& path) const;
};

// Applies the evaluation protocol to one pair. rot90 draws independent
// quarter angles from rng; fixed-angle keeps A upright and circular-crops
// both sides.
geom::ViewPair apply_protocol(const geom::ViewPair& pair, const Protocol& protocol,
                              Rng& rng);

MetricReport run_benchmark(const pipeline::DescriptorNet& desc,
                           const pipeline::MatcherNet& matcher,
                           const scenes::Dataset& dataset, const Protocol& protocol,
                           const EvalConfig& cfg, const std::string& regime_tag);

struct RegimeModel {
  std::string regime;
  pipeline::DescriptorNet desc;
  pipeline::MatcherNet matcher;
};

// One report per (model, protocol, stop_layer); a single forward pass per
// pair feeds every stop layer. The deepest layer reproduces run_benchmark
// exactly.
std::vector<MetricReport> sweep_layers(const std::vector<RegimeModel>& models,
                                       const scenes::Dataset& dataset,
                                       const std::vector<Protocol>& protocols,
                                       const EvalConfig& cfg);

struct AngleSweepRow {
  std::string regime;
  double angle_deg = 0;
  int n_models = 0;
  double mean_auc20 = 0;
  double ci95_auc20 = 0;  // 1.96 * stddev / sqrt(n), normal approximation
  std::vector<double> per_model_auc20;
};

// Image A upright, B rotated by each fixed angle; rows aggregate models of
// the same regime (mean and 95% CI across them).
std::vector<AngleSweepRow> sweep_angles(const std::vector<RegimeModel>& models,
                                        const scenes::Dataset& dataset,
                                        const std::vector<double>& angles_deg,
                                        const EvalConfig& cfg);

void write_angle_sweep_csv(const std::vector<AngleSweepRow>& rows,
                           const std::filesystem::path& path);
void write_layer_sweep_csv(const std::vector<MetricReport>& cells,
                           const std::filesystem::path& path);

}  // namespace rotamatch::eval
