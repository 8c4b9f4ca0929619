#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "rotamatch/eval.hpp"

namespace rotamatch::eval {

namespace {

std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Same fold as Rng::derive, exposed as a plain seed for APIs that take one.
uint64_t fold_seed(uint64_t seed, std::initializer_list<uint64_t> path) {
  uint64_t s = Rng::splitmix(seed);
  for (uint64_t p : path) s = Rng::splitmix(s ^ Rng::splitmix(p + 0x9e3779b97f4a7c15ULL));
  return s;
}

PairRecord score_pair(const geom::ViewPair& pair, const KeypointSet& kps_a,
                      const KeypointSet& kps_b, const pipeline::AssignmentMatrix& am,
                      const EvalConfig& cfg, uint64_t ransac_seed,
                      const std::optional<geom::Matrix3d>& h_gt) {
  PairRecord rec;
  rec.pair_id = pair.pair_id;
  rec.n_matches = static_cast<int>(am.matches.size());
  rec.no_matches = am.matches.empty();

  std::vector<PixelMatch> px;
  px.reserve(am.matches.size());
  for (const auto& m : am.matches)
    px.emplace_back(kps_a.positions[static_cast<size_t>(m.i)],
                    kps_b.positions[static_cast<size_t>(m.j)]);

  auto pose = estimate_essential_ransac(px, pair.camera_a, pair.camera_b,
                                        cfg.ransac_iters, cfg.ransac_thresh,
                                        ransac_seed);
  if (pose.ok) {
    auto gt = geom::relative_pose(pair.camera_a, pair.camera_b);
    rec.pose_error_deg = pose_error_deg(pose.R, pose.t, gt.R, gt.t_unit);
    rec.pose_failed = false;
    rec.n_inliers = pose.n_inliers;
  }
  rec.precision3px = matching_precision(am, kps_a, kps_b, pair, 3.0).precision;
  rec.maa5 = matching_precision(am, kps_a, kps_b, pair, 5.0).precision;
  rec.maa10 = matching_precision(am, kps_a, kps_b, pair, 10.0).precision;
  if (h_gt) {
    auto hest = estimate_homography_ransac(px, cfg.ransac_iters, 3.0, ransac_seed);
    rec.homography_err_px =
        hest.ok ? homography_corner_error(hest.H, *h_gt, pair.image_a.w, pair.image_a.h)
                : kInfError;
  }
  return rec;
}

void finalize_report(MetricReport& rep) {
  rep.n_pairs = static_cast<int>(rep.pairs.size());
  std::vector<double> errs;
  errs.reserve(rep.pairs.size());
  double maa5 = 0, maa10 = 0, prec = 0;
  rep.failures = 0;
  for (const auto& r : rep.pairs) {
    errs.push_back(r.pose_error_deg);
    maa5 += r.maa5;
    maa10 += r.maa10;
    prec += r.precision3px;
    rep.failures += r.pose_failed;
  }
  rep.auc5 = auc(errs, 5.0);
  rep.auc10 = auc(errs, 10.0);
  rep.auc20 = auc(errs, 20.0);
  std::vector<double> herrs;
  for (const auto& r : rep.pairs)
    if (!std::isnan(r.homography_err_px)) herrs.push_back(r.homography_err_px);
  rep.homography_auc10 = auc(herrs, 10.0);
  if (rep.n_pairs > 0) {
    maa5 /= rep.n_pairs;
    maa10 /= rep.n_pairs;
    prec /= rep.n_pairs;
  }
  rep.maa5 = maa5;
  rep.maa10 = maa10;
  rep.precision3px = prec;
}

MetricReport make_report_shell(const Protocol& protocol, const EvalConfig& cfg,
                               const std::string& regime_tag, int stop_layer) {
  MetricReport rep;
  rep.regime = regime_tag;
  rep.protocol = protocol_name(protocol);
  rep.stop_layer = stop_layer;
  rep.n_keypoints = cfg.n_keypoints;
  rep.tau = cfg.tau;
  rep.ransac_iters = cfg.ransac_iters;
  rep.ransac_thresh = cfg.ransac_thresh;
  rep.seed = cfg.seed;
  return rep;
}

}  // namespace

Protocol protocol_from_string(const std::string& s) {
  Protocol p;
  if (s == "upright") {
    p.kind = Protocol::Kind::kUpright;
  } else if (s == "rot90") {
    p.kind = Protocol::Kind::kRotQuarter;
  } else if (s.rfind("angle:", 0) == 0) {
    p.kind = Protocol::Kind::kFixedAngle;
    size_t pos = 0;
    const std::string num = s.substr(6);
    p.angle_deg = std::stod(num, &pos);
    if (pos != num.size()) throw std::invalid_argument("bad angle in protocol: " + s);
  } else {
    throw std::invalid_argument("unknown protocol: " + s);
  }
  return p;
}

std::string protocol_name(const Protocol& p) {
  switch (p.kind) {
    case Protocol::Kind::kUpright:
      return "upright";
    case Protocol::Kind::kRotQuarter:
      return "rotated-quarter";
    case Protocol::Kind::kFixedAngle: {
      char buf[48];
      std::snprintf(buf, sizeof buf, "fixed-angle(%g)", p.angle_deg);
      return buf;
    }
  }
  return "unknown";
}

geom::ViewPair apply_protocol(const geom::ViewPair& pair, const Protocol& protocol,
                              Rng& rng) {
  switch (protocol.kind) {
    case Protocol::Kind::kUpright:
      return pair;
    case Protocol::Kind::kRotQuarter: {
      geom::RotationSpec spec;
      if (protocol.quarter_override_a >= 0 && protocol.quarter_override_b >= 0) {
        // Override path leaves rng untouched so a forced (0,0) run is
        // stream-identical to upright.
        spec.alpha_a = protocol.quarter_override_a;
        spec.alpha_b = protocol.quarter_override_b;
        spec.mode = geom::RotMode::kQuarter;
        spec.sampling = geom::RotSampling::kIndependent;
      } else {
        spec = geom::sample_rotation(rng, geom::RotSampling::kIndependent);
      }
      return geom::rotate_quarter(pair, spec);
    }
    case Protocol::Kind::kFixedAngle: {
      geom::RotationSpec spec;
      spec.alpha_a = 0.0;
      spec.alpha_b = protocol.angle_deg;
      spec.mode = geom::RotMode::kArbitrary;
      return geom::rotate_arbitrary(pair, spec).pair;
    }
  }
  return pair;
}

MetricReport run_benchmark(const pipeline::DescriptorNet& desc,
                           const pipeline::MatcherNet& matcher,
                           const scenes::Dataset& dataset, const Protocol& protocol,
                           const EvalConfig& cfg, const std::string& regime_tag) {
  MetricReport rep = make_report_shell(protocol, cfg, regime_tag, cfg.stop_layer);
  for (size_t i = 0; i < dataset.pairs.size(); ++i) {
    Rng prng = Rng::derive(cfg.seed, {kStreamEval, i});
    geom::ViewPair p = apply_protocol(dataset.pairs[i], protocol, prng);
    auto [ka, kb] = scenes::sample_keypoints(p, cfg.n_keypoints, prng);
    auto am = pipeline::match_pair(desc, matcher, p, ka.positions, kb.positions,
                                   cfg.stop_layer, cfg.tau);
    uint64_t rseed = fold_seed(cfg.seed, {kStreamRansac, i});
    auto h_gt = gt_plane_homography(p);
    rep.pairs.push_back(score_pair(p, ka, kb, am, cfg, rseed, h_gt));
  }
  finalize_report(rep);
  return rep;
}

std::vector<MetricReport> sweep_layers(const std::vector<RegimeModel>& models,
                                       const scenes::Dataset& dataset,
                                       const std::vector<Protocol>& protocols,
                                       const EvalConfig& cfg) {
  std::vector<MetricReport> out;
  for (const auto& model : models) {
    const int n_layers = static_cast<int>(model.matcher.self_attn.size());
    for (const auto& protocol : protocols) {
      std::vector<MetricReport> cells;
      cells.reserve(static_cast<size_t>(n_layers));
      for (int l = 1; l <= n_layers; ++l)
        cells.push_back(make_report_shell(protocol, cfg, model.regime, l));

      for (size_t i = 0; i < dataset.pairs.size(); ++i) {
        // Same stream derivations as run_benchmark so the deepest cell
        // matches it bit for bit.
        Rng prng = Rng::derive(cfg.seed, {kStreamEval, i});
        geom::ViewPair p = apply_protocol(dataset.pairs[i], protocol, prng);
        auto [ka, kb] = scenes::sample_keypoints(p, cfg.n_keypoints, prng);
        KeypointSet da = pipeline::describe(nullptr, model.desc, p.image_a, ka.positions);
        KeypointSet db = pipeline::describe(nullptr, model.desc, p.image_b, kb.positions);
        auto trace = pipeline::match_forward(nullptr, model.matcher, da, db);
        uint64_t rseed = fold_seed(cfg.seed, {kStreamRansac, i});
        auto h_gt = gt_plane_homography(p);
        for (int l = 1; l <= n_layers; ++l) {
          const auto& [ta, tb] = trace.layers[static_cast<size_t>(l - 1)];
          auto am = pipeline::assign(nullptr, ta, tb, cfg.tau);
          cells[static_cast<size_t>(l - 1)].pairs.push_back(
              score_pair(p, da, db, am, cfg, rseed, h_gt));
        }
      }
      for (auto& cell : cells) {
        finalize_report(cell);
        out.push_back(std::move(cell));
      }
    }
  }
  return out;
}

std::vector<AngleSweepRow> sweep_angles(const std::vector<RegimeModel>& models,
                                        const scenes::Dataset& dataset,
                                        const std::vector<double>& angles_deg,
                                        const EvalConfig& cfg) {
  std::vector<std::string> regimes;
  for (const auto& m : models) {
    bool seen = false;
    for (const auto& r : regimes) seen |= r == m.regime;
    if (!seen) regimes.push_back(m.regime);
  }

  std::vector<AngleSweepRow> rows;
  for (const auto& regime : regimes) {
    for (double angle : angles_deg) {
      Protocol protocol;
      protocol.kind = Protocol::Kind::kFixedAngle;
      protocol.angle_deg = angle;
      AngleSweepRow row;
      row.regime = regime;
      row.angle_deg = angle;
      for (const auto& m : models) {
        if (m.regime != regime) continue;
        auto rep = run_benchmark(m.desc, m.matcher, dataset, protocol, cfg, regime);
        row.per_model_auc20.push_back(rep.auc20);
      }
      row.n_models = static_cast<int>(row.per_model_auc20.size());
      double mean = 0;
      for (double v : row.per_model_auc20) mean += v;
      mean /= std::max(row.n_models, 1);
      row.mean_auc20 = mean;
      if (row.n_models > 1) {
        double var = 0;
        for (double v : row.per_model_auc20) var += (v - mean) * (v - mean);
        var /= row.n_models - 1;
        row.ci95_auc20 = 1.96 * std::sqrt(var / row.n_models);
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string MetricReport::to_json() const {
  nlohmann::ordered_json j;
  j["regime"] = regime;
  j["protocol"] = protocol;
  j["stop_layer"] = stop_layer;
  j["n_pairs"] = n_pairs;
  j["auc5"] = auc5;
  j["auc10"] = auc10;
  j["auc20"] = auc20;
  j["maa5"] = maa5;
  j["maa10"] = maa10;
  j["precision3px"] = precision3px;
  j["failures"] = failures;
  j["homography_auc10"] = homography_auc10;
  j["n_keypoints"] = n_keypoints;
  j["tau"] = tau;
  j["ransac_iters"] = ransac_iters;
  j["ransac_thresh"] = ransac_thresh;
  j["seed"] = seed;
  return j.dump(2) + "\n";
}

void MetricReport::write_json(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  f << to_json();
}

void MetricReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  f << "pair_id,pose_error_deg,n_matches,n_inliers,precision3px,maa5,maa10,"
       "homography_err_px,pose_failed,no_matches\n";
  for (const auto& r : pairs) {
    f << r.pair_id << ',' << fmt_double(r.pose_error_deg) << ',' << r.n_matches
      << ',' << r.n_inliers << ',' << fmt_double(r.precision3px) << ','
      << fmt_double(r.maa5) << ',' << fmt_double(r.maa10) << ','
      << fmt_double(r.homography_err_px) << ',' << int(r.pose_failed) << ','
      << int(r.no_matches) << '\n';
  }
}

void write_layer_sweep_csv(const std::vector<MetricReport>& cells,
                           const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  f << "regime,protocol,stop_layer,n_pairs,auc5,auc10,auc20,maa5,maa10,"
       "precision3px,failures\n";
  for (const auto& c : cells) {
    f << c.regime << ',' << c.protocol << ',' << c.stop_layer << ',' << c.n_pairs
      << ',' << fmt_double(c.auc5) << ',' << fmt_double(c.auc10) << ','
      << fmt_double(c.auc20) << ',' << fmt_double(c.maa5) << ','
      << fmt_double(c.maa10) << ',' << fmt_double(c.precision3px) << ','
      << c.failures << '\n';
  }
}

void write_angle_sweep_csv(const std::vector<AngleSweepRow>& rows,
                           const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  f << "regime,angle_deg,n_models,mean_auc20,ci95_auc20,per_model_auc20\n";
  for (const auto& r : rows) {
    f << r.regime << ',' << fmt_double(r.angle_deg) << ',' << r.n_models << ','
      << fmt_double(r.mean_auc20) << ',' << fmt_double(r.ci95_auc20) << ',';
    for (size_t i = 0; i < r.per_model_auc20.size(); ++i) {
      if (i) f << ';';
      f << fmt_double(r.per_model_auc20[i]);
    }
    f << '\n';
  }
}

}  // namespace rotamatch::eval
