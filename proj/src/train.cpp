#include "rotamatch/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

namespace rotamatch::train {

using pipeline::AssignmentMatrix;
using pipeline::DescriptorNet;
using pipeline::MatcherNet;

std::string regime_name(Regime r) {
  switch (r) {
    case Regime::kNoRot: return "norot";
    case Regime::kRotMatch: return "rotmatch";
    case Regime::kRotDescMatch: return "rotdescmatch";
    case Regime::kJointDescRotMatch: return "jointdesc";
  }
  return "norot";
}

Regime regime_from_name(const std::string& s) {
  if (s == "norot") return Regime::kNoRot;
  if (s == "rotmatch") return Regime::kRotMatch;
  if (s == "rotdescmatch") return Regime::kRotDescMatch;
  if (s == "jointdesc") return Regime::kJointDescRotMatch;
  throw std::invalid_argument("unknown regime: " + s);
}

void TrainLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write training log: " + path.string());
  f << "step,loss,wall_time_ms\n";
  char buf[96];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.3f\n",
                  static_cast<long long>(r.step), r.loss, r.wall_time_ms);
    f << buf;
  }
}

Tensor descriptor_loss(Tape* tape, const KeypointSet& kps_a, const KeypointSet& kps_b,
                       const std::vector<MatchPair>& gt, double temperature) {
  if (gt.empty()) return Tensor::zeros({1});
  const int64_t k = static_cast<int64_t>(gt.size());
  const int64_t na = kps_a.descriptors.rows(), nb = kps_b.descriptors.rows();
  Tensor sel_a = Tensor::zeros({k, na}), sel_b = Tensor::zeros({k, nb});
  for (int64_t r = 0; r < k; ++r) {
    sel_a.at(r, gt[static_cast<size_t>(r)].a) = 1.0;
    sel_b.at(r, gt[static_cast<size_t>(r)].b) = 1.0;
  }
  Tensor da = ops::matmul(tape, sel_a, kps_a.descriptors);
  Tensor db = ops::matmul(tape, sel_b, kps_b.descriptors);
  Tensor logits =
      ops::scale(tape, ops::matmul(tape, da, ops::transpose(tape, db)), 1.0 / temperature);
  Tensor eye = Tensor::zeros({k, k});
  for (int64_t i = 0; i < k; ++i) eye.at(i, i) = 1.0;
  Tensor fwd = ops::reduce_sum(
      tape, ops::mul(tape, eye, ops::log(tape, ops::softmax_rows(tape, logits))));
  Tensor bwd = ops::reduce_sum(
      tape, ops::mul(tape, eye,
                     ops::log(tape, ops::softmax_rows(tape, ops::transpose(tape, logits)))));
  return ops::scale(tape, ops::add(tape, fwd, bwd), -0.5 / static_cast<double>(k));
}

Tensor matcher_loss(Tape* tape, const AssignmentMatrix& am,
                    const std::vector<MatchPair>& gt) {
  if (gt.empty()) return Tensor::zeros({1});
  const int64_t n = am.P.rows(), m = am.P.cols();
  Tensor mask = Tensor::zeros({n, m});
  for (const auto& g : gt) mask.at(g.a, g.b) = 1.0;
  Tensor picked = ops::reduce_sum(tape, ops::mul(tape, mask, ops::log(tape, am.P)));
  return ops::scale(tape, picked, -1.0 / static_cast<double>(gt.size()));
}

namespace {

struct Sample {
  geom::ViewPair pair;
  KeypointSet kps_a, kps_b;  // positions only; descriptors attached later
  std::vector<MatchPair> gt;
};

// Rotation placement per regime for the two training phases.
bool desc_phase_rotates(Regime r) {
  return r == Regime::kRotDescMatch || r == Regime::kJointDescRotMatch;
}
geom::RotSampling desc_phase_sampling(Regime r) {
  return r == Regime::kJointDescRotMatch ? geom::RotSampling::kJoint
                                         : geom::RotSampling::kIndependent;
}
bool matcher_phase_rotates(Regime r) { return r != Regime::kNoRot; }

Sample draw_sample(const TrainConfig& cfg, const scenes::Dataset& ds, Rng& rng,
                   bool rotate, geom::RotSampling sampling) {
  Sample s;
  const auto& base = ds.pairs[rng.index(ds.pairs.size())];
  if (rotate) {
    geom::RotationSpec spec = geom::sample_rotation(rng, sampling);
    s.pair = geom::rotate_quarter(base, spec);
  } else {
    s.pair = base;
  }
  auto [ka, kb] = scenes::sample_keypoints(s.pair, cfg.n_keypoints, rng);
  s.kps_a = std::move(ka);
  s.kps_b = std::move(kb);
  s.gt = scenes::gt_matches(s.pair, s.kps_a, s.kps_b);
  return s;
}

void check_finite(double loss, const char* phase, int64_t step) {
  if (!std::isfinite(loss))
    throw TrainingError(std::string(phase) + " loss diverged at step " +
                        std::to_string(step));
}

std::vector<Tensor> values_of(NamedTensors named) {
  std::vector<Tensor> out;
  out.reserve(named.size());
  for (auto& [n, t] : named) out.push_back(t);
  return out;
}

}  // namespace

DescriptorNet train_descriptor(const TrainConfig& config, const scenes::Dataset& dataset,
                               TrainLog* log) {
  if (dataset.pairs.empty())
    throw std::invalid_argument("train_descriptor: empty dataset");
  Rng init_rng = Rng::derive(config.seed, {kStreamInit, 1});
  DescriptorNet net = DescriptorNet::init(config.arch, init_rng);
  AdamW opt(values_of(net.params()), config.lr, {0.9, 0.999}, config.weight_decay);
  Rng batch_rng = Rng::derive(config.seed, {kStreamBatch, 1});
  const bool rotate = desc_phase_rotates(config.regime);
  const auto sampling = desc_phase_sampling(config.regime);

  auto t0 = std::chrono::steady_clock::now();
  for (int step = 1; step <= config.desc_steps; ++step) {
    Tape tape;
    Tensor total = Tensor::zeros({1});
    for (int b = 0; b < config.batch_size; ++b) {
      Sample s = draw_sample(config, dataset, batch_rng, rotate, sampling);
      KeypointSet ka = pipeline::describe(&tape, net, s.pair.image_a, s.kps_a.positions);
      KeypointSet kb = pipeline::describe(&tape, net, s.pair.image_b, s.kps_b.positions);
      Tensor l = descriptor_loss(&tape, ka, kb, s.gt, config.infonce_temp);
      total = ops::add(&tape, total, l);
    }
    Tensor loss = ops::scale(&tape, total, 1.0 / config.batch_size);
    double lv = loss.item();
    check_finite(lv, "descriptor", step);
    opt.zero_grad();
    tape.backward(loss);
    opt.step();
    if (log) {
      auto now = std::chrono::steady_clock::now();
      log->rows.push_back(
          {step, lv, std::chrono::duration<double, std::milli>(now - t0).count()});
    }
  }
  return net;
}

MatcherNet train_matcher(const TrainConfig& config, const DescriptorNet& frozen_desc,
                         const scenes::Dataset& dataset, TrainLog* log) {
  if (dataset.pairs.empty())
    throw std::invalid_argument("train_matcher: empty dataset");
  Rng init_rng = Rng::derive(config.seed, {kStreamInit, 2});
  MatcherNet net = MatcherNet::init(config.arch, init_rng);
  AdamW opt(values_of(net.params()), config.lr, {0.9, 0.999}, config.weight_decay);
  Rng batch_rng = Rng::derive(config.seed, {kStreamBatch, 2});
  const bool rotate = matcher_phase_rotates(config.regime);

  auto t0 = std::chrono::steady_clock::now();
  for (int step = 1; step <= config.matcher_steps; ++step) {
    Tape tape;
    Tensor total = Tensor::zeros({1});
    for (int b = 0; b < config.batch_size; ++b) {
      Sample s = draw_sample(config, dataset, batch_rng, rotate,
                             geom::RotSampling::kIndependent);
      // Frozen descriptor: no tape, so gradients stop at the tokens.
      KeypointSet ka =
          pipeline::describe(nullptr, frozen_desc, s.pair.image_a, s.kps_a.positions);
      KeypointSet kb =
          pipeline::describe(nullptr, frozen_desc, s.pair.image_b, s.kps_b.positions);
      auto trace = pipeline::match_forward(&tape, net, ka, kb);
      auto am = pipeline::assign(&tape, trace.layers.back().first,
                                 trace.layers.back().second, config.tau);
      Tensor l = matcher_loss(&tape, am, s.gt);
      total = ops::add(&tape, total, l);
    }
    Tensor loss = ops::scale(&tape, total, 1.0 / config.batch_size);
    double lv = loss.item();
    check_finite(lv, "matcher", step);
    opt.zero_grad();
    tape.backward(loss);
    opt.step();
    if (log) {
      auto now = std::chrono::steady_clock::now();
      log->rows.push_back(
          {step, lv, std::chrono::duration<double, std::milli>(now - t0).count()});
    }
  }
  return net;
}

TrainResult run_regime(const TrainConfig& config, const scenes::Dataset& dataset) {
  TrainResult res;
  res.desc = train_descriptor(config, dataset, &res.desc_log);
  res.matcher = train_matcher(config, res.desc, dataset, &res.matcher_log);
  return res;
}

}  // namespace rotamatch::train
