#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "rotamatch/train.hpp"

using namespace rotamatch;
using geom::Vector2d;

namespace {

pipeline::PipelineConfig tiny_arch() {
  pipeline::PipelineConfig cfg;
  cfg.desc_dim = 16;
  cfg.width = 16;
  cfg.conv_channels = {4, 6, 8};
  cfg.n_layers = 2;
  cfg.n_freqs = 2;
  return cfg;
}

train::TrainConfig tiny_train(train::Regime regime, uint64_t seed) {
  train::TrainConfig cfg;
  cfg.regime = regime;
  cfg.desc_steps = 8;
  cfg.matcher_steps = 8;
  cfg.batch_size = 2;
  cfg.n_keypoints = 16;
  cfg.seed = seed;
  cfg.arch = tiny_arch();
  return cfg;
}

scenes::Dataset tiny_dataset(uint64_t seed) {
  scenes::SceneConfig cfg;
  cfg.n_scenes = 2;
  cfg.image_size = 64;
  cfg.seed = seed;
  return scenes::build_dataset(cfg);
}

KeypointSet with_descriptors(const std::vector<double>& flat, int64_t n, int64_t d) {
  KeypointSet ks;
  ks.width = ks.height = 64;
  for (int64_t i = 0; i < n; ++i) ks.positions.push_back(Vector2d(4.0 * i, 4.0 * i));
  ks.descriptors = Tensor::from({n, d}, flat);
  return ks;
}

}  // namespace

TEST_CASE("regime names round trip") {
  using train::Regime;
  for (auto r : {Regime::kNoRot, Regime::kRotMatch, Regime::kRotDescMatch,
                 Regime::kJointDescRotMatch})
    CHECK(train::regime_from_name(train::regime_name(r)) == r);
  CHECK(train::regime_name(Regime::kNoRot) == "norot");
  CHECK_THROWS(train::regime_from_name("sometimes"));
}

TEST_CASE("contrastive loss matches closed forms") {
  // identical descriptors: every logit equal, both softmax directions uniform
  std::vector<double> same(4 * 8, 0.0);
  for (int i = 0; i < 4; ++i) same[static_cast<size_t>(i * 8)] = 1.0;
  auto ka = with_descriptors(same, 4, 8);
  auto kb = with_descriptors(same, 4, 8);
  std::vector<MatchPair> gt;
  for (int i = 0; i < 4; ++i) gt.push_back({i, i});
  double uniform = train::descriptor_loss(nullptr, ka, kb, gt, 0.07).item();
  CHECK(uniform == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  // orthogonal one-hot descriptors: diagonal logit 1/t, off-diagonal 0
  std::vector<double> eye(4 * 8, 0.0);
  for (int i = 0; i < 4; ++i) eye[static_cast<size_t>(i * 8 + i)] = 1.0;
  auto oa = with_descriptors(eye, 4, 8);
  auto ob = with_descriptors(eye, 4, 8);
  const double t = 0.5;
  double sharp = train::descriptor_loss(nullptr, oa, ob, gt, t).item();
  CHECK(sharp == doctest::Approx(std::log(1.0 + 3.0 * std::exp(-1.0 / t))).epsilon(1e-12));
  // temperature sharpens: colder separable logits mean lower loss
  CHECK(train::descriptor_loss(nullptr, oa, ob, gt, 0.07).item() < sharp);

  // permuted partial ground truth still evaluates, orthogonal picks go uniform
  std::vector<MatchPair> partial = {{2, 1}, {0, 3}};
  double part = train::descriptor_loss(nullptr, oa, ob, partial, 0.25).item();
  CHECK(part == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("contrastive loss with no ground truth is inert") {
  Rng rng = Rng::derive(60, {kStreamInit});
  auto net = pipeline::DescriptorNet::init(tiny_arch(), rng);
  auto ds = tiny_dataset(61);
  std::vector<Vector2d> pos;
  for (int k = 0; k < 6; ++k) pos.push_back(Vector2d(10.0 + 7 * k, 30.0));
  Tape tape;
  for (auto& [n, t] : net.params()) t.zero_grad();
  auto ka = pipeline::describe(&tape, net, ds.pairs[0].image_a, pos);
  auto kb = pipeline::describe(&tape, net, ds.pairs[0].image_b, pos);
  Tensor loss = train::descriptor_loss(&tape, ka, kb, {}, 0.07);
  CHECK(loss.item() == 0.0);
  tape.backward(loss);
  for (auto& [n, t] : net.params()) {
    if (!t.has_grad()) continue;
    for (double g : t.grad()) CHECK(g == 0.0);
  }
}

TEST_CASE("assignment loss matches closed forms") {
  // identical descriptors make the soft assignment exactly uniform
  std::vector<double> same(4 * 8, 0.0);
  for (int i = 0; i < 4; ++i) same[static_cast<size_t>(i * 8 + 2)] = 1.0;
  auto am = pipeline::assign(nullptr, Tensor::from({4, 8}, same),
                             Tensor::from({4, 8}, same), 0.1);
  std::vector<MatchPair> gt = {{0, 0}, {1, 1}, {2, 3}};
  double uniform = train::matcher_loss(nullptr, am, gt).item();
  CHECK(uniform == doctest::Approx(std::log(16.0)).epsilon(1e-12));

  // a strong diagonal drives the loss to 2*log(1 + 3*e^-s)
  std::vector<double> strong(4 * 8, 0.0), unit(4 * 8, 0.0);
  for (int i = 0; i < 4; ++i) {
    strong[static_cast<size_t>(i * 8 + i)] = 10.0;
    unit[static_cast<size_t>(i * 8 + i)] = 1.0;
  }
  auto sharp_am = pipeline::assign(nullptr, Tensor::from({4, 8}, strong),
                                   Tensor::from({4, 8}, unit), 0.1);
  std::vector<MatchPair> diag = {{0, 0}, {1, 1}, {2, 2}, {3, 3}};
  double sharp = train::matcher_loss(nullptr, sharp_am, diag).item();
  CHECK(sharp ==
        doctest::Approx(2.0 * std::log(1.0 + 3.0 * std::exp(-10.0))).epsilon(1e-9));

  CHECK(train::matcher_loss(nullptr, am, {}).item() == 0.0);
}

TEST_CASE("descriptor training reduces its loss and logs every step") {
  auto ds = tiny_dataset(62);
  auto cfg = tiny_train(train::Regime::kNoRot, 7);
  cfg.desc_steps = 40;
  train::TrainLog log;
  auto net = train::train_descriptor(cfg, ds, &log);
  REQUIRE(log.rows.size() == 40);
  for (size_t i = 0; i < log.rows.size(); ++i) {
    CHECK(log.rows[i].step == static_cast<int64_t>(i + 1));
    CHECK(std::isfinite(log.rows[i].loss));
    CHECK(log.rows[i].wall_time_ms >= 0.0);
  }
  auto avg = [&](size_t lo, size_t hi) {
    double s = 0;
    for (size_t i = lo; i < hi; ++i) s += log.rows[i].loss;
    return s / (hi - lo);
  };
  CHECK(avg(35, 40) < avg(0, 5));

  // trained descriptors separate true correspondences from distractors
  Rng rng = Rng::derive(99, {kStreamKeypoints, 0});
  auto [pa, pb] = scenes::sample_keypoints(ds.pairs[0], 16, rng);
  auto ka = pipeline::describe(nullptr, net, ds.pairs[0].image_a, pa.positions);
  auto kb = pipeline::describe(nullptr, net, ds.pairs[0].image_b, pb.positions);
  auto gt = scenes::gt_matches(ds.pairs[0], ka, kb);
  REQUIRE(gt.size() >= 4);
  double matched = 0, background = 0;
  int nm = 0, nb = 0;
  for (const auto& g : gt)
    for (int64_t j = 0; j < kb.descriptors.rows(); ++j) {
      double dot = 0;
      for (int64_t c = 0; c < 16; ++c)
        dot += ka.descriptors.at(g.a, c) * kb.descriptors.at(j, c);
      if (j == g.b) {
        matched += dot;
        ++nm;
      } else {
        background += dot;
        ++nb;
      }
    }
  CHECK(matched / nm > background / nb);
}

TEST_CASE("matcher training reduces its loss against a frozen descriptor") {
  auto ds = tiny_dataset(63);
  auto cfg = tiny_train(train::Regime::kNoRot, 8);
  cfg.desc_steps = 10;
  cfg.matcher_steps = 30;
  auto desc = train::train_descriptor(cfg, ds);

  std::vector<std::vector<double>> before;
  for (auto& [n, t] : desc.params())
    before.emplace_back(t.data().begin(), t.data().end());

  train::TrainLog log;
  auto matcher = train::train_matcher(cfg, desc, ds, &log);
  REQUIRE(log.rows.size() == 30);
  auto avg = [&](size_t lo, size_t hi) {
    double s = 0;
    for (size_t i = lo; i < hi; ++i) s += log.rows[i].loss;
    return s / (hi - lo);
  };
  CHECK(avg(25, 30) < avg(0, 5));
  CHECK(matcher.self_attn.size() == 2);

  // the descriptor must be untouched by the matcher phase
  size_t idx = 0;
  for (auto& [n, t] : desc.params()) {
    const auto& snap = before[idx++];
    REQUIRE(snap.size() == t.data().size());
    for (size_t i = 0; i < snap.size(); ++i) CHECK(snap[i] == t.data()[i]);
  }
}

TEST_CASE("rotation augmentation fires exactly where the regime says") {
  auto ds = tiny_dataset(64);

  auto cfg = tiny_train(train::Regime::kNoRot, 9);
  geom::reset_rotation_op_counter();
  auto r1 = train::run_regime(cfg, ds);
  CHECK(geom::rotation_ops_invoked() == 0);

  cfg = tiny_train(train::Regime::kRotMatch, 9);
  geom::reset_rotation_op_counter();
  (void)train::train_descriptor(cfg, ds);
  CHECK(geom::rotation_ops_invoked() == 0);
  geom::reset_rotation_op_counter();
  (void)train::train_matcher(cfg, r1.desc, ds);
  CHECK(geom::rotation_ops_invoked() > 0);

  cfg = tiny_train(train::Regime::kRotDescMatch, 9);
  geom::reset_rotation_op_counter();
  (void)train::train_descriptor(cfg, ds);
  CHECK(geom::rotation_ops_invoked() > 0);
  geom::reset_rotation_op_counter();
}

TEST_CASE("training is bit-reproducible") {
  auto ds = tiny_dataset(65);
  auto cfg = tiny_train(train::Regime::kRotMatch, 10);
  auto a = train::run_regime(cfg, ds);
  auto b = train::run_regime(cfg, ds);

  auto compare = [](NamedTensors x, NamedTensors y) {
    REQUIRE(x.size() == y.size());
    for (size_t k = 0; k < x.size(); ++k) {
      CHECK(x[k].first == y[k].first);
      auto dx = x[k].second.data();
      auto dy = y[k].second.data();
      REQUIRE(dx.size() == dy.size());
      for (size_t i = 0; i < dx.size(); ++i) CHECK(dx[i] == dy[i]);
    }
  };
  compare(a.desc.params(), b.desc.params());
  compare(a.matcher.params(), b.matcher.params());
  REQUIRE(a.desc_log.rows.size() == b.desc_log.rows.size());
  for (size_t i = 0; i < a.desc_log.rows.size(); ++i)
    CHECK(a.desc_log.rows[i].loss == b.desc_log.rows[i].loss);

  // a different seed moves the weights
  cfg.seed = 11;
  auto c = train::train_descriptor(cfg, ds);
  bool any_diff = false;
  auto pa = a.desc.params();
  auto pc = c.params();
  for (size_t k = 0; k < pa.size() && !any_diff; ++k)
    for (size_t i = 0; i < pa[k].second.data().size(); ++i)
      if (pa[k].second.data()[i] != pc[k].second.data()[i]) {
        any_diff = true;
        break;
      }
  CHECK(any_diff);
}

TEST_CASE("training log csv is parseable") {
  train::TrainLog log;
  log.rows = {{1, 0.5, 12.25}, {2, 0.25, 13.5}};
  auto path = std::filesystem::temp_directory_path() /
              ("rotamatch_log_" + std::to_string(::getpid()) + ".csv");
  log.write_csv(path);
  std::ifstream f(path);
  std::string line;
  REQUIRE(std::getline(f, line));
  CHECK(line == "step,loss,wall_time_ms");
  int rows = 0;
  while (std::getline(f, line)) {
    std::stringstream ss(line);
    std::string cell;
    int cells = 0;
    while (std::getline(ss, cell, ',')) {
      CHECK(!cell.empty());
      ++cells;
    }
    CHECK(cells == 3);
    ++rows;
  }
  CHECK(rows == 2);
  std::filesystem::remove(path);
}

TEST_CASE("empty datasets are rejected") {
  scenes::Dataset empty;
  auto cfg = tiny_train(train::Regime::kNoRot, 12);
  CHECK_THROWS(train::train_descriptor(cfg, empty));
  Rng rng = Rng::derive(1, {kStreamInit});
  auto desc = pipeline::DescriptorNet::init(tiny_arch(), rng);
  CHECK_THROWS(train::train_matcher(cfg, desc, empty));
}
