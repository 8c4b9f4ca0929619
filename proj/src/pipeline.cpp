#include "rotamatch/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "rotamatch/checkpoint.hpp"

namespace rotamatch::pipeline {

namespace {

constexpr double kPi = 3.14159265358979323846;

Tensor dense_init(Rng& rng, int64_t rows, int64_t cols, double scale) {
  Tensor w = Tensor::zeros({rows, cols}, true);
  auto d = w.data();
  for (auto& v : d) v = rng.normal() * scale;
  return w;
}

Tensor bias_init(int64_t cols) { return Tensor::zeros({1, cols}, true); }

Tensor project(Tape* t, const Tensor& x, const Tensor& w, const Tensor& b) {
  return ops::add_rowvec(t, ops::matmul(t, x, w), b);
}

Tensor l2_normalize_rows(Tape* t, const Tensor& x) {
  Tensor sq = ops::reduce_sum(t, ops::mul(t, x, x), 1);
  Tensor safe = ops::add(t, sq, Tensor::full({x.rows(), 1}, 1e-24));
  Tensor inv = ops::exp(t, ops::scale(t, ops::log(t, safe), -0.5));
  return ops::rowwise_scale(t, x, inv);
}

// Scaled dot-product attention; splits columns into heads when n_heads > 1.
Tensor attention(Tape* t, const Tensor& q, const Tensor& k, const Tensor& v,
                 int n_heads) {
  const int64_t d = q.cols();
  if (n_heads <= 1) {
    Tensor logits =
        ops::scale(t, ops::matmul(t, q, ops::transpose(t, k)), 1.0 / std::sqrt(double(d)));
    return ops::matmul(t, ops::softmax_rows(t, logits), v);
  }
  const int64_t dh = d / n_heads;
  std::vector<Tensor> outs;
  for (int h = 0; h < n_heads; ++h) {
    Tensor qh = ops::slice(t, q, 1, h * dh, (h + 1) * dh);
    Tensor kh = ops::slice(t, k, 1, h * dh, (h + 1) * dh);
    Tensor vh = ops::slice(t, v, 1, h * dh, (h + 1) * dh);
    Tensor logits = ops::scale(t, ops::matmul(t, qh, ops::transpose(t, kh)),
                               1.0 / std::sqrt(double(dh)));
    outs.push_back(ops::matmul(t, ops::softmax_rows(t, logits), vh));
  }
  return ops::concat(t, outs, 1);
}

// Pre-LN residual attention; hq/hkv are already layer-normalized inputs.
Tensor attn_residual(Tape* t, const Tensor& x, const Tensor& hq, const Tensor& hkv,
                     const MatcherNet::Attn& w, int n_heads) {
  Tensor q = project(t, hq, w.wq, w.bq);
  Tensor k = project(t, hkv, w.wk, w.bk);
  Tensor v = project(t, hkv, w.wv, w.bv);
  Tensor o = project(t, attention(t, q, k, v, n_heads), w.wo, w.bo);
  return ops::add(t, x, o);
}

Tensor ffn_residual(Tape* t, const Tensor& x, const MatcherNet::Ffn& w) {
  Tensor h = ops::layer_norm(t, x);
  Tensor mid = ops::relu(t, project(t, h, w.w1, w.b1));
  return ops::add(t, x, project(t, mid, w.w2, w.b2));
}

}  // namespace

void PipelineConfig::validate() const {
  if (patch_size <= 0 || patch_size % 8 != 0)
    throw std::invalid_argument("patch_size must be a positive multiple of 8");
  if (conv_channels.size() != 3)
    throw std::invalid_argument("expected 3 conv channel counts");
  if (desc_dim != width)
    throw std::invalid_argument("desc_dim must equal matcher width");
  if (n_heads < 1 || width % n_heads != 0)
    throw std::invalid_argument("width must divide evenly into heads");
  if (n_layers < 1 || n_freqs < 1 || desc_dim < 1)
    throw std::invalid_argument("bad architecture sizes");
}

DescriptorNet DescriptorNet::init(const PipelineConfig& cfg, Rng& rng) {
  cfg.validate();
  DescriptorNet net;
  net.cfg = cfg;
  int cin = 3;
  for (int i = 0; i < 3; ++i) {
    int cout = cfg.conv_channels[static_cast<size_t>(i)];
    net.conv_w.push_back(dense_init(rng, 4 * cin, cout, std::sqrt(2.0 / (4 * cin))));
    net.conv_b.push_back(bias_init(cout));
    cin = cout;
  }
  const int spatial = cfg.patch_size / 8;
  const int flat = spatial * spatial * cin;
  net.fc0_w = dense_init(rng, flat, cfg.desc_dim, std::sqrt(2.0 / flat));
  net.fc0_b = bias_init(cfg.desc_dim);
  net.fc1_w = dense_init(rng, cfg.desc_dim, cfg.desc_dim, std::sqrt(1.0 / cfg.desc_dim));
  net.fc1_b = bias_init(cfg.desc_dim);
  return net;
}

NamedTensors DescriptorNet::params() {
  NamedTensors p;
  for (size_t i = 0; i < conv_w.size(); ++i) {
    p.emplace_back("desc/conv" + std::to_string(i) + "/w", conv_w[i]);
    p.emplace_back("desc/conv" + std::to_string(i) + "/b", conv_b[i]);
  }
  p.emplace_back("desc/fc0/w", fc0_w);
  p.emplace_back("desc/fc0/b", fc0_b);
  p.emplace_back("desc/fc1/w", fc1_w);
  p.emplace_back("desc/fc1/b", fc1_b);
  return p;
}

Tensor DescriptorNet::forward(Tape* t, const Tensor& patches) const {
  const int64_t n = patches.rows();
  const int ps = cfg.patch_size;
  if (patches.cols() != int64_t(ps) * ps * 3)
    throw std::invalid_argument("descriptor forward: bad patch width");
  Tensor x = ops::reshape(t, patches, {n, ps, ps, 3});
  int spatial = ps;
  int cin = 3;
  for (size_t i = 0; i < conv_w.size(); ++i) {
    // 2x2 stride-2 conv as four strided slices concatenated channel-wise
    std::vector<Tensor> taps;
    for (int dv = 0; dv < 2; ++dv)
      for (int du = 0; du < 2; ++du) {
        Tensor s1 = ops::slice(t, x, 1, dv, spatial, 2);
        taps.push_back(ops::slice(t, s1, 2, du, spatial, 2));
      }
    spatial /= 2;
    Tensor cat = ops::concat(t, taps, 3);
    Tensor flat = ops::reshape(t, cat, {n * spatial * spatial, 4 * cin});
    cin = static_cast<int>(conv_w[i].cols());
    Tensor y = ops::relu(t, project(t, flat, conv_w[i], conv_b[i]));
    x = ops::reshape(t, y, {n, spatial, spatial, cin});
  }
  Tensor flat = ops::reshape(t, x, {n, int64_t(spatial) * spatial * cin});
  Tensor h = ops::relu(t, project(t, flat, fc0_w, fc0_b));
  Tensor d = project(t, h, fc1_w, fc1_b);
  return l2_normalize_rows(t, d);
}

MatcherNet MatcherNet::init(const PipelineConfig& cfg, Rng& rng) {
  cfg.validate();
  MatcherNet net;
  net.cfg = cfg;
  const int d = cfg.width;
  const double xav = std::sqrt(1.0 / d);
  net.pos_w = dense_init(rng, 4 * cfg.n_freqs, d, std::sqrt(1.0 / (4 * cfg.n_freqs)));
  net.pos_b = bias_init(d);
  auto make_attn = [&] {
    Attn a;
    a.wq = dense_init(rng, d, d, xav);
    a.bq = bias_init(d);
    a.wk = dense_init(rng, d, d, xav);
    a.bk = bias_init(d);
    a.wv = dense_init(rng, d, d, xav);
    a.bv = bias_init(d);
    a.wo = dense_init(rng, d, d, xav);
    a.bo = bias_init(d);
    return a;
  };
  for (int l = 0; l < cfg.n_layers; ++l) {
    net.self_attn.push_back(make_attn());
    net.cross_attn.push_back(make_attn());
    Ffn f;
    f.w1 = dense_init(rng, d, 2 * d, std::sqrt(2.0 / d));
    f.b1 = bias_init(2 * d);
    f.w2 = dense_init(rng, 2 * d, d, std::sqrt(1.0 / (2 * d)));
    f.b2 = bias_init(d);
    net.ffn.push_back(f);
  }
  net.final_w = dense_init(rng, d, d, xav);
  net.final_b = bias_init(d);
  return net;
}

NamedTensors MatcherNet::params() {
  NamedTensors p;
  p.emplace_back("matcher/pos/w", pos_w);
  p.emplace_back("matcher/pos/b", pos_b);
  auto attn = [&p](const std::string& prefix, Attn& a) {
    p.emplace_back(prefix + "/wq", a.wq);
    p.emplace_back(prefix + "/bq", a.bq);
    p.emplace_back(prefix + "/wk", a.wk);
    p.emplace_back(prefix + "/bk", a.bk);
    p.emplace_back(prefix + "/wv", a.wv);
    p.emplace_back(prefix + "/bv", a.bv);
    p.emplace_back(prefix + "/wo", a.wo);
    p.emplace_back(prefix + "/bo", a.bo);
  };
  for (size_t l = 0; l < self_attn.size(); ++l) {
    const std::string base = "matcher/l" + std::to_string(l);
    attn(base + "/self", self_attn[l]);
    attn(base + "/cross", cross_attn[l]);
    p.emplace_back(base + "/ffn/w1", ffn[l].w1);
    p.emplace_back(base + "/ffn/b1", ffn[l].b1);
    p.emplace_back(base + "/ffn/w2", ffn[l].w2);
    p.emplace_back(base + "/ffn/b2", ffn[l].b2);
  }
  p.emplace_back("matcher/final/w", final_w);
  p.emplace_back("matcher/final/b", final_b);
  return p;
}

Tensor extract_patches(const geom::Image& image,
                       const std::vector<geom::Vector2d>& positions, int patch_size) {
  const int64_t n = static_cast<int64_t>(positions.size());
  const int ps = patch_size;
  Tensor out = Tensor::zeros({n, int64_t(ps) * ps * 3});
  auto d = out.data();
  const double half = ps / 2.0;
  for (int64_t i = 0; i < n; ++i) {
    const auto& p = positions[static_cast<size_t>(i)];
    double* row = d.data() + i * ps * ps * 3;
    for (int v = 0; v < ps; ++v)
      for (int u = 0; u < ps; ++u) {
        double sx = p.x() - half + u + 0.5;
        double sy = p.y() - half + v + 0.5;
        for (int c = 0; c < 3; ++c)
          row[(v * ps + u) * 3 + c] = image.sample(sx, sy, c);
      }
  }
  return out;
}

Tensor position_features(const std::vector<geom::Vector2d>& positions, int width,
                         int height, int n_freqs) {
  const int64_t n = static_cast<int64_t>(positions.size());
  Tensor out = Tensor::zeros({n, int64_t(4) * n_freqs});
  auto d = out.data();
  for (int64_t i = 0; i < n; ++i) {
    const auto& p = positions[static_cast<size_t>(i)];
    double nx = 2.0 * p.x() / width - 1.0;
    double ny = 2.0 * p.y() / height - 1.0;
    double* row = d.data() + i * 4 * n_freqs;
    for (int f = 0; f < n_freqs; ++f) {
      double w = kPi * std::pow(2.0, f);
      row[4 * f + 0] = std::sin(w * nx);
      row[4 * f + 1] = std::cos(w * nx);
      row[4 * f + 2] = std::sin(w * ny);
      row[4 * f + 3] = std::cos(w * ny);
    }
  }
  return out;
}

KeypointSet describe(Tape* tape, const DescriptorNet& net, const geom::Image& image,
                     const std::vector<geom::Vector2d>& positions) {
  KeypointSet kps;
  kps.positions = positions;
  kps.width = image.w;
  kps.height = image.h;
  kps.descriptors =
      net.forward(tape, extract_patches(image, positions, net.cfg.patch_size));
  return kps;
}

MatchTrace match_forward(Tape* t, const MatcherNet& net, const KeypointSet& kps_a,
                         const KeypointSet& kps_b) {
  if (kps_a.positions.empty() || kps_b.positions.empty())
    throw std::invalid_argument("match_forward: empty keypoint set");
  if (!kps_a.descriptors.defined() || !kps_b.descriptors.defined())
    throw std::invalid_argument("match_forward: descriptors not attached");
  const auto& cfg = net.cfg;

  Tensor pe_a = project(t,
                        position_features(kps_a.positions, kps_a.width, kps_a.height,
                                          cfg.n_freqs),
                        net.pos_w, net.pos_b);
  Tensor pe_b = project(t,
                        position_features(kps_b.positions, kps_b.width, kps_b.height,
                                          cfg.n_freqs),
                        net.pos_w, net.pos_b);
  Tensor xa = ops::add(t, kps_a.descriptors, pe_a);
  Tensor xb = ops::add(t, kps_b.descriptors, pe_b);

  MatchTrace trace;
  for (int l = 0; l < cfg.n_layers; ++l) {
    const auto& sa = net.self_attn[static_cast<size_t>(l)];
    Tensor ha = ops::layer_norm(t, xa);
    Tensor hb = ops::layer_norm(t, xb);
    xa = attn_residual(t, xa, ha, ha, sa, cfg.n_heads);
    xb = attn_residual(t, xb, hb, hb, sa, cfg.n_heads);

    const auto& ca = net.cross_attn[static_cast<size_t>(l)];
    Tensor ga = ops::layer_norm(t, xa);
    Tensor gb = ops::layer_norm(t, xb);
    xa = attn_residual(t, xa, ga, gb, ca, cfg.n_heads);
    xb = attn_residual(t, xb, gb, ga, ca, cfg.n_heads);

    const auto& ff = net.ffn[static_cast<size_t>(l)];
    xa = ffn_residual(t, xa, ff);
    xb = ffn_residual(t, xb, ff);

    Tensor da = project(t, ops::layer_norm(t, xa), net.final_w, net.final_b);
    Tensor db = project(t, ops::layer_norm(t, xb), net.final_w, net.final_b);
    trace.layers.emplace_back(da, db);
  }
  return trace;
}

AssignmentMatrix assign(Tape* t, const Tensor& da, const Tensor& db, double tau) {
  if (da.cols() != db.cols() || da.cols() < 1)
    throw std::invalid_argument("assign: descriptor width mismatch");
  AssignmentMatrix am;
  am.tau = tau;
  am.S = ops::matmul(t, da, ops::transpose(t, db));
  am.row_sm = ops::softmax_rows(t, am.S);
  am.col_sm = ops::transpose(t, ops::softmax_rows(t, ops::transpose(t, am.S)));
  am.P = ops::mul(t, am.row_sm, am.col_sm);

  const int64_t n = am.P.rows(), m = am.P.cols();
  auto p = am.P.data();
  std::vector<int> row_arg(static_cast<size_t>(n), -1), col_arg(static_cast<size_t>(m), -1);
  std::vector<char> row_strict(static_cast<size_t>(n), 0), col_strict(static_cast<size_t>(m), 0);
  for (int64_t i = 0; i < n; ++i) {
    double best = -1.0;
    int arg = -1, ties = 0;
    for (int64_t j = 0; j < m; ++j) {
      double v = p[static_cast<size_t>(i * m + j)];
      if (v > best) {
        best = v;
        arg = static_cast<int>(j);
        ties = 1;
      } else if (v == best) {
        ++ties;
      }
    }
    row_arg[static_cast<size_t>(i)] = arg;
    row_strict[static_cast<size_t>(i)] = ties == 1;
  }
  for (int64_t j = 0; j < m; ++j) {
    double best = -1.0;
    int arg = -1, ties = 0;
    for (int64_t i = 0; i < n; ++i) {
      double v = p[static_cast<size_t>(i * m + j)];
      if (v > best) {
        best = v;
        arg = static_cast<int>(i);
        ties = 1;
      } else if (v == best) {
        ++ties;
      }
    }
    col_arg[static_cast<size_t>(j)] = arg;
    col_strict[static_cast<size_t>(j)] = ties == 1;
  }
  for (int64_t i = 0; i < n; ++i) {
    int j = row_arg[static_cast<size_t>(i)];
    if (j < 0 || !row_strict[static_cast<size_t>(i)]) continue;
    if (col_arg[static_cast<size_t>(j)] != static_cast<int>(i) ||
        !col_strict[static_cast<size_t>(j)])
      continue;
    double v = p[static_cast<size_t>(i * m + j)];
    if (v >= tau) am.matches.push_back({static_cast<int>(i), j, v});
  }
  return am;
}

AssignmentMatrix match_pair(const DescriptorNet& desc, const MatcherNet& matcher,
                            const geom::ViewPair& pair,
                            const std::vector<geom::Vector2d>& positions_a,
                            const std::vector<geom::Vector2d>& positions_b,
                            int stop_layer, double tau) {
  KeypointSet ka = describe(nullptr, desc, pair.image_a, positions_a);
  KeypointSet kb = describe(nullptr, desc, pair.image_b, positions_b);
  MatchTrace trace = match_forward(nullptr, matcher, ka, kb);
  const int L = static_cast<int>(trace.layers.size());
  int l = stop_layer <= 0 ? L : stop_layer;
  if (l < 1 || l > L)
    throw std::invalid_argument("match_pair: stop_layer out of range");
  const auto& [da, db] = trace.layers[static_cast<size_t>(l - 1)];
  return assign(nullptr, da, db, tau);
}

void write_sidecar(const std::filesystem::path& path, const PipelineConfig& cfg,
                   const std::string& regime) {
  nlohmann::json j{{"format", "rotamatch-sidecar-v1"},
                   {"patch_size", cfg.patch_size},
                   {"desc_dim", cfg.desc_dim},
                   {"conv_channels", cfg.conv_channels},
                   {"n_layers", cfg.n_layers},
                   {"width", cfg.width},
                   {"n_heads", cfg.n_heads},
                   {"n_freqs", cfg.n_freqs},
                   {"tau", cfg.tau},
                   {"regime", regime}};
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write sidecar: " + path.string());
  f << j.dump(2) << "\n";
}

std::pair<PipelineConfig, std::string> read_sidecar(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("missing sidecar: " + path.string());
  nlohmann::json j = nlohmann::json::parse(f);
  PipelineConfig cfg;
  cfg.patch_size = j.at("patch_size").get<int>();
  cfg.desc_dim = j.at("desc_dim").get<int>();
  cfg.conv_channels = j.at("conv_channels").get<std::vector<int>>();
  cfg.n_layers = j.at("n_layers").get<int>();
  cfg.width = j.at("width").get<int>();
  cfg.n_heads = j.at("n_heads").get<int>();
  cfg.n_freqs = j.at("n_freqs").get<int>();
  cfg.tau = j.at("tau").get<double>();
  return {cfg, j.at("regime").get<std::string>()};
}

namespace {

void fill_from_checkpoint(NamedTensors params, const NamedTensors& loaded) {
  for (auto& [name, dst] : params) {
    const Tensor* src = nullptr;
    for (const auto& [lname, lt] : loaded)
      if (lname == name) {
        src = &lt;
        break;
      }
    if (!src) throw std::runtime_error("checkpoint missing tensor: " + name);
    if (src->shape() != dst.shape())
      throw std::runtime_error("checkpoint shape mismatch for " + name);
    std::copy(src->data().begin(), src->data().end(), dst.data().begin());
  }
}

}  // namespace

void save_models(const std::filesystem::path& dir, const DescriptorNet& desc,
                 const MatcherNet& matcher, const std::string& regime) {
  std::filesystem::create_directories(dir);
  DescriptorNet& d = const_cast<DescriptorNet&>(desc);
  MatcherNet& m = const_cast<MatcherNet&>(matcher);
  save_checkpoint(dir / "descriptor.rmt1", d.params());
  save_checkpoint(dir / "matcher.rmt1", m.params());
  write_sidecar(dir / "sidecar.json", desc.cfg, regime);
}

std::pair<DescriptorNet, MatcherNet> load_models(const std::filesystem::path& dir) {
  auto [cfg, regime] = read_sidecar(dir / "sidecar.json");
  Rng dummy = Rng::derive(0, {kStreamInit});
  DescriptorNet desc = DescriptorNet::init(cfg, dummy);
  MatcherNet matcher = MatcherNet::init(cfg, dummy);
  fill_from_checkpoint(desc.params(), load_checkpoint(dir / "descriptor.rmt1"));
  fill_from_checkpoint(matcher.params(), load_checkpoint(dir / "matcher.rmt1"));
  return {std::move(desc), std::move(matcher)};
}

}  // namespace rotamatch::pipeline
