#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rotamatch/eval.hpp"
#include "rotamatch/manifest.hpp"
#include "rotamatch/pipeline.hpp"
#include "rotamatch/plot.hpp"
#include "rotamatch/scenes.hpp"
#include "rotamatch/train.hpp"
#include "rotamatch/viewpair_io.hpp"
#include "rotamatch/viz.hpp"

namespace fs = std::filesystem;
using namespace rotamatch;

namespace {

manifest::Config load_config(const std::string& path) {
  if (path.empty()) return {};
  return manifest::Config::from_file(path);
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) out.push_back(std::stoi(tok));
  return out;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) out.push_back(std::stod(tok));
  return out;
}

scenes::SceneConfig scene_config_from(const manifest::Config& c, uint64_t seed) {
  scenes::SceneConfig s;
  s.n_scenes = static_cast<int>(c.get_int("n_scenes", s.n_scenes));
  s.image_size = static_cast<int>(c.get_int("image_size", s.image_size));
  s.texture = scenes::texture_from_name(c.get("texture", texture_name(s.texture)));
  s.geometry = scenes::geometry_from_name(c.get("geometry", geometry_name(s.geometry)));
  s.baseline_lo = c.get_double("baseline_lo", s.baseline_lo);
  s.baseline_hi = c.get_double("baseline_hi", s.baseline_hi);
  s.rotation_range_3d_deg = c.get_double("rotation_range_3d_deg", s.rotation_range_3d_deg);
  s.roll_jitter_deg = c.get_double("roll_jitter_deg", s.roll_jitter_deg);
  s.full_roll_prob = c.get_double("full_roll_prob", s.full_roll_prob);
  s.seed = seed;
  return s;
}

pipeline::PipelineConfig arch_from(const manifest::Config& c) {
  pipeline::PipelineConfig a;
  a.patch_size = static_cast<int>(c.get_int("patch_size", a.patch_size));
  a.desc_dim = static_cast<int>(c.get_int("desc_dim", a.desc_dim));
  if (c.has("conv_channels")) a.conv_channels = parse_int_list(c.get("conv_channels", ""));
  a.n_layers = static_cast<int>(c.get_int("n_layers", a.n_layers));
  a.width = static_cast<int>(c.get_int("width", a.width));
  a.n_heads = static_cast<int>(c.get_int("n_heads", a.n_heads));
  a.n_freqs = static_cast<int>(c.get_int("n_freqs", a.n_freqs));
  a.tau = c.get_double("tau", a.tau);
  return a;
}

train::TrainConfig train_config_from(const manifest::Config& c, uint64_t seed) {
  train::TrainConfig t;
  t.desc_steps = static_cast<int>(c.get_int("desc_steps", t.desc_steps));
  t.matcher_steps = static_cast<int>(c.get_int("matcher_steps", t.matcher_steps));
  t.batch_size = static_cast<int>(c.get_int("batch_size", t.batch_size));
  t.lr = c.get_double("lr", t.lr);
  t.weight_decay = c.get_double("weight_decay", t.weight_decay);
  t.n_keypoints = static_cast<int>(c.get_int("n_keypoints", t.n_keypoints));
  t.tau = c.get_double("tau", t.tau);
  t.infonce_temp = c.get_double("infonce_temp", t.infonce_temp);
  t.seed = seed;
  t.arch = arch_from(c);
  return t;
}

eval::EvalConfig eval_config_from(const manifest::Config& c, uint64_t seed) {
  eval::EvalConfig e;
  e.n_keypoints = static_cast<int>(c.get_int("eval_keypoints", e.n_keypoints));
  e.tau = c.get_double("tau", e.tau);
  e.ransac_iters = static_cast<int>(c.get_int("ransac_iters", e.ransac_iters));
  e.ransac_thresh = c.get_double("ransac_thresh", e.ransac_thresh);
  e.seed = seed;
  return e;
}

// A checkpoint must match every architecture key the config states and, when
// given, the expected regime.
void check_sidecar(const fs::path& ckpt_dir, const manifest::Config& c,
                   const std::string& expect_regime) {
  auto [arch, regime] = pipeline::read_sidecar(ckpt_dir / "sidecar.json");
  auto mismatch = [&](const std::string& key, double got, double want) {
    throw std::runtime_error("checkpoint " + ckpt_dir.string() + ": sidecar " + key +
                             "=" + std::to_string(got) + " but config wants " +
                             std::to_string(want));
  };
  if (c.has("patch_size") && arch.patch_size != c.get_int("patch_size", 0))
    mismatch("patch_size", arch.patch_size, static_cast<double>(c.get_int("patch_size", 0)));
  if (c.has("desc_dim") && arch.desc_dim != c.get_int("desc_dim", 0))
    mismatch("desc_dim", arch.desc_dim, static_cast<double>(c.get_int("desc_dim", 0)));
  if (c.has("n_layers") && arch.n_layers != c.get_int("n_layers", 0))
    mismatch("n_layers", arch.n_layers, static_cast<double>(c.get_int("n_layers", 0)));
  if (c.has("width") && arch.width != c.get_int("width", 0))
    mismatch("width", arch.width, static_cast<double>(c.get_int("width", 0)));
  if (c.has("n_heads") && arch.n_heads != c.get_int("n_heads", 0))
    mismatch("n_heads", arch.n_heads, static_cast<double>(c.get_int("n_heads", 0)));
  if (c.has("n_freqs") && arch.n_freqs != c.get_int("n_freqs", 0))
    mismatch("n_freqs", arch.n_freqs, static_cast<double>(c.get_int("n_freqs", 0)));
  if (c.has("conv_channels") &&
      arch.conv_channels != parse_int_list(c.get("conv_channels", "")))
    throw std::runtime_error("checkpoint " + ckpt_dir.string() +
                             ": sidecar conv_channels differ from config");
  if (!expect_regime.empty() && regime != expect_regime)
    throw std::runtime_error("checkpoint " + ckpt_dir.string() + ": trained as '" +
                             regime + "' but '" + expect_regime + "' requested");
}

std::string command_echo(int argc, char** argv) {
  std::string cmd;
  for (int i = 0; i < argc; ++i) {
    if (i) cmd += ' ';
    cmd += argv[i];
  }
  return cmd;
}

manifest::RunManifest base_manifest(const std::string& cmd, const manifest::Config& c,
                                    uint64_t seed) {
  manifest::RunManifest m;
  m.command = cmd;
  m.config_hash = manifest::hex64(c.hash());
  m.seed = seed;
  m.created_at = manifest::iso8601_utc_now();
  return m;
}

void add_file_hash(std::map<std::string, std::string>& where, const fs::path& p) {
  where[p.string()] = manifest::hex64(manifest::hash_file(p));
}

void add_checkpoint_hashes(std::map<std::string, std::string>& where,
                           const fs::path& dir) {
  add_file_hash(where, dir / "descriptor.rmt1");
  add_file_hash(where, dir / "matcher.rmt1");
  add_file_hash(where, dir / "sidecar.json");
}

std::string safe_name(std::string s) {
  for (char& ch : s)
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '.')
      ch = '_';
  return s;
}

struct LoadedModel {
  std::string regime;
  pipeline::DescriptorNet desc;
  pipeline::MatcherNet matcher;
};

LoadedModel load_checkpoint(const fs::path& dir, const manifest::Config& c,
                            const std::string& expect_regime) {
  check_sidecar(dir, c, expect_regime);
  auto [arch, regime] = pipeline::read_sidecar(dir / "sidecar.json");
  auto [desc, matcher] = pipeline::load_models(dir);
  return {regime, std::move(desc), std::move(matcher)};
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) cells.push_back(tok);
    rows.push_back(std::move(cells));
  }
  return rows;
}

size_t column_of(const std::vector<std::string>& header, const std::string& name) {
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw std::runtime_error("missing CSV column " + name);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rotation-augmented sparse matching workbench"};
  app.require_subcommand(1);
  const std::string cmd_echo = command_echo(argc, argv);

  std::string config_path, out_dir, data_dir, test_data_dir, regime, protocol = "upright";
  std::string pair_dir, layer_csv, angle_csv, angles_arg;
  std::vector<std::string> ckpt_dirs;
  uint64_t seed = 0;
  int stop_layer = 0, workers = 1, viz_angle = 180;
  double data_fraction = 1.0;

  auto add_common = [&](CLI::App* sub, bool with_out) {
    sub->add_option("--config", config_path, "flat key=value config file");
    sub->add_option("--seed", seed, "root RNG seed (overrides config)");
    sub->add_option("--workers", workers, "worker hint, evaluation is serial")
        ->check(CLI::PositiveNumber);
    if (with_out)
      sub->add_option("--out", out_dir, "output directory")->required();
  };
  auto resolve_seed = [&](CLI::App* sub, const manifest::Config& c) {
    return sub->count("--seed") ? seed : c.get_u64("seed", 0);
  };

  auto* gen = app.add_subcommand("gen-scenes", "render a synthetic two-view dataset");
  add_common(gen, true);
  gen->callback([&] {
    auto cfg = load_config(config_path);
    uint64_t s = resolve_seed(gen, cfg);
    auto sc = scene_config_from(cfg, s);
    auto ds = scenes::build_dataset(sc);
    scenes::write_dataset(ds, out_dir);
    auto m = base_manifest(cmd_echo, cfg, s);
    add_file_hash(m.outputs, fs::path(out_dir) / "manifest.json");
    m.write(out_dir);
    std::printf("gen-scenes: %zu pairs -> %s\n", ds.pairs.size(), out_dir.c_str());
  });

  auto* tr = app.add_subcommand("train", "train descriptor then matcher for one regime");
  add_common(tr, true);
  tr->add_option("--data", data_dir, "dataset directory")->required();
  tr->add_option("--regime", regime, "norot | rotmatch | rotdescmatch | jointdesc")
      ->required();
  tr->add_option("--data-fraction", data_fraction, "fraction of scenes to train on")
      ->check(CLI::Range(1e-9, 1.0));
  tr->callback([&] {
    auto cfg = load_config(config_path);
    uint64_t s = resolve_seed(tr, cfg);
    double frac = tr->count("--data-fraction") ? data_fraction
                                               : cfg.get_double("data_fraction", 1.0);
    auto ds = scenes::load_dataset(data_dir, frac);
    auto tc = train_config_from(cfg, s);
    tc.regime = train::regime_from_name(regime);
    tc.data_fraction = frac;
    std::printf("train: regime=%s pairs=%zu desc_steps=%d matcher_steps=%d\n",
                regime.c_str(), ds.pairs.size(), tc.desc_steps, tc.matcher_steps);
    auto res = train::run_regime(tc, ds);
    pipeline::save_models(out_dir, res.desc, res.matcher, regime);
    res.desc_log.write_csv(fs::path(out_dir) / "desc_log.csv");
    res.matcher_log.write_csv(fs::path(out_dir) / "matcher_log.csv");
    auto m = base_manifest(cmd_echo, cfg, s);
    add_file_hash(m.inputs, fs::path(data_dir) / "manifest.json");
    add_checkpoint_hashes(m.outputs, out_dir);
    m.write(out_dir);
    std::printf("train: wrote %s (final matcher loss %.6f)\n", out_dir.c_str(),
                res.matcher_log.rows.empty() ? 0.0 : res.matcher_log.rows.back().loss);
  });

  auto* ev = app.add_subcommand("eval", "run the pose benchmark for one checkpoint");
  add_common(ev, true);
  ev->add_option("--checkpoint", ckpt_dirs, "model directory")->required()
      ->expected(1);
  ev->add_option("--data", data_dir, "dataset directory")->required();
  ev->add_option("--regime", regime, "expected regime tag (refuses a mismatch)");
  ev->add_option("--protocol", protocol, "upright | rot90 | angle:<deg>");
  ev->add_option("--stop-layer", stop_layer, "early-exit layer, 0 = full depth");
  ev->add_option("--data-fraction", data_fraction, "fraction of pairs to evaluate")
      ->check(CLI::Range(1e-9, 1.0));
  ev->callback([&] {
    auto cfg = load_config(config_path);
    uint64_t s = resolve_seed(ev, cfg);
    auto model = load_checkpoint(ckpt_dirs[0], cfg, regime);
    double frac = ev->count("--data-fraction") ? data_fraction : 1.0;
    auto ds = scenes::load_dataset(data_dir, frac);
    auto ecfg = eval_config_from(cfg, s);
    ecfg.stop_layer = stop_layer;
    auto proto = eval::protocol_from_string(protocol);
    auto rep = eval::run_benchmark(model.desc, model.matcher, ds, proto, ecfg,
                                   model.regime);
    fs::create_directories(out_dir);
    rep.write_json(fs::path(out_dir) / "report.json");
    rep.write_csv(fs::path(out_dir) / "pairs.csv");
    auto m = base_manifest(cmd_echo, cfg, s);
    add_file_hash(m.inputs, fs::path(data_dir) / "manifest.json");
    add_checkpoint_hashes(m.inputs, ckpt_dirs[0]);
    add_file_hash(m.outputs, fs::path(out_dir) / "report.json");
    m.write(out_dir);
    std::printf("eval: %s %s auc20=%.2f auc10=%.2f auc5=%.2f failures=%d/%d\n",
                rep.regime.c_str(), rep.protocol.c_str(), rep.auc20, rep.auc10,
                rep.auc5, rep.failures, rep.n_pairs);
  });

  auto* sl = app.add_subcommand("sweep-layers",
                                "benchmark every early-exit depth, upright and rot90");
  add_common(sl, true);
  sl->add_option("--checkpoint", ckpt_dirs, "model directories (repeatable)")
      ->required();
  sl->add_option("--data", data_dir, "dataset directory")->required();
  sl->add_option("--data-fraction", data_fraction, "fraction of pairs to evaluate")
      ->check(CLI::Range(1e-9, 1.0));
  sl->callback([&] {
    auto cfg = load_config(config_path);
    uint64_t s = resolve_seed(sl, cfg);
    std::vector<eval::RegimeModel> models;
    for (const auto& d : ckpt_dirs) {
      auto lm = load_checkpoint(d, cfg, "");
      models.push_back({lm.regime, std::move(lm.desc), std::move(lm.matcher)});
    }
    double frac = sl->count("--data-fraction") ? data_fraction : 1.0;
    auto ds = scenes::load_dataset(data_dir, frac);
    auto ecfg = eval_config_from(cfg, s);
    std::vector<eval::Protocol> protos = {eval::protocol_from_string("upright"),
                                          eval::protocol_from_string("rot90")};
    auto cells = eval::sweep_layers(models, ds, protos, ecfg);
    fs::create_directories(out_dir);
    eval::write_layer_sweep_csv(cells, fs::path(out_dir) / "layer_sweep.csv");
    auto m = base_manifest(cmd_echo, cfg, s);
    add_file_hash(m.inputs, fs::path(data_dir) / "manifest.json");
    for (const auto& d : ckpt_dirs) add_checkpoint_hashes(m.inputs, d);
    add_file_hash(m.outputs, fs::path(out_dir) / "layer_sweep.csv");
    m.write(out_dir);
    std::printf("sweep-layers: %zu cells -> %s\n", cells.size(), out_dir.c_str());
  });

  auto* sa = app.add_subcommand("sweep-angles",
                                "benchmark fixed B-side rotations over a circle");
  add_common(sa, true);
  sa->add_option("--checkpoint", ckpt_dirs, "model directories (repeatable)")
      ->required();
  sa->add_option("--data", data_dir, "dataset directory")->required();
  sa->add_option("--angles", angles_arg, "comma list of degrees (default 0,15,..,360)");
  sa->add_option("--data-fraction", data_fraction, "fraction of pairs to evaluate")
      ->check(CLI::Range(1e-9, 1.0));
  sa->callback([&] {
    auto cfg = load_config(config_path);
    uint64_t s = resolve_seed(sa, cfg);
    std::vector<eval::RegimeModel> models;
    for (const auto& d : ckpt_dirs) {
      auto lm = load_checkpoint(d, cfg, "");
      models.push_back({lm.regime, std::move(lm.desc), std::move(lm.matcher)});
    }
    double frac = sa->count("--data-fraction") ? data_fraction : 1.0;
    auto ds = scenes::load_dataset(data_dir, frac);
    auto ecfg = eval_config_from(cfg, s);
    std::vector<double> angles;
    if (!angles_arg.empty()) {
      angles = parse_double_list(angles_arg);
    } else {
      for (int a = 0; a <= 360; a += 15) angles.push_back(a);
    }
    auto rows = eval::sweep_angles(models, ds, angles, ecfg);
    fs::create_directories(out_dir);
    eval::write_angle_sweep_csv(rows, fs::path(out_dir) / "angle_sweep.csv");
    auto m = base_manifest(cmd_echo, cfg, s);
    add_file_hash(m.inputs, fs::path(data_dir) / "manifest.json");
    for (const auto& d : ckpt_dirs) add_checkpoint_hashes(m.inputs, d);
    add_file_hash(m.outputs, fs::path(out_dir) / "angle_sweep.csv");
    m.write(out_dir);
    std::printf("sweep-angles: %zu rows -> %s\n", rows.size(), out_dir.c_str());
  });

  auto* ab = app.add_subcommand(
      "ablate-data", "norot at data fractions 0.1 and 1.0, upright vs rotated");
  add_common(ab, true);
  ab->add_option("--data", data_dir, "training dataset directory")->required();
  ab->add_option("--test-data", test_data_dir, "held-out dataset directory")
      ->required();
  ab->callback([&] {
    auto cfg = load_config(config_path);
    uint64_t s = resolve_seed(ab, cfg);
    auto test_ds = scenes::load_dataset(test_data_dir);
    auto ecfg = eval_config_from(cfg, s);
    fs::create_directories(out_dir);
    std::ofstream table(fs::path(out_dir) / "ablate.csv", std::ios::binary);
    table << "data_fraction,protocol,auc5,auc10,auc20,n_pairs\n";
    for (double frac : {0.1, 1.0}) {
      auto ds = scenes::load_dataset(data_dir, frac);
      auto tc = train_config_from(cfg, s);
      tc.regime = train::Regime::kNoRot;
      tc.data_fraction = frac;
      std::printf("ablate-data: training norot on %zu pairs (fraction %g)\n",
                  ds.pairs.size(), frac);
      auto res = train::run_regime(tc, ds);
      char sub[32];
      std::snprintf(sub, sizeof sub, "norot_frac%g", frac);
      fs::path ckpt = fs::path(out_dir) / sub;
      pipeline::save_models(ckpt, res.desc, res.matcher, "norot");
      for (const char* proto_s : {"upright", "rot90"}) {
        auto rep = eval::run_benchmark(res.desc, res.matcher, test_ds,
                                       eval::protocol_from_string(proto_s), ecfg,
                                       "norot");
        rep.write_json(ckpt / (std::string("report_") + proto_s + ".json"));
        char line[160];
        std::snprintf(line, sizeof line, "%g,%s,%.17g,%.17g,%.17g,%d\n", frac,
                      rep.protocol.c_str(), rep.auc5, rep.auc10, rep.auc20,
                      rep.n_pairs);
        table << line;
        std::printf("ablate-data: fraction=%g %s auc20=%.2f\n", frac,
                    rep.protocol.c_str(), rep.auc20);
      }
    }
    table.close();
    auto m = base_manifest(cmd_echo, cfg, s);
    add_file_hash(m.inputs, fs::path(data_dir) / "manifest.json");
    add_file_hash(m.inputs, fs::path(test_data_dir) / "manifest.json");
    add_file_hash(m.outputs, fs::path(out_dir) / "ablate.csv");
    m.write(out_dir);
  });

  auto* vz = app.add_subcommand("viz-desc",
                                "dense descriptor PCA renderings, upright vs rotated");
  add_common(vz, true);
  vz->add_option("--checkpoint", ckpt_dirs, "model directory")->required()
      ->expected(1);
  vz->add_option("--pair", pair_dir, "view-pair directory supplying the image")
      ->required();
  vz->add_option("--angle", viz_angle, "quarter rotation to compare at (degrees)");
  vz->callback([&] {
    auto cfg = load_config(config_path);
    uint64_t s = resolve_seed(vz, cfg);
    auto model = load_checkpoint(ckpt_dirs[0], cfg, regime);
    auto pair = io::read_view_pair(pair_dir);
    int stride = static_cast<int>(cfg.get_int("viz_stride", 4));
    auto res = viz::visualize_descriptors(model.desc, pair.image_a, viz_angle, stride);
    fs::create_directories(out_dir);
    io::write_ppm(fs::path(out_dir) / "upright.ppm", res.upright);
    io::write_ppm(fs::path(out_dir) / "rotated.ppm", res.rotated);
    io::write_ppm(fs::path(out_dir) / "rotated_upright.ppm", res.rotated_upright);
    {
      std::ofstream f(fs::path(out_dir) / "discrepancy.json", std::ios::binary);
      char buf[128];
      std::snprintf(buf, sizeof buf,
                    "{\n  \"angle_deg\": %d,\n  \"discrepancy\": %.17g\n}\n",
                    viz_angle, res.discrepancy);
      f << buf;
    }
    auto m = base_manifest(cmd_echo, cfg, s);
    add_checkpoint_hashes(m.inputs, ckpt_dirs[0]);
    add_file_hash(m.outputs, fs::path(out_dir) / "upright.ppm");
    add_file_hash(m.outputs, fs::path(out_dir) / "rotated.ppm");
    m.write(out_dir);
    std::printf("viz-desc: discrepancy %.6f -> %s\n", res.discrepancy, out_dir.c_str());
  });

  auto* pl = app.add_subcommand("plot", "render sweep CSVs as line charts");
  add_common(pl, true);
  pl->add_option("--layer-sweep", layer_csv, "layer_sweep.csv from sweep-layers");
  pl->add_option("--angle-sweep", angle_csv, "angle_sweep.csv from sweep-angles");
  pl->callback([&] {
    auto cfg = load_config(config_path);
    if (layer_csv.empty() && angle_csv.empty())
      throw std::runtime_error("plot: give --layer-sweep and/or --angle-sweep");
    fs::create_directories(out_dir);
    auto m = base_manifest(cmd_echo, cfg, resolve_seed(pl, cfg));
    if (!layer_csv.empty()) {
      auto rows = read_csv(layer_csv);
      const auto& h = rows.at(0);
      size_t creg = column_of(h, "regime"), cproto = column_of(h, "protocol");
      size_t clayer = column_of(h, "stop_layer"), cauc = column_of(h, "auc20");
      std::vector<std::string> protocols;
      for (size_t i = 1; i < rows.size(); ++i) {
        const std::string& p = rows[i][cproto];
        bool seen = false;
        for (const auto& q : protocols) seen |= q == p;
        if (!seen) protocols.push_back(p);
      }
      for (const auto& proto : protocols) {
        std::map<std::string, plot::Series> by_regime;
        for (size_t i = 1; i < rows.size(); ++i) {
          if (rows[i][cproto] != proto) continue;
          auto& s = by_regime[rows[i][creg]];
          s.label = rows[i][creg];
          s.x.push_back(std::stod(rows[i][clayer]));
          s.y.push_back(std::stod(rows[i][cauc]));
        }
        std::vector<plot::Series> series;
        for (auto& [name, s] : by_regime) {
          s.color = plot::palette(series.size());
          series.push_back(std::move(s));
        }
        plot::PlotConfig pc;
        pc.title = "AUC@20 VS STOP LAYER (" + proto + ")";
        pc.xlabel = "STOP LAYER";
        pc.ylabel = "AUC@20";
        fs::path outp = fs::path(out_dir) / ("layers_" + safe_name(proto) + ".ppm");
        plot::write_plot(outp, pc, series);
        add_file_hash(m.outputs, outp);
      }
      add_file_hash(m.inputs, layer_csv);
    }
    if (!angle_csv.empty()) {
      auto rows = read_csv(angle_csv);
      const auto& h = rows.at(0);
      size_t creg = column_of(h, "regime"), cang = column_of(h, "angle_deg");
      size_t cmean = column_of(h, "mean_auc20"), cci = column_of(h, "ci95_auc20");
      std::map<std::string, plot::Series> by_regime;
      for (size_t i = 1; i < rows.size(); ++i) {
        auto& s = by_regime[rows[i][creg]];
        s.label = rows[i][creg];
        s.x.push_back(std::stod(rows[i][cang]));
        s.y.push_back(std::stod(rows[i][cmean]));
        s.ci_half.push_back(std::stod(rows[i][cci]));
      }
      std::vector<plot::Series> series;
      for (auto& [name, s] : by_regime) {
        s.color = plot::palette(series.size());
        series.push_back(std::move(s));
      }
      plot::PlotConfig pc;
      pc.title = "AUC@20 VS ROTATION ANGLE";
      pc.xlabel = "ANGLE (DEG)";
      pc.ylabel = "AUC@20";
      fs::path outp = fs::path(out_dir) / "angles.ppm";
      plot::write_plot(outp, pc, series);
      add_file_hash(m.inputs, angle_csv);
      add_file_hash(m.outputs, outp);
    }
    m.write(out_dir);
    std::printf("plot: wrote charts to %s\n", out_dir.c_str());
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
