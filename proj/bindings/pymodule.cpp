#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "rotamatch/eval.hpp"
#include "rotamatch/pipeline.hpp"
#include "rotamatch/scenes.hpp"
#include "rotamatch/train.hpp"
#include "rotamatch/viewpair_io.hpp"
#include "rotamatch/viz.hpp"

namespace py = pybind11;
using namespace rotamatch;

namespace {

py::array_t<double> image_to_numpy(const geom::Image& im) {
  py::array_t<double> out({im.h, im.w, im.c});
  std::copy(im.px.begin(), im.px.end(), out.mutable_data());
  return out;
}

geom::Image numpy_to_image(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 3) throw std::invalid_argument("image must be HxWxC");
  geom::Image im = geom::Image::zeros(static_cast<int>(a.shape(0)),
                                      static_cast<int>(a.shape(1)),
                                      static_cast<int>(a.shape(2)));
  std::copy(a.data(), a.data() + a.size(), im.px.begin());
  return im;
}

py::array_t<double> depth_to_numpy(const geom::DepthMap& d) {
  py::array_t<double> out({d.h, d.w});
  std::copy(d.z.begin(), d.z.end(), out.mutable_data());
  return out;
}

py::array_t<double> mat3_to_numpy(const geom::Matrix3d& m) {
  py::array_t<double> out({3, 3});
  auto r = out.mutable_unchecked<2>();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r(i, j) = m(i, j);
  return out;
}

std::vector<geom::Vector2d> numpy_to_positions(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2 || a.shape(1) != 2)
    throw std::invalid_argument("positions must be Nx2");
  std::vector<geom::Vector2d> out(static_cast<size_t>(a.shape(0)));
  auto r = a.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i)
    out[static_cast<size_t>(i)] = {r(i, 0), r(i, 1)};
  return out;
}

py::array_t<double> tensor_to_numpy(const Tensor& t) {
  std::vector<py::ssize_t> shape;
  for (auto d : t.shape()) shape.push_back(static_cast<py::ssize_t>(d));
  py::array_t<double> out(shape);
  auto src = t.data();
  std::copy(src.begin(), src.end(), out.mutable_data());
  return out;
}

// Frozen model pair for matching from python.
struct Matcher {
  pipeline::DescriptorNet desc;
  pipeline::MatcherNet matcher;
  std::string regime;

  static Matcher load(const std::filesystem::path& dir) {
    auto [d, m] = pipeline::load_models(dir);
    auto [arch, regime] = pipeline::read_sidecar(dir / "sidecar.json");
    return {std::move(d), std::move(m), regime};
  }

  py::dict match(const geom::ViewPair& pair, const py::array_t<double>& pos_a,
                 const py::array_t<double>& pos_b, int stop_layer, double tau) const {
    auto pa = numpy_to_positions(pos_a);
    auto pb = numpy_to_positions(pos_b);
    auto am = pipeline::match_pair(desc, matcher, pair, pa, pb, stop_layer, tau);
    py::array_t<int> idx({static_cast<py::ssize_t>(am.matches.size()), py::ssize_t(2)});
    py::array_t<double> scores(static_cast<py::ssize_t>(am.matches.size()));
    auto ir = idx.mutable_unchecked<2>();
    auto sr = scores.mutable_unchecked<1>();
    for (size_t k = 0; k < am.matches.size(); ++k) {
      ir(static_cast<py::ssize_t>(k), 0) = am.matches[k].i;
      ir(static_cast<py::ssize_t>(k), 1) = am.matches[k].j;
      sr(static_cast<py::ssize_t>(k)) = am.matches[k].score;
    }
    py::dict out;
    out["indices"] = idx;
    out["scores"] = scores;
    out["P"] = tensor_to_numpy(am.P);
    return out;
  }

  py::array_t<double> describe_at(const py::array_t<double>& image,
                                  const py::array_t<double>& positions) const {
    geom::Image im = numpy_to_image(image);
    auto pos = numpy_to_positions(positions);
    auto kps = pipeline::describe(nullptr, desc, im, pos);
    return tensor_to_numpy(kps.descriptors);
  }
};

}  // namespace

PYBIND11_MODULE(_rotamatch, m) {
  m.doc() = "rotation-augmented sparse matching core";

  py::class_<scenes::SceneConfig>(m, "SceneConfig")
      .def(py::init<>())
      .def_readwrite("n_scenes", &scenes::SceneConfig::n_scenes)
      .def_readwrite("image_size", &scenes::SceneConfig::image_size)
      .def_readwrite("baseline_lo", &scenes::SceneConfig::baseline_lo)
      .def_readwrite("baseline_hi", &scenes::SceneConfig::baseline_hi)
      .def_readwrite("rotation_range_3d_deg", &scenes::SceneConfig::rotation_range_3d_deg)
      .def_readwrite("roll_jitter_deg", &scenes::SceneConfig::roll_jitter_deg)
      .def_readwrite("full_roll_prob", &scenes::SceneConfig::full_roll_prob)
      .def_readwrite("seed", &scenes::SceneConfig::seed)
      .def_property(
          "texture",
          [](const scenes::SceneConfig& c) { return scenes::texture_name(c.texture); },
          [](scenes::SceneConfig& c, const std::string& s) {
            c.texture = scenes::texture_from_name(s);
          })
      .def_property(
          "geometry",
          [](const scenes::SceneConfig& c) { return scenes::geometry_name(c.geometry); },
          [](scenes::SceneConfig& c, const std::string& s) {
            c.geometry = scenes::geometry_from_name(s);
          });

  py::class_<geom::Camera>(m, "Camera")
      .def_readonly("fx", &geom::Camera::fx)
      .def_readonly("fy", &geom::Camera::fy)
      .def_readonly("cx", &geom::Camera::cx)
      .def_readonly("cy", &geom::Camera::cy)
      .def_readonly("width", &geom::Camera::width)
      .def_readonly("height", &geom::Camera::height)
      .def_property_readonly("R", [](const geom::Camera& c) { return mat3_to_numpy(c.R); })
      .def_property_readonly("t", [](const geom::Camera& c) {
        py::array_t<double> out(3);
        auto r = out.mutable_unchecked<1>();
        for (int i = 0; i < 3; ++i) r(i) = c.t(i);
        return out;
      });

  py::class_<geom::ViewPair>(m, "ViewPair")
      .def_readonly("pair_id", &geom::ViewPair::pair_id)
      .def_readonly("camera_a", &geom::ViewPair::camera_a)
      .def_readonly("camera_b", &geom::ViewPair::camera_b)
      .def_property_readonly("image_a",
                             [](const geom::ViewPair& p) { return image_to_numpy(p.image_a); })
      .def_property_readonly("image_b",
                             [](const geom::ViewPair& p) { return image_to_numpy(p.image_b); })
      .def_property_readonly("depth_a",
                             [](const geom::ViewPair& p) { return depth_to_numpy(p.depth_a); })
      .def_property_readonly("depth_b",
                             [](const geom::ViewPair& p) { return depth_to_numpy(p.depth_b); });

  m.def("generate_pair",
        [](const scenes::SceneConfig& cfg, uint64_t index) {
          return scenes::generate_pair(cfg, index);
        },
        py::arg("config"), py::arg("pair_index"));

  m.def("write_dataset",
        [](const scenes::SceneConfig& cfg, const std::filesystem::path& out) {
          auto ds = scenes::build_dataset(cfg);
          scenes::write_dataset(ds, out);
          return ds.pairs.size();
        },
        py::arg("config"), py::arg("out_dir"));

  m.def("read_view_pair",
        [](const std::filesystem::path& dir) { return io::read_view_pair(dir); },
        py::arg("dir"));

  m.def("rotate_quarter",
        [](const geom::ViewPair& p, double alpha_a, double alpha_b) {
          geom::RotationSpec spec;
          spec.alpha_a = alpha_a;
          spec.alpha_b = alpha_b;
          spec.mode = geom::RotMode::kQuarter;
          return geom::rotate_quarter(p, spec);
        },
        py::arg("pair"), py::arg("alpha_a"), py::arg("alpha_b"));

  m.def("rotate_arbitrary",
        [](const geom::ViewPair& p, double alpha_a, double alpha_b) {
          geom::RotationSpec spec;
          spec.alpha_a = alpha_a;
          spec.alpha_b = alpha_b;
          spec.mode = geom::RotMode::kArbitrary;
          return geom::rotate_arbitrary(p, spec).pair;
        },
        py::arg("pair"), py::arg("alpha_a"), py::arg("alpha_b"));

  m.def("gt_correspondence",
        [](const geom::ViewPair& p, double x, double y) {
          auto c = geom::gt_correspondence(p, {x, y});
          const char* status = c.status == geom::CorrStatus::kOk        ? "ok"
                               : c.status == geom::CorrStatus::kOccluded ? "occluded"
                                                                         : "no_depth";
          return py::make_tuple(status, c.pixel_b.x(), c.pixel_b.y());
        },
        py::arg("pair"), py::arg("x"), py::arg("y"));

  m.def("sample_keypoints",
        [](const geom::ViewPair& p, int n, uint64_t seed) {
          Rng rng(seed);
          auto [ka, kb] = scenes::sample_keypoints(p, n, rng);
          auto pack = [](const KeypointSet& k) {
            py::array_t<double> out({static_cast<py::ssize_t>(k.positions.size()),
                                     py::ssize_t(2)});
            auto r = out.mutable_unchecked<2>();
            for (size_t i = 0; i < k.positions.size(); ++i) {
              r(static_cast<py::ssize_t>(i), 0) = k.positions[i].x();
              r(static_cast<py::ssize_t>(i), 1) = k.positions[i].y();
            }
            return out;
          };
          return py::make_tuple(pack(ka), pack(kb));
        },
        py::arg("pair"), py::arg("n"), py::arg("seed"));

  py::class_<Matcher>(m, "Matcher")
      .def_static("load", &Matcher::load, py::arg("checkpoint_dir"))
      .def_readonly("regime", &Matcher::regime)
      .def("match", &Matcher::match, py::arg("pair"), py::arg("positions_a"),
           py::arg("positions_b"), py::arg("stop_layer") = 0, py::arg("tau") = 0.1)
      .def("describe", &Matcher::describe_at, py::arg("image"), py::arg("positions"));

  m.def("train_regime",
        [](const std::string& regime, const std::filesystem::path& data_dir,
           const std::filesystem::path& out_dir, py::dict overrides) {
          train::TrainConfig tc;
          tc.regime = train::regime_from_name(regime);
          if (overrides.contains("desc_steps"))
            tc.desc_steps = overrides["desc_steps"].cast<int>();
          if (overrides.contains("matcher_steps"))
            tc.matcher_steps = overrides["matcher_steps"].cast<int>();
          if (overrides.contains("batch_size"))
            tc.batch_size = overrides["batch_size"].cast<int>();
          if (overrides.contains("n_keypoints"))
            tc.n_keypoints = overrides["n_keypoints"].cast<int>();
          if (overrides.contains("seed")) tc.seed = overrides["seed"].cast<uint64_t>();
          if (overrides.contains("lr")) tc.lr = overrides["lr"].cast<double>();
          if (overrides.contains("desc_dim")) {
            tc.arch.desc_dim = overrides["desc_dim"].cast<int>();
            tc.arch.width = tc.arch.desc_dim;
          }
          if (overrides.contains("n_layers"))
            tc.arch.n_layers = overrides["n_layers"].cast<int>();
          if (overrides.contains("conv_channels"))
            tc.arch.conv_channels = overrides["conv_channels"].cast<std::vector<int>>();
          auto ds = scenes::load_dataset(data_dir);
          auto res = train::run_regime(tc, ds);
          pipeline::save_models(out_dir, res.desc, res.matcher, regime);
          py::dict out;
          out["desc_final_loss"] =
              res.desc_log.rows.empty() ? 0.0 : res.desc_log.rows.back().loss;
          out["matcher_final_loss"] =
              res.matcher_log.rows.empty() ? 0.0 : res.matcher_log.rows.back().loss;
          return out;
        },
        py::arg("regime"), py::arg("data_dir"), py::arg("out_dir"),
        py::arg("overrides") = py::dict());

  m.def("run_benchmark",
        [](const std::filesystem::path& checkpoint_dir,
           const std::filesystem::path& data_dir, const std::string& protocol,
           int n_keypoints, int stop_layer, uint64_t seed) {
          auto [desc, matcher] = pipeline::load_models(checkpoint_dir);
          auto [arch, regime] = pipeline::read_sidecar(checkpoint_dir / "sidecar.json");
          auto ds = scenes::load_dataset(data_dir);
          eval::EvalConfig cfg;
          cfg.n_keypoints = n_keypoints;
          cfg.stop_layer = stop_layer;
          cfg.seed = seed;
          auto rep = eval::run_benchmark(desc, matcher, ds,
                                         eval::protocol_from_string(protocol), cfg,
                                         regime);
          py::module_ json = py::module_::import("json");
          return json.attr("loads")(rep.to_json());
        },
        py::arg("checkpoint_dir"), py::arg("data_dir"), py::arg("protocol") = "upright",
        py::arg("n_keypoints") = 128, py::arg("stop_layer") = 0, py::arg("seed") = 0);

  m.def("descriptor_discrepancy",
        [](const std::filesystem::path& checkpoint_dir, const py::array_t<double>& image,
           int angle_deg, int stride) {
          auto [desc, matcher] = pipeline::load_models(checkpoint_dir);
          geom::Image im = numpy_to_image(image);
          return viz::visualize_descriptors(desc, im, angle_deg, stride).discrepancy;
        },
        py::arg("checkpoint_dir"), py::arg("image"), py::arg("angle_deg") = 180,
        py::arg("stride") = 4);
}
