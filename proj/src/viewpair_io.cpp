#include "rotamatch/viewpair_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace rotamatch::io {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
  return f;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for reading: " + path.string());
  return f;
}

}  // namespace

void write_ppm(const fs::path& path, const geom::Image& image) {
  if (image.c != 3) throw std::invalid_argument("write_ppm: expects 3 channels");
  auto f = open_out(path);
  f << "P6\n" << image.w << " " << image.h << "\n255\n";
  std::vector<unsigned char> row(static_cast<size_t>(image.w) * 3);
  for (int i = 0; i < image.h; ++i) {
    for (int j = 0; j < image.w; ++j)
      for (int k = 0; k < 3; ++k) {
        double v = std::clamp(image.at(i, j, k), 0.0, 1.0);
        row[static_cast<size_t>(j) * 3 + k] =
            static_cast<unsigned char>(std::lround(v * 255.0));
      }
    f.write(reinterpret_cast<const char*>(row.data()),
            static_cast<std::streamsize>(row.size()));
  }
  if (!f) throw std::runtime_error("write_ppm: short write to " + path.string());
}

geom::Image read_ppm(const fs::path& path) {
  auto f = open_in(path);
  std::string magic;
  f >> magic;
  if (magic != "P6") throw std::runtime_error("read_ppm: not a P6 file: " + path.string());
  int w = 0, h = 0, maxval = 0;
  f >> w >> h >> maxval;
  if (!f || w <= 0 || h <= 0 || maxval != 255)
    throw std::runtime_error("read_ppm: bad header in " + path.string());
  f.get();  // single whitespace after maxval
  geom::Image im = geom::Image::zeros(h, w, 3);
  std::vector<unsigned char> buf(static_cast<size_t>(w) * h * 3);
  f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<size_t>(f.gcount()) != buf.size())
    throw std::runtime_error("read_ppm: truncated payload in " + path.string());
  for (size_t i = 0; i < buf.size(); ++i) im.px[i] = buf[i] / 255.0;
  return im;
}

void write_depth(const fs::path& path, const geom::DepthMap& depth) {
  auto f = open_out(path);
  char header[16] = {'R', 'M', 'D', '1'};
  uint32_t h = static_cast<uint32_t>(depth.h), w = static_cast<uint32_t>(depth.w);
  std::memcpy(header + 4, &h, 4);
  std::memcpy(header + 8, &w, 4);
  f.write(header, 16);
  f.write(reinterpret_cast<const char*>(depth.z.data()),
          static_cast<std::streamsize>(depth.z.size() * sizeof(double)));
  if (!f) throw std::runtime_error("write_depth: short write to " + path.string());
}

geom::DepthMap read_depth(const fs::path& path) {
  auto f = open_in(path);
  char header[16];
  f.read(header, 16);
  if (f.gcount() != 16 || std::memcmp(header, "RMD1", 4) != 0)
    throw std::runtime_error("read_depth: bad magic in " + path.string());
  uint32_t h = 0, w = 0;
  std::memcpy(&h, header + 4, 4);
  std::memcpy(&w, header + 8, 4);
  if (h == 0 || w == 0 || h > (1u << 20) || w > (1u << 20))
    throw std::runtime_error("read_depth: implausible dimensions in " + path.string());
  geom::DepthMap d = geom::DepthMap::zeros(static_cast<int>(h), static_cast<int>(w));
  f.read(reinterpret_cast<char*>(d.z.data()),
         static_cast<std::streamsize>(d.z.size() * sizeof(double)));
  if (static_cast<size_t>(f.gcount()) != d.z.size() * sizeof(double))
    throw std::runtime_error("read_depth: truncated payload in " + path.string());
  return d;
}

namespace {

json camera_to_json(const geom::Camera& c) {
  std::vector<double> r(9);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r[static_cast<size_t>(i * 3 + j)] = c.R(i, j);
  return json{{"fx", c.fx},       {"fy", c.fy},
              {"cx", c.cx},       {"cy", c.cy},
              {"R", r},           {"t", {c.t.x(), c.t.y(), c.t.z()}},
              {"width", c.width}, {"height", c.height}};
}

geom::Camera camera_from_json(const json& j) {
  geom::Camera c;
  c.fx = j.at("fx").get<double>();
  c.fy = j.at("fy").get<double>();
  c.cx = j.at("cx").get<double>();
  c.cy = j.at("cy").get<double>();
  auto r = j.at("R").get<std::vector<double>>();
  if (r.size() != 9) throw std::runtime_error("cameras.json: R must have 9 entries");
  for (int i = 0; i < 3; ++i)
    for (int jj = 0; jj < 3; ++jj) c.R(i, jj) = r[static_cast<size_t>(i * 3 + jj)];
  auto t = j.at("t").get<std::vector<double>>();
  if (t.size() != 3) throw std::runtime_error("cameras.json: t must have 3 entries");
  c.t = geom::Vector3d(t[0], t[1], t[2]);
  c.width = j.at("width").get<int>();
  c.height = j.at("height").get<int>();
  return c;
}

}  // namespace

void write_cameras_json(const fs::path& path, const geom::Camera& a,
                        const geom::Camera& b, const std::string& pair_id) {
  json j{{"pair_id", pair_id},
         {"camera_a", camera_to_json(a)},
         {"camera_b", camera_to_json(b)}};
  auto f = open_out(path);
  f << j.dump(2) << "\n";
}

void write_view_pair(const fs::path& dir, const geom::ViewPair& pair) {
  fs::create_directories(dir);
  write_ppm(dir / "image_a.ppm", pair.image_a);
  write_ppm(dir / "image_b.ppm", pair.image_b);
  write_depth(dir / "depth_a.bin", pair.depth_a);
  write_depth(dir / "depth_b.bin", pair.depth_b);
  write_cameras_json(dir / "cameras.json", pair.camera_a, pair.camera_b, pair.pair_id);
}

geom::ViewPair read_view_pair(const fs::path& dir) {
  geom::ViewPair p;
  p.image_a = read_ppm(dir / "image_a.ppm");
  p.image_b = read_ppm(dir / "image_b.ppm");
  p.depth_a = read_depth(dir / "depth_a.bin");
  p.depth_b = read_depth(dir / "depth_b.bin");
  auto f = open_in(dir / "cameras.json");
  json j = json::parse(f);
  p.pair_id = j.at("pair_id").get<std::string>();
  p.camera_a = camera_from_json(j.at("camera_a"));
  p.camera_b = camera_from_json(j.at("camera_b"));
  return p;
}

std::vector<fs::path> list_pair_dirs(const fs::path& dataset_dir) {
  std::vector<fs::path> dirs;
  if (!fs::exists(dataset_dir))
    throw std::runtime_error("dataset directory missing: " + dataset_dir.string());
  for (const auto& e : fs::directory_iterator(dataset_dir)) {
    if (e.is_directory() && e.path().filename().string().rfind("pair_", 0) == 0)
      dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

}  // namespace rotamatch::io
