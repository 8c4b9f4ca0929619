#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rotamatch/geometry.hpp"

namespace rotamatch::io {

// Binary PPM (P6), 8-bit. Values are mapped [0,1] <-> {0..255}; callers that
// need exact round-trips must hold pixel values on the 1/255 grid.
void write_ppm(const std::filesystem::path& path, const geom::Image& image);
geom::Image read_ppm(const std::filesystem::path& path);

// Depth raster: 16-byte header (magic "RMD1", u32 height, u32 width, 4 zero
// bytes), then f64 little-endian row-major.
void write_depth(const std::filesystem::path& path, const geom::DepthMap& depth);
geom::DepthMap read_depth(const std::filesystem::path& path);

void write_cameras_json(const std::filesystem::path& path, const geom::Camera& a,
                        const geom::Camera& b, const std::string& pair_id);

// One directory per pair: image_{a,b}.ppm, depth_{a,b}.bin, cameras.json.
void write_view_pair(const std::filesystem::path& dir, const geom::ViewPair& pair);
geom::ViewPair read_view_pair(const std::filesystem::path& dir);

// Sorted pair_* subdirectories of a dataset directory.
std::vector<std::filesystem::path> list_pair_dirs(const std::filesystem::path& dataset_dir);

}  // namespace rotamatch::io
