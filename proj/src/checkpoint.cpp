#include "rotamatch/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace rotamatch {

namespace {

constexpr char kMagic[4] = {'R', 'M', 'T', '1'};

void write_u64(std::ostream& os, uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint64_t read_u64(std::istream& is) {
  uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& params) {
  // Write to a temp file and rename so a crashed writer never leaves a
  // half-written checkpoint behind.
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot open " + tmp.string());
    os.write(kMagic, 4);
    for (const auto& [name, t] : params) {
      write_u64(os, name.size());
      os.write(name.data(), static_cast<std::streamsize>(name.size()));
      write_u64(os, static_cast<uint64_t>(t.rank()));
      for (int64_t d : t.shape()) write_u64(os, static_cast<uint64_t>(d));
      os.write(reinterpret_cast<const char*>(t.data().data()),
               static_cast<std::streamsize>(t.numel() * sizeof(double)));
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

NamedTensors load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path.string());

  NamedTensors out;
  while (true) {
    is.peek();
    if (is.eof()) break;
    uint64_t name_len = read_u64(is);
    if (name_len > (1u << 20)) throw std::runtime_error("checkpoint: absurd name length");
    std::string name(name_len, '\0');
    is.read(name.data(), static_cast<std::streamsize>(name_len));
    uint64_t rank = read_u64(is);
    if (rank > 8) throw std::runtime_error("checkpoint: absurd rank");
    std::vector<int64_t> shape;
    int64_t numel = 1;
    for (uint64_t r = 0; r < rank; ++r) {
      uint64_t d = read_u64(is);
      shape.push_back(static_cast<int64_t>(d));
      numel *= static_cast<int64_t>(d);
    }
    std::vector<double> data(static_cast<size_t>(numel));
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(static_cast<size_t>(numel) * sizeof(double)));
    if (!is) throw std::runtime_error("checkpoint: truncated tensor data for " + name);
    out.emplace_back(std::move(name), Tensor::from(std::move(shape), std::move(data)));
  }
  return out;
}

}  // namespace rotamatch
