#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace rotamatch::manifest {

// Flat key=value config text, one assignment per line. '#' starts a comment,
// blank lines are skipped, later assignments win, values may be quoted.
// Values keep their literal text; typed getters parse on demand and throw on
// malformed input.
class Config {
 public:
  static Config from_file(const std::filesystem::path& path);
  static Config from_string(const std::string& text);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  uint64_t get_u64(const std::string& key, uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Sorted key=value lines; equal configs canonicalize identically no matter
  // the source formatting.
  std::string canonical() const;
  uint64_t hash() const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

uint64_t hash_bytes(const void* data, size_t n);
uint64_t hash_file(const std::filesystem::path& path);
std::string hex64(uint64_t v);

// Provenance record for one artifact directory: what command produced it,
// from which inputs. Exactly one per output directory.
struct RunManifest {
  std::string command;
  std::string config_hash;  // hex64 of Config::hash
  uint64_t seed = 0;
  std::map<std::string, std::string> inputs;   // path or label -> content hash
  std::map<std::string, std::string> outputs;  // path or label -> content hash
  std::string created_at;                      // ISO 8601 UTC

  void write(const std::filesystem::path& dir) const;  // dir/run_manifest.json
  static RunManifest read(const std::filesystem::path& dir);
};

std::string iso8601_utc_now();

}  // namespace rotamatch::manifest
