#include "survfuse/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace survfuse {

namespace {

std::uint64_t fnv1a_bytes(const std::string& bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xF];
    h >>= 4;
  }
  return out;
}

}  // namespace

std::string file_hash_hex(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw std::invalid_argument("file_hash_hex: cannot open " + path.string());
  }
  std::uint64_t h = 0xCBF29CE484222325ULL;
  char buf[65536];
  while (f.read(buf, sizeof(buf)) || f.gcount() > 0) {
    h = fnv1a_bytes(std::string(buf, static_cast<std::size_t>(f.gcount())), h);
  }
  return hex64(h);
}

std::string cohort_hash(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files = {dir / "expressions.csv", dir / "survival.csv",
                                 dir / "clinical.csv", dir / "pathways.gmt"};
  std::vector<fs::path> patches;
  if (fs::exists(dir / "patches")) {
    for (const auto& e : fs::directory_iterator(dir / "patches")) {
      patches.push_back(e.path());
    }
  }
  std::sort(patches.begin(), patches.end());
  files.insert(files.end(), patches.begin(), patches.end());

  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const auto& p : files) {
    if (!fs::exists(p)) continue;
    h = fnv1a_bytes(file_hash_hex(p), h);
  }
  return hex64(h);
}

void append_manifest(const std::filesystem::path& out_dir,
                     const RunManifest& manifest) {
  std::filesystem::create_directories(out_dir);
  nlohmann::ordered_json j;
  j["command"] = manifest.command;
  j["code_version"] = manifest.code_version;
  j["seed"] = manifest.seed;
  j["config"] = manifest.config_echo;
  j["input_hashes"] = manifest.input_hashes;
  j["outputs"] = manifest.output_paths;
  j["wall_seconds"] = manifest.wall_seconds;
  std::ofstream f(out_dir / "manifest.jsonl", std::ios::app);
  if (!f) {
    throw std::runtime_error("cannot append to manifest.jsonl under " +
                             out_dir.string());
  }
  f << j.dump() << '\n';
}

}  // namespace survfuse
