#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace survfuse {

inline constexpr const char* kVersion = "0.1.0";

/// FNV-1a 64-bit hash of a file's bytes, as 16 hex digits.
std::string file_hash_hex(const std::filesystem::path& path);

/// Combined hash over a cohort directory's data files (fixed order).
std::string cohort_hash(const std::filesystem::path& dir);

/// One line per run, appended to <out_dir>/manifest.jsonl.
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> config_echo;
  std::uint64_t seed = 0;
  std::string code_version = kVersion;
  std::map<std::string, std::string> input_hashes;
  std::vector<std::string> output_paths;
  double wall_seconds = 0.0;
};

void append_manifest(const std::filesystem::path& out_dir,
                     const RunManifest& manifest);

}  // namespace survfuse
