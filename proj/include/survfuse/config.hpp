#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "survfuse/datagen.hpp"
#include "survfuse/gmm.hpp"

namespace survfuse {

/// Everything a run needs, with documented defaults. The on-disk format is
/// plain `key = value` lines with '#' comments; keys are validated against
/// the documented registry.
struct RunConfig {
  GeneratorConfig gen;

  // model dims
  int d_embed = 24;
  int d_encoding = 8;
  int d_attn = 32;
  int n_prototypes = 16;

  EmConfig em;

  // training
  int epochs = 30;
  double lr = 1e-4;
  double weight_decay = 1e-5;
  int batch_size = 64;
  double lambda_surv = 1.0;
  double lambda_dis = 7.0;
  unsigned folds = 5;
  std::uint64_t seed = 1;
  bool dc_squared = false;

  std::string explain_baseline = "mean";  // mean | zero
  std::string label = "default";
};

/// All documented config keys, in file order.
const std::vector<std::string>& config_keys();

/// Parses a config file; unknown keys raise std::invalid_argument listing
/// the valid keys. Missing keys keep their defaults.
RunConfig load_config(const std::filesystem::path& path);

/// Applies `key = value` assignment to cfg (same validation as the file
/// parser).
void apply_config_entry(RunConfig& cfg, const std::string& key,
                        const std::string& value);

/// Key -> value echo of every documented field.
std::map<std::string, std::string> config_echo(const RunConfig& cfg);

void save_config(const std::filesystem::path& path, const RunConfig& cfg);

}  // namespace survfuse
