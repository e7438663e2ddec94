#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "survfuse/autodiff.hpp"
#include "survfuse/gene_sets.hpp"
#include "survfuse/gmm.hpp"

namespace survfuse {

struct ModelConfig {
  std::vector<int> pathway_sizes;  // token length per pathway
  int n_prototypes = 16;
  int d_patch = 16;
  int d_embed = 24;     // SNN / MLP output width
  int d_encoding = 8;   // learnable pathway / prototype encodings
  int d_attn = 32;      // D_z, per-branch output width
  double attn_scale = 0.0;  // score divisor is sqrt(attn_scale); 0 -> d_attn
  double ln_eps = 1e-5;

  int n_pathways() const { return static_cast<int>(pathway_sizes.size()); }
  int d_joint() const { return d_embed + d_encoding; }   // D_gh
  int d_fused() const { return 4 * d_attn; }
  double score_scale() const {
    return attn_scale > 0.0 ? attn_scale : static_cast<double>(d_attn);
  }
};

/// Named parameter store. Parameter order is fixed by the config, so the
/// count and the optimizer state layout are stable.
class Model {
 public:
  static Model init(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  int n_params() const { return static_cast<int>(values_.size()); }
  long parameter_count() const;  // total scalar count

  const std::string& name(int i) const { return names_[i]; }
  Eigen::MatrixXd& value(int i) { return values_[i]; }
  const Eigen::MatrixXd& value(int i) const { return values_[i]; }
  Eigen::MatrixXd& value(const std::string& name);
  const Eigen::MatrixXd& value(const std::string& name) const;
  int index(const std::string& name) const;

  std::vector<Eigen::MatrixXd>& values() { return values_; }
  const std::vector<Eigen::MatrixXd>& values() const { return values_; }

 private:
  ModelConfig cfg_;
  std::vector<std::string> names_;
  std::vector<Eigen::MatrixXd> values_;
  friend class ModelGraph;
};

/// The four fusion branches in fixed order: gg, hh, hg, gh.
enum Branch : int { kGG = 0, kHH = 1, kHG = 2, kGH = 3 };
inline constexpr std::array<const char*, 4> kBranchNames{"gg", "hh", "hg",
                                                         "gh"};

struct FusedVars {
  std::array<ad::Var, 4> attn;    // raw branch outputs (pre-LN)
  std::array<ad::Var, 4> pooled;  // 1 x D_z column means of the LN outputs
  ad::Var concat;                 // 1 x 4 D_z
};

struct PatientVars {
  ad::Var z_g, z_h;
  FusedVars fused;
  ad::Var risk;  // 1x1
};

/// Binds a model's parameters as tape leaves (once) and builds per-patient
/// forward graphs against them. All patients of a batch share the leaves, so
/// backward() accumulates batch gradients directly.
class ModelGraph {
 public:
  ModelGraph(ad::Tape& tape, const Model& model, bool trainable = true);

  /// Binds pre-created tape vars (one per parameter, in model order) instead
  /// of creating leaves; used by gradient-check harnesses.
  ModelGraph(ad::Tape& tape, const Model& model, std::vector<ad::Var> vars);

  ad::Var encode_pathways(const PathwayTokens& tokens);
  ad::Var encode_slide(const GmmSummary& summary);
  FusedVars fuse(ad::Var z_g, ad::Var z_h);
  ad::Var risk_score(const FusedVars& fused);
  PatientVars forward(const PathwayTokens& tokens, const GmmSummary& summary);

  ad::Var leaf(int param_index) const { return leaves_[param_index]; }
  ad::Var leaf(const std::string& name) const;
  const std::vector<ad::Var>& leaves() const { return leaves_; }

 private:
  ad::Tape& tape_;
  const Model& model_;
  std::vector<ad::Var> leaves_;
};

/// Plain per-patient evaluation (internally builds a throwaway graph).
struct DisentangledRepr {
  std::array<Eigen::MatrixXd, 4> prepool;    // raw branch outputs
  std::array<Eigen::RowVectorXd, 4> pooled;  // D_z each
  double risk = 0.0;
  Eigen::RowVectorXd concat() const;
};

DisentangledRepr eval_patient(const Model& model, const PathwayTokens& tokens,
                              const GmmSummary& summary);

// ---- checkpointing ----

struct Checkpoint {
  int format_version = 1;
  ModelConfig config;
  Model model;
  GlobalPrototypes prototypes;
  EmConfig em;
  std::array<Eigen::RowVectorXd, 4> baseline;  // train-mean pooled repr
  int fold_index = 0;
  std::vector<std::string> train_ids, test_ids;
  std::string cohort_hash;
  std::map<std::string, std::string> config_echo;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace survfuse
