#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "survfuse/config.hpp"
#include "survfuse/datagen.hpp"
#include "survfuse/explain.hpp"
#include "survfuse/losses.hpp"
#include "survfuse/model.hpp"

namespace survfuse {

struct FoldResult {
  int fold_index = 0;
  int n_train = 0, n_test = 0;
  double c_index = 0.0;
  double clinical_c_index = 0.0;
  DcReport dc;  // over the full test set
  std::vector<double> epoch_total, epoch_surv, epoch_dis;
  std::string checkpoint_path;
};

struct TrainOutcome {
  FoldResult result;
  Checkpoint checkpoint;
};

/// Trains one fold: fits prototype anchors on the training bags, summarizes
/// every slide, then runs AdamW minibatch updates with a cosine schedule over
/// epochs * ceil(n_train / batch) steps. Test-set evaluation covers c-index
/// and the DC report over the stacked pooled representations.
TrainOutcome train_fold(const RunConfig& cfg, const Cohort& cohort,
                        const PathwayMembership& membership, const Fold& fold,
                        int fold_index, const std::string& cohort_hash_hex);

struct CrossvalReport {
  int schema_version = 1;
  std::string label;
  std::uint64_t seed = 0;
  std::string dc_eval = "full_test_set";
  std::map<std::string, std::string> config;
  std::vector<FoldResult> folds;

  double mean(double FoldResult::*field) const;
  double stddev(double FoldResult::*field) const;
  double mean_dc(double DcReport::*field) const;
  double stddev_dc(double DcReport::*field) const;
};

/// Runs every fold (optionally on a small thread pool; results are identical
/// for any thread count) and writes per-fold checkpoints under out_dir when
/// it is non-empty.
CrossvalReport crossval(const RunConfig& cfg, const Cohort& cohort,
                        const PathwayMembership& membership,
                        const std::filesystem::path& out_dir,
                        const std::string& cohort_hash_hex, int threads = 1);

/// Stacks pooled representations of the given patients and reports
/// DC(Z_gg, Z_hh) as D1, DC([Z_gg||Z_hh], [Z_hg||Z_gh]) as D2 and their sum.
DcReport dc_report(const Model& model,
                   const std::vector<PathwayTokens>& tokens,
                   const std::vector<GmmSummary>& summaries);

/// Per-checkpoint attribution shares over the checkpoint's test patients.
ExplainFoldShares explain_fold(const Checkpoint& ck, const Cohort& cohort,
                               const PathwayMembership& membership,
                               bool zero_baseline = false);

}  // namespace survfuse
