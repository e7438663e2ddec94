#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "survfuse/model.hpp"

namespace survfuse {

/// Per-patient Shapley attribution of the risk score over the four pooled
/// representation blocks [gg, hh, hg, gh]. Efficiency holds by construction:
/// sum(phi) = actual - baseline risk.
struct BlockAttribution {
  std::array<double, 4> phi{};
  double baseline_risk = 0.0;
  double actual_risk = 0.0;
};

using PooledBlocks = std::array<Eigen::RowVectorXd, 4>;

/// Exact Shapley values by enumerating all 16 coalitions, with absent blocks
/// masked to the baseline.
BlockAttribution shapley_blocks(const Model& model, const PooledBlocks& repr,
                                const PooledBlocks& baseline);

/// Closed form for the linear risk head: phi_b = w_b . (z_b - baseline_b).
/// Used as the cross-check for the coalition enumeration.
std::array<double, 4> shapley_linear_closed_form(const Model& model,
                                                 const PooledBlocks& repr,
                                                 const PooledBlocks& baseline);

/// Table of per-block and grouped attribution shares. Shares are |phi|
/// normalized per patient; patients with all-zero phi are excluded and
/// counted. Specific groups gg+hh, shared groups hg+gh.
struct ExplainFoldShares {
  std::array<double, 4> block_share{};  // gg, hh, hg, gh
  double specific = 0.0;
  double shared = 0.0;
  int patients_used = 0;
  int patients_excluded = 0;
};

ExplainFoldShares normalized_shares(
    const std::vector<BlockAttribution>& attributions);

/// Mean and std of fold-level shares across checkpoints.
struct ExplainReport {
  std::array<double, 4> block_mean{}, block_std{};
  double specific_mean = 0.0, specific_std = 0.0;
  double shared_mean = 0.0, shared_std = 0.0;
  int total_excluded = 0;
  std::vector<ExplainFoldShares> folds;
};

ExplainReport aggregate_shares(const std::vector<ExplainFoldShares>& folds);

}  // namespace survfuse
