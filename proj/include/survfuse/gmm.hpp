#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace survfuse {

/// Cohort-level anchor prototypes. Per-slide EM is initialized at these means
/// (and at the pooled per-dimension variance) so that component c keeps the
/// same identity across slides.
struct GlobalPrototypes {
  Eigen::MatrixXd means;         // n_components x d
  Eigen::RowVectorXd variance;   // pooled per-dimension variance
  int n_components() const { return static_cast<int>(means.rows()); }
};

/// Diagonal-covariance mixture summary of one slide's patch features.
struct GmmSummary {
  Eigen::VectorXd weights;    // pi, sums to 1
  Eigen::MatrixXd means;      // n_components x d
  Eigen::MatrixXd variances;  // n_components x d, floored
  std::vector<double> log_likelihood;  // one entry per EM iteration
  int n_components() const { return static_cast<int>(means.rows()); }
  int dim() const { return static_cast<int>(means.cols()); }
};

struct EmConfig {
  int max_iter = 10;
  double tol = 1e-6;        // relative log-likelihood gain
  double var_floor = 1e-4;
};

/// k-means++ initialized k-means over the pooled rows of the given bags.
/// Throws std::invalid_argument when the pool holds fewer rows than
/// n_components.
GlobalPrototypes fit_global_prototypes(
    std::span<const Eigen::MatrixXd> bags, int n_components,
    std::uint64_t seed);

/// Anchored EM for one bag. pi starts uniform, means at the anchors,
/// variances at the pooled variance. The recorded log-likelihood sequence is
/// non-decreasing. Components whose responsibility mass drops below 1e-8 keep
/// their anchor mean and get a floored weight.
GmmSummary fit_gmm(const Eigen::MatrixXd& bag, const GlobalPrototypes& anchors,
                   const EmConfig& cfg = {});

/// q(c|z) over components, computed in log space with max subtraction.
Eigen::VectorXd posterior(const Eigen::RowVectorXd& z, const GmmSummary& g);

struct PrototypeAssignment {
  int patch_index;
  int component;       // argmax of the posterior, ties to the lowest index
  double probability;
};

std::vector<PrototypeAssignment> prototype_assignments(
    const Eigen::MatrixXd& bag, const GmmSummary& g);

/// CSV rows (patch_index, component, probability).
void export_prototype_assignments(const std::filesystem::path& path,
                                  const Eigen::MatrixXd& bag,
                                  const GmmSummary& g);

}  // namespace survfuse
