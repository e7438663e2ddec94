#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "survfuse/cohort.hpp"

namespace survfuse {

/// Synthetic multimodal survival cohort with planted shared / specific latent
/// factors. Gene expression mixes the shared and gene-specific latents; patch
/// features are drawn around per-patient cluster means driven by the shared
/// and image-specific latents; survival time is exponential with rate
/// exp(true risk) under independent uniform censoring.
struct GeneratorConfig {
  int n_patients = 100;
  int n_genes = 200;
  int n_pathways = 8;
  int d_patch = 16;
  int patches_min = 32;
  int patches_max = 64;
  int latent_shared = 4;
  int latent_gene = 4;
  int latent_image = 4;
  double noise_sigma = 0.3;
  double censoring_rate = 0.3;  // target fraction of censored patients
  int n_sites = 3;
  int n_clusters = 4;  // planted morphological clusters per slide
  double risk_weight_shared = 1.5;
  double risk_weight_gene = 0.4;
  double risk_weight_image = 0.4;

  /// Throws std::invalid_argument on an infeasible configuration.
  void validate() const;
};

struct GeneratedCohort {
  Cohort cohort;
  PathwayMembership membership;
};

GeneratedCohort generate_cohort(const GeneratorConfig& cfg,
                                std::uint64_t seed);

struct Fold {
  std::vector<int> train_ids;
  std::vector<int> test_ids;
};

/// Site-stratified k-fold split, additionally balanced on event status
/// within each site. Folds partition the cohort. Throws
/// std::invalid_argument when k < 2 or k > n.
std::vector<Fold> split_folds(const Cohort& cohort, unsigned k,
                              std::uint64_t seed);

}  // namespace survfuse
