#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "survfuse/gene_sets.hpp"

namespace survfuse {

struct SurvivalRecord {
  std::string patient_id;
  double time = 0.0;  // > 0, arbitrary units
  int event = 0;      // 1 = death observed, 0 = censored
};

/// Ground-truth latent structure planted by the generator. The per-patient
/// factors round-trip through cohort files; the mixing weights live only in
/// memory.
struct PlantedFactors {
  Eigen::MatrixXd shared;          // n x L_s
  Eigen::MatrixXd gene_specific;   // n x L_g
  Eigen::MatrixXd image_specific;  // n x L_h
  Eigen::VectorXd true_risk;       // n

  // Generator weights (not serialized).
  Eigen::MatrixXd gene_from_shared;    // D_g x L_s
  Eigen::MatrixXd gene_from_specific;  // D_g x L_g
  Eigen::MatrixXd cluster_base;        // K x D_p
  std::vector<Eigen::MatrixXd> cluster_from_shared;  // K of D_p x L_s
  std::vector<Eigen::MatrixXd> cluster_from_image;   // K of D_p x L_h
  Eigen::VectorXd risk_dir_shared, risk_dir_gene, risk_dir_image;

  bool empty() const { return true_risk.size() == 0; }
};

struct Cohort {
  std::vector<std::string> patient_ids;
  std::vector<std::string> gene_symbols;
  Eigen::MatrixXd expressions;              // n x D_g
  std::vector<Eigen::MatrixXd> patch_bags;  // each N_hi x D_p
  Eigen::VectorXd times;
  Eigen::VectorXi events;
  std::vector<int> sites;
  Eigen::MatrixXd clinical;  // n x 3: age, grade, sex
  PlantedFactors planted;

  int n() const { return static_cast<int>(patient_ids.size()); }
  int n_genes() const { return static_cast<int>(expressions.cols()); }
  int d_patch() const {
    return patch_bags.empty() ? 0 : static_cast<int>(patch_bags[0].cols());
  }
  std::vector<SurvivalRecord> survival_records() const;
};

/// Writes expressions.csv, survival.csv, clinical.csv, patches/<id>.csv,
/// planted.csv (when present) and pathways.gmt under dir. Doubles are printed
/// with 17 significant digits so a write/read cycle is bit-exact.
void save_cohort(const std::filesystem::path& dir, const Cohort& cohort,
                 const PathwayMembership& membership);

struct LoadedCohort {
  Cohort cohort;
  PathwayMembership membership;
};

LoadedCohort load_cohort(const std::filesystem::path& dir);

/// Schema and invariant checks over an on-disk cohort; returns a list of
/// problems, empty when the cohort is valid.
std::vector<std::string> validate_cohort_dir(const std::filesystem::path& dir);

}  // namespace survfuse
