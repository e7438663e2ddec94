#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

namespace survfuse {

struct Pathway {
  std::string name;
  std::string description;
  std::vector<int> gene_indices;  // positions in the cohort's gene order
};

struct PathwayMembership {
  std::vector<Pathway> pathways;
  int n_genes = 0;

  int size() const { return static_cast<int>(pathways.size()); }
  std::vector<int> sizes() const;
  /// Throws std::invalid_argument on out-of-range indices, empty pathways,
  /// or fewer than 2 pathways.
  void validate() const;
};

/// One expression subvector per pathway, genes in membership order.
/// Overlapping pathways duplicate gene values.
using PathwayTokens = std::vector<Eigen::RowVectorXd>;

PathwayTokens tokenize_pathways(const Eigen::RowVectorXd& expression,
                                const PathwayMembership& membership);

struct GmtLoadResult {
  PathwayMembership membership;
  int dropped_symbols = 0;  // unknown-symbol warning count
};

/// Parses a tab-separated GMT file (name, description, gene symbols...).
/// Symbols are mapped to indices via the cohort's gene order; unknown symbols
/// are dropped and counted. Throws std::invalid_argument on malformed lines
/// (with line number) and on pathways left empty after filtering.
GmtLoadResult load_gene_sets(const std::filesystem::path& path,
                             const std::vector<std::string>& gene_symbols);

void save_gene_sets(const std::filesystem::path& path,
                    const PathwayMembership& membership,
                    const std::vector<std::string>& gene_symbols);

}  // namespace survfuse
