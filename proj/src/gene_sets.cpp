#include "survfuse/gene_sets.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace survfuse {

std::vector<int> PathwayMembership::sizes() const {
  std::vector<int> out;
  out.reserve(pathways.size());
  for (const auto& p : pathways) {
    out.push_back(static_cast<int>(p.gene_indices.size()));
  }
  return out;
}

void PathwayMembership::validate() const {
  if (pathways.size() < 2) {
    throw std::invalid_argument("membership: need at least 2 pathways, have " +
                                std::to_string(pathways.size()));
  }
  for (const auto& p : pathways) {
    if (p.gene_indices.empty()) {
      throw std::invalid_argument("membership: pathway '" + p.name +
                                  "' is empty");
    }
    for (int idx : p.gene_indices) {
      if (idx < 0 || idx >= n_genes) {
        throw std::invalid_argument("membership: pathway '" + p.name +
                                    "' references gene index " +
                                    std::to_string(idx) + " outside [0, " +
                                    std::to_string(n_genes) + ")");
      }
    }
  }
}

PathwayTokens tokenize_pathways(const Eigen::RowVectorXd& expression,
                                const PathwayMembership& membership) {
  if (membership.n_genes != expression.size()) {
    throw std::invalid_argument(
        "tokenize_pathways: expression has " +
        std::to_string(expression.size()) + " genes, membership expects " +
        std::to_string(membership.n_genes));
  }
  PathwayTokens tokens;
  tokens.reserve(membership.pathways.size());
  for (const auto& p : membership.pathways) {
    Eigen::RowVectorXd tok(p.gene_indices.size());
    for (std::size_t k = 0; k < p.gene_indices.size(); ++k) {
      const int idx = p.gene_indices[k];
      if (idx < 0 || idx >= expression.size()) {
        throw std::invalid_argument("tokenize_pathways: pathway '" + p.name +
                                    "' gene index " + std::to_string(idx) +
                                    " out of range");
      }
      tok(static_cast<Eigen::Index>(k)) = expression(idx);
    }
    tokens.push_back(std::move(tok));
  }
  return tokens;
}

GmtLoadResult load_gene_sets(const std::filesystem::path& path,
                             const std::vector<std::string>& gene_symbols) {
  std::ifstream f(path);
  if (!f) {
    throw std::invalid_argument("load_gene_sets: cannot open " +
                                path.string());
  }
  std::unordered_map<std::string, int> index;
  index.reserve(gene_symbols.size());
  for (std::size_t i = 0; i < gene_symbols.size(); ++i) {
    index.emplace(gene_symbols[i], static_cast<int>(i));
  }

  GmtLoadResult out;
  out.membership.n_genes = static_cast<int>(gene_symbols.size());
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    if (fields.size() < 3) {
      throw std::invalid_argument("load_gene_sets: line " +
                                  std::to_string(line_no) +
                                  ": expected at least 3 tab-separated "
                                  "fields, got " +
                                  std::to_string(fields.size()));
    }
    Pathway p;
    p.name = fields[0];
    p.description = fields[1];
    for (std::size_t k = 2; k < fields.size(); ++k) {
      if (fields[k].empty()) continue;
      auto it = index.find(fields[k]);
      if (it == index.end()) {
        ++out.dropped_symbols;
      } else {
        p.gene_indices.push_back(it->second);
      }
    }
    if (p.gene_indices.empty()) {
      throw std::invalid_argument("load_gene_sets: line " +
                                  std::to_string(line_no) + ": pathway '" +
                                  p.name +
                                  "' has no known genes after filtering");
    }
    out.membership.pathways.push_back(std::move(p));
  }
  return out;
}

void save_gene_sets(const std::filesystem::path& path,
                    const PathwayMembership& membership,
                    const std::vector<std::string>& gene_symbols) {
  std::ofstream f(path);
  if (!f) {
    throw std::runtime_error("save_gene_sets: cannot open " + path.string() +
                             " for writing");
  }
  for (const auto& p : membership.pathways) {
    f << p.name << '\t' << (p.description.empty() ? "na" : p.description);
    for (int idx : p.gene_indices) f << '\t' << gene_symbols.at(idx);
    f << '\n';
  }
}

}  // namespace survfuse
