#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <filesystem>
#include <fstream>
#include <set>

#include "survfuse/cohort.hpp"
#include "survfuse/datagen.hpp"
#include "survfuse/gene_sets.hpp"
#include "survfuse/metrics.hpp"
#include "survfuse/rng.hpp"

using namespace survfuse;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("survfuse_test_" + std::to_string(RngStream(
                                   static_cast<std::uint64_t>(
                                       std::random_device{}()))
                                   .next_u64()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

bool cohorts_identical(const Cohort& a, const Cohort& b) {
  if (a.patient_ids != b.patient_ids) return false;
  if (a.gene_symbols != b.gene_symbols) return false;
  if (a.expressions != b.expressions) return false;
  if (a.times != b.times || a.events != b.events || a.sites != b.sites) {
    return false;
  }
  for (int i = 0; i < a.n(); ++i) {
    if (a.patch_bags[static_cast<std::size_t>(i)] !=
        b.patch_bags[static_cast<std::size_t>(i)]) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("tokenize: explicit example and identity pathway") {
  PathwayMembership m;
  m.n_genes = 3;
  m.pathways = {{"A", "", {0, 2}}, {"B", "", {1}}};
  Eigen::RowVectorXd g(3);
  g << 1, 2, 3;
  const PathwayTokens tokens = tokenize_pathways(g, m);
  REQUIRE(tokens.size() == 2);
  CHECK(tokens[0] == Eigen::RowVector2d(1, 3));
  CHECK(tokens[1].size() == 1);
  CHECK(tokens[1](0) == 2.0);

  PathwayMembership all;
  all.n_genes = 3;
  all.pathways = {{"ALL", "", {0, 1, 2}}, {"B", "", {1}}};
  CHECK(tokenize_pathways(g, all)[0] == g);
}

TEST_CASE("tokenize rejects out-of-range gene indices") {
  PathwayMembership m;
  m.n_genes = 3;
  m.pathways = {{"A", "", {0, 7}}, {"B", "", {1}}};
  Eigen::RowVectorXd g(3);
  g << 1, 2, 3;
  CHECK_THROWS_AS(tokenize_pathways(g, m), std::invalid_argument);
}

TEST_CASE("tokenization is lossless for a partition") {
  const GeneratorConfig cfg;
  const GeneratedCohort gen = generate_cohort(cfg, 3);
  const Eigen::RowVectorXd g = gen.cohort.expressions.row(2);
  const PathwayTokens tokens = tokenize_pathways(g, gen.membership);
  Eigen::RowVectorXd rebuilt = Eigen::RowVectorXd::Zero(g.size());
  for (std::size_t n = 0; n < tokens.size(); ++n) {
    const auto& idx = gen.membership.pathways[n].gene_indices;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      rebuilt(idx[k]) = tokens[n](static_cast<Eigen::Index>(k));
    }
  }
  CHECK(rebuilt == g);
}

TEST_CASE("GMT: parse, unknown-symbol warnings, malformed lines") {
  TempDir tmp;
  const auto path = tmp.path / "sets.gmt";
  {
    std::ofstream f(path);
    f << "SET_A\tdesc\tG0\tG2\n";
    f << "SET_B\tdesc\tG1\tNOPE\n";
  }
  const std::vector<std::string> symbols{"G0", "G1", "G2"};
  const GmtLoadResult r = load_gene_sets(path, symbols);
  REQUIRE(r.membership.pathways.size() == 2);
  CHECK(r.membership.pathways[0].gene_indices == std::vector<int>{0, 2});
  CHECK(r.membership.pathways[1].gene_indices == std::vector<int>{1});
  CHECK(r.dropped_symbols == 1);

  {
    std::ofstream f(path);
    f << "ONLY_NAME\tdesc\n";
  }
  CHECK_THROWS_WITH_AS(load_gene_sets(path, symbols),
                       doctest::Contains("line 1"), std::invalid_argument);

  {
    std::ofstream f(path);
    f << "SET_A\tdesc\tNOPE1\tNOPE2\n";
  }
  CHECK_THROWS_AS(load_gene_sets(path, symbols), std::invalid_argument);
}

TEST_CASE("GMT round-trip preserves membership") {
  RngStream rng(3);
  std::vector<std::string> symbols;
  for (int i = 0; i < 2000; ++i) {
    symbols.push_back("G" + std::to_string(i));
  }
  PathwayMembership m;
  m.n_genes = 2000;
  for (int s = 0; s < 50; ++s) {
    Pathway p;
    p.name = "SET_" + std::to_string(s);
    p.description = "d" + std::to_string(s);
    const int size = rng.uniform_int(5, 80);
    std::set<int> idx;
    while (static_cast<int>(idx.size()) < size) {
      idx.insert(rng.uniform_int(0, 1999));
    }
    p.gene_indices.assign(idx.begin(), idx.end());
    m.pathways.push_back(std::move(p));
  }

  TempDir tmp;
  const auto path = tmp.path / "hallmark_style.gmt";
  save_gene_sets(path, m, symbols);
  const GmtLoadResult r = load_gene_sets(path, symbols);
  CHECK(r.dropped_symbols == 0);
  REQUIRE(r.membership.pathways.size() == 50);
  for (int s = 0; s < 50; ++s) {
    CHECK(r.membership.pathways[static_cast<std::size_t>(s)].gene_indices ==
          m.pathways[static_cast<std::size_t>(s)].gene_indices);
  }

  // Token sizes match an independent line parse of the same file.
  std::ifstream f(path);
  std::string line;
  const GeneratedCohort dummy = generate_cohort({}, 1);
  Eigen::RowVectorXd expr = Eigen::RowVectorXd::Zero(2000);
  const PathwayTokens tokens = tokenize_pathways(expr, r.membership);
  int ln = 0;
  while (std::getline(f, line)) {
    int tabs = 0;
    for (char c : line) tabs += c == '\t';
    CHECK(tokens[static_cast<std::size_t>(ln)].size() == tabs - 1);
    ++ln;
  }
  CHECK(ln == 50);
}

TEST_CASE("generator determinism: same seed, identical cohort") {
  GeneratorConfig cfg;
  cfg.n_patients = 100;
  const GeneratedCohort a = generate_cohort(cfg, 7);
  const GeneratedCohort b = generate_cohort(cfg, 7);
  CHECK(cohorts_identical(a.cohort, b.cohort));
  CHECK(a.cohort.planted.true_risk == b.cohort.planted.true_risk);

  const GeneratedCohort c = generate_cohort(cfg, 8);
  CHECK_FALSE(cohorts_identical(a.cohort, c.cohort));
}

TEST_CASE("generator rejects infeasible configs") {
  GeneratorConfig bad;
  bad.latent_shared = 300;  // exceeds n_genes = 200
  CHECK_THROWS_AS(generate_cohort(bad, 1), std::invalid_argument);
  GeneratorConfig bad2;
  bad2.n_pathways = 1;
  CHECK_THROWS_AS(generate_cohort(bad2, 1), std::invalid_argument);
  GeneratorConfig bad3;
  bad3.patches_max = bad3.patches_min - 1;
  CHECK_THROWS_AS(generate_cohort(bad3, 1), std::invalid_argument);
}

TEST_CASE("planted risk orders generated survival (zero noise, shared only)") {
  GeneratorConfig cfg;
  cfg.n_patients = 1000;
  cfg.noise_sigma = 0.0;
  cfg.risk_weight_shared = 1.0;
  cfg.risk_weight_gene = 0.0;
  cfg.risk_weight_image = 0.0;
  cfg.patches_min = 8;
  cfg.patches_max = 8;
  const GeneratedCohort gen = generate_cohort(cfg, 21);
  const double c = concordance_index(gen.cohort.planted.true_risk,
                                     gen.cohort.times, gen.cohort.events);
  CHECK(c > 0.7);
}

TEST_CASE("censoring calibration lands within 5 points of the target") {
  GeneratorConfig cfg;
  cfg.n_patients = 2000;
  cfg.censoring_rate = 0.3;
  cfg.patches_min = 4;
  cfg.patches_max = 8;
  const GeneratedCohort gen = generate_cohort(cfg, 33);
  const double censored =
      1.0 - gen.cohort.events.cast<double>().mean();
  CHECK(censored > 0.25);
  CHECK(censored < 0.35);
}

TEST_CASE("cohort serialization round-trips bit-for-bit") {
  GeneratorConfig cfg;
  cfg.n_patients = 12;
  cfg.patches_min = 6;
  cfg.patches_max = 10;
  const GeneratedCohort gen = generate_cohort(cfg, 5);
  TempDir tmp;
  save_cohort(tmp.path, gen.cohort, gen.membership);
  const LoadedCohort loaded = load_cohort(tmp.path);
  CHECK(cohorts_identical(gen.cohort, loaded.cohort));
  CHECK(loaded.cohort.clinical == gen.cohort.clinical);
  CHECK(loaded.cohort.planted.true_risk == gen.cohort.planted.true_risk);
  CHECK(loaded.cohort.planted.shared == gen.cohort.planted.shared);
  REQUIRE(loaded.membership.pathways.size() ==
          gen.membership.pathways.size());
  for (std::size_t i = 0; i < gen.membership.pathways.size(); ++i) {
    CHECK(loaded.membership.pathways[i].gene_indices ==
          gen.membership.pathways[i].gene_indices);
  }
  CHECK(validate_cohort_dir(tmp.path).empty());
}

TEST_CASE("fold splitting: partition, determinism, sizes") {
  GeneratorConfig cfg;
  cfg.n_patients = 10;
  cfg.patches_min = 4;
  cfg.patches_max = 6;
  const GeneratedCohort gen = generate_cohort(cfg, 9);
  const auto folds = split_folds(gen.cohort, 5, 17);
  REQUIRE(folds.size() == 5);
  std::set<int> seen;
  for (const auto& f : folds) {
    CHECK(f.test_ids.size() == 2);
    for (int id : f.test_ids) {
      CHECK_FALSE(seen.count(id));
      seen.insert(id);
    }
    CHECK(f.train_ids.size() == 8);
  }
  CHECK(seen.size() == 10);

  const auto again = split_folds(gen.cohort, 5, 17);
  for (std::size_t f = 0; f < folds.size(); ++f) {
    CHECK(folds[f].test_ids == again[f].test_ids);
    CHECK(folds[f].train_ids == again[f].train_ids);
  }

  CHECK_THROWS_AS(split_folds(gen.cohort, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(split_folds(gen.cohort, 11, 1), std::invalid_argument);
}

TEST_CASE("fold splitting stratifies sites evenly") {
  GeneratorConfig cfg;
  cfg.n_patients = 90;
  cfg.n_sites = 3;
  cfg.patches_min = 4;
  cfg.patches_max = 6;
  const GeneratedCohort gen = generate_cohort(cfg, 11);
  const auto folds = split_folds(gen.cohort, 5, 23);
  for (const auto& f : folds) {
    std::array<int, 3> counts{};
    for (int id : f.test_ids) {
      counts[static_cast<std::size_t>(gen.cohort.sites[
          static_cast<std::size_t>(id)])]++;
    }
    for (int c : counts) {
      CHECK(c >= 5);
      CHECK(c <= 7);
    }
  }
}

TEST_CASE("fold event rates stay near the global rate") {
  GeneratorConfig cfg;
  cfg.n_patients = 200;
  cfg.patches_min = 4;
  cfg.patches_max = 6;
  const GeneratedCohort gen = generate_cohort(cfg, 13);
  const double global_rate = gen.cohort.events.cast<double>().mean();
  for (const auto& f : split_folds(gen.cohort, 5, 29)) {
    double rate = 0.0;
    for (int id : f.test_ids) rate += gen.cohort.events(id);
    rate /= static_cast<double>(f.test_ids.size());
    CHECK(std::abs(rate - global_rate) <= 0.10);
  }
}
