#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "oracles.hpp"
#include "survfuse/gmm.hpp"
#include "survfuse/rng.hpp"

using namespace survfuse;

namespace {

// Two well-separated blobs with known means and per-point labels.
struct Blobs {
  Eigen::MatrixXd points;
  std::vector<int> labels;
  Eigen::MatrixXd true_means;
};

Blobs two_blobs(RngStream& rng, int per_blob, int dim, double sep,
                double sigma) {
  Blobs b;
  b.true_means = Eigen::MatrixXd::Zero(2, dim);
  b.true_means(0, 0) = -sep / 2.0;
  b.true_means(1, 0) = sep / 2.0;
  b.points.resize(2 * per_blob, dim);
  for (int i = 0; i < 2 * per_blob; ++i) {
    const int label = i < per_blob ? 0 : 1;
    b.labels.push_back(label);
    for (int j = 0; j < dim; ++j) {
      b.points(i, j) = b.true_means(label, j) + sigma * rng.normal();
    }
  }
  return b;
}

GlobalPrototypes anchors_for(const Eigen::MatrixXd& bag, int k,
                             std::uint64_t seed) {
  const std::vector<Eigen::MatrixXd> bags{bag};
  return fit_global_prototypes(bags, k, seed);
}

}  // namespace

TEST_CASE("k-means recovers degenerate point clusters exactly") {
  Eigen::MatrixXd points(6, 2);
  points << 1, 1, 1, 1, 1, 1, -3, 0, -3, 0, -3, 0;
  const std::vector<Eigen::MatrixXd> bags{points};
  const GlobalPrototypes p = fit_global_prototypes(bags, 2, 5);
  std::vector<Eigen::RowVector2d> got{p.means.row(0), p.means.row(1)};
  std::sort(got.begin(), got.end(),
            [](const auto& a, const auto& b) { return a(0) < b(0); });
  CHECK(got[0].isApprox(Eigen::RowVector2d(-3, 0), 1e-12));
  CHECK(got[1].isApprox(Eigen::RowVector2d(1, 1), 1e-12));
}

TEST_CASE("k-means determinism and blob recovery") {
  RngStream rng(7);
  const Blobs b = two_blobs(rng, 300, 4, 6.0, 0.4);
  const std::vector<Eigen::MatrixXd> bags{b.points};
  const GlobalPrototypes p1 = fit_global_prototypes(bags, 2, 99);
  const GlobalPrototypes p2 = fit_global_prototypes(bags, 2, 99);
  CHECK((p1.means - p2.means).cwiseAbs().maxCoeff() == 0.0);

  for (int c = 0; c < 2; ++c) {
    double best = 1e18;
    for (int m = 0; m < 2; ++m) {
      best = std::min(best, (p1.means.row(c) - b.true_means.row(m)).norm());
    }
    CHECK(best < 0.1);
  }
}

TEST_CASE("fit_global_prototypes rejects too-small pools") {
  Eigen::MatrixXd tiny(3, 2);
  tiny.setZero();
  const std::vector<Eigen::MatrixXd> bags{tiny};
  CHECK_THROWS_AS(fit_global_prototypes(bags, 4, 1), std::invalid_argument);
}

TEST_CASE("single-component EM gives the ML mean and biased variance") {
  RngStream rng(11);
  const Eigen::MatrixXd bag = oracles::random_matrix(rng, 80, 3, 1.7);
  EmConfig cfg;
  cfg.max_iter = 5;
  const GmmSummary g = fit_gmm(bag, anchors_for(bag, 1, 3), cfg);
  CHECK(g.weights(0) == 1.0);
  const Eigen::RowVectorXd mean = bag.colwise().mean();
  const Eigen::RowVectorXd var =
      (bag.rowwise() - mean).array().square().colwise().mean().matrix();
  CHECK((g.means.row(0) - mean).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((g.variances.row(0) - var).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("planted two-blob mixture recovers weights within 0.05") {
  RngStream rng(13);
  const Blobs b = two_blobs(rng, 200, 4, 6.0, 0.4);
  const GmmSummary g = fit_gmm(b.points, anchors_for(b.points, 2, 17), {});
  CHECK(std::abs(g.weights(0) - 0.5) < 0.05);
  CHECK(std::abs(g.weights(1) - 0.5) < 0.05);
}

TEST_CASE("EM log-likelihood is non-decreasing on 20 random bags") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    RngStream rng(seed);
    const int n = rng.uniform_int(30, 120);
    const int dim = rng.uniform_int(2, 6);
    Eigen::MatrixXd bag = oracles::random_matrix(rng, n, dim, 2.0);
    bag.topRows(n / 2).array() += 3.0;
    EmConfig cfg;
    cfg.max_iter = 25;
    cfg.tol = 0.0;
    const GmmSummary g = fit_gmm(bag, anchors_for(bag, 3, seed), cfg);
    REQUIRE(g.log_likelihood.size() > 1);
    for (std::size_t i = 1; i < g.log_likelihood.size(); ++i) {
      CHECK(g.log_likelihood[i] >= g.log_likelihood[i - 1] - 1e-9);
    }
  }
}

TEST_CASE("pi equals mean responsibility at convergence") {
  RngStream rng(19);
  const Blobs b = two_blobs(rng, 150, 3, 5.0, 0.5);
  EmConfig cfg;
  cfg.max_iter = 500;
  cfg.tol = 1e-13;
  const GmmSummary g = fit_gmm(b.points, anchors_for(b.points, 2, 23), cfg);
  Eigen::VectorXd mean_resp = Eigen::VectorXd::Zero(2);
  for (Eigen::Index i = 0; i < b.points.rows(); ++i) {
    mean_resp += posterior(b.points.row(i), g);
  }
  mean_resp /= static_cast<double>(b.points.rows());
  CHECK((mean_resp - g.weights).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("fit is invariant to patch order") {
  RngStream rng(29);
  const Blobs b = two_blobs(rng, 100, 3, 5.0, 0.5);
  const GlobalPrototypes anchors = anchors_for(b.points, 2, 31);
  const GmmSummary g1 = fit_gmm(b.points, anchors, {});

  Eigen::MatrixXd shuffled = b.points;
  std::vector<Eigen::Index> perm(shuffled.rows());
  for (Eigen::Index i = 0; i < shuffled.rows(); ++i) perm[i] = i;
  for (std::size_t i = perm.size(); i > 1; --i) {
    std::swap(perm[i - 1], perm[static_cast<std::size_t>(rng.uniform_int(
                               0, static_cast<int>(i) - 1))]);
  }
  for (Eigen::Index i = 0; i < shuffled.rows(); ++i) {
    shuffled.row(i) = b.points.row(perm[static_cast<std::size_t>(i)]);
  }
  const GmmSummary g2 = fit_gmm(shuffled, anchors, {});
  CHECK((g1.means - g2.means).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((g1.weights - g2.weights).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((g1.variances - g2.variances).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("fit_gmm input validation") {
  Eigen::MatrixXd empty(0, 3);
  GlobalPrototypes anchors;
  anchors.means = Eigen::MatrixXd::Zero(2, 3);
  anchors.variance = Eigen::RowVectorXd::Ones(3);
  CHECK_THROWS_AS(fit_gmm(empty, anchors, {}), std::invalid_argument);
  Eigen::MatrixXd one_row = Eigen::MatrixXd::Zero(1, 3);
  CHECK_THROWS_AS(fit_gmm(one_row, anchors, {}), std::invalid_argument);
}

TEST_CASE("posterior: single component, midpoint symmetry, tight component") {
  GmmSummary g;
  g.weights = Eigen::VectorXd::Ones(1);
  g.means = Eigen::MatrixXd::Zero(1, 2);
  g.variances = Eigen::MatrixXd::Ones(1, 2);
  const Eigen::VectorXd q1 = posterior(Eigen::RowVector2d(5.0, -3.0), g);
  CHECK(q1(0) == 1.0);

  GmmSummary sym;
  sym.weights = Eigen::VectorXd::Constant(2, 0.5);
  sym.means.resize(2, 2);
  sym.means << -1, 0, 1, 0;
  sym.variances = Eigen::MatrixXd::Constant(2, 2, 0.7);
  const Eigen::VectorXd q2 = posterior(Eigen::RowVector2d(0.0, 4.2), sym);
  CHECK(q2(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(q2.sum() - 1.0) < 1e-12);

  GmmSummary tight;
  tight.weights = Eigen::VectorXd::Constant(2, 0.5);
  tight.means.resize(2, 2);
  tight.means << 0, 0, 8, 8;
  tight.variances.resize(2, 2);
  tight.variances << 0.01, 0.01, 1.0, 1.0;
  const Eigen::VectorXd q3 = posterior(Eigen::RowVector2d(0.0, 0.0), tight);
  CHECK(q3(0) > 0.999);
}

TEST_CASE("posterior vectors are valid distributions on random inputs") {
  RngStream rng(37);
  const Blobs b = two_blobs(rng, 60, 4, 4.0, 0.6);
  const GmmSummary g = fit_gmm(b.points, anchors_for(b.points, 2, 41), {});
  for (int rep = 0; rep < 50; ++rep) {
    Eigen::RowVectorXd z(4);
    for (int j = 0; j < 4; ++j) z(j) = rng.normal(0.0, 4.0);
    const Eigen::VectorXd q = posterior(z, g);
    CHECK(q.minCoeff() >= 0.0);
    CHECK(std::abs(q.sum() - 1.0) < 1e-12);
  }
}

TEST_CASE("assignments recover planted labels and export round-trips") {
  RngStream rng(43);
  const Blobs b = two_blobs(rng, 150, 4, 6.0, 0.5);
  const GmmSummary g = fit_gmm(b.points, anchors_for(b.points, 2, 47), {});
  const auto assignments = prototype_assignments(b.points, g);
  REQUIRE(assignments.size() == 300);

  // Agreement up to relabeling.
  int match = 0, flipped = 0;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i].component == b.labels[i]) ++match;
    if (assignments[i].component == 1 - b.labels[i]) ++flipped;
    CHECK(assignments[i].probability >= 0.5);  // argmax of a 2-distribution
  }
  CHECK(std::max(match, flipped) >= 285);  // >= 95%

  const auto path = std::filesystem::temp_directory_path() /
                    "survfuse_assignments_test.csv";
  export_prototype_assignments(path, b.points, g);
  std::ifstream f(path);
  std::string header;
  std::getline(f, header);
  CHECK(header == "patch_index,component,probability");
  int rows = 0;
  std::string line;
  while (std::getline(f, line)) ++rows;
  CHECK(rows == 300);
  std::filesystem::remove(path);
}

TEST_CASE("all patches at a component mean are assigned to it") {
  GmmSummary g;
  g.weights = Eigen::VectorXd::Constant(2, 0.5);
  g.means.resize(2, 3);
  g.means << 1, 1, 1, -4, 0, 2;
  g.variances = Eigen::MatrixXd::Constant(2, 3, 0.2);
  Eigen::MatrixXd bag = g.means.row(0).replicate(5, 1);
  for (const auto& a : prototype_assignments(bag, g)) {
    CHECK(a.component == 0);
  }
}
