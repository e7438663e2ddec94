#include "survfuse/gmm.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "survfuse/rng.hpp"

namespace survfuse {

namespace {

constexpr double kEmptyMass = 1e-8;
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

Eigen::MatrixXd pool_bags(std::span<const Eigen::MatrixXd> bags) {
  Eigen::Index rows = 0;
  const Eigen::Index d = bags.empty() ? 0 : bags[0].cols();
  for (const auto& b : bags) {
    if (b.cols() != d) {
      throw std::invalid_argument("fit_global_prototypes: bag dims differ");
    }
    rows += b.rows();
  }
  Eigen::MatrixXd pool(rows, d);
  Eigen::Index at = 0;
  for (const auto& b : bags) {
    pool.middleRows(at, b.rows()) = b;
    at += b.rows();
  }
  return pool;
}

// Per-point log densities: n x K matrix of log(pi_c) + log N(z; mu_c, Sigma_c).
Eigen::MatrixXd log_joint(const Eigen::MatrixXd& points,
                          const Eigen::VectorXd& weights,
                          const Eigen::MatrixXd& means,
                          const Eigen::MatrixXd& variances) {
  const Eigen::Index n = points.rows();
  const Eigen::Index k = means.rows();
  const Eigen::Index d = points.cols();
  Eigen::VectorXd log_norm(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    log_norm(c) = std::log(weights(c)) -
                  0.5 * (d * kLog2Pi + variances.row(c).array().log().sum());
  }
  Eigen::MatrixXd out(n, k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const auto mu = means.row(c).array();
    const auto inv_var = variances.row(c).array().inverse();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double quad =
          ((points.row(i).array() - mu).square() * inv_var).sum();
      out(i, c) = log_norm(c) - 0.5 * quad;
    }
  }
  return out;
}

// Row-wise softmax in log space; returns responsibilities and accumulates the
// data log-likelihood.
Eigen::MatrixXd responsibilities(const Eigen::MatrixXd& lj, double* ll) {
  Eigen::MatrixXd resp(lj.rows(), lj.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < lj.rows(); ++i) {
    const double m = lj.row(i).maxCoeff();
    Eigen::ArrayXd e = (lj.row(i).array() - m).exp();
    const double s = e.sum();
    resp.row(i) = (e / s).matrix();
    total += m + std::log(s);
  }
  if (ll) *ll = total;
  return resp;
}

}  // namespace

GlobalPrototypes fit_global_prototypes(std::span<const Eigen::MatrixXd> bags,
                                       int n_components, std::uint64_t seed) {
  if (n_components < 1) {
    throw std::invalid_argument("fit_global_prototypes: n_components < 1");
  }
  const Eigen::MatrixXd pool = pool_bags(bags);
  const Eigen::Index n = pool.rows();
  const Eigen::Index d = pool.cols();
  if (n < n_components) {
    throw std::invalid_argument(
        "fit_global_prototypes: " + std::to_string(n) +
        " pooled patches for " + std::to_string(n_components) +
        " prototypes");
  }

  RngStream rng(seed);

  // k-means++ seeding.
  Eigen::MatrixXd centroids(n_components, d);
  centroids.row(0) = pool.row(rng.uniform_int(0, static_cast<int>(n) - 1));
  Eigen::VectorXd d2 = (pool.rowwise() - centroids.row(0))
                           .rowwise()
                           .squaredNorm();
  for (int c = 1; c < n_components; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (acc >= target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.uniform_int(0, static_cast<int>(n) - 1);
    }
    centroids.row(c) = pool.row(pick);
    d2 = d2.cwiseMin(
        (pool.rowwise() - centroids.row(c)).rowwise().squaredNorm());
  }

  // Lloyd iterations.
  std::vector<int> assign(n, -1);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (pool.row(i) - centroids.row(0)).squaredNorm();
      for (int c = 1; c < n_components; ++c) {
        const double dist = (pool.row(i) - centroids.row(c)).squaredNorm();
        if (dist < best_d) {
          best_d = dist;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(n_components, d);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(n_components);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[i]) += pool.row(i);
      counts(assign[i]) += 1.0;
    }
    for (int c = 0; c < n_components; ++c) {
      if (counts(c) > 0.0) {
        centroids.row(c) = sums.row(c) / counts(c);
      } else {
        // Reseed an empty cluster at the point farthest from its centroid.
        Eigen::Index far = 0;
        double far_d = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          const double dist =
              (pool.row(i) - centroids.row(assign[i])).squaredNorm();
          if (dist > far_d) {
            far_d = dist;
            far = i;
          }
        }
        centroids.row(c) = pool.row(far);
      }
    }
  }

  GlobalPrototypes out;
  out.means = centroids;
  const Eigen::RowVectorXd mean = pool.colwise().mean();
  out.variance =
      (pool.rowwise() - mean).array().square().colwise().mean().matrix();
  return out;
}

GmmSummary fit_gmm(const Eigen::MatrixXd& bag, const GlobalPrototypes& anchors,
                   const EmConfig& cfg) {
  const Eigen::Index n = bag.rows();
  const Eigen::Index d = bag.cols();
  const int k = anchors.n_components();
  if (n == 0) throw std::invalid_argument("fit_gmm: empty bag");
  if (d != anchors.means.cols()) {
    throw std::invalid_argument("fit_gmm: bag dim " + std::to_string(d) +
                                " != anchor dim " +
                                std::to_string(anchors.means.cols()));
  }
  if (n < k) {
    throw std::invalid_argument("fit_gmm: bag has " + std::to_string(n) +
                                " patches for " + std::to_string(k) +
                                " components");
  }

  GmmSummary g;
  g.weights = Eigen::VectorXd::Constant(k, 1.0 / k);
  g.means = anchors.means;
  g.variances = anchors.variance.replicate(k, 1).cwiseMax(cfg.var_floor);

  double ll_prev = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter <= cfg.max_iter; ++iter) {
    double ll = 0.0;
    const Eigen::MatrixXd resp = responsibilities(
        log_joint(bag, g.weights, g.means, g.variances), &ll);
    if (!std::isfinite(ll)) {
      throw std::runtime_error("fit_gmm: non-finite log-likelihood at EM iteration " +
                               std::to_string(iter));
    }
    g.log_likelihood.push_back(ll);
    if (iter > 0 &&
        ll - ll_prev < cfg.tol * std::max(1.0, std::abs(ll_prev))) {
      break;
    }
    ll_prev = ll;
    if (iter == cfg.max_iter) break;

    // M-step.
    const Eigen::VectorXd mass = resp.colwise().sum();
    for (int c = 0; c < k; ++c) {
      if (mass(c) < kEmptyMass) {
        g.means.row(c) = anchors.means.row(c);
        g.variances.row(c) = anchors.variance.cwiseMax(cfg.var_floor);
        g.weights(c) = kEmptyMass;
        continue;
      }
      const Eigen::RowVectorXd mu = resp.col(c).transpose() * bag / mass(c);
      Eigen::RowVectorXd var = Eigen::RowVectorXd::Zero(d);
      for (Eigen::Index i = 0; i < n; ++i) {
        var += resp(i, c) * (bag.row(i) - mu).array().square().matrix();
      }
      g.means.row(c) = mu;
      g.variances.row(c) = (var / mass(c)).cwiseMax(cfg.var_floor);
      g.weights(c) = mass(c) / static_cast<double>(n);
    }
    g.weights /= g.weights.sum();
  }
  return g;
}

Eigen::VectorXd posterior(const Eigen::RowVectorXd& z, const GmmSummary& g) {
  if (!z.allFinite()) throw std::invalid_argument("posterior: non-finite input");
  const Eigen::MatrixXd lj = log_joint(z, g.weights, g.means, g.variances);
  return responsibilities(lj, nullptr).row(0).transpose();
}

std::vector<PrototypeAssignment> prototype_assignments(
    const Eigen::MatrixXd& bag, const GmmSummary& g) {
  std::vector<PrototypeAssignment> out;
  out.reserve(bag.rows());
  for (Eigen::Index i = 0; i < bag.rows(); ++i) {
    const Eigen::VectorXd q = posterior(bag.row(i), g);
    int best = 0;
    for (int c = 1; c < q.size(); ++c) {
      if (q(c) > q(best)) best = c;  // ties keep the lowest index
    }
    out.push_back({static_cast<int>(i), best, q(best)});
  }
  return out;
}

void export_prototype_assignments(const std::filesystem::path& path,
                                  const Eigen::MatrixXd& bag,
                                  const GmmSummary& g) {
  std::ofstream f(path);
  if (!f) {
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  }
  f << "patch_index,component,probability\n";
  char buf[64];
  for (const auto& a : prototype_assignments(bag, g)) {
    std::snprintf(buf, sizeof(buf), "%.17g", a.probability);
    f << a.patch_index << "," << a.component << "," << buf << "\n";
  }
}

}  // namespace survfuse
