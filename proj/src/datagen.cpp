#include "survfuse/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "survfuse/rng.hpp"

namespace survfuse {

namespace {

// Child-stream indices for the structural draws.
enum : std::uint64_t {
  kStreamMixing = 0,
  kStreamClusters = 1,
  kStreamRisk = 2,
  kStreamPatients = 3,
  kStreamCensoring = 4,
};

Eigen::MatrixXd random_matrix(RngStream& rng, Eigen::Index rows,
                              Eigen::Index cols, double stddev) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal(0.0, stddev);
  return m;
}

Eigen::VectorXd random_unit(RngStream& rng, Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal();
  const double norm = v.norm();
  return norm > 0.0 ? Eigen::VectorXd(v / norm) : v;
}

std::string padded(const char* prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%04d", prefix, i);
  return buf;
}

// Expected censoring fraction when T ~ Exp(rate) and C ~ U(0, c):
// P(C < T) = (1 - exp(-rate c)) / (rate c), averaged over patients.
double expected_censoring(const Eigen::VectorXd& rates, double c) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < rates.size(); ++i) {
    const double rc = rates(i) * c;
    acc += rc < 1e-12 ? 1.0 - rc / 2.0 : (1.0 - std::exp(-rc)) / rc;
  }
  return acc / static_cast<double>(rates.size());
}

// The expected fraction is monotone decreasing in c; bisect for the target.
double calibrate_censor_horizon(const Eigen::VectorXd& rates, double target) {
  double lo = 1e-9, hi = 1e-9;
  while (expected_censoring(rates, hi) > target && hi < 1e12) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (expected_censoring(rates, mid) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

void GeneratorConfig::validate() const {
  auto fail = [](const std::string& msg) {
    throw std::invalid_argument("generator config: " + msg);
  };
  if (n_patients < 1) fail("n_patients must be >= 1");
  if (n_genes < 1) fail("n_genes must be >= 1");
  if (n_pathways < 2) fail("n_pathways must be >= 2");
  if (n_pathways > n_genes) fail("n_pathways exceeds n_genes");
  if (d_patch < 1) fail("d_patch must be >= 1");
  if (patches_min < 1 || patches_max < patches_min) {
    fail("patch count range is empty");
  }
  if (latent_shared < 1 || latent_gene < 1 || latent_image < 1) {
    fail("latent dims must be >= 1");
  }
  if (latent_shared + latent_gene > n_genes) {
    fail("latent dims exceed n_genes");
  }
  if (noise_sigma < 0.0) fail("noise_sigma must be >= 0");
  if (censoring_rate < 0.0 || censoring_rate >= 1.0) {
    fail("censoring_rate must lie in [0, 1)");
  }
  if (n_sites < 1) fail("n_sites must be >= 1");
  if (n_clusters < 1) fail("n_clusters must be >= 1");
}

GeneratedCohort generate_cohort(const GeneratorConfig& cfg,
                                std::uint64_t seed) {
  cfg.validate();
  const int n = cfg.n_patients;
  RngStream root(seed);

  GeneratedCohort out;
  Cohort& c = out.cohort;
  PlantedFactors& p = c.planted;

  // Structural weights.
  {
    RngStream mixing = root.child(kStreamMixing);
    p.gene_from_shared = random_matrix(
        mixing, cfg.n_genes, cfg.latent_shared,
        1.0 / std::sqrt(static_cast<double>(cfg.latent_shared)));
    p.gene_from_specific = random_matrix(
        mixing, cfg.n_genes, cfg.latent_gene,
        1.0 / std::sqrt(static_cast<double>(cfg.latent_gene)));
  }
  std::vector<Eigen::VectorXd> cluster_logit_dirs;  // composition drivers
  {
    RngStream clusters = root.child(kStreamClusters);
    p.cluster_base = random_matrix(clusters, cfg.n_clusters, cfg.d_patch, 2.0);
    const double s_shared =
        0.6 / std::sqrt(static_cast<double>(cfg.latent_shared));
    const double s_image =
        0.6 / std::sqrt(static_cast<double>(cfg.latent_image));
    for (int k = 0; k < cfg.n_clusters; ++k) {
      p.cluster_from_shared.push_back(
          random_matrix(clusters, cfg.d_patch, cfg.latent_shared, s_shared));
      p.cluster_from_image.push_back(
          random_matrix(clusters, cfg.d_patch, cfg.latent_image, s_image));
      cluster_logit_dirs.push_back(random_unit(
          clusters, cfg.latent_shared + cfg.latent_image));
    }
  }
  {
    RngStream risk = root.child(kStreamRisk);
    p.risk_dir_shared = random_unit(risk, cfg.latent_shared);
    p.risk_dir_gene = random_unit(risk, cfg.latent_gene);
    p.risk_dir_image = random_unit(risk, cfg.latent_image);
  }

  c.expressions.resize(n, cfg.n_genes);
  c.clinical.resize(n, 3);
  c.times.resize(n);
  c.events.resize(n);
  c.sites.resize(n);
  p.shared.resize(n, cfg.latent_shared);
  p.gene_specific.resize(n, cfg.latent_gene);
  p.image_specific.resize(n, cfg.latent_image);
  p.true_risk.resize(n);

  const RngStream patients = root.child(kStreamPatients);
  Eigen::VectorXd death_times(n);
  for (int i = 0; i < n; ++i) {
    RngStream s = patients.child(static_cast<std::uint64_t>(i));
    c.patient_ids.push_back(padded("P", i));
    c.sites[i] = i % cfg.n_sites;

    Eigen::VectorXd u(cfg.latent_shared), v(cfg.latent_gene),
        w(cfg.latent_image);
    for (auto* vec : {&u, &v, &w}) {
      for (Eigen::Index j = 0; j < vec->size(); ++j) (*vec)(j) = s.normal();
    }
    p.shared.row(i) = u.transpose();
    p.gene_specific.row(i) = v.transpose();
    p.image_specific.row(i) = w.transpose();

    Eigen::VectorXd genes =
        p.gene_from_shared * u + p.gene_from_specific * v;
    for (Eigen::Index j = 0; j < genes.size(); ++j) {
      genes(j) += s.normal(0.0, cfg.noise_sigma);
    }
    c.expressions.row(i) = genes.transpose();

    // Patch bag: composition logits and cluster means both read the latents.
    Eigen::VectorXd uw(cfg.latent_shared + cfg.latent_image);
    uw << u, w;
    Eigen::VectorXd logits(cfg.n_clusters);
    for (int k = 0; k < cfg.n_clusters; ++k) {
      logits(k) = cluster_logit_dirs[k].dot(uw);
    }
    const double lmax = logits.maxCoeff();
    Eigen::VectorXd probs = (logits.array() - lmax).exp();
    probs /= probs.sum();
    Eigen::MatrixXd means(cfg.n_clusters, cfg.d_patch);
    for (int k = 0; k < cfg.n_clusters; ++k) {
      means.row(k) = (p.cluster_base.row(k).transpose() +
                      p.cluster_from_shared[k] * u +
                      p.cluster_from_image[k] * w)
                         .transpose();
    }
    const int n_patches = s.uniform_int(cfg.patches_min, cfg.patches_max);
    Eigen::MatrixXd bag(n_patches, cfg.d_patch);
    for (int j = 0; j < n_patches; ++j) {
      const double r = s.uniform();
      int k = 0;
      double acc = probs(0);
      while (k + 1 < cfg.n_clusters && r > acc) acc += probs(++k);
      for (int m = 0; m < cfg.d_patch; ++m) {
        bag(j, m) = means(k, m) + s.normal(0.0, cfg.noise_sigma);
      }
    }
    c.patch_bags.push_back(std::move(bag));

    const double risk = cfg.risk_weight_shared * p.risk_dir_shared.dot(u) +
                        cfg.risk_weight_gene * p.risk_dir_gene.dot(v) +
                        cfg.risk_weight_image * p.risk_dir_image.dot(w);
    p.true_risk(i) = risk;
    death_times(i) = s.exponential(0.1 * std::exp(risk));

    // Clinical analogs: weakly risk-correlated age and grade, noise sex.
    c.clinical(i, 0) = 60.0 + 4.0 * risk + s.normal(0.0, 6.0);
    const double gscore = risk + s.normal(0.0, 1.0);
    c.clinical(i, 1) = gscore < -0.6 ? 1.0 : (gscore < 0.6 ? 2.0 : 3.0);
    c.clinical(i, 2) = s.uniform() < 0.5 ? 0.0 : 1.0;
  }

  if (cfg.censoring_rate <= 0.0) {
    c.times = death_times;
    c.events.setOnes();
  } else {
    const Eigen::VectorXd rates =
        (0.1 * p.true_risk.array().exp()).matrix();
    const double horizon =
        calibrate_censor_horizon(rates, cfg.censoring_rate);
    const RngStream censoring = root.child(kStreamCensoring);
    for (int i = 0; i < n; ++i) {
      RngStream s = censoring.child(static_cast<std::uint64_t>(i));
      double u = s.uniform();
      while (u <= 0.0) u = s.uniform();
      const double censor_time = horizon * u;
      if (death_times(i) <= censor_time) {
        c.times(i) = death_times(i);
        c.events(i) = 1;
      } else {
        c.times(i) = censor_time;
        c.events(i) = 0;
      }
    }
  }

  for (int j = 0; j < cfg.n_genes; ++j) {
    c.gene_symbols.push_back(padded("G", j));
  }

  // Contiguous pathway blocks; the remainder goes to the last pathway.
  const int block = cfg.n_genes / cfg.n_pathways;
  for (int k = 0; k < cfg.n_pathways; ++k) {
    Pathway pw;
    pw.name = padded("PW", k);
    pw.description = "synthetic";
    const int lo = k * block;
    const int hi = (k + 1 == cfg.n_pathways) ? cfg.n_genes : lo + block;
    for (int j = lo; j < hi; ++j) pw.gene_indices.push_back(j);
    out.membership.pathways.push_back(std::move(pw));
  }
  out.membership.n_genes = cfg.n_genes;
  return out;
}

std::vector<Fold> split_folds(const Cohort& cohort, unsigned k,
                              std::uint64_t seed) {
  const int n = cohort.n();
  if (k < 2) throw std::invalid_argument("split_folds: k must be >= 2");
  if (static_cast<int>(k) > n) {
    throw std::invalid_argument("split_folds: k = " + std::to_string(k) +
                                " exceeds cohort size " + std::to_string(n));
  }

  // Buckets by (site, event); shuffle each, then deal round-robin with a
  // rotating start so remainders spread across folds.
  std::vector<std::pair<long, int>> keyed;  // (site*2+event, id)
  for (int i = 0; i < n; ++i) {
    keyed.emplace_back(static_cast<long>(cohort.sites[i]) * 2 +
                           cohort.events(i),
                       i);
  }
  std::sort(keyed.begin(), keyed.end());

  RngStream rng(seed);
  std::vector<std::vector<int>> fold_members(k);
  std::size_t at = 0;
  unsigned next_start = 0;
  while (at < keyed.size()) {
    std::size_t end = at;
    while (end < keyed.size() && keyed[end].first == keyed[at].first) ++end;
    std::vector<int> bucket;
    for (std::size_t i = at; i < end; ++i) bucket.push_back(keyed[i].second);
    for (std::size_t i = bucket.size(); i > 1; --i) {
      std::swap(bucket[i - 1],
                bucket[static_cast<std::size_t>(
                    rng.uniform_int(0, static_cast<int>(i) - 1))]);
    }
    for (std::size_t i = 0; i < bucket.size(); ++i) {
      fold_members[(next_start + i) % k].push_back(bucket[i]);
    }
    next_start = (next_start + bucket.size()) % k;
    at = end;
  }

  std::vector<Fold> folds(k);
  for (unsigned f = 0; f < k; ++f) {
    std::sort(fold_members[f].begin(), fold_members[f].end());
    folds[f].test_ids = fold_members[f];
    for (unsigned g = 0; g < k; ++g) {
      if (g == f) continue;
      folds[f].train_ids.insert(folds[f].train_ids.end(),
                                fold_members[g].begin(),
                                fold_members[g].end());
    }
    std::sort(folds[f].train_ids.begin(), folds[f].train_ids.end());
  }
  return folds;
}

}  // namespace survfuse
