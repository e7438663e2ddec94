#include "survfuse/explain.hpp"

#include <cmath>
#include <stdexcept>

namespace survfuse {

namespace {

// Head evaluation with the coalition's blocks taken from repr and the rest
// from the baseline.
double head_value(const Eigen::VectorXd& w, double b, int d_attn,
                  const PooledBlocks& repr, const PooledBlocks& baseline,
                  unsigned coalition) {
  double out = b;
  for (int k = 0; k < 4; ++k) {
    const auto& z = (coalition & (1u << k)) ? repr[static_cast<std::size_t>(k)]
                                            : baseline[static_cast<std::size_t>(k)];
    out += w.segment(k * d_attn, d_attn).dot(z.transpose());
  }
  return out;
}

constexpr double kFact[5] = {1.0, 1.0, 2.0, 6.0, 24.0};

}  // namespace

BlockAttribution shapley_blocks(const Model& model, const PooledBlocks& repr,
                                const PooledBlocks& baseline) {
  const int d_attn = model.config().d_attn;
  for (int k = 0; k < 4; ++k) {
    if (repr[static_cast<std::size_t>(k)].size() != d_attn ||
        baseline[static_cast<std::size_t>(k)].size() != d_attn) {
      throw std::invalid_argument("shapley_blocks: block width mismatch");
    }
  }
  const Eigen::VectorXd w = model.value("head.w").col(0);
  const double b = model.value("head.b")(0, 0);

  double value[16];
  for (unsigned s = 0; s < 16; ++s) {
    value[s] = head_value(w, b, d_attn, repr, baseline, s);
  }

  BlockAttribution out;
  out.baseline_risk = value[0];
  out.actual_risk = value[15];
  for (int k = 0; k < 4; ++k) {
    double phi = 0.0;
    for (unsigned s = 0; s < 16; ++s) {
      if (s & (1u << k)) continue;
      const int size = __builtin_popcount(s);
      const double weight = kFact[size] * kFact[3 - size] / kFact[4];
      phi += weight * (value[s | (1u << k)] - value[s]);
    }
    out.phi[static_cast<std::size_t>(k)] = phi;
  }
  return out;
}

std::array<double, 4> shapley_linear_closed_form(const Model& model,
                                                 const PooledBlocks& repr,
                                                 const PooledBlocks& baseline) {
  const int d_attn = model.config().d_attn;
  const Eigen::VectorXd w = model.value("head.w").col(0);
  std::array<double, 4> phi{};
  for (int k = 0; k < 4; ++k) {
    phi[static_cast<std::size_t>(k)] =
        w.segment(k * d_attn, d_attn)
            .dot((repr[static_cast<std::size_t>(k)] -
                  baseline[static_cast<std::size_t>(k)])
                     .transpose());
  }
  return phi;
}

ExplainFoldShares normalized_shares(
    const std::vector<BlockAttribution>& attributions) {
  ExplainFoldShares out;
  std::array<double, 4> acc{};
  for (const auto& a : attributions) {
    double total = 0.0;
    for (double phi : a.phi) total += std::abs(phi);
    if (total == 0.0) {
      ++out.patients_excluded;
      continue;
    }
    for (int k = 0; k < 4; ++k) {
      acc[static_cast<std::size_t>(k)] +=
          std::abs(a.phi[static_cast<std::size_t>(k)]) / total;
    }
    ++out.patients_used;
  }
  if (out.patients_used > 0) {
    for (int k = 0; k < 4; ++k) {
      out.block_share[static_cast<std::size_t>(k)] =
          acc[static_cast<std::size_t>(k)] / out.patients_used;
    }
  }
  out.specific = out.block_share[kGG] + out.block_share[kHH];
  out.shared = out.block_share[kHG] + out.block_share[kGH];
  return out;
}

ExplainReport aggregate_shares(const std::vector<ExplainFoldShares>& folds) {
  ExplainReport r;
  r.folds = folds;
  if (folds.empty()) return r;
  const double n = static_cast<double>(folds.size());
  auto mean_std = [&](auto getter, double& mean, double& stddev) {
    double m = 0.0;
    for (const auto& f : folds) m += getter(f);
    m /= n;
    double s = 0.0;
    for (const auto& f : folds) s += (getter(f) - m) * (getter(f) - m);
    mean = m;
    stddev = folds.size() > 1 ? std::sqrt(s / (n - 1.0)) : 0.0;
  };
  for (int k = 0; k < 4; ++k) {
    mean_std(
        [k](const ExplainFoldShares& f) {
          return f.block_share[static_cast<std::size_t>(k)];
        },
        r.block_mean[static_cast<std::size_t>(k)],
        r.block_std[static_cast<std::size_t>(k)]);
  }
  mean_std([](const ExplainFoldShares& f) { return f.specific; },
           r.specific_mean, r.specific_std);
  mean_std([](const ExplainFoldShares& f) { return f.shared; }, r.shared_mean,
           r.shared_std);
  for (const auto& f : folds) r.total_excluded += f.patients_excluded;
  return r;
}

}  // namespace survfuse
