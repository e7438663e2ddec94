// Test-only reference implementations, kept deliberately naive and
// independent of the library code paths they check.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>

#include "survfuse/rng.hpp"

namespace oracles {

inline Eigen::MatrixXd random_matrix(survfuse::RngStream& rng,
                                     Eigen::Index rows, Eigen::Index cols,
                                     double scale = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  return m;
}

// Textbook four-term distance covariance estimator, double loops throughout:
// dCov^2 = S1 + S2 - 2 S3 with
//   S1 = (1/B^2) sum a_jk b_jk
//   S2 = (1/B^2 sum a)(1/B^2 sum b)
//   S3 = (1/B^3) sum_j (sum_k a_jk)(sum_k b_jk)
inline double dcov_four_term(const Eigen::MatrixXd& x,
                             const Eigen::MatrixXd& y) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd a(n, n), b(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index k = 0; k < n; ++k) {
      a(j, k) = (x.row(j) - x.row(k)).norm();
      b(j, k) = (y.row(j) - y.row(k)).norm();
    }
  }
  double s1 = 0.0, sa = 0.0, sb = 0.0, s3 = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    double row_a = 0.0, row_b = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      s1 += a(j, k) * b(j, k);
      row_a += a(j, k);
      row_b += b(j, k);
    }
    sa += row_a;
    sb += row_b;
    s3 += row_a * row_b;
  }
  const double nn = static_cast<double>(n);
  const double dcov2 = s1 / (nn * nn) + (sa / (nn * nn)) * (sb / (nn * nn)) -
                       2.0 * s3 / (nn * nn * nn);
  return std::sqrt(std::max(dcov2, 0.0));
}

// Direct-summation Cox partial likelihood (no sorting, no max subtraction).
inline double cox_naive(const Eigen::VectorXd& risks,
                        const Eigen::VectorXd& times,
                        const Eigen::VectorXi& events) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < risks.size(); ++i) {
    if (events(i) != 1) continue;
    double denom = 0.0;
    for (Eigen::Index j = 0; j < risks.size(); ++j) {
      if (times(j) >= times(i)) denom += std::exp(risks(j));
    }
    total += risks(i) - std::log(denom);
  }
  return -total;
}

// All ordered pairs, exact half-unit counting.
inline double cindex_brute(const Eigen::VectorXd& risks,
                           const Eigen::VectorXd& times,
                           const Eigen::VectorXi& events) {
  std::uint64_t permissible = 0, mass2 = 0;
  for (Eigen::Index i = 0; i < risks.size(); ++i) {
    for (Eigen::Index j = 0; j < risks.size(); ++j) {
      if (i == j) continue;
      if (!(times(i) < times(j) && events(i) == 1)) continue;
      ++permissible;
      if (risks(i) > risks(j)) {
        mass2 += 2;
      } else if (risks(i) == risks(j)) {
        mass2 += 1;
      }
    }
  }
  return static_cast<double>(mass2) / (2.0 * static_cast<double>(permissible));
}

// Unoptimized per-row scaled dot-product attention.
inline Eigen::MatrixXd attention_reference(const Eigen::MatrixXd& q_in,
                                           const Eigen::MatrixXd& kv_in,
                                           const Eigen::MatrixXd& wq,
                                           const Eigen::MatrixXd& wk,
                                           const Eigen::MatrixXd& wv,
                                           double scale_dim) {
  const Eigen::MatrixXd q = q_in * wq;
  const Eigen::MatrixXd k = kv_in * wk;
  const Eigen::MatrixXd v = kv_in * wv;
  Eigen::MatrixXd out(q.rows(), v.cols());
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    Eigen::VectorXd scores(k.rows());
    for (Eigen::Index j = 0; j < k.rows(); ++j) {
      scores(j) = q.row(i).dot(k.row(j)) / std::sqrt(scale_dim);
    }
    const double m = scores.maxCoeff();
    Eigen::VectorXd w = (scores.array() - m).exp();
    w /= w.sum();
    out.row(i).setZero();
    for (Eigen::Index j = 0; j < k.rows(); ++j) {
      out.row(i) += w(j) * v.row(j);
    }
  }
  return out;
}

}  // namespace oracles
