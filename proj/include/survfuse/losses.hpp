#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "survfuse/autodiff.hpp"

namespace survfuse {

/// dVar terms below this are treated as degenerate (constant input) and the
/// correlation is defined to be 0.
inline constexpr double kDcDegenerateTol = 1e-14;

// ---- plain (non-differentiable) estimators, used for evaluation ----

/// Empirical distance covariance of the rows of X (BxD1) and Y (BxD2):
/// double-centered pairwise-distance matrices A and B, then
/// sqrt(max(mean(A o B), 0)). Throws std::invalid_argument for B < 2.
double distance_covariance(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

/// dCov(X,Y) / sqrt(dCov(X,X) dCov(Y,Y)) in [0,1]; 0 when either variance
/// term is degenerate.
double distance_correlation(const Eigen::MatrixXd& x,
                            const Eigen::MatrixXd& y);

// ---- differentiable versions ----

/// Distance correlation as a tape node. Degenerate inputs produce a constant
/// 0 node (no gradient flow), matching the plain estimator's contract.
/// With squared_form, returns dCov^2/sqrt(dVar2_x dVar2_y) instead of the
/// square-root statistic.
ad::Var distance_correlation(ad::Tape& t, ad::Var x, ad::Var y,
                             bool squared_form = false);

/// Four stacked pooled representation blocks, each B x D_z.
struct ReprBatch {
  Eigen::MatrixXd z_gg, z_hh, z_hg, z_gh;
};

struct ReprBatchVars {
  ad::Var z_gg, z_hh, z_hg, z_gh;
};

/// DC(Z_gg, Z_hh) + DC([Z_gg||Z_hh], [Z_hg||Z_gh]) on the tape.
ad::Var disentanglement_loss(ad::Tape& t, const ReprBatchVars& batch,
                             bool squared_form = false);

/// Plain evaluation counterpart; also returns the two terms separately.
struct DcReport {
  double d1 = 0.0;
  double d2 = 0.0;
  double total = 0.0;  // d1 + d2
};
DcReport disentanglement_report(const ReprBatch& batch);

// ---- Cox partial log-likelihood ----

struct CoxBatch {
  Eigen::VectorXd risks;
  Eigen::VectorXd times;
  Eigen::VectorXi events;  // 1 = death observed, 0 = censored
};

/// Negative Cox partial log-likelihood with Breslow tie handling: the risk
/// set of patient i is every j with t_j >= t_i. Log-sum-exp uses running
/// max-subtraction. An all-censored batch yields 0 and sets *all_censored.
double cox_loss(const CoxBatch& batch, bool* all_censored = nullptr);

/// Gradient of cox_loss with respect to the risks.
Eigen::VectorXd cox_loss_gradient(const CoxBatch& batch);

/// Tape node version; risks is a Bx1 column on the tape.
ad::Var cox_loss(ad::Tape& t, ad::Var risks, const Eigen::VectorXd& times,
                 const Eigen::VectorXi& events, bool* all_censored = nullptr);

/// lambda_surv * surv + lambda_dis * dis.
ad::Var total_loss(ad::Tape& t, ad::Var surv, ad::Var dis, double lambda_surv,
                   double lambda_dis);
double total_loss(double surv, double dis, double lambda_surv,
                  double lambda_dis);

}  // namespace survfuse
