#pragma once

#include <Eigen/Dense>

namespace survfuse {

/// Multivariate linear Cox regression fitted by Newton iterations on the
/// Breslow partial likelihood. The gradient with respect to the coefficients
/// comes from the cox_loss backward pass through risks = X beta; the Hessian
/// is assembled analytically. A singular Hessian triggers one ridge-stabilized
/// retry (1e-6) before failing.
Eigen::VectorXd fit_linear_cox(const Eigen::MatrixXd& covariates,
                               const Eigen::VectorXd& times,
                               const Eigen::VectorXi& events,
                               int max_iter = 50, double tol = 1e-9);

/// Fits on the training rows and returns the test-set concordance index of
/// the fitted linear risk.
double clinical_cox_baseline(const Eigen::MatrixXd& x_train,
                             const Eigen::VectorXd& t_train,
                             const Eigen::VectorXi& e_train,
                             const Eigen::MatrixXd& x_test,
                             const Eigen::VectorXd& t_test,
                             const Eigen::VectorXi& e_test);

}  // namespace survfuse
