#include "survfuse/cox_baseline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "survfuse/losses.hpp"
#include "survfuse/metrics.hpp"

namespace survfuse {

namespace {

// Hessian of the negative Breslow partial log-likelihood at the given risks.
// Descending-time sweep keeps running weighted moments of the risk set.
Eigen::MatrixXd breslow_hessian(const Eigen::MatrixXd& x,
                                const Eigen::VectorXd& risks,
                                const Eigen::VectorXd& times,
                                const Eigen::VectorXi& events) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return times(a) < times(b);
  });

  const double rmax = risks.maxCoeff();
  double s0 = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(p, p);

  Eigen::Index hi = n;
  while (hi > 0) {
    Eigen::Index lo = hi;
    const double tau = times(order[hi - 1]);
    while (lo > 0 && times(order[lo - 1]) == tau) --lo;
    for (Eigen::Index k = lo; k < hi; ++k) {
      const Eigen::Index i = order[k];
      const double w = std::exp(risks(i) - rmax);
      s0 += w;
      s1 += w * x.row(i).transpose();
      s2 += w * x.row(i).transpose() * x.row(i);
    }
    for (Eigen::Index k = lo; k < hi; ++k) {
      const Eigen::Index i = order[k];
      if (events(i) == 1) {
        const Eigen::VectorXd xbar = s1 / s0;
        h += s2 / s0 - xbar * xbar.transpose();
      }
    }
    hi = lo;
  }
  return h;
}

}  // namespace

Eigen::VectorXd fit_linear_cox(const Eigen::MatrixXd& covariates,
                               const Eigen::VectorXd& times,
                               const Eigen::VectorXi& events, int max_iter,
                               double tol) {
  const Eigen::Index n = covariates.rows();
  const Eigen::Index p = covariates.cols();
  if (times.size() != n || events.size() != n) {
    throw std::invalid_argument("fit_linear_cox: input lengths differ");
  }
  if (!covariates.allFinite()) {
    throw std::invalid_argument("fit_linear_cox: non-finite covariates");
  }
  if ((events.array() == 1).count() == 0) {
    throw std::invalid_argument("fit_linear_cox: no events in training data");
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  for (int iter = 0; iter < max_iter; ++iter) {
    const Eigen::VectorXd risks = covariates * beta;
    CoxBatch batch{risks, times, events};
    const Eigen::VectorXd grad =
        covariates.transpose() * cox_loss_gradient(batch);
    if (grad.lpNorm<Eigen::Infinity>() < tol) break;
    const Eigen::MatrixXd hess =
        breslow_hessian(covariates, risks, times, events);

    Eigen::VectorXd step;
    bool ok = false;
    {
      Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
      if (ldlt.info() == Eigen::Success) {
        step = ldlt.solve(grad);
        ok = step.allFinite() &&
             (hess * step - grad).norm() <= 1e-6 * (1.0 + grad.norm());
      }
    }
    if (!ok) {
      Eigen::MatrixXd ridged = hess;
      ridged.diagonal().array() += 1e-6;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(ridged);
      if (ldlt.info() != Eigen::Success) {
        throw std::runtime_error(
            "fit_linear_cox: Hessian singular even after ridge");
      }
      step = ldlt.solve(grad);
      if (!step.allFinite()) {
        throw std::runtime_error(
            "fit_linear_cox: Hessian singular even after ridge");
      }
    }
    beta -= step;
  }
  return beta;
}

double clinical_cox_baseline(const Eigen::MatrixXd& x_train,
                             const Eigen::VectorXd& t_train,
                             const Eigen::VectorXi& e_train,
                             const Eigen::MatrixXd& x_test,
                             const Eigen::VectorXd& t_test,
                             const Eigen::VectorXi& e_test) {
  const Eigen::VectorXd beta = fit_linear_cox(x_train, t_train, e_train);
  return concordance_index(x_test * beta, t_test, e_test);
}

}  // namespace survfuse
