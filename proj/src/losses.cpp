#include "survfuse/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace survfuse {

namespace {

Eigen::MatrixXd pairwise_dist(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = (x.row(i) - x.row(j)).norm();
      d(i, j) = v;
      d(j, i) = v;
    }
  return d;
}

Eigen::MatrixXd centered(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd out = m;
  out.colwise() -= m.rowwise().mean();
  out.rowwise() -= m.colwise().mean().eval();
  out.array() += m.mean();
  return out;
}

void require_batch(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  if (x.rows() < 2) {
    throw std::invalid_argument(
        "distance_covariance: need at least 2 samples, got " +
        std::to_string(x.rows()));
  }
  if (x.rows() != y.rows()) {
    throw std::invalid_argument(
        "distance_covariance: sample counts differ: " +
        std::to_string(x.rows()) + " vs " + std::to_string(y.rows()));
  }
}

}  // namespace

double distance_covariance(const Eigen::MatrixXd& x,
                           const Eigen::MatrixXd& y) {
  require_batch(x, y);
  const Eigen::MatrixXd a = centered(pairwise_dist(x));
  const Eigen::MatrixXd b = centered(pairwise_dist(y));
  const double dcov2 = a.cwiseProduct(b).mean();
  return std::sqrt(std::max(dcov2, 0.0));
}

double distance_correlation(const Eigen::MatrixXd& x,
                            const Eigen::MatrixXd& y) {
  require_batch(x, y);
  const Eigen::MatrixXd a = centered(pairwise_dist(x));
  const Eigen::MatrixXd b = centered(pairwise_dist(y));
  const double dvar_x = std::sqrt(std::max(a.cwiseProduct(a).mean(), 0.0));
  const double dvar_y = std::sqrt(std::max(b.cwiseProduct(b).mean(), 0.0));
  if (dvar_x < kDcDegenerateTol || dvar_y < kDcDegenerateTol) return 0.0;
  const double dcov = std::sqrt(std::max(a.cwiseProduct(b).mean(), 0.0));
  return dcov / std::sqrt(dvar_x * dvar_y);
}

ad::Var distance_correlation(ad::Tape& t, ad::Var x, ad::Var y,
                             bool squared_form) {
  const Eigen::Index n = t.value(x).rows();
  if (n < 2) {
    throw std::invalid_argument(
        "distance_correlation: need at least 2 samples, got " +
        std::to_string(n));
  }
  if (t.value(y).rows() != n) {
    throw std::invalid_argument("distance_correlation: sample counts differ");
  }
  const double inv_n2 = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
  ad::Var a = ad::double_center(t, ad::pairwise_distances(t, x));
  ad::Var b = ad::double_center(t, ad::pairwise_distances(t, y));
  ad::Var s_xy = ad::scale(t, ad::sum(t, ad::mul(t, a, b)), inv_n2);
  ad::Var s_xx = ad::scale(t, ad::sum(t, ad::mul(t, a, a)), inv_n2);
  ad::Var s_yy = ad::scale(t, ad::sum(t, ad::mul(t, b, b)), inv_n2);
  ad::Var dvar_x = ad::sqrt_clamped(t, s_xx);
  ad::Var dvar_y = ad::sqrt_clamped(t, s_yy);
  if (t.value(dvar_x)(0, 0) < kDcDegenerateTol ||
      t.value(dvar_y)(0, 0) < kDcDegenerateTol) {
    return t.constant(0.0);
  }
  ad::Var dcov = ad::sqrt_clamped(t, s_xy);
  ad::Var dc = ad::div(t, dcov, ad::sqrt_clamped(t, ad::mul(t, dvar_x, dvar_y)));
  return squared_form ? ad::mul(t, dc, dc) : dc;
}

ad::Var disentanglement_loss(ad::Tape& t, const ReprBatchVars& batch,
                             bool squared_form) {
  ad::Var d1 = distance_correlation(t, batch.z_gg, batch.z_hh, squared_form);
  const std::array<ad::Var, 2> spec{batch.z_gg, batch.z_hh};
  const std::array<ad::Var, 2> shared{batch.z_hg, batch.z_gh};
  ad::Var d2 = distance_correlation(t, ad::hstack(t, spec),
                                    ad::hstack(t, shared), squared_form);
  return ad::add(t, d1, d2);
}

DcReport disentanglement_report(const ReprBatch& batch) {
  DcReport r;
  r.d1 = distance_correlation(batch.z_gg, batch.z_hh);
  Eigen::MatrixXd spec(batch.z_gg.rows(),
                       batch.z_gg.cols() + batch.z_hh.cols());
  spec << batch.z_gg, batch.z_hh;
  Eigen::MatrixXd shared(batch.z_hg.rows(),
                         batch.z_hg.cols() + batch.z_gh.cols());
  shared << batch.z_hg, batch.z_gh;
  r.d2 = distance_correlation(spec, shared);
  r.total = r.d1 + r.d2;
  return r;
}

// ---- Cox partial log-likelihood ----

namespace {

struct RunningLse {
  double m = 0.0;
  double s = 0.0;
  bool empty = true;

  void add(double v) {
    if (empty) {
      m = v;
      s = 1.0;
      empty = false;
    } else if (v <= m) {
      s += std::exp(v - m);
    } else {
      s = s * std::exp(m - v) + 1.0;
      m = v;
    }
  }
  double value() const { return m + std::log(s); }
};

struct CoxForward {
  double loss = 0.0;
  Eigen::VectorXd grad;
  bool all_censored = false;
};

CoxForward cox_forward(const Eigen::VectorXd& risks,
                       const Eigen::VectorXd& times,
                       const Eigen::VectorXi& events, bool want_grad) {
  const Eigen::Index n = risks.size();
  if (times.size() != n || events.size() != n) {
    throw std::invalid_argument("cox_loss: risks/times/events lengths differ");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(times(i) > 0.0)) {
      throw std::invalid_argument("cox_loss: times must be positive");
    }
    if (events(i) != 0 && events(i) != 1) {
      throw std::invalid_argument("cox_loss: events must be 0 or 1");
    }
  }

  CoxForward out;
  out.all_censored = (events.array() == 0).all();
  if (want_grad) out.grad = Eigen::VectorXd::Zero(n);
  if (out.all_censored) return out;

  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return times(a) < times(b);
  });

  // Descending sweep over tied-time groups: the whole group joins the risk
  // set before any of its event terms are emitted (Breslow).
  RunningLse lse;
  double total = 0.0;
  std::vector<double> log_risk_set(n, 0.0);  // per event index
  Eigen::Index hi = n;
  while (hi > 0) {
    Eigen::Index lo = hi;
    const double tau = times(order[hi - 1]);
    while (lo > 0 && times(order[lo - 1]) == tau) --lo;
    for (Eigen::Index k = lo; k < hi; ++k) lse.add(risks(order[k]));
    const double log_s = lse.value();
    for (Eigen::Index k = lo; k < hi; ++k) {
      const Eigen::Index i = order[k];
      if (events(i) == 1) {
        total += risks(i) - log_s;
        log_risk_set[i] = log_s;
      }
    }
    hi = lo;
  }
  out.loss = -total;

  if (want_grad) {
    // Ascending sweep: cum accumulates exp(-log S_i) over events with
    // t_i <= t_k, in log space.
    RunningLse cum;
    Eigen::Index lo = 0;
    while (lo < n) {
      Eigen::Index g = lo;
      const double tau = times(order[lo]);
      while (g < n && times(order[g]) == tau) ++g;
      for (Eigen::Index k = lo; k < g; ++k) {
        const Eigen::Index i = order[k];
        if (events(i) == 1) cum.add(-log_risk_set[i]);
      }
      if (!cum.empty) {
        const double cum_log = cum.value();
        for (Eigen::Index k = lo; k < g; ++k) {
          const Eigen::Index i = order[k];
          out.grad(i) = -static_cast<double>(events(i)) +
                        std::exp(risks(i) + cum_log);
        }
      }
      lo = g;
    }
  }
  return out;
}

}  // namespace

double cox_loss(const CoxBatch& batch, bool* all_censored) {
  const CoxForward f =
      cox_forward(batch.risks, batch.times, batch.events, false);
  if (all_censored) *all_censored = f.all_censored;
  return f.loss;
}

Eigen::VectorXd cox_loss_gradient(const CoxBatch& batch) {
  return cox_forward(batch.risks, batch.times, batch.events, true).grad;
}

ad::Var cox_loss(ad::Tape& t, ad::Var risks, const Eigen::VectorXd& times,
                 const Eigen::VectorXi& events, bool* all_censored) {
  const Eigen::MatrixXd& r = t.value(risks);
  if (r.cols() != 1) {
    throw std::invalid_argument("cox_loss: risks must be a column vector");
  }
  CoxForward f = cox_forward(r.col(0), times, events, true);
  if (all_censored) *all_censored = f.all_censored;
  Eigen::MatrixXd value(1, 1);
  value(0, 0) = f.loss;
  Eigen::VectorXd grad = std::move(f.grad);
  return t.emit("cox_loss", {risks.id}, std::move(value),
                [grad](const Eigen::MatrixXd& g,
                       std::span<Eigen::MatrixXd*> p) {
                  if (p[0]) p[0]->col(0) += g(0, 0) * grad;
                });
}

ad::Var total_loss(ad::Tape& t, ad::Var surv, ad::Var dis, double lambda_surv,
                   double lambda_dis) {
  if (lambda_surv < 0.0 || lambda_dis < 0.0) {
    throw std::invalid_argument("total_loss: lambdas must be non-negative");
  }
  return ad::add(t, ad::scale(t, surv, lambda_surv),
                 ad::scale(t, dis, lambda_dis));
}

double total_loss(double surv, double dis, double lambda_surv,
                  double lambda_dis) {
  if (lambda_surv < 0.0 || lambda_dis < 0.0) {
    throw std::invalid_argument("total_loss: lambdas must be non-negative");
  }
  return lambda_surv * surv + lambda_dis * dis;
}

}  // namespace survfuse
