#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "oracles.hpp"
#include "survfuse/cox_baseline.hpp"
#include "survfuse/metrics.hpp"
#include "survfuse/optimizer.hpp"
#include "survfuse/rng.hpp"

using namespace survfuse;

namespace {

struct Surv {
  Eigen::VectorXd risks, times;
  Eigen::VectorXi events;
};

Surv random_surv(RngStream& rng, int n, bool allow_risk_ties = true) {
  Surv s;
  s.risks.resize(n);
  s.times.resize(n);
  s.events.resize(n);
  for (int i = 0; i < n; ++i) {
    s.risks(i) = allow_risk_ties && rng.uniform() < 0.15
                     ? std::round(rng.normal() * 2.0) / 2.0
                     : rng.normal();
    s.times(i) = rng.uniform(0.05, 8.0);
    if (rng.uniform() < 0.15 && i > 0) s.times(i) = s.times(i - 1);
    s.events(i) = rng.uniform() < 0.65 ? 1 : 0;
  }
  // Guarantee a permissible pair.
  s.times(0) = 0.01;
  s.events(0) = 1;
  return s;
}

}  // namespace

TEST_CASE("c-index: anti-ordered risks give 1, all-equal risks give 0.5") {
  const int n = 12;
  Eigen::VectorXd times(n), risks(n);
  Eigen::VectorXi events = Eigen::VectorXi::Ones(n);
  for (int i = 0; i < n; ++i) {
    times(i) = i + 1.0;
    risks(i) = -static_cast<double>(i);  // earlier death = higher risk
  }
  CHECK(concordance_index(risks, times, events) == 1.0);
  CHECK(concordance_index(Eigen::VectorXd::Zero(n), times, events) == 0.5);
}

TEST_CASE("c-index: no permissible pairs is an error") {
  Eigen::VectorXd risks(2), times(2);
  risks << 1.0, 2.0;
  times << 3.0, 3.0;  // tied times, no strict ordering
  Eigen::VectorXi events = Eigen::VectorXi::Ones(2);
  CHECK_THROWS_AS(concordance_index(risks, times, events),
                  std::invalid_argument);
}

TEST_CASE("c-index equals brute-force enumeration on 100 censored instances") {
  RngStream rng(17);
  for (int rep = 0; rep < 100; ++rep) {
    const Surv s = random_surv(rng, rng.uniform_int(3, 200));
    const double fast = concordance_index(s.risks, s.times, s.events);
    const double brute = oracles::cindex_brute(s.risks, s.times, s.events);
    CHECK(fast == brute);
  }
}

TEST_CASE("c-index invariant under strictly increasing risk transforms") {
  RngStream rng(19);
  for (int rep = 0; rep < 20; ++rep) {
    const Surv s = random_surv(rng, 60, /*allow_risk_ties=*/false);
    const double base = concordance_index(s.risks, s.times, s.events);
    const Eigen::VectorXd affine = 2.0 * s.risks.array() + 1.0;
    const Eigen::VectorXd tanhed = s.risks.array().tanh();
    CHECK(concordance_index(affine, s.times, s.events) == base);
    CHECK(concordance_index(tanhed, s.times, s.events) == base);
  }
}

TEST_CASE("c-index complement identity without risk ties") {
  RngStream rng(23);
  for (int rep = 0; rep < 20; ++rep) {
    const Surv s = random_surv(rng, 50, /*allow_risk_ties=*/false);
    const double plus = concordance_index(s.risks, s.times, s.events);
    const double minus = concordance_index(-s.risks, s.times, s.events);
    CHECK(plus + minus == 1.0);
  }
}

TEST_CASE("cosine schedule endpoints") {
  CHECK(cosine_lr(1e-4, 0, 120) == 1e-4);
  CHECK(cosine_lr(1e-4, 119, 120) <= 1e-3 * 1e-4);
  CHECK(cosine_lr(5.0, 0, 1) == 5.0);
  CHECK_THROWS_AS(cosine_lr(1.0, 5, 5), std::invalid_argument);
}

TEST_CASE("AdamW with zero weight decay matches plain Adam bit-for-bit") {
  RngStream rng(29);
  std::vector<Eigen::MatrixXd> p1{oracles::random_matrix(rng, 3, 4)};
  std::vector<Eigen::MatrixXd> p2 = p1;
  AdamConfig decoupled;
  decoupled.weight_decay = 0.0;
  decoupled.decoupled = true;
  AdamConfig l2 = decoupled;
  l2.decoupled = false;
  AdamW opt1(decoupled), opt2(l2);
  RngStream grads(31);
  for (int step = 0; step < 10; ++step) {
    const std::vector<Eigen::MatrixXd> g{oracles::random_matrix(grads, 3, 4)};
    opt1.step(p1, g, 1e-3);
    opt2.step(p2, g, 1e-3);
    CHECK((p1[0] - p2[0]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("AdamW decoupled decay differs from L2 decay when wd > 0") {
  RngStream rng(37);
  std::vector<Eigen::MatrixXd> p1{oracles::random_matrix(rng, 2, 2)};
  std::vector<Eigen::MatrixXd> p2 = p1;
  AdamConfig a;
  a.weight_decay = 0.1;
  a.decoupled = true;
  AdamConfig b = a;
  b.decoupled = false;
  AdamW opt1(a), opt2(b);
  RngStream grads(41);
  for (int step = 0; step < 5; ++step) {
    const std::vector<Eigen::MatrixXd> g{oracles::random_matrix(grads, 2, 2)};
    opt1.step(p1, g, 1e-2);
    opt2.step(p2, g, 1e-2);
  }
  CHECK((p1[0] - p2[0]).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("linear cox fit: planted risk covariate recovers discrimination") {
  RngStream rng(43);
  const int n = 400;
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXd times(n);
  Eigen::VectorXi events(n);
  for (int i = 0; i < n; ++i) {
    const double risk = rng.normal();
    x(i, 0) = risk;
    times(i) = rng.exponential(0.2 * std::exp(risk));
    const double censor = rng.uniform(0.0, 25.0);
    events(i) = times(i) <= censor ? 1 : 0;
    if (!events(i)) times(i) = censor;
  }
  const int half = n / 2;
  const Eigen::MatrixXd x_tr = x.topRows(half), x_te = x.bottomRows(half);
  const Eigen::VectorXd t_tr = times.head(half), t_te = times.tail(half);
  const Eigen::VectorXi e_tr = events.head(half), e_te = events.tail(half);

  const Eigen::VectorXd beta = fit_linear_cox(x_tr, t_tr, e_tr);
  CHECK(beta(0) > 0.0);  // sign matches the planted hazard direction

  const double model_c = clinical_cox_baseline(x_tr, t_tr, e_tr, x_te, t_te,
                                               e_te);
  const double true_c = concordance_index(x_te.col(0), t_te, e_te);
  CHECK(std::abs(model_c - true_c) <= 0.02);
}

TEST_CASE("linear cox fit on pure noise stays near 0.5") {
  double acc = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    RngStream rng(seed * 101);
    const int n = 300;
    Eigen::MatrixXd x(n, 1);
    Eigen::VectorXd times(n);
    Eigen::VectorXi events(n);
    for (int i = 0; i < n; ++i) {
      x(i, 0) = rng.normal();
      times(i) = rng.exponential(0.2);
      events(i) = rng.uniform() < 0.7 ? 1 : 0;
    }
    const int half = n / 2;
    acc += clinical_cox_baseline(x.topRows(half), times.head(half),
                                 events.head(half), x.bottomRows(half),
                                 times.tail(half), events.tail(half));
  }
  const double mean_c = acc / 20.0;
  CHECK(mean_c > 0.45);
  CHECK(mean_c < 0.55);
}
