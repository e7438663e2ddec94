#include "survfuse/autodiff.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace survfuse::ad {

namespace {

std::string shape_str(const Eigen::MatrixXd& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

void check_finite(const Eigen::MatrixXd& m, const char* kind) {
  if (!m.allFinite()) {
    throw std::runtime_error(std::string("non-finite values produced by op '") +
                             kind + "'");
  }
}

void require_same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                        const char* kind) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(kind) + ": shape mismatch " +
                                shape_str(a) + " vs " + shape_str(b));
  }
}

}  // namespace

Var Tape::emit(const char* kind, std::vector<int> parents,
               Eigen::MatrixXd value,
               std::function<void(const Eigen::MatrixXd&,
                                  std::span<Eigen::MatrixXd*>)>
                   backward_fn) {
  if (checked_) check_finite(value, kind);
  Node n;
  n.kind = kind;
  n.parents = std::move(parents);
  n.value = std::move(value);
  for (int p : n.parents) {
    if (nodes_[p].requires_grad) {
      n.requires_grad = true;
      break;
    }
  }
  n.backward_fn = n.requires_grad ? std::move(backward_fn) : nullptr;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(const Eigen::MatrixXd& value) {
  if (checked_) check_finite(value, "leaf");
  Node n;
  n.kind = "leaf";
  n.value = value;
  n.grad = Eigen::MatrixXd::Zero(value.rows(), value.cols());
  n.requires_grad = true;
  n.is_leaf = true;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(const Eigen::MatrixXd& value) {
  if (checked_) check_finite(value, "constant");
  Node n;
  n.kind = "constant";
  n.value = value;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(double scalar) {
  Eigen::MatrixXd m(1, 1);
  m(0, 0) = scalar;
  return constant(m);
}

const Eigen::MatrixXd& Tape::grad(Var leaf) const {
  const Node& n = nodes_[leaf.id];
  if (!n.is_leaf) {
    throw std::invalid_argument("grad() is only available for leaf nodes");
  }
  return n.grad;
}

void Tape::backward(Var loss) {
  const Node& top = nodes_[loss.id];
  if (top.value.rows() != 1 || top.value.cols() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                shape_str(top.value));
  }
  // Scratch adjoints; only leaves receive persistent accumulation.
  std::vector<Eigen::MatrixXd> adj(loss.id + 1);
  std::vector<bool> live(loss.id + 1, false);
  adj[loss.id] = Eigen::MatrixXd::Ones(1, 1);
  live[loss.id] = true;

  std::vector<Eigen::MatrixXd*> parent_slots;
  for (int i = loss.id; i >= 0; --i) {
    if (!live[i]) continue;
    Node& n = nodes_[i];
    if (!n.requires_grad) continue;
    if (n.is_leaf) {
      n.grad += adj[i];
      continue;
    }
    if (!n.backward_fn) continue;
    parent_slots.clear();
    for (int p : n.parents) {
      if (nodes_[p].requires_grad) {
        if (!live[p]) {
          adj[p] = Eigen::MatrixXd::Zero(nodes_[p].value.rows(),
                                         nodes_[p].value.cols());
          live[p] = true;
        }
        parent_slots.push_back(&adj[p]);
      } else {
        parent_slots.push_back(nullptr);
      }
    }
    n.backward_fn(adj[i], parent_slots);
    adj[i].resize(0, 0);  // release as we go
  }
}

void Tape::zero_grad() {
  for (Node& n : nodes_) {
    if (n.is_leaf) n.grad.setZero();
  }
}

// ---- elementwise and structural ops ----

Var add(Tape& t, Var a, Var b) {
  const auto& A = t.value(a);
  const auto& B = t.value(b);
  require_same_shape(A, B, "add");
  return t.emit("add", {a.id, b.id}, A + B,
                [](const Eigen::MatrixXd& g, std::span<Eigen::MatrixXd*> p) {
                  if (p[0]) *p[0] += g;
                  if (p[1]) *p[1] += g;
                });
}

Var sub(Tape& t, Var a, Var b) {
  const auto& A = t.value(a);
  const auto& B = t.value(b);
  require_same_shape(A, B, "sub");
  return t.emit("sub", {a.id, b.id}, A - B,
                [](const Eigen::MatrixXd& g, std::span<Eigen::MatrixXd*> p) {
                  if (p[0]) *p[0] += g;
                  if (p[1]) *p[1] -= g;
                });
}

Var mul(Tape& t, Var a, Var b) {
  const auto& A = t.value(a);
  const auto& B = t.value(b);
  require_same_shape(A, B, "mul");
  Eigen::MatrixXd av = A, bv = B;
  return t.emit("mul", {a.id, b.id}, A.cwiseProduct(B),
                [av, bv](const Eigen::MatrixXd& g,
                         std::span<Eigen::MatrixXd*> p) {
                  if (p[0]) *p[0] += g.cwiseProduct(bv);
                  if (p[1]) *p[1] += g.cwiseProduct(av);
                });
}

Var div(Tape& t, Var a, Var b) {
  const auto& A = t.value(a);
  const auto& B = t.value(b);
  require_same_shape(A, B, "div");
  Eigen::MatrixXd av = A, bv = B;
  return t.emit("div", {a.id, b.id}, A.cwiseQuotient(B),
                [av, bv](const Eigen::MatrixXd& g,
                         std::span<Eigen::MatrixXd*> p) {
                  if (p[0]) *p[0] += g.cwiseQuotient(bv);
                  if (p[1])
                    *p[1] -= g.cwiseProduct(av).cwiseQuotient(
                        bv.cwiseProduct(bv));
                });
}

Var scale(Tape& t, Var a, double c) {
  return t.emit("scale", {a.id}, t.value(a) * c,
                [c](const Eigen::MatrixXd& g, std::span<Eigen::MatrixXd*> p) {
                  if (p[0]) *p[0] += g * c;
                });
}

Var selu(Tape& t, Var a) {
  const auto& A = t.value(a);
  Eigen::MatrixXd out(A.rows(), A.cols());
  Eigen::MatrixXd dydx(A.rows(), A.cols());
  for (Eigen::Index j = 0; j < A.cols(); ++j) {
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      const double x = A(i, j);
      if (x > 0.0) {
        out(i, j) = kSeluLambda * x;
        dydx(i, j) = kSeluLambda;
      } else {
        const double e = std::exp(x);
        out(i, j) = kSeluLambda * kSeluAlpha * (e - 1.0);
        dydx(i, j) = kSeluLambda * kSeluAlpha * e;
      }
    }
  }
  return t.emit("selu", {a.id}, std::move(out),
                [dydx](const Eigen::MatrixXd& g,
                       std::span<Eigen::MatrixXd*> p) {
                  if (p[0]) *p[0] += g.cwiseProduct(dydx);
                });
}

Var sqrt_clamped(Tape& t, Var a, double clamp_tol) {
  const auto& A = t.value(a);
  Eigen::MatrixXd out = A.cwiseMax(0.0).cwiseSqrt();
  Eigen::MatrixXd av = A;
  Eigen::MatrixXd ov = out;
  return t.emit("sqrt_clamped", {a.id}, std::move(out),
                [av, ov, clamp_tol](const Eigen::MatrixXd& g,
                                    std::span<Eigen::MatrixXd*> p) {
                  if (!p[0]) return;
                  for (Eigen::Index j = 0; j < av.cols(); ++j)
                    for (Eigen::Index i = 0; i < av.rows(); ++i)
                      if (av(i, j) > clamp_tol)
                        (*p[0])(i, j) += g(i, j) / (2.0 * ov(i, j));
                });
}

Var matmul(Tape& t, Var a, Var b) {
  const auto& A = t.value(a);
  const auto& B = t.value(b);
  if (A.cols() != B.rows()) {
    throw std::invalid_argument("matmul: inner dimension mismatch " +
                                shape_str(A) + " vs " + shape_str(B));
  }
  Eigen::MatrixXd av = A, bv = B;
  return t.emit("matmul", {a.id, b.id}, A * B,
                [av, bv](const Eigen::MatrixXd& g,
                         std::span<Eigen::MatrixXd*> p) {
                  if (p[0]) p[0]->noalias() += g * bv.transpose();
                  if (p[1]) p[1]->noalias() += av.transpose() * g;
                });
}

Var matmul_nt(Tape& t, Var a, Var b) {
  const auto& A = t.value(a);
  const auto& B = t.value(b);
  if (A.cols() != B.cols()) {
    throw std::invalid_argument("matmul_nt: inner dimension mismatch " +
                                shape_str(A) + " vs " + shape_str(B));
  }
  Eigen::MatrixXd av = A, bv = B;
  return t.emit("matmul_nt", {a.id, b.id}, A * B.transpose(),
                [av, bv](const Eigen::MatrixXd& g,
                         std::span<Eigen::MatrixXd*> p) {
                  if (p[0]) p[0]->noalias() += g * bv;
                  if (p[1]) p[1]->noalias() += g.transpose() * av;
                });
}

Var add_rowvec(Tape& t, Var m, Var row) {
  const auto& A = t.value(m);
  const auto& R = t.value(row);
  if (R.rows() != 1 || R.cols() != A.cols()) {
    throw std::invalid_argument("add_rowvec: row must be 1x" +
                                std::to_string(A.cols()) + ", got " +
                                shape_str(R));
  }
  return t.emit("add_rowvec", {m.id, row.id}, A.rowwise() + R.row(0),
                [](const Eigen::MatrixXd& g, std::span<Eigen::MatrixXd*> p) {
                  if (p[0]) *p[0] += g;
                  if (p[1]) p[1]->row(0) += g.colwise().sum();
                });
}

Var hstack(Tape& t, std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("hstack: no inputs");
  const Eigen::Index rows = t.value(parts[0]).rows();
  Eigen::Index cols = 0;
  std::vector<int> parents;
  std::vector<Eigen::Index> widths;
  for (Var v : parts) {
    const auto& m = t.value(v);
    if (m.rows() != rows) {
      throw std::invalid_argument("hstack: row count mismatch " +
                                  shape_str(t.value(parts[0])) + " vs " +
                                  shape_str(m));
    }
    parents.push_back(v.id);
    widths.push_back(m.cols());
    cols += m.cols();
  }
  Eigen::MatrixXd out(rows, cols);
  Eigen::Index at = 0;
  for (Var v : parts) {
    const auto& m = t.value(v);
    out.middleCols(at, m.cols()) = m;
    at += m.cols();
  }
  return t.emit("hstack", std::move(parents), std::move(out),
                [widths](const Eigen::MatrixXd& g,
                         std::span<Eigen::MatrixXd*> p) {
                  Eigen::Index at = 0;
                  for (std::size_t k = 0; k < widths.size(); ++k) {
                    if (p[k]) *p[k] += g.middleCols(at, widths[k]);
                    at += widths[k];
                  }
                });
}

Var vstack(Tape& t, std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("vstack: no inputs");
  const Eigen::Index cols = t.value(parts[0]).cols();
  Eigen::Index rows = 0;
  std::vector<int> parents;
  std::vector<Eigen::Index> heights;
  for (Var v : parts) {
    const auto& m = t.value(v);
    if (m.cols() != cols) {
      throw std::invalid_argument("vstack: column count mismatch " +
                                  shape_str(t.value(parts[0])) + " vs " +
                                  shape_str(m));
    }
    parents.push_back(v.id);
    heights.push_back(m.rows());
    rows += m.rows();
  }
  Eigen::MatrixXd out(rows, cols);
  Eigen::Index at = 0;
  for (Var v : parts) {
    const auto& m = t.value(v);
    out.middleRows(at, m.rows()) = m;
    at += m.rows();
  }
  return t.emit("vstack", std::move(parents), std::move(out),
                [heights](const Eigen::MatrixXd& g,
                          std::span<Eigen::MatrixXd*> p) {
                  Eigen::Index at = 0;
                  for (std::size_t k = 0; k < heights.size(); ++k) {
                    if (p[k]) *p[k] += g.middleRows(at, heights[k]);
                    at += heights[k];
                  }
                });
}

Var mean_rows(Tape& t, Var a) {
  const auto& A = t.value(a);
  const double inv = 1.0 / static_cast<double>(A.rows());
  Eigen::MatrixXd out = A.colwise().mean();
  const Eigen::Index rows = A.rows();
  return t.emit("mean_rows", {a.id}, std::move(out),
                [inv, rows](const Eigen::MatrixXd& g,
                            std::span<Eigen::MatrixXd*> p) {
                  if (p[0]) *p[0] += (g.row(0) * inv).replicate(rows, 1);
                });
}

Var sum(Tape& t, Var a) {
  const auto& A = t.value(a);
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = A.sum();
  return t.emit("sum", {a.id}, std::move(out),
                [](const Eigen::MatrixXd& g, std::span<Eigen::MatrixXd*> p) {
                  if (p[0]) p[0]->array() += g(0, 0);
                });
}

// ---- row-wise normalizers ----

Var softmax_rows(Tape& t, Var a) {
  const auto& A = t.value(a);
  Eigen::MatrixXd out(A.rows(), A.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    const double m = A.row(i).maxCoeff();
    Eigen::ArrayXd e = (A.row(i).array() - m).exp();
    out.row(i) = (e / e.sum()).matrix();
  }
  Eigen::MatrixXd yv = out;
  return t.emit("softmax_rows", {a.id}, std::move(out),
                [yv](const Eigen::MatrixXd& g, std::span<Eigen::MatrixXd*> p) {
                  if (!p[0]) return;
                  for (Eigen::Index i = 0; i < yv.rows(); ++i) {
                    const double dot = g.row(i).dot(yv.row(i));
                    p[0]->row(i) +=
                        (yv.row(i).array() * (g.row(i).array() - dot))
                            .matrix();
                  }
                });
}

Var layer_norm(Tape& t, Var a, Var gain, Var bias, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("layer_norm: eps must be > 0");
  const auto& A = t.value(a);
  const auto& G = t.value(gain);
  const auto& B = t.value(bias);
  if (G.rows() != 1 || G.cols() != A.cols() || B.rows() != 1 ||
      B.cols() != A.cols()) {
    throw std::invalid_argument("layer_norm: gain/bias must be 1x" +
                                std::to_string(A.cols()));
  }
  const Eigen::Index n = A.cols();
  Eigen::MatrixXd xhat(A.rows(), n);
  Eigen::VectorXd inv_std(A.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    const double mean = A.row(i).mean();
    const double var = (A.row(i).array() - mean).square().mean();
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std(i) = is;
    xhat.row(i) = (A.row(i).array() - mean) * is;
  }
  Eigen::MatrixXd out =
      (xhat.array().rowwise() * G.row(0).array()).rowwise() + B.row(0).array();
  Eigen::MatrixXd gv = G;
  return t.emit(
      "layer_norm", {a.id, gain.id, bias.id}, std::move(out),
      [xhat, inv_std, gv, n](const Eigen::MatrixXd& g,
                             std::span<Eigen::MatrixXd*> p) {
        if (p[1]) p[1]->row(0) += g.cwiseProduct(xhat).colwise().sum();
        if (p[2]) p[2]->row(0) += g.colwise().sum();
        if (p[0]) {
          for (Eigen::Index i = 0; i < g.rows(); ++i) {
            Eigen::RowVectorXd dxhat = g.row(i).cwiseProduct(gv.row(0));
            const double m1 = dxhat.mean();
            const double m2 = dxhat.dot(xhat.row(i)) / static_cast<double>(n);
            p[0]->row(i) += inv_std(i) * (dxhat.array() - m1 -
                                          xhat.row(i).array() * m2)
                                             .matrix();
          }
        }
      });
}

// ---- distance-statistics building blocks ----

Var pairwise_distances(Tape& t, Var x) {
  const Eigen::MatrixXd X = t.value(x);
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double dist = (X.row(i) - X.row(j)).norm();
      d(i, j) = dist;
      d(j, i) = dist;
    }
  }
  Eigen::MatrixXd dv = d;
  return t.emit("pairwise_distances", {x.id}, std::move(d),
                [X, dv](const Eigen::MatrixXd& g,
                        std::span<Eigen::MatrixXd*> p) {
                  if (!p[0]) return;
                  const Eigen::Index n = X.rows();
                  for (Eigen::Index i = 0; i < n; ++i) {
                    for (Eigen::Index j = 0; j < n; ++j) {
                      if (i == j || dv(i, j) <= 0.0) continue;
                      const double w = g(i, j) / dv(i, j);
                      p[0]->row(i) += w * (X.row(i) - X.row(j));
                      p[0]->row(j) -= w * (X.row(i) - X.row(j));
                    }
                  }
                });
}

Var double_center(Tape& t, Var d) {
  const auto& D = t.value(d);
  if (D.rows() != D.cols()) {
    throw std::invalid_argument("double_center: matrix must be square, got " +
                                shape_str(D));
  }
  auto center = [](const Eigen::MatrixXd& m) {
    const Eigen::VectorXd row_means = m.rowwise().mean();
    const Eigen::RowVectorXd col_means = m.colwise().mean();
    const double grand = m.mean();
    Eigen::MatrixXd out = m;
    out.colwise() -= row_means;
    out.rowwise() -= col_means;
    out.array() += grand;
    return out;
  };
  // The centering operator J(.)J is linear and self-adjoint, so the backward
  // map is the same centering applied to the incoming adjoint.
  return t.emit("double_center", {d.id}, center(D),
                [center](const Eigen::MatrixXd& g,
                         std::span<Eigen::MatrixXd*> p) {
                  if (p[0]) *p[0] += center(g);
                });
}

// ---- gradient checking ----

double grad_check(
    const std::function<Var(Tape&, const std::vector<Var>&)>& f,
    const std::vector<Eigen::MatrixXd>& params, double eps) {
  if (eps < 1e-7 || eps > 1e-3) {
    throw std::invalid_argument("grad_check: eps must lie in [1e-7, 1e-3]");
  }
  auto eval = [&](const std::vector<Eigen::MatrixXd>& ps, Tape& t,
                  std::vector<Var>* leaves_out) {
    std::vector<Var> leaves;
    leaves.reserve(ps.size());
    for (const auto& p : ps) leaves.push_back(t.leaf(p));
    Var loss = f(t, leaves);
    if (leaves_out) *leaves_out = leaves;
    return loss;
  };

  Tape base;
  std::vector<Var> leaves;
  Var loss = eval(params, base, &leaves);
  base.backward(loss);
  std::vector<Eigen::MatrixXd> analytic;
  analytic.reserve(params.size());
  for (Var v : leaves) analytic.push_back(base.grad(v));

  double worst = 0.0;
  std::vector<Eigen::MatrixXd> work = params;
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (Eigen::Index j = 0; j < params[k].cols(); ++j) {
      for (Eigen::Index i = 0; i < params[k].rows(); ++i) {
        const double saved = work[k](i, j);
        work[k](i, j) = saved + eps;
        Tape tp;
        const double fp = tp.value(eval(work, tp, nullptr))(0, 0);
        work[k](i, j) = saved - eps;
        Tape tm;
        const double fm = tm.value(eval(work, tm, nullptr))(0, 0);
        work[k](i, j) = saved;
        const double fd = (fp - fm) / (2.0 * eps);
        const double ad = analytic[k](i, j);
        const double rel = std::abs(ad - fd) / std::max(1.0, std::abs(ad));
        worst = std::max(worst, rel);
      }
    }
  }
  return worst;
}

}  // namespace survfuse::ad
