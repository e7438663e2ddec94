#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace survfuse::ad {

// Self-normalizing activation constants (Klambauer et al., to published
// precision).
inline constexpr double kSeluLambda = 1.0507009873554804934193349852946;
inline constexpr double kSeluAlpha = 1.6732632423543772848170429916717;

class Tape;

/// Handle to a node on a tape. Cheap to copy; only valid for the tape that
/// created it.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Dynamic reverse-mode tape. Nodes are appended in construction order, which
/// is a topological order by design; the backward sweep walks them in exact
/// reverse. Forward values are computed eagerly at node creation.
///
/// Gradient semantics: backward() accumulates into the persistent gradients of
/// leaf nodes (created with leaf()). Interior adjoints live in per-call
/// scratch, so calling backward() twice on the same graph adds the gradients
/// twice. Use zero_grad() to reset leaves.
class Tape {
 public:
  explicit Tape(bool checked = true) : checked_(checked) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable input. The tape keeps its own copy of the value.
  Var leaf(const Eigen::MatrixXd& value);

  /// Non-differentiable input.
  Var constant(const Eigen::MatrixXd& value);
  Var constant(double scalar);

  const Eigen::MatrixXd& value(Var v) const { return nodes_[v.id].value; }

  /// Accumulated gradient of a leaf. Zero until backward() has run.
  const Eigen::MatrixXd& grad(Var leaf) const;

  /// Reverse sweep from a scalar (1x1) node. Throws std::invalid_argument for
  /// a non-scalar loss.
  void backward(Var loss);

  void zero_grad();

  std::size_t size() const { return nodes_.size(); }
  bool checked() const { return checked_; }

  // Used by the op constructors in this module; not part of the user surface.
  struct Node {
    const char* kind;
    std::vector<int> parents;
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;  // persistent accumulator, leaves only
    bool requires_grad = false;
    bool is_leaf = false;
    // (node_adjoint, parent_adjoints): add this node's contribution to each
    // parent adjoint. Captured forward context lives in the closure.
    std::function<void(const Eigen::MatrixXd&, std::span<Eigen::MatrixXd*>)>
        backward_fn;
  };

  Var emit(const char* kind, std::vector<int> parents, Eigen::MatrixXd value,
           std::function<void(const Eigen::MatrixXd&,
                              std::span<Eigen::MatrixXd*>)>
               backward_fn);
  const Node& node(Var v) const { return nodes_[v.id]; }

 private:
  std::vector<Node> nodes_;
  bool checked_ = true;
};

// ---- elementwise and structural ops ----

Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);     // elementwise
Var div(Tape& t, Var a, Var b);     // elementwise
Var scale(Tape& t, Var a, double c);
Var selu(Tape& t, Var a);
/// Elementwise sqrt(max(x, 0)); gradient is zero where x < clamp_tol.
Var sqrt_clamped(Tape& t, Var a, double clamp_tol = 1e-14);

/// Matrix product a*b; throws std::invalid_argument naming both shapes on an
/// inner-dimension mismatch.
Var matmul(Tape& t, Var a, Var b);
/// a * b^T without materializing the transpose.
Var matmul_nt(Tape& t, Var a, Var b);

/// m (MxN) plus a row vector (1xN) broadcast over rows.
Var add_rowvec(Tape& t, Var m, Var row);

Var hstack(Tape& t, std::span<const Var> parts);
Var vstack(Tape& t, std::span<const Var> parts);

/// Column means: MxN -> 1xN.
Var mean_rows(Tape& t, Var a);
Var sum(Tape& t, Var a);  // -> 1x1

// ---- row-wise normalizers ----

/// Row-wise softmax with row-max subtraction.
Var softmax_rows(Tape& t, Var a);

/// Per-row standardization followed by an affine map with gain/bias (1xN).
Var layer_norm(Tape& t, Var a, Var gain, Var bias, double eps = 1e-5);

// ---- distance-statistics building blocks ----

/// Pairwise Euclidean distances of the rows of a BxD matrix -> BxB.
/// Gradient contributions through zero distances are zero.
Var pairwise_distances(Tape& t, Var x);

/// Double centering: subtract row means and column means, add the grand mean.
Var double_center(Tape& t, Var d);

// ---- gradient checking ----

/// Builds the graph f(params) twice per parameter coordinate and compares the
/// analytic gradient against central differences
/// (f(p+eps) - f(p-eps)) / (2 eps). Returns the worst relative error
/// |ad - fd| / max(1, |ad|). eps must lie in [1e-7, 1e-3]; f must be
/// deterministic.
double grad_check(
    const std::function<Var(Tape&, const std::vector<Var>&)>& f,
    const std::vector<Eigen::MatrixXd>& params, double eps = 1e-5);

}  // namespace survfuse::ad
