#pragma once

#include <Eigen/Dense>
#include <vector>

namespace survfuse {

/// Cosine decay to zero over total_steps updates: step 0 gets lr_max, the
/// final step gets 0. total_steps == 1 degenerates to a single lr_max step.
double cosine_lr(double lr_max, int step, int total_steps);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  bool decoupled = true;  // true: AdamW; false: L2 penalty added to the grad
};

/// Adam / AdamW over a list of parameter matrices. Moment buffers are laid
/// out by parameter index, so the parameter list must keep its shape across
/// steps.
class AdamW {
 public:
  explicit AdamW(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(std::vector<Eigen::MatrixXd>& params,
            const std::vector<Eigen::MatrixXd>& grads, double lr);

  int steps_taken() const { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<Eigen::MatrixXd> m_, v_;
  int t_ = 0;
};

}  // namespace survfuse
