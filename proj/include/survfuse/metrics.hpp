#pragma once

#include <Eigen/Dense>

namespace survfuse {

/// Harrell's concordance index. Permissible pairs are (i, j) with
/// t_i < t_j and event_i = 1; a pair is concordant when r_i > r_j and tied
/// risks count 1/2. Counting is integral (half-units), so equal inputs give
/// bit-identical results across implementations. Throws
/// std::invalid_argument when no permissible pair exists.
double concordance_index(const Eigen::VectorXd& risks,
                         const Eigen::VectorXd& times,
                         const Eigen::VectorXi& events);

}  // namespace survfuse
