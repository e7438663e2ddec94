#include "survfuse/metrics.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace survfuse {

double concordance_index(const Eigen::VectorXd& risks,
                         const Eigen::VectorXd& times,
                         const Eigen::VectorXi& events) {
  const Eigen::Index n = risks.size();
  if (times.size() != n || events.size() != n) {
    throw std::invalid_argument(
        "concordance_index: risks/times/events lengths differ");
  }

  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return times(a) < times(b);
  });

  // Sweep tied-time groups in ascending order; events in a group pair with
  // every patient in strictly later groups. Concordance mass counted in
  // half-units so the result is exact.
  std::uint64_t permissible = 0;
  std::uint64_t mass2 = 0;  // 2 per concordant pair, 1 per risk tie
  Eigen::Index lo = 0;
  while (lo < n) {
    Eigen::Index hi = lo;
    const double tau = times(order[lo]);
    while (hi < n && times(order[hi]) == tau) ++hi;
    for (Eigen::Index k = lo; k < hi; ++k) {
      const Eigen::Index i = order[k];
      if (events(i) != 1) continue;
      for (Eigen::Index m = hi; m < n; ++m) {
        const Eigen::Index j = order[m];
        ++permissible;
        if (risks(i) > risks(j)) {
          mass2 += 2;
        } else if (risks(i) == risks(j)) {
          mass2 += 1;
        }
      }
    }
    lo = hi;
  }

  if (permissible == 0) {
    throw std::invalid_argument(
        "concordance_index: no permissible pairs (undefined result)");
  }
  return static_cast<double>(mass2) /
         (2.0 * static_cast<double>(permissible));
}

}  // namespace survfuse
