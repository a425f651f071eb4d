#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "bumphunt/dataset.hpp"

namespace bumphunt {

/// Row indices of the points still in play.
using ActiveSet = std::vector<Index>;

ActiveSet all_rows(const Dataset& data);

/// Closed axis-aligned box; +/-infinity marks a side that was never cut.
struct AxisBox {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  static AxisBox unbounded(Index dims);

  Index dims() const { return lower.size(); }
  bool is_bounded(Index j) const { return std::isfinite(lower(j)) && std::isfinite(upper(j)); }
  bool is_unbounded(Index j) const { return std::isinf(lower(j)) && std::isinf(upper(j)); }

  /// Whether row i of x lies inside (closed on both sides).
  bool contains(const Eigen::MatrixXd& x, Index i) const {
    for (Index j = 0; j < lower.size(); ++j) {
      const double v = x(i, j);
      if (v < lower(j) || v > upper(j)) return false;
    }
    return true;
  }

  /// True when every side of *this lies within other.
  bool within(const AxisBox& other) const;

  Eigen::VectorXd center() const { return (lower + upper) / 2.0; }
};

/// Empirical box statistics over an active set of size n_active.
struct BoxStats {
  Index count = 0;
  Index n_active = 0;
  double support = 0.0;              // F_n = count / n_active
  double output_sum_fraction = 0.0;  // I_n = sum(z in box) / n_active
  double output_mean = std::numeric_limits<double>::quiet_NaN();  // ave_n, NaN when empty

  bool empty() const { return count == 0; }
};

BoxStats make_stats(Index count, double z_sum, Index n_active);

BoxStats box_stats(const Dataset& data, std::span<const Index> active, const AxisBox& box);

/// Members of `active` inside `box`, in the order of `active`.
ActiveSet rows_inside(const Dataset& data, std::span<const Index> active, const AxisBox& box);

/// Smallest box holding the given rows (dimension-wise min/max).
AxisBox bounding_box(const Eigen::MatrixXd& x, std::span<const Index> rows);
AxisBox bounding_box(const Eigen::MatrixXd& x);

/// Smallest box holding both boxes.
AxisBox hull(const AxisBox& a, const AxisBox& b);

}  // namespace bumphunt
