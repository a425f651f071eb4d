#include "bumphunt/box.hpp"

#include <numeric>

#include "bumphunt/errors.hpp"

namespace bumphunt {

ActiveSet all_rows(const Dataset& data) {
  ActiveSet rows(static_cast<std::size_t>(data.rows()));
  std::iota(rows.begin(), rows.end(), Index{0});
  return rows;
}

AxisBox AxisBox::unbounded(Index dims) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  return {Eigen::VectorXd::Constant(dims, -inf), Eigen::VectorXd::Constant(dims, inf)};
}

bool AxisBox::within(const AxisBox& other) const {
  if (other.dims() != dims()) return false;
  return (lower.array() >= other.lower.array()).all() && (upper.array() <= other.upper.array()).all();
}

BoxStats make_stats(Index count, double z_sum, Index n_active) {
  BoxStats s;
  s.count = count;
  s.n_active = n_active;
  if (n_active > 0) {
    s.support = static_cast<double>(count) / static_cast<double>(n_active);
    s.output_sum_fraction = z_sum / static_cast<double>(n_active);
  }
  if (count > 0) s.output_mean = z_sum / static_cast<double>(count);
  return s;
}

BoxStats box_stats(const Dataset& data, std::span<const Index> active, const AxisBox& box) {
  if (active.empty()) throw DataError("box_stats: active set is empty");
  if (box.dims() != data.dims()) throw ValidationError("box_stats: box dimension does not match data");
  Index count = 0;
  double sum = 0.0;
  for (Index i : active) {
    if (box.contains(data.x, i)) {
      ++count;
      sum += data.z(i);
    }
  }
  return make_stats(count, sum, static_cast<Index>(active.size()));
}

ActiveSet rows_inside(const Dataset& data, std::span<const Index> active, const AxisBox& box) {
  ActiveSet out;
  for (Index i : active)
    if (box.contains(data.x, i)) out.push_back(i);
  return out;
}

AxisBox bounding_box(const Eigen::MatrixXd& x, std::span<const Index> rows) {
  if (rows.empty()) throw DataError("bounding_box: no rows");
  AxisBox b{x.row(rows.front()).transpose(), x.row(rows.front()).transpose()};
  for (Index i : rows) {
    b.lower = b.lower.cwiseMin(x.row(i).transpose());
    b.upper = b.upper.cwiseMax(x.row(i).transpose());
  }
  return b;
}

AxisBox bounding_box(const Eigen::MatrixXd& x) {
  if (x.rows() == 0) throw DataError("bounding_box: no rows");
  return {x.colwise().minCoeff().transpose(), x.colwise().maxCoeff().transpose()};
}

AxisBox hull(const AxisBox& a, const AxisBox& b) {
  if (a.dims() != b.dims()) throw ValidationError("hull: dimension mismatch");
  return {a.lower.cwiseMin(b.lower), a.upper.cwiseMax(b.upper)};
}

}  // namespace bumphunt
