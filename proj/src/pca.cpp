#include "bumphunt/pca.hpp"

#include "bumphunt/errors.hpp"
#include "bumphunt/numkernel.hpp"

namespace bumphunt {

RotationModel RotationModel::with_p_prime(Index p) const {
  if (p < 1 || p > dims()) throw ValidationError("p' must lie in [1, " + std::to_string(dims()) + "]");
  RotationModel m = *this;
  m.p_prime = p;
  return m;
}

RotationModel fit_rotation(const Eigen::MatrixXd& x) {
  if (x.rows() < 2) throw DataError("fit_rotation: need at least two rows");
  if (!x.allFinite()) throw DataError("fit_rotation: non-finite predictors");
  RotationModel m;
  m.center = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - m.center.transpose();
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
  cov = (cov + cov.transpose()) / 2.0;
  auto eig = sym_eigen(cov);
  m.gamma = std::move(eig.eigenvectors);
  m.lambda = eig.eigenvalues.cwiseMax(0.0);  // rounding can leave -1e-17 on a constant column
  m.p_prime = x.cols();
  return m;
}

RotationModel fit_rotation(const Dataset& data) { return fit_rotation(data.x); }

double pc_score(const Eigen::MatrixXd& x, Index i, const Eigen::VectorXd& center, const Eigen::VectorXd& axis) {
  double s = 0.0;
  for (Index k = 0; k < axis.size(); ++k) s += axis(k) * (x(i, k) - center(k));
  return s;
}

Eigen::MatrixXd rotate(const Eigen::MatrixXd& x, const RotationModel& model) {
  if (x.cols() != model.dims()) {
    throw ValidationError("rotate: data has " + std::to_string(x.cols()) + " columns, model expects " +
                          std::to_string(model.dims()));
  }
  Eigen::MatrixXd y(x.rows(), model.p_prime);
  for (Index j = 0; j < model.p_prime; ++j) {
    const Eigen::VectorXd axis = model.gamma.col(j);
    for (Index i = 0; i < x.rows(); ++i) y(i, j) = pc_score(x, i, model.center, axis);
  }
  return y;
}

Dataset rotate(const Dataset& data, const RotationModel& model) {
  Dataset out;
  out.x = rotate(data.x, model);
  out.z = data.z;
  out.labels = data.labels;
  for (Index j = 0; j < model.p_prime; ++j) out.names.push_back("pc" + std::to_string(j + 1));
  return out;
}

Eigen::MatrixXd inverse_rotate(const Eigen::MatrixXd& y, const RotationModel& model) {
  if (model.p_prime != model.dims() || y.cols() != model.dims()) {
    throw ValidationError("inverse_rotate: needs full-rank scores (p' = p)");
  }
  return (y * model.gamma.transpose()).rowwise() + model.center.transpose();
}

bool LinearRule::contains(const Eigen::MatrixXd& x, Index i) const {
  for (const auto& c : constraints) {
    const double s = pc_score(x, i, center, c.coefficients);
    if (c.lower && s < *c.lower) return false;
    if (c.upper && s > *c.upper) return false;
  }
  return true;
}

Index LinearRule::count(const Eigen::MatrixXd& x) const {
  Index k = 0;
  for (Index i = 0; i < x.rows(); ++i) k += contains(x, i) ? 1 : 0;
  return k;
}

LinearRule box_to_input_rule(const AxisBox& box, const RotationModel& model) {
  if (box.dims() > model.dims()) throw ValidationError("box_to_input_rule: box has more dimensions than the model");
  LinearRule rule;
  rule.center = model.center;
  for (Index j = 0; j < box.dims(); ++j) {
    LinearConstraint c;
    c.coefficients = model.gamma.col(j);
    if (std::isfinite(box.lower(j))) c.lower = box.lower(j);
    if (std::isfinite(box.upper(j))) c.upper = box.upper(j);
    if (c.lower || c.upper) rule.constraints.push_back(std::move(c));
  }
  return rule;
}

}  // namespace bumphunt
