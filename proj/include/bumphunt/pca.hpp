#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "bumphunt/box.hpp"
#include "bumphunt/dataset.hpp"

namespace bumphunt {

/// Principal-component rotation y = gamma' (x - center), truncated to the
/// first p_prime coordinates.
struct RotationModel {
  Eigen::VectorXd center;
  Eigen::MatrixXd gamma;   // p x p, columns are eigenvectors
  Eigen::VectorXd lambda;  // nonincreasing, >= 0
  Index p_prime = 0;

  Index dims() const { return gamma.rows(); }
  RotationModel with_p_prime(Index p_prime) const;
};

/// Rotation from the sample covariance (divisor n - 1); keeps all p axes.
RotationModel fit_rotation(const Dataset& data);
RotationModel fit_rotation(const Eigen::MatrixXd& x);

/// PC scores of every row; response and labels are carried through.
Dataset rotate(const Dataset& data, const RotationModel& model);
Eigen::MatrixXd rotate(const Eigen::MatrixXd& x, const RotationModel& model);

/// Back to input coordinates; requires p_prime == p.
Eigen::MatrixXd inverse_rotate(const Eigen::MatrixXd& y, const RotationModel& model);

/// The PC coordinate of row i along axis j. rotate() and LinearRule share
/// this so membership agrees bit-for-bit in both representations.
double pc_score(const Eigen::MatrixXd& x, Index i, const Eigen::VectorXd& center, const Eigen::VectorXd& axis);

/// lower <= coefficients' (x - center) <= upper; a missing bound is open.
struct LinearConstraint {
  Eigen::VectorXd coefficients;
  std::optional<double> lower;
  std::optional<double> upper;
};

/// Conjunction of half-space pairs in input coordinates.
struct LinearRule {
  Eigen::VectorXd center;
  std::vector<LinearConstraint> constraints;

  bool contains(const Eigen::MatrixXd& x, Index i) const;
  Index count(const Eigen::MatrixXd& x) const;
};

LinearRule box_to_input_rule(const AxisBox& box, const RotationModel& model);

}  // namespace bumphunt
