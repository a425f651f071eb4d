#pragma once

#include <optional>

#include <Eigen/Dense>

#include "bumphunt/box.hpp"
#include "bumphunt/dataset.hpp"
#include "bumphunt/pca.hpp"
#include "bumphunt/prim.hpp"

namespace bumphunt {

enum class FastPrimMode { kClosedForm, kIterative };

struct FastPrimConfig {
  double beta = 0.05;
  int coverage = 20;
  Index p_prime = 0;  // peeled dimensions; 0 means all
  FastPrimMode mode = FastPrimMode::kClosedForm;
  double alpha = 0.05;  // per-step peel mass of the iterative mode
  /// Put the vertices at the quantiles b/2 and 1 - b/2 (b = beta_T^(1/p'))
  /// instead of (1 -/+ b)/2. Only for comparison: the box then has marginal
  /// mass 1 - b rather than b.
  bool literal_quantiles = false;

  void validate() const;
  Index peeled_dims(Index p) const;
};

/// 1 - (1 - beta)^t: measure covered after t rounds of beta-boxes.
double beta_total(double beta, int t);

/// Lower and upper quantile levels of the central box with measure
/// beta_total spread evenly over p_prime marginals.
std::pair<double, double> central_quantile_levels(double beta_total, Index p_prime, bool literal = false);

struct CentralBox {
  AxisBox box;
  BoxStats stats;
};

/// Closed-form fastPRIM: each of the first p' marginals is cut at its
/// empirical central quantiles, the remaining dimensions stay open.
CentralBox central_box_empirical(const Dataset& data, const FastPrimConfig& config);

/// Population central box mean_j +/- sd_j * Phi^-1((1 + beta_T^(1/p'))/2).
AxisBox central_box_population(const Eigen::VectorXd& mean, const Eigen::VectorXd& sd, double beta_total,
                               Index p_prime = 0, bool literal = false);
/// In PC coordinates: zero mean, sd = sqrt(lambda).
AxisBox central_box_population(const RotationModel& model, double beta_total);
/// In input coordinates from the marginal variances of sigma.
AxisBox central_box_population(const Eigen::MatrixXd& sigma, double beta_total, Index p_prime = 0);

/// Union of the covering rounds of the iterative mode.
struct FastPrimTrace {
  BoxTrace trace;
  RegionSummary region;
};

/// 2p'-sided peeling (alpha / 2p' off every face per step) down to support
/// beta, repeated on S^(k) for `coverage` rounds.
FastPrimTrace fastprim_iterative(const Dataset& data, const FastPrimConfig& config);

struct FastPrimPcaResult {
  RotationModel model;
  Dataset rotated;
  AxisBox box;  // PC coordinates, all p dims; dims >= p' are open
  LinearRule rule;
  BoxStats stats;
  std::optional<FastPrimTrace> iterative;
};

/// PCA, then fastPRIM on the first p' scores, then completion with the
/// unpeeled PC dimensions, then the rule in input coordinates.
FastPrimPcaResult fastprim_pca(const Dataset& data, const FastPrimConfig& config);

/// fastPRIM in whichever mode config selects, on the given coordinates.
CentralBox fastprim_box(const Dataset& data, const FastPrimConfig& config);

}  // namespace bumphunt
