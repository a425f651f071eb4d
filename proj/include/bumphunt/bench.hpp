#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bumphunt/box.hpp"
#include "bumphunt/dataset.hpp"
#include "bumphunt/fastprim.hpp"
#include "bumphunt/prim.hpp"

namespace bumphunt {

struct VolumeResult {
  double log_volume = 0.0;
  bool used_fallback = false;  // some side was open and took the fallback extent
  bool zero_volume = false;

  double volume() const { return zero_volume ? 0.0 : std::exp(log_volume); }
};

/// Product of side lengths, on log scale. Open sides take their extent from
/// `fallback` (typically the data bounding box); without one they throw.
VolumeResult box_volume(const AxisBox& box, const AxisBox* fallback = nullptr);

/// (1/n) * sum of density(x_i, z_i) over rows inside the box.
using PointDensity = std::function<double(const Eigen::VectorXd& x, double z)>;
double mode_mass(const Dataset& data, const AxisBox& box, const PointDensity& density);

/// Concentration ellipsoid {x : x' Sigma^-1 x <= q} with q the chi^2_p
/// quantile at beta'.
struct EllipsoidBump {
  Eigen::VectorXd center;
  Eigen::MatrixXd axes;          // columns, the PC directions of sigma
  Eigen::VectorXd semi_axes;     // r_j = sqrt(lambda_j * q)
  double beta_prime = 0.0;
  double chi2_quantile = 0.0;
  double log_volume = 0.0;       // log(pi_p * prod r_j)
};

struct PopulationBump {
  EllipsoidBump ellipsoid;
  AxisBox box;               // circumscribing box in PC axes, half-widths r_j
  double box_log_volume = 0.0;
};

PopulationBump population_bump_box(const Eigen::MatrixXd& sigma, double beta_prime);

enum class Algorithm { kPrim, kFastPrim };
enum class Space { kInput, kPc };

std::string to_string(Algorithm a);
std::string to_string(Space s);
Algorithm parse_algorithm(const std::string& s);
Space parse_space(const std::string& s);

struct MetricsRecord {
  Algorithm algorithm = Algorithm::kFastPrim;
  Space space = Space::kInput;
  Index p = 0;
  Index p_prime = 0;
  Index n = 0;
  int coverage = 0;
  int replicate = 0;
  std::uint64_t seed = 0;

  double support = 0.0;
  Index count = 0;
  double output_mean = 0.0;
  double log_volume = 0.0;
  bool volume_fallback = false;
  double log_volume_adjusted_mean = 0.0;  // log(output_mean) - log_volume
  double mode_mass = 0.0;
  double seconds = 0.0;
  Eigen::VectorXd box_center;  // not serialized to CSV

  bool ok = true;
  std::string error;

  double volume_adjusted_mean() const { return output_mean * std::exp(-log_volume); }
};

struct ExperimentDesign {
  std::vector<Algorithm> algorithms{Algorithm::kPrim, Algorithm::kFastPrim};
  std::vector<Space> spaces{Space::kInput, Space::kPc};
  std::vector<int> dims{2};
  std::vector<int> coverages{1, 5, 10, 15, 20};
  int replicates = 8;
  std::uint64_t master_seed = 1;
  Index n = 1000;
  double w = 1.0;
  double mu = 1.0;
  double sigma = 0.2;
  CovarianceSpec covariance;
  double alpha = 0.05;
  double beta = 0.05;
  bool pasting = false;
  Index p_prime = 0;
  FastPrimMode fastprim_mode = FastPrimMode::kClosedForm;
  int threads = 1;

  void validate() const;
};

/// Seed of the dataset for (replicate, p).
std::uint64_t replicate_seed(std::uint64_t master_seed, int p, int replicate);

/// The dataset every cell of (replicate, p) runs on.
Dataset replicate_dataset(const ExperimentDesign& design, int p, int replicate);

/// Runs every (replicate, p, space, algorithm, coverage) cell. Failures are
/// recorded on the record (ok = false) and the sweep continues. Records come
/// back sorted by (p, replicate, space, algorithm, coverage).
std::vector<MetricsRecord> run_experiment(const ExperimentDesign& design);

struct MeanSe {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double se = std::numeric_limits<double>::quiet_NaN();
  double variance = std::numeric_limits<double>::quiet_NaN();  // sample variance across replicates
  int count = 0;
};

MeanSe mean_se(std::span<const double> values);

struct CellAggregate {
  Algorithm algorithm;
  Space space;
  Index p = 0;
  Index p_prime = 0;
  int coverage = 0;
  int ok = 0;
  int failed = 0;
  MeanSe support, output_mean, log_volume, log_volume_adjusted_mean, mode_mass, seconds;
};

std::vector<CellAggregate> aggregate(const std::vector<MetricsRecord>& records);

struct GainRow {
  Algorithm algorithm;
  Index p = 0;
  int coverage = 0;
  int matched = 0;
  double ratio = std::numeric_limits<double>::quiet_NaN();  // mean(va_pc) / mean(va_input)
  double ratio_se = std::numeric_limits<double>::quiet_NaN();  // delta method
  double mean_log_ratio = std::numeric_limits<double>::quiet_NaN();
  double fraction_above_one = std::numeric_limits<double>::quiet_NaN();
  bool missing = false;
};

/// PC / input ratios of volume-adjusted output means over matched replicates.
std::vector<GainRow> gain_profile(const std::vector<MetricsRecord>& records);

struct TimingResult {
  double mean_seconds = 0.0;
  double se = 0.0;
  std::vector<double> samples;
};

/// Wall-clock timing of `task`; one warm-up run is discarded.
TimingResult timing_harness(const std::function<void()>& task, int repetitions);

}  // namespace bumphunt
