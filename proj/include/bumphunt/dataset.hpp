#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace bumphunt {

using Eigen::Index;

/// n x p predictors, length-n response and optional mixture provenance
/// (0 = uniform noise, 1..G = target component).
struct Dataset {
  Eigen::MatrixXd x;
  Eigen::VectorXd z;
  std::optional<Eigen::VectorXi> labels;
  std::vector<std::string> names;  // predictor column names, may be empty

  Index rows() const { return x.rows(); }
  Index dims() const { return x.cols(); }

  /// Throws DataError unless n >= 1, every entry is finite and sizes agree.
  void validate() const;

  std::string name(Index j) const;
};

struct ResponseSpec {
  enum class Kind { kNormal, kFixed };
  Kind kind = Kind::kNormal;
  double mean = 1.0;
  double sd = 0.2;

  static ResponseSpec normal(double mean, double sd) { return {Kind::kNormal, mean, sd}; }
  static ResponseSpec fixed(double value) { return {Kind::kFixed, value, 0.0}; }
};

struct GaussianComponent {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  ResponseSpec response;
};

/// X ~ w * (equal mixture of Gaussian components) + (1 - w) * U[a, b]^p.
struct MixtureConfig {
  Index n = 1000;
  double w = 1.0;
  std::vector<GaussianComponent> components;
  /// Uniform noise support. When unset, each dimension uses the min/max of
  /// the sampled Gaussian rows.
  std::optional<std::pair<double, double>> noise_bounds;
  ResponseSpec noise_response = ResponseSpec::fixed(0.0);

  Index dims() const { return components.empty() ? 0 : components.front().mean.size(); }
  void validate() const;
};

struct SampleInfo {
  Eigen::VectorXd noise_lower;
  Eigen::VectorXd noise_upper;
  bool noise_bounds_from_data = false;
  Index noise_rows = 0;
};

struct MixtureSample {
  Dataset data;
  SampleInfo info;
};

/// Every row is drawn from its own counter stream derive_seed(seed, row), so
/// the sample is a pure function of (cfg, seed).
MixtureSample sample_mixture(const MixtureConfig& cfg, std::uint64_t seed);

struct CovarianceBuild {
  Eigen::MatrixXd sigma;
  bool repaired = false;
  double min_eigenvalue = 0.0;  // before repair
};

inline constexpr double kCovarianceFloor = 1e-8;

/// V^(1/2) R V^(1/2); eigenvalues below 1e-8 are lifted to 1e-8 and flagged.
CovarianceBuild build_covariance(const Eigen::VectorXd& variances, const Eigen::MatrixXd& correlation);

Eigen::MatrixXd equicorrelation(Index p, double rho);
Eigen::MatrixXd ar1_correlation(Index p, double rho);

/// Named covariance family used by the simulation presets.
struct CovarianceSpec {
  std::string preset = "equicorrelated";  // identity | equicorrelated | ar1
  double rho = 0.5;
  std::vector<double> variances;  // empty: unit variances
};

CovarianceBuild make_covariance(const CovarianceSpec& spec, Index p);

/// Single Gaussian target with a normal response, no noise: the default
/// simulation setting (mu = 1, sigma = 0.2, n = 1000, w = 1).
MixtureConfig single_target_design(const Eigen::MatrixXd& sigma, Index n = 1000, double mu = 1.0,
                                   double response_sd = 0.2, double w = 1.0);

/// Two equal Gaussian targets at +/- separation along the first axis with
/// class responses 1 and 2, noised with probability 1 - w (response 0).
MixtureConfig bimodal_design(const Eigen::MatrixXd& sigma, double separation, Index n = 1000, double w = 0.9);

/// sqrt(m) * (batch mean - overall mean) over floor(n / m) disjoint batches
/// of consecutive rows.
Eigen::MatrixXd standardized_means(const Eigen::MatrixXd& x, Index batch);

/// Joint Gaussian model of (Z, X) or (Z, Y') for the linear conditional law.
struct GaussianJointModel {
  double response_mean = 0.0;
  double response_variance = 1.0;
  Eigen::VectorXd cross_covariance;
  /// PC-space model: eigenvalues of the rotated predictors.
  std::optional<Eigen::VectorXd> pc_eigenvalues;
  /// Input-space predictor covariance; identity when unset.
  std::optional<Eigen::MatrixXd> predictor_covariance;
};

struct ConditionalMoments {
  double mean = 0.0;
  double variance = 0.0;
};

ConditionalMoments conditional_moments(const GaussianJointModel& model, const Eigen::VectorXd& point);

struct CsvOptions {
  std::string response = "z";
  std::string label_column = "label";  // read into Dataset::labels when present
};

Dataset load_csv(const std::string& path, const CsvOptions& options = {});
void write_csv(const std::string& path, const Dataset& data, bool with_labels = false);

}  // namespace bumphunt
