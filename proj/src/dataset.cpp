#include "bumphunt/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string_view>

#include "bumphunt/errors.hpp"
#include "bumphunt/numkernel.hpp"
#include "bumphunt/random.hpp"

namespace bumphunt {

void Dataset::validate() const {
  if (x.rows() < 1) throw DataError("dataset has no rows");
  if (z.size() != x.rows()) {
    throw DataError("response length " + std::to_string(z.size()) + " does not match " +
                    std::to_string(x.rows()) + " rows");
  }
  if (labels && labels->size() != x.rows()) throw DataError("label length does not match row count");
  if (!names.empty() && static_cast<Index>(names.size()) != x.cols()) {
    throw DataError("predictor name count does not match column count");
  }
  if (!x.allFinite()) throw DataError("predictors contain non-finite values");
  if (!z.allFinite()) throw DataError("response contains non-finite values");
}

std::string Dataset::name(Index j) const {
  if (j < static_cast<Index>(names.size())) return names[static_cast<std::size_t>(j)];
  return "x" + std::to_string(j + 1);
}

void MixtureConfig::validate() const {
  if (n < 1) throw ValidationError("mixture: n must be positive");
  if (!(w >= 0.0 && w <= 1.0)) throw ValidationError("mixture: w must lie in [0, 1]");
  if (components.empty()) throw ValidationError("mixture: at least one Gaussian component is required");
  const Index p = dims();
  if (p < 1) throw ValidationError("mixture: dimension must be positive");
  for (const auto& c : components) {
    if (c.mean.size() != p || c.covariance.rows() != p || c.covariance.cols() != p) {
      throw ValidationError("mixture: component dimensions disagree");
    }
    if (c.response.kind == ResponseSpec::Kind::kNormal && !(c.response.sd >= 0.0)) {
      throw ValidationError("mixture: response sd must be nonnegative");
    }
  }
  if (noise_bounds && !(noise_bounds->first < noise_bounds->second)) {
    throw ValidationError("mixture: noise bounds need a < b");
  }
}

namespace {

constexpr std::uint64_t kNoiseStream = 0x6e6f697365ULL;  // "noise"

double draw_response(const ResponseSpec& spec, CounterRng& rng) {
  if (spec.kind == ResponseSpec::Kind::kFixed) return spec.mean;
  return spec.mean + spec.sd * rng.normal();
}

}  // namespace

MixtureSample sample_mixture(const MixtureConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const Index p = cfg.dims();
  const Index n = cfg.n;
  const auto groups = static_cast<Index>(cfg.components.size());

  std::vector<Eigen::MatrixXd> roots;
  roots.reserve(cfg.components.size());
  for (const auto& c : cfg.components) roots.push_back(sym_sqrt(c.covariance));

  MixtureSample out;
  Dataset& d = out.data;
  d.x.resize(n, p);
  d.z.resize(n);
  d.labels = Eigen::VectorXi::Zero(n);

  Eigen::VectorXd eps(p);
  for (Index i = 0; i < n; ++i) {
    CounterRng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    if (!(rng.uniform() < cfg.w)) continue;  // noise row, drawn below
    const Index g = groups == 1 ? 0 : std::min<Index>(static_cast<Index>(rng.uniform() * groups), groups - 1);
    const auto& comp = cfg.components[static_cast<std::size_t>(g)];
    for (Index j = 0; j < p; ++j) eps(j) = rng.normal();
    d.x.row(i) = (comp.mean + roots[static_cast<std::size_t>(g)] * eps).transpose();
    d.z(i) = draw_response(comp.response, rng);
    (*d.labels)(i) = static_cast<int>(g + 1);
  }

  SampleInfo& info = out.info;
  info.noise_rows = (d.labels->array() == 0).count();
  if (cfg.noise_bounds) {
    info.noise_lower = Eigen::VectorXd::Constant(p, cfg.noise_bounds->first);
    info.noise_upper = Eigen::VectorXd::Constant(p, cfg.noise_bounds->second);
  } else if (info.noise_rows < n) {
    info.noise_bounds_from_data = true;
    info.noise_lower = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::infinity());
    info.noise_upper = Eigen::VectorXd::Constant(p, -std::numeric_limits<double>::infinity());
    for (Index i = 0; i < n; ++i) {
      if ((*d.labels)(i) == 0) continue;
      info.noise_lower = info.noise_lower.cwiseMin(d.x.row(i).transpose());
      info.noise_upper = info.noise_upper.cwiseMax(d.x.row(i).transpose());
    }
  } else {
    // No Gaussian rows to take a range from: +/- 3 sd around the component means.
    info.noise_bounds_from_data = false;
    info.noise_lower = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::infinity());
    info.noise_upper = Eigen::VectorXd::Constant(p, -std::numeric_limits<double>::infinity());
    for (const auto& c : cfg.components) {
      const Eigen::VectorXd sd = c.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
      info.noise_lower = info.noise_lower.cwiseMin(c.mean - 3.0 * sd);
      info.noise_upper = info.noise_upper.cwiseMax(c.mean + 3.0 * sd);
    }
  }

  const std::uint64_t noise_seed = derive_seed(seed, kNoiseStream);
  for (Index i = 0; i < n; ++i) {
    if ((*d.labels)(i) != 0) continue;
    CounterRng rng(derive_seed(noise_seed, static_cast<std::uint64_t>(i)));
    for (Index j = 0; j < p; ++j) d.x(i, j) = rng.uniform(info.noise_lower(j), info.noise_upper(j));
    d.z(i) = draw_response(cfg.noise_response, rng);
  }
  return out;
}

CovarianceBuild build_covariance(const Eigen::VectorXd& variances, const Eigen::MatrixXd& correlation) {
  const Index p = variances.size();
  if (correlation.rows() != p || correlation.cols() != p) {
    throw ValidationError("build_covariance: correlation must be " + std::to_string(p) + "x" + std::to_string(p));
  }
  if (!(variances.array() > 0.0).all() || !variances.allFinite()) {
    throw ValidationError("build_covariance: variances must be positive and finite");
  }
  for (Index i = 0; i < p; ++i) {
    if (std::abs(correlation(i, i) - 1.0) > 1e-12) throw ValidationError("build_covariance: correlation diagonal must be 1");
    for (Index j = 0; j < p; ++j) {
      if (!(std::abs(correlation(i, j)) <= 1.0)) {
        throw ValidationError("build_covariance: correlation entries must lie in [-1, 1]");
      }
    }
  }
  const Eigen::VectorXd sd = variances.cwiseSqrt();
  Eigen::MatrixXd sigma = sd.asDiagonal() * correlation * sd.asDiagonal();
  sigma = (sigma + sigma.transpose()) / 2.0;

  CovarianceBuild out;
  const auto eig = sym_eigen(sigma);
  out.min_eigenvalue = eig.eigenvalues(p - 1);
  if (out.min_eigenvalue < kCovarianceFloor) {
    const Eigen::VectorXd lifted = eig.eigenvalues.cwiseMax(kCovarianceFloor);
    sigma = eig.eigenvectors * lifted.asDiagonal() * eig.eigenvectors.transpose();
    sigma = (sigma + sigma.transpose()) / 2.0;
    out.repaired = true;
  }
  out.sigma = std::move(sigma);
  return out;
}

Eigen::MatrixXd equicorrelation(Index p, double rho) {
  Eigen::MatrixXd r = Eigen::MatrixXd::Constant(p, p, rho);
  r.diagonal().setOnes();
  return r;
}

Eigen::MatrixXd ar1_correlation(Index p, double rho) {
  Eigen::MatrixXd r(p, p);
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < p; ++j) r(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j)));
  return r;
}

CovarianceBuild make_covariance(const CovarianceSpec& spec, Index p) {
  if (p < 1) throw ValidationError("make_covariance: dimension must be positive");
  Eigen::VectorXd variances = Eigen::VectorXd::Ones(p);
  if (!spec.variances.empty()) {
    if (static_cast<Index>(spec.variances.size()) != p) {
      throw ValidationError("make_covariance: expected " + std::to_string(p) + " variances");
    }
    variances = Eigen::Map<const Eigen::VectorXd>(spec.variances.data(), p);
  }
  Eigen::MatrixXd r;
  if (spec.preset == "identity") {
    r = Eigen::MatrixXd::Identity(p, p);
  } else if (spec.preset == "equicorrelated") {
    r = equicorrelation(p, spec.rho);
  } else if (spec.preset == "ar1") {
    r = ar1_correlation(p, spec.rho);
  } else {
    throw ValidationError("unknown covariance preset '" + spec.preset + "'");
  }
  return build_covariance(variances, r);
}

MixtureConfig single_target_design(const Eigen::MatrixXd& sigma, Index n, double mu, double response_sd, double w) {
  MixtureConfig cfg;
  cfg.n = n;
  cfg.w = w;
  cfg.components.push_back({Eigen::VectorXd::Zero(sigma.rows()), sigma, ResponseSpec::normal(mu, response_sd)});
  return cfg;
}

MixtureConfig bimodal_design(const Eigen::MatrixXd& sigma, double separation, Index n, double w) {
  MixtureConfig cfg;
  cfg.n = n;
  cfg.w = w;
  Eigen::VectorXd shift = Eigen::VectorXd::Zero(sigma.rows());
  shift(0) = separation;
  cfg.components.push_back({-shift, sigma, ResponseSpec::fixed(1.0)});
  cfg.components.push_back({shift, sigma, ResponseSpec::fixed(2.0)});
  return cfg;
}

Eigen::MatrixXd standardized_means(const Eigen::MatrixXd& x, Index batch) {
  if (batch < 1) throw ValidationError("standardized_means: batch size must be positive");
  if (batch > x.rows()) throw ValidationError("standardized_means: batch size exceeds sample size");
  const Index batches = x.rows() / batch;
  const Index used = batches * batch;
  const Eigen::RowVectorXd overall = x.topRows(used).colwise().mean();
  Eigen::MatrixXd out(batches, x.cols());
  const double scale = std::sqrt(static_cast<double>(batch));
  for (Index b = 0; b < batches; ++b) {
    out.row(b) = scale * (x.middleRows(b * batch, batch).colwise().mean() - overall);
  }
  return out;
}

ConditionalMoments conditional_moments(const GaussianJointModel& model, const Eigen::VectorXd& point) {
  const Eigen::VectorXd& s = model.cross_covariance;
  if (s.size() != point.size()) throw ValidationError("conditional_moments: dimension mismatch");
  ConditionalMoments m;
  if (model.pc_eigenvalues) {
    const Eigen::VectorXd& lambda = *model.pc_eigenvalues;
    if (lambda.size() != s.size()) throw ValidationError("conditional_moments: eigenvalue count mismatch");
    double mean = model.response_mean;
    double explained = 0.0;
    for (Index j = 0; j < s.size(); ++j) {
      if (s(j) == 0.0) continue;
      if (!(lambda(j) > 0.0)) {
        throw NumericalError("conditional_moments: zero eigenvalue " + std::to_string(j) +
                             " with nonzero cross-covariance");
      }
      mean += s(j) / lambda(j) * point(j);
      explained += s(j) * s(j) / lambda(j);
    }
    m.mean = mean;
    m.variance = model.response_variance - explained;
  } else {
    Eigen::VectorXd b = s;
    if (model.predictor_covariance) {
      const Eigen::MatrixXd l = cholesky_lower(*model.predictor_covariance);
      b = l.transpose().triangularView<Eigen::Upper>().solve(l.triangularView<Eigen::Lower>().solve(s));
    }
    m.mean = model.response_mean + b.dot(point);
    m.variance = model.response_variance - s.dot(b);
  }
  if (m.variance < -1e-12 * std::max(1.0, model.response_variance)) {
    throw NumericalError("conditional_moments: joint covariance of (Z, X) is not positive semidefinite");
  }
  m.variance = std::max(m.variance, 0.0);
  return m;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

}  // namespace

Dataset load_csv(const std::string& path, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");

  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      have_header = true;
      break;
    }
  }
  if (!have_header) throw DataError(path + ": empty file, a header row is required");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  std::vector<std::string> header;
  for (auto cell : split(line)) header.emplace_back(cell);
  const auto response_it = std::find(header.begin(), header.end(), options.response);
  if (response_it == header.end()) {
    throw ValidationError(path + ": response column '" + options.response + "' not found in header");
  }
  const auto response_col = static_cast<std::size_t>(response_it - header.begin());
  const auto label_it = std::find(header.begin(), header.end(), options.label_column);
  const std::size_t label_col =
      label_it == header.end() ? header.size() : static_cast<std::size_t>(label_it - header.begin());

  Dataset d;
  std::vector<std::size_t> predictor_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c == response_col || c == label_col) continue;
    predictor_cols.push_back(c);
    d.names.push_back(header[c]);
  }

  std::vector<double> values;
  std::vector<double> responses;
  std::vector<int> labels;
  Index rows = 0;
  std::vector<double> row(header.size());
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw DataError(path + ": line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                      " fields, expected " + std::to_string(header.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto cell = cells[c];
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty() || !std::isfinite(v)) {
        throw DataError(path + ": line " + std::to_string(line_no) + ", column " + std::to_string(c + 1) + " ('" +
                        header[c] + "'): not a finite number: '" + std::string(cell) + "'");
      }
      row[c] = v;
    }
    for (auto c : predictor_cols) values.push_back(row[c]);
    if (label_col < header.size()) labels.push_back(static_cast<int>(row[label_col]));
    responses.push_back(row[response_col]);
    ++rows;
  }
  if (rows == 0) throw DataError(path + ": no data rows");

  const auto p = static_cast<Index>(predictor_cols.size());
  d.x = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(values.data(), rows, p);
  d.z = Eigen::Map<const Eigen::VectorXd>(responses.data(), rows);
  if (!labels.empty()) d.labels = Eigen::Map<const Eigen::VectorXi>(labels.data(), rows);
  d.validate();
  return d;
}

void write_csv(const std::string& path, const Dataset& data, bool with_labels) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out.precision(17);
  for (Index j = 0; j < data.dims(); ++j) out << data.name(j) << ',';
  out << 'z';
  const bool labels = with_labels && data.labels.has_value();
  if (labels) out << ",label";
  out << '\n';
  for (Index i = 0; i < data.rows(); ++i) {
    for (Index j = 0; j < data.dims(); ++j) out << data.x(i, j) << ',';
    out << data.z(i);
    if (labels) out << ',' << (*data.labels)(i);
    out << '\n';
  }
  if (!out) throw DataError("write to '" + path + "' failed");
}

}  // namespace bumphunt
