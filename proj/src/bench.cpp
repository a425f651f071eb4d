#include "bumphunt/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <thread>
#include <tuple>

#include "bumphunt/errors.hpp"
#include "bumphunt/numkernel.hpp"
#include "bumphunt/pca.hpp"
#include "bumphunt/random.hpp"

namespace bumphunt {

VolumeResult box_volume(const AxisBox& box, const AxisBox* fallback) {
  if (fallback && fallback->dims() != box.dims()) throw ValidationError("box_volume: fallback dimension mismatch");
  VolumeResult v;
  for (Index j = 0; j < box.dims(); ++j) {
    double lo = box.lower(j);
    double hi = box.upper(j);
    if (!std::isfinite(lo) || !std::isfinite(hi)) {
      if (!fallback) throw ValidationError("box_volume: side " + std::to_string(j) + " is open and no fallback given");
      if (!std::isfinite(lo)) lo = fallback->lower(j);
      if (!std::isfinite(hi)) hi = fallback->upper(j);
      v.used_fallback = true;
      if (!std::isfinite(lo) || !std::isfinite(hi)) throw ValidationError("box_volume: fallback side is open");
    }
    const double width = hi - lo;
    if (!(width > 0.0)) {
      v.zero_volume = true;
      continue;
    }
    v.log_volume += std::log(width);
  }
  if (v.zero_volume) v.log_volume = -std::numeric_limits<double>::infinity();
  return v;
}

double mode_mass(const Dataset& data, const AxisBox& box, const PointDensity& density) {
  if (data.rows() == 0) throw DataError("mode_mass: empty dataset");
  double sum = 0.0;
  Eigen::VectorXd row(data.dims());
  for (Index i = 0; i < data.rows(); ++i) {
    if (!box.contains(data.x, i)) continue;
    row = data.x.row(i).transpose();
    sum += density(row, data.z(i));
  }
  return sum / static_cast<double>(data.rows());
}

PopulationBump population_bump_box(const Eigen::MatrixXd& sigma, double beta_prime) {
  if (!(beta_prime > 0.0 && beta_prime < 1.0)) throw ValidationError("population_bump_box: beta' must lie in (0, 1)");
  try {
    cholesky_lower(sigma);
  } catch (const NotPositiveSemidefiniteError&) {
    throw NumericalError("population_bump_box: sigma is singular or indefinite");
  }
  const Index p = sigma.rows();
  const auto eig = sym_eigen(sigma);
  PopulationBump out;
  EllipsoidBump& e = out.ellipsoid;
  e.center = Eigen::VectorXd::Zero(p);
  e.axes = eig.eigenvectors;
  e.beta_prime = beta_prime;
  e.chi2_quantile = chi_squared_quantile(beta_prime, static_cast<double>(p));
  e.semi_axes = (eig.eigenvalues * e.chi2_quantile).cwiseSqrt();
  const double log_prod = e.semi_axes.array().log().sum();
  e.log_volume = log_unit_ball_volume(static_cast<int>(p)) + log_prod;
  out.box = {-e.semi_axes, e.semi_axes};
  out.box_log_volume = static_cast<double>(p) * std::log(2.0) + log_prod;
  if (out.box_log_volume < e.log_volume - 1e-12) {
    throw NumericalError("population_bump_box: circumscribing box smaller than the ellipsoid");
  }
  return out;
}

std::string to_string(Algorithm a) { return a == Algorithm::kPrim ? "prim" : "fastprim"; }
std::string to_string(Space s) { return s == Space::kInput ? "input" : "pc"; }

Algorithm parse_algorithm(const std::string& s) {
  if (s == "prim") return Algorithm::kPrim;
  if (s == "fastprim") return Algorithm::kFastPrim;
  throw ValidationError("unknown algorithm '" + s + "' (expected prim or fastprim)");
}

Space parse_space(const std::string& s) {
  if (s == "input") return Space::kInput;
  if (s == "pc") return Space::kPc;
  throw ValidationError("unknown space '" + s + "' (expected input or pc)");
}

void ExperimentDesign::validate() const {
  if (algorithms.empty()) throw ValidationError("design: no algorithms");
  if (spaces.empty()) throw ValidationError("design: no spaces");
  if (dims.empty()) throw ValidationError("design: no dimensions");
  if (coverages.empty()) throw ValidationError("design: no coverages");
  for (int p : dims)
    if (p < 1) throw ValidationError("design: dimensions must be positive");
  for (int t : coverages)
    if (t < 1) throw ValidationError("design: coverages must be positive");
  if (replicates < 1) throw ValidationError("design: replicates must be positive");
  if (n < 2) throw ValidationError("design: n must be at least 2");
  if (!(w >= 0.0 && w <= 1.0)) throw ValidationError("design: w must lie in [0, 1]");
  if (!(sigma >= 0.0) || !std::isfinite(mu)) throw ValidationError("design: invalid response parameters");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("design: alpha must lie in (0, 1)");
  if (!(beta > 0.0 && beta < 1.0)) throw ValidationError("design: beta must lie in (0, 1)");
  if (p_prime < 0) throw ValidationError("design: p' must be nonnegative");
  for (int p : dims)
    if (p_prime > p) throw ValidationError("design: p' exceeds p = " + std::to_string(p));
  if (threads < 1) throw ValidationError("design: threads must be positive");
}

std::uint64_t replicate_seed(std::uint64_t master_seed, int p, int replicate) {
  return derive_seed(derive_seed(master_seed, static_cast<std::uint64_t>(p)), static_cast<std::uint64_t>(replicate));
}

Dataset replicate_dataset(const ExperimentDesign& design, int p, int replicate) {
  const CovarianceBuild cov = make_covariance(design.covariance, p);
  const MixtureConfig cfg = single_target_design(cov.sigma, design.n, design.mu, design.sigma, design.w);
  return sample_mixture(cfg, replicate_seed(design.master_seed, p, replicate)).data;
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double log_adjusted(double mean, double log_volume) {
  if (!(mean > 0.0) || !std::isfinite(log_volume)) return std::numeric_limits<double>::quiet_NaN();
  return std::log(mean) - log_volume;
}

struct Unit {
  int p;
  int replicate;
};

std::vector<MetricsRecord> run_unit(const ExperimentDesign& design, const Unit& u) {
  std::vector<MetricsRecord> out;
  const std::uint64_t seed = replicate_seed(design.master_seed, u.p, u.replicate);
  const int max_t = *std::max_element(design.coverages.begin(), design.coverages.end());
  const double mu = design.mu;
  const double sd = design.sigma;
  const auto response_density = [mu, sd](const Eigen::VectorXd&, double z) {
    return sd > 0.0 ? normal_pdf((z - mu) / sd) / sd : 0.0;
  };

  const auto blank = [&](Algorithm a, Space s, int t) {
    MetricsRecord r;
    r.algorithm = a;
    r.space = s;
    r.p = u.p;
    r.p_prime = (a == Algorithm::kFastPrim && design.p_prime > 0) ? design.p_prime : u.p;
    r.n = design.n;
    r.coverage = t;
    r.replicate = u.replicate;
    r.seed = seed;
    return r;
  };
  const auto fail_all = [&](Algorithm a, Space s, const std::string& msg) {
    for (int t : design.coverages) {
      MetricsRecord r = blank(a, s, t);
      r.ok = false;
      r.error = msg;
      out.push_back(std::move(r));
    }
  };

  Dataset data;
  try {
    data = replicate_dataset(design, u.p, u.replicate);
  } catch (const std::exception& e) {
    for (Space s : design.spaces)
      for (Algorithm a : design.algorithms) fail_all(a, s, e.what());
    return out;
  }

  for (Space space : design.spaces) {
    Dataset work;
    double fit_seconds = 0.0;
    try {
      if (space == Space::kPc) {
        const auto t0 = std::chrono::steady_clock::now();
        work = rotate(data, fit_rotation(data));
        fit_seconds = seconds_since(t0);
      } else {
        work = data;
      }
    } catch (const std::exception& e) {
      for (Algorithm a : design.algorithms) fail_all(a, space, e.what());
      continue;
    }
    const AxisBox range = bounding_box(work.x);

    for (Algorithm algorithm : design.algorithms) {
      if (algorithm == Algorithm::kPrim) {
        try {
          PrimConfig cfg;
          cfg.alpha = design.alpha;
          cfg.beta = design.beta;
          cfg.coverage = max_t;
          cfg.pasting = design.pasting;
          const BoxTrace trace = cover(work, cfg);
          for (int t : design.coverages) {
            MetricsRecord r = blank(algorithm, space, t);
            if (static_cast<int>(trace.rounds.size()) < t) {
              r.ok = false;
              r.error = "covering stopped after " + std::to_string(trace.rounds.size()) + " rounds";
              out.push_back(std::move(r));
              continue;
            }
            const RegionSummary region = summarize_rounds(work, trace, t);
            const VolumeResult vol = box_volume(region.hull, &range);
            r.support = region.stats.support;
            r.count = region.stats.count;
            r.output_mean = region.stats.output_mean;
            r.log_volume = vol.log_volume;
            r.volume_fallback = vol.used_fallback;
            r.log_volume_adjusted_mean = log_adjusted(r.output_mean, r.log_volume);
            double mass = 0.0;
            for (Index i : region.covered) mass += response_density(Eigen::VectorXd(), work.z(i));
            r.mode_mass = mass / static_cast<double>(work.rows());
            r.seconds = fit_seconds;
            for (int k = 0; k < t; ++k) r.seconds += trace.rounds[static_cast<std::size_t>(k)].seconds;
            r.box_center.resize(region.hull.dims());
            for (Index j = 0; j < r.box_center.size(); ++j) {
              const double lo = std::isfinite(region.hull.lower(j)) ? region.hull.lower(j) : range.lower(j);
              const double hi = std::isfinite(region.hull.upper(j)) ? region.hull.upper(j) : range.upper(j);
              r.box_center(j) = (lo + hi) / 2.0;
            }
            out.push_back(std::move(r));
          }
        } catch (const std::exception& e) {
          fail_all(algorithm, space, e.what());
        }
        continue;
      }

      for (int t : design.coverages) {
        MetricsRecord r = blank(algorithm, space, t);
        try {
          FastPrimConfig cfg;
          cfg.beta = design.beta;
          cfg.coverage = t;
          cfg.p_prime = design.p_prime;
          cfg.mode = design.fastprim_mode;
          cfg.alpha = design.alpha;
          const auto t0 = std::chrono::steady_clock::now();
          const CentralBox cb = fastprim_box(work, cfg);
          r.seconds = fit_seconds + seconds_since(t0);
          const VolumeResult vol = box_volume(cb.box, &range);
          r.support = cb.stats.support;
          r.count = cb.stats.count;
          r.output_mean = cb.stats.output_mean;
          r.log_volume = vol.log_volume;
          r.volume_fallback = vol.used_fallback;
          r.log_volume_adjusted_mean = log_adjusted(r.output_mean, r.log_volume);
          r.mode_mass = mode_mass(work, cb.box, response_density);
          r.box_center.resize(cb.box.dims());
          for (Index j = 0; j < cb.box.dims(); ++j) {
            const double lo = std::isfinite(cb.box.lower(j)) ? cb.box.lower(j) : range.lower(j);
            const double hi = std::isfinite(cb.box.upper(j)) ? cb.box.upper(j) : range.upper(j);
            r.box_center(j) = (lo + hi) / 2.0;
          }
        } catch (const std::exception& e) {
          r.ok = false;
          r.error = e.what();
        }
        out.push_back(std::move(r));
      }
    }
  }
  return out;
}

auto record_key(const MetricsRecord& r) {
  return std::make_tuple(r.p, r.replicate, static_cast<int>(r.space), static_cast<int>(r.algorithm), r.coverage);
}

}  // namespace

std::vector<MetricsRecord> run_experiment(const ExperimentDesign& design) {
  design.validate();
  std::vector<Unit> units;
  for (int p : design.dims)
    for (int r = 0; r < design.replicates; ++r) units.push_back({p, r});

  std::vector<std::vector<MetricsRecord>> results(units.size());
  const auto workers = static_cast<std::size_t>(std::min<int>(design.threads, static_cast<int>(units.size())));
  if (workers <= 1) {
    for (std::size_t k = 0; k < units.size(); ++k) results[k] = run_unit(design, units[k]);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < units.size(); k = next++) results[k] = run_unit(design, units[k]);
      });
    }
    for (auto& th : pool) th.join();
  }

  std::vector<MetricsRecord> all;
  for (auto& part : results) std::move(part.begin(), part.end(), std::back_inserter(all));
  std::stable_sort(all.begin(), all.end(),
                   [](const MetricsRecord& a, const MetricsRecord& b) { return record_key(a) < record_key(b); });
  return all;
}

MeanSe mean_se(std::span<const double> values) {
  MeanSe m;
  std::vector<double> v;
  for (double x : values)
    if (std::isfinite(x)) v.push_back(x);
  m.count = static_cast<int>(v.size());
  if (v.empty()) return m;
  double sum = 0.0;
  for (double x : v) sum += x;
  m.mean = sum / static_cast<double>(v.size());
  if (v.size() < 2) return m;
  double ss = 0.0;
  for (double x : v) ss += (x - m.mean) * (x - m.mean);
  m.variance = ss / static_cast<double>(v.size() - 1);
  m.se = std::sqrt(m.variance / static_cast<double>(v.size()));
  return m;
}

std::vector<CellAggregate> aggregate(const std::vector<MetricsRecord>& records) {
  using Key = std::tuple<int, Index, int, int>;  // algorithm, p, space, coverage
  std::map<Key, std::vector<const MetricsRecord*>> cells;
  for (const auto& r : records)
    cells[{static_cast<int>(r.algorithm), r.p, static_cast<int>(r.space), r.coverage}].push_back(&r);

  std::vector<CellAggregate> out;
  for (const auto& [key, rs] : cells) {
    CellAggregate c;
    c.algorithm = rs.front()->algorithm;
    c.space = rs.front()->space;
    c.p = rs.front()->p;
    c.p_prime = rs.front()->p_prime;
    c.coverage = rs.front()->coverage;
    std::vector<double> support, mean, logv, lva, mass, secs;
    for (const MetricsRecord* r : rs) {
      if (!r->ok) {
        ++c.failed;
        continue;
      }
      ++c.ok;
      support.push_back(r->support);
      mean.push_back(r->output_mean);
      logv.push_back(r->log_volume);
      lva.push_back(r->log_volume_adjusted_mean);
      mass.push_back(r->mode_mass);
      secs.push_back(r->seconds);
    }
    c.support = mean_se(support);
    c.output_mean = mean_se(mean);
    c.log_volume = mean_se(logv);
    c.log_volume_adjusted_mean = mean_se(lva);
    c.mode_mass = mean_se(mass);
    c.seconds = mean_se(secs);
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<GainRow> gain_profile(const std::vector<MetricsRecord>& records) {
  using Key = std::tuple<int, Index, int>;  // algorithm, p, coverage
  struct Pair {
    std::map<int, double> input, pc;  // replicate -> log volume-adjusted mean
  };
  std::map<Key, Pair> cells;
  for (const auto& r : records) {
    Pair& cell = cells[{static_cast<int>(r.algorithm), r.p, r.coverage}];
    if (!r.ok || !std::isfinite(r.log_volume_adjusted_mean)) continue;
    (r.space == Space::kInput ? cell.input : cell.pc)[r.replicate] = r.log_volume_adjusted_mean;
  }

  std::vector<GainRow> out;
  for (const auto& [key, cell] : cells) {
    GainRow g;
    g.algorithm = static_cast<Algorithm>(std::get<0>(key));
    g.p = std::get<1>(key);
    g.coverage = std::get<2>(key);
    std::vector<double> a, b;  // log pc, log input
    for (const auto& [rep, lb] : cell.input) {
      const auto it = cell.pc.find(rep);
      if (it == cell.pc.end()) continue;
      a.push_back(it->second);
      b.push_back(lb);
    }
    g.matched = static_cast<int>(a.size());
    if (a.empty()) {
      g.missing = true;
      out.push_back(g);
      continue;
    }
    // Work with exp(log - shift) so high-dimensional volumes stay representable.
    const double shift = std::max(*std::max_element(a.begin(), a.end()), *std::max_element(b.begin(), b.end()));
    const auto m = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0, mlog = 0.0, above = 0.0;
    std::vector<double> ea(a.size()), eb(b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      ea[i] = std::exp(a[i] - shift);
      eb[i] = std::exp(b[i] - shift);
      ma += ea[i];
      mb += eb[i];
      mlog += a[i] - b[i];
      above += a[i] > b[i] ? 1.0 : 0.0;
    }
    ma /= m;
    mb /= m;
    g.ratio = ma / mb;
    g.mean_log_ratio = mlog / m;
    g.fraction_above_one = above / m;
    if (a.size() >= 2) {
      double saa = 0.0, sbb = 0.0, sab = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        saa += (ea[i] - ma) * (ea[i] - ma);
        sbb += (eb[i] - mb) * (eb[i] - mb);
        sab += (ea[i] - ma) * (eb[i] - mb);
      }
      saa /= m - 1.0;
      sbb /= m - 1.0;
      sab /= m - 1.0;
      const double var = (saa / (mb * mb) + ma * ma * sbb / (mb * mb * mb * mb) - 2.0 * ma * sab / (mb * mb * mb)) / m;
      g.ratio_se = std::sqrt(std::max(0.0, var));
    }
    out.push_back(g);
  }
  return out;
}

TimingResult timing_harness(const std::function<void()>& task, int repetitions) {
  if (repetitions < 3) throw ValidationError("timing_harness: need at least 3 repetitions");
  task();
  TimingResult r;
  for (int k = 0; k < repetitions; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    task();
    r.samples.push_back(seconds_since(t0));
  }
  const MeanSe m = mean_se(r.samples);
  r.mean_seconds = m.mean;
  r.se = m.se;
  return r;
}

}  // namespace bumphunt
