#include "bumphunt/fastprim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iterator>

#include "bumphunt/errors.hpp"
#include "bumphunt/numkernel.hpp"

namespace bumphunt {

void FastPrimConfig::validate() const {
  if (!(beta > 0.0 && beta < 1.0)) throw ValidationError("fastprim: beta must lie in (0, 1)");
  if (coverage < 1) throw ValidationError("fastprim: coverage must be at least 1");
  if (p_prime < 0) throw ValidationError("fastprim: p' must be nonnegative");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("fastprim: alpha must lie in (0, 1)");
}

Index FastPrimConfig::peeled_dims(Index p) const {
  if (p_prime == 0) return p;
  if (p_prime > p) {
    throw ValidationError("fastprim: p' = " + std::to_string(p_prime) + " exceeds p = " + std::to_string(p));
  }
  return p_prime;
}

double beta_total(double beta, int t) {
  if (!(beta > 0.0 && beta < 1.0)) throw ValidationError("beta_total: beta must lie in (0, 1)");
  if (t < 1) throw ValidationError("beta_total: t must be at least 1");
  return -std::expm1(static_cast<double>(t) * std::log1p(-beta));
}

std::pair<double, double> central_quantile_levels(double beta_total, Index p_prime, bool literal) {
  if (!(beta_total >= 0.0 && beta_total <= 1.0)) throw ValidationError("central box: beta_T must lie in [0, 1]");
  if (p_prime < 1) throw ValidationError("central box: p' must be at least 1");
  const double b = std::pow(beta_total, 1.0 / static_cast<double>(p_prime));
  if (literal) return {b / 2.0, 1.0 - b / 2.0};
  return {(1.0 - b) / 2.0, (1.0 + b) / 2.0};
}

CentralBox central_box_empirical(const Dataset& data, const FastPrimConfig& config) {
  config.validate();
  const Index n = data.rows();
  const Index p = data.dims();
  const Index pp = config.peeled_dims(p);
  const double bt = beta_total(config.beta, config.coverage);
  const double per_dim = std::pow(bt, 1.0 / static_cast<double>(pp));
  if (static_cast<double>(n) * per_dim < 2.0) {
    throw DataError("central box: n * beta_T^(1/p') = " + std::to_string(static_cast<double>(n) * per_dim) +
                    " is below 2");
  }
  const auto [lo, hi] = central_quantile_levels(bt, pp, config.literal_quantiles);
  CentralBox out{AxisBox::unbounded(p), {}};
  std::vector<double> col(static_cast<std::size_t>(n));
  for (Index j = 0; j < pp; ++j) {
    for (Index i = 0; i < n; ++i) col[static_cast<std::size_t>(i)] = data.x(i, j);
    std::sort(col.begin(), col.end());
    out.box.lower(j) = empirical_quantile(col, lo);
    out.box.upper(j) = empirical_quantile(col, hi);
  }
  const ActiveSet rows = all_rows(data);
  out.stats = box_stats(data, rows, out.box);
  return out;
}

AxisBox central_box_population(const Eigen::VectorXd& mean, const Eigen::VectorXd& sd, double beta_total,
                               Index p_prime, bool literal) {
  if (mean.size() != sd.size()) throw ValidationError("central box: mean and sd differ in length");
  if ((sd.array() < 0.0).any()) throw ValidationError("central box: negative standard deviation");
  const Index p = mean.size();
  const Index pp = p_prime == 0 ? p : p_prime;
  if (pp > p) throw ValidationError("central box: p' exceeds p");
  const auto [lo, hi] = central_quantile_levels(beta_total, pp, literal);
  const double z = hi >= 1.0 ? std::numeric_limits<double>::infinity() : (hi <= 0.5 ? 0.0 : normal_quantile(hi));
  AxisBox box = AxisBox::unbounded(p);
  for (Index j = 0; j < pp; ++j) {
    box.lower(j) = mean(j) - sd(j) * z;
    box.upper(j) = mean(j) + sd(j) * z;
  }
  return box;
}

AxisBox central_box_population(const RotationModel& model, double beta_total) {
  return central_box_population(Eigen::VectorXd::Zero(model.dims()), model.lambda.cwiseMax(0.0).cwiseSqrt(),
                                beta_total, model.p_prime);
}

AxisBox central_box_population(const Eigen::MatrixXd& sigma, double beta_total, Index p_prime) {
  detail::require_square_finite(sigma, "central_box_population");
  return central_box_population(Eigen::VectorXd::Zero(sigma.rows()), sigma.diagonal().cwiseMax(0.0).cwiseSqrt(),
                                beta_total, p_prime);
}

namespace {

struct FaceCut {
  double lo = 0.0;
  double hi = 0.0;
  bool lo_void = true;
  bool hi_void = true;
};

// One round of simultaneous 2p'-sided trimming down to ceil(beta * |active|) points.
PeelResult trim_round(const Dataset& data, std::span<const Index> active, Index pp, double alpha, double beta) {
  PeelResult r;
  r.box = AxisBox::unbounded(data.dims());
  r.inside.assign(active.begin(), active.end());
  const auto n_active = static_cast<Index>(active.size());
  const auto target = static_cast<Index>(quantile_rank(static_cast<std::size_t>(n_active), beta));
  std::vector<double> vals;
  std::vector<FaceCut> cuts(static_cast<std::size_t>(pp));

  while (static_cast<Index>(r.inside.size()) > target) {
    const auto m = static_cast<Index>(r.inside.size());
    const double share = std::min(alpha, 1.0 - static_cast<double>(target) / static_cast<double>(m));
    const auto k = std::max<Index>(
        1, static_cast<Index>(std::ceil(share * static_cast<double>(m) / (2.0 * static_cast<double>(pp)) - 1e-9)));
    if (2 * k >= m) break;
    vals.resize(static_cast<std::size_t>(m));
    bool any = false;
    for (Index j = 0; j < pp; ++j) {
      for (Index t = 0; t < m; ++t) vals[static_cast<std::size_t>(t)] = data.x(r.inside[static_cast<std::size_t>(t)], j);
      std::sort(vals.begin(), vals.end());
      FaceCut& c = cuts[static_cast<std::size_t>(j)];
      c.lo = vals[static_cast<std::size_t>(k - 1)];
      c.hi = vals[static_cast<std::size_t>(m - k)];
      c.lo_void = c.lo >= vals.back();
      c.hi_void = c.hi <= vals.front();
      any = any || !c.lo_void || !c.hi_void;
    }
    if (!any) break;

    ActiveSet kept;
    kept.reserve(r.inside.size());
    for (Index i : r.inside) {
      bool keep = true;
      for (Index j = 0; j < pp && keep; ++j) {
        const FaceCut& c = cuts[static_cast<std::size_t>(j)];
        const double v = data.x(i, j);
        keep = (c.lo_void || v > c.lo) && (c.hi_void || v < c.hi);
      }
      if (keep) kept.push_back(i);
    }
    if (kept.empty()) break;

    const AxisBox before = r.box;
    const AxisBox tight = bounding_box(data.x, kept);
    double sum = 0.0;
    for (Index i : kept) sum += data.z(i);
    const BoxStats stats = make_stats(static_cast<Index>(kept.size()), sum, n_active);
    for (Index j = 0; j < pp; ++j) {
      const FaceCut& c = cuts[static_cast<std::size_t>(j)];
      if (!c.lo_void) r.box.lower(j) = tight.lower(j);
      if (!c.hi_void) r.box.upper(j) = tight.upper(j);
      if (r.box.lower(j) != before.lower(j)) r.steps.push_back({0, TraceAction::kPeel, j, Side::kLow, r.box.lower(j), stats});
      if (r.box.upper(j) != before.upper(j)) r.steps.push_back({0, TraceAction::kPeel, j, Side::kHigh, r.box.upper(j), stats});
    }
    r.inside = std::move(kept);
  }
  double sum = 0.0;
  for (Index i : r.inside) sum += data.z(i);
  r.stats = make_stats(static_cast<Index>(r.inside.size()), sum, n_active);
  return r;
}

}  // namespace

FastPrimTrace fastprim_iterative(const Dataset& data, const FastPrimConfig& config) {
  config.validate();
  data.validate();
  const Index n = data.rows();
  const Index pp = config.peeled_dims(data.dims());
  const double bt = beta_total(config.beta, config.coverage);
  const double per_dim = std::pow(bt, 1.0 / static_cast<double>(pp));
  if (static_cast<double>(n) * per_dim < 2.0) {
    throw DataError("fastprim: n * beta_T^(1/p') = " + std::to_string(static_cast<double>(n) * per_dim) +
                    " is below 2");
  }

  FastPrimTrace out;
  BoxTrace& trace = out.trace;
  trace.n = n;
  trace.rho = data.z.mean();
  const auto min_active = static_cast<std::size_t>(std::ceil(1.0 / config.beta - 1e-9));

  ActiveSet active = all_rows(data);
  for (int k = 1; k <= config.coverage; ++k) {
    if (active.size() < min_active) {
      trace.stopped_early = true;
      break;
    }
    const auto t0 = std::chrono::steady_clock::now();
    PeelResult peeled = trim_round(data, active, pp, config.alpha, config.beta);
    for (auto& s : peeled.steps) {
      s.round = k;
      trace.steps.push_back(s);
    }
    RoundResult round;
    round.peels = static_cast<int>(peeled.steps.size());
    round.box = std::move(peeled.box);
    round.covered = std::move(peeled.inside);
    round.stats = peeled.stats;
    // fastPRIM places boxes without looking at Z, so every round joins the region.
    round.accepted = true;
    trace.steps.push_back({k, TraceAction::kAcceptBox, -1, Side::kLow, 0.0, round.stats});

    ActiveSet rest;
    rest.reserve(active.size() - round.covered.size());
    std::set_difference(active.begin(), active.end(), round.covered.begin(), round.covered.end(),
                        std::back_inserter(rest));
    active = std::move(rest);
    round.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    trace.rounds.push_back(std::move(round));
  }
  out.region = summarize_rounds(data, trace, config.coverage);
  return out;
}

CentralBox fastprim_box(const Dataset& data, const FastPrimConfig& config) {
  if (config.mode == FastPrimMode::kClosedForm) return central_box_empirical(data, config);
  const FastPrimTrace it = fastprim_iterative(data, config);
  return {it.region.hull, it.region.stats};
}

FastPrimPcaResult fastprim_pca(const Dataset& data, const FastPrimConfig& config) {
  config.validate();
  FastPrimPcaResult out;
  out.model = fit_rotation(data);
  out.rotated = rotate(data, out.model);
  const Index pp = config.peeled_dims(data.dims());
  out.model.p_prime = pp;
  if (config.mode == FastPrimMode::kClosedForm) {
    CentralBox cb = central_box_empirical(out.rotated, config);
    out.box = std::move(cb.box);
    out.stats = cb.stats;
  } else {
    out.iterative = fastprim_iterative(out.rotated, config);
    out.box = out.iterative->region.hull;
    out.stats = out.iterative->region.stats;
  }
  out.rule = box_to_input_rule(out.box, out.model);
  return out;
}

}  // namespace bumphunt
