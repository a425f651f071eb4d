#include "bumphunt/prim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iterator>

#include "bumphunt/errors.hpp"
#include "bumphunt/numkernel.hpp"

namespace bumphunt {

void PrimConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("prim: alpha must lie in (0, 1)");
  if (!(beta > 0.0 && beta < 1.0)) throw ValidationError("prim: beta must lie in (0, 1)");
  if (coverage < 1) throw ValidationError("prim: coverage must be at least 1");
  if (rho && !std::isfinite(*rho)) throw ValidationError("prim: rho must be finite");
}

std::string to_string(TraceAction action) {
  switch (action) {
    case TraceAction::kPeel: return "peel";
    case TraceAction::kPaste: return "paste";
    case TraceAction::kAcceptBox: return "accept-box";
    case TraceAction::kRejectBox: return "reject-box";
  }
  return "?";
}

std::string to_string(Side side) { return side == Side::kLow ? "low" : "high"; }

namespace {

// Count with a guard against q*n landing a hair above an integer.
Index ceil_count(double x) {
  double k = std::ceil(x);
  if (k - x > 1.0 - 1e-9) k -= 1.0;
  return std::max<Index>(1, static_cast<Index>(k));
}

double z_sum(const Dataset& data, std::span<const Index> rows) {
  double s = 0.0;
  for (Index i : rows) s += data.z(i);
  return s;
}

// Both one-sided peels of every dimension over the in-box rows. Each side
// removes the ceil(alpha * m) most extreme values together with anything
// tied with the last of them.
std::vector<PeelCandidate> candidates_on(const Dataset& data, std::span<const Index> inside, double alpha) {
  const auto m = static_cast<Index>(inside.size());
  const Index d = data.dims();
  std::vector<PeelCandidate> out;
  out.reserve(static_cast<std::size_t>(2 * d));
  if (m == 0) {
    for (Index j = 0; j < d; ++j) {
      out.push_back({j, Side::kLow});
      out.push_back({j, Side::kHigh});
    }
    return out;
  }
  const auto k = static_cast<Index>(quantile_rank(static_cast<std::size_t>(m), alpha));
  std::vector<double> vals(static_cast<std::size_t>(m));
  std::vector<double> scratch(static_cast<std::size_t>(m));
  constexpr double inf = std::numeric_limits<double>::infinity();

  for (Index j = 0; j < d; ++j) {
    for (Index t = 0; t < m; ++t) vals[static_cast<std::size_t>(t)] = data.x(inside[static_cast<std::size_t>(t)], j);
    scratch = vals;
    std::nth_element(scratch.begin(), scratch.begin() + (k - 1), scratch.end());
    const double cut_lo = scratch[static_cast<std::size_t>(k - 1)];
    std::nth_element(scratch.begin(), scratch.begin() + (m - k), scratch.end());
    const double cut_hi = scratch[static_cast<std::size_t>(m - k)];

    PeelCandidate lo{j, Side::kLow, cut_lo, inf};
    PeelCandidate hi{j, Side::kHigh, cut_hi, -inf};
    lo.removed_count = hi.removed_count = 0;
    for (Index t = 0; t < m; ++t) {
      const double v = vals[static_cast<std::size_t>(t)];
      const double zv = data.z(inside[static_cast<std::size_t>(t)]);
      if (v <= cut_lo) {
        ++lo.removed_count;
        lo.removed_sum += zv;
      } else {
        lo.new_bound = std::min(lo.new_bound, v);
      }
      if (v >= cut_hi) {
        ++hi.removed_count;
        hi.removed_sum += zv;
      } else {
        hi.new_bound = std::max(hi.new_bound, v);
      }
    }
    lo.is_void = lo.removed_count == 0 || lo.removed_count == m;
    hi.is_void = hi.removed_count == 0 || hi.removed_count == m;
    out.push_back(lo);
    out.push_back(hi);
  }
  return out;
}

const PeelCandidate* choose(const std::vector<PeelCandidate>& cands, double total_sum, Index m,
                            PeelCriterion criterion) {
  const PeelCandidate* best = nullptr;
  double best_score = 0.0;
  for (const auto& c : cands) {
    if (c.is_void) continue;
    const double score = criterion == PeelCriterion::kMinRemovedMass
                             ? -c.removed_sum
                             : (total_sum - c.removed_sum) / static_cast<double>(m - c.removed_count);
    // Strict improvement keeps the earliest candidate (lowest dim, low side) on ties.
    if (best == nullptr || score > best_score) {
      best = &c;
      best_score = score;
    }
  }
  return best;
}

void apply(AxisBox& box, const PeelCandidate& c) {
  if (c.side == Side::kLow)
    box.lower(c.dim) = c.new_bound;
  else
    box.upper(c.dim) = c.new_bound;
}

ActiveSet keep_after(const Dataset& data, const ActiveSet& inside, const PeelCandidate& c) {
  ActiveSet kept;
  kept.reserve(inside.size());
  for (Index i : inside) {
    const double v = data.x(i, c.dim);
    if (c.side == Side::kLow ? v > c.cut : v < c.cut) kept.push_back(i);
  }
  return kept;
}

}  // namespace

std::vector<PeelCandidate> peel_candidates(const Dataset& data, std::span<const Index> active, const AxisBox& box,
                                           double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("peel_candidates: alpha must lie in (0, 1)");
  const ActiveSet inside = rows_inside(data, active, box);
  return candidates_on(data, inside, alpha);
}

std::optional<PeelChoice> peel_step(const Dataset& data, std::span<const Index> active, const AxisBox& box,
                                    double alpha, PeelCriterion criterion) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("peel_step: alpha must lie in (0, 1)");
  const ActiveSet inside = rows_inside(data, active, box);
  const auto cands = candidates_on(data, inside, alpha);
  const PeelCandidate* best = choose(cands, z_sum(data, inside), static_cast<Index>(inside.size()), criterion);
  if (best == nullptr) return std::nullopt;
  PeelChoice choice{*best, box};
  apply(choice.box, *best);
  return choice;
}

PeelResult peel_to_support(const Dataset& data, std::span<const Index> active, const PrimConfig& config) {
  config.validate();
  const auto n_active = static_cast<Index>(active.size());
  const auto min_points = static_cast<Index>(std::ceil(1.0 / config.beta - 1e-9));
  if (n_active < min_points) {
    throw DataError("peel_to_support: " + std::to_string(n_active) + " active points, need at least " +
                    std::to_string(min_points));
  }

  PeelResult r;
  r.box = AxisBox::unbounded(data.dims());
  r.inside.assign(active.begin(), active.end());
  double sum = z_sum(data, active);
  const double na = static_cast<double>(n_active);

  for (;;) {
    const auto m = static_cast<Index>(r.inside.size());
    if (config.stop_rule == PeelStopRule::kThreshold &&
        static_cast<double>(m) + 1e-9 < (config.beta + config.alpha) * na) {
      break;
    }
    const auto cands = candidates_on(data, r.inside, config.alpha);
    const PeelCandidate* best = choose(cands, sum, m, config.criterion);
    if (best == nullptr) break;
    if (config.stop_rule == PeelStopRule::kMinSupport &&
        static_cast<double>(m - best->removed_count) + 1e-9 < config.beta * na) {
      break;
    }
    apply(r.box, *best);
    r.inside = keep_after(data, r.inside, *best);
    sum -= best->removed_sum;
    r.steps.push_back({0, TraceAction::kPeel, best->dim, best->side, best->new_bound,
                       make_stats(static_cast<Index>(r.inside.size()), sum, n_active)});
  }
  // Recompute from scratch so the reported mean carries no running-sum drift.
  r.stats = make_stats(static_cast<Index>(r.inside.size()), z_sum(data, r.inside), n_active);
  return r;
}

PasteResult paste_step(const Dataset& data, std::span<const Index> active, const AxisBox& box, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("paste_step: alpha must lie in (0, 1)");
  PasteResult r;
  r.box = box;
  const auto n_active = static_cast<Index>(active.size());
  ActiveSet inside = rows_inside(data, active, r.box);
  if (inside.empty()) return r;
  double sum = z_sum(data, inside);
  const Index d = data.dims();

  struct Slab {
    Index dim;
    Side side;
    double bound;
    Index added;
    double added_sum;
  };

  for (;;) {
    const auto count = static_cast<Index>(inside.size());
    const Index want = ceil_count(alpha * static_cast<double>(count));
    const double current = sum / static_cast<double>(count);
    std::optional<Slab> best;
    double best_mean = current;

    for (Index j = 0; j < d; ++j) {
      for (Side side : {Side::kLow, Side::kHigh}) {
        const double face = side == Side::kLow ? r.box.lower(j) : r.box.upper(j);
        if (!std::isfinite(face)) continue;
        // Outside rows adjacent to this face: inside every other side.
        std::vector<std::pair<double, Index>> outside;
        for (Index i : active) {
          const double v = data.x(i, j);
          if (side == Side::kLow ? !(v < face) : !(v > face)) continue;
          bool ok = true;
          for (Index k = 0; k < d && ok; ++k) {
            if (k == j) continue;
            ok = data.x(i, k) >= r.box.lower(k) && data.x(i, k) <= r.box.upper(k);
          }
          if (ok) outside.emplace_back(side == Side::kLow ? -v : v, i);
        }
        if (outside.empty()) continue;
        std::sort(outside.begin(), outside.end());
        const auto take = static_cast<std::size_t>(std::min<Index>(want, static_cast<Index>(outside.size())));
        const double edge = outside[take - 1].first;
        Slab s{j, side, side == Side::kLow ? -edge : edge, 0, 0.0};
        for (const auto& [key, i] : outside) {
          if (key > edge) break;
          ++s.added;
          s.added_sum += data.z(i);
        }
        const double mean = (sum + s.added_sum) / static_cast<double>(count + s.added);
        if (mean > best_mean) {
          best_mean = mean;
          best = s;
        }
      }
    }
    if (!best) break;
    (best->side == Side::kLow ? r.box.lower : r.box.upper)(best->dim) = best->bound;
    inside = rows_inside(data, active, r.box);
    sum = z_sum(data, inside);
    ++r.iterations;
    r.steps.push_back({0, TraceAction::kPaste, best->dim, best->side, best->bound,
                       make_stats(static_cast<Index>(inside.size()), sum, n_active)});
  }
  return r;
}

BoxTrace cover(const Dataset& data, const PrimConfig& config) {
  config.validate();
  data.validate();
  const Index n = data.rows();
  if (static_cast<double>(n) * config.beta < 10.0) {
    throw DataError("cover: n * beta = " + std::to_string(static_cast<double>(n) * config.beta) +
                    " is below 10; too few points for the requested support");
  }
  BoxTrace trace;
  trace.n = n;
  trace.rho = config.rho.value_or(data.z.mean());
  const auto min_active = static_cast<std::size_t>(std::ceil(10.0 / config.beta - 1e-9));

  ActiveSet active = all_rows(data);
  for (int k = 1; k <= config.coverage; ++k) {
    if (active.size() < min_active) {
      trace.stopped_early = true;
      break;
    }
    const auto t0 = std::chrono::steady_clock::now();
    PeelResult peeled = peel_to_support(data, active, config);
    for (auto& s : peeled.steps) {
      s.round = k;
      trace.steps.push_back(s);
    }
    RoundResult round;
    round.peels = static_cast<int>(peeled.steps.size());
    round.box = std::move(peeled.box);
    if (config.pasting) {
      PasteResult pasted = paste_step(data, active, round.box, config.alpha);
      for (auto& s : pasted.steps) {
        s.round = k;
        trace.steps.push_back(s);
      }
      round.paste_iterations = pasted.iterations;
      round.box = std::move(pasted.box);
      round.covered = rows_inside(data, active, round.box);
    } else {
      round.covered = std::move(peeled.inside);
    }
    round.stats = make_stats(static_cast<Index>(round.covered.size()), z_sum(data, round.covered),
                             static_cast<Index>(active.size()));
    round.accepted = round.stats.output_mean >= trace.rho;
    trace.steps.push_back({k, round.accepted ? TraceAction::kAcceptBox : TraceAction::kRejectBox, -1, Side::kLow,
                           0.0, round.stats});

    ActiveSet rest;
    rest.reserve(active.size() - round.covered.size());
    std::set_difference(active.begin(), active.end(), round.covered.begin(), round.covered.end(),
                        std::back_inserter(rest));
    active = std::move(rest);
    round.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    trace.rounds.push_back(std::move(round));
  }
  return trace;
}

RegionSummary summarize_rounds(const Dataset& data, const BoxTrace& trace, int rounds) {
  RegionSummary s;
  s.rounds = std::min<int>(rounds, static_cast<int>(trace.rounds.size()));
  if (s.rounds < 1) throw ValidationError("summarize_rounds: no rounds to summarize");
  s.hull = trace.rounds.front().box;
  for (int k = 0; k < s.rounds; ++k) {
    const auto& r = trace.rounds[static_cast<std::size_t>(k)];
    s.accepted += r.accepted ? 1 : 0;
    s.covered.insert(s.covered.end(), r.covered.begin(), r.covered.end());
    s.hull = hull(s.hull, r.box);
  }
  std::sort(s.covered.begin(), s.covered.end());
  s.stats = make_stats(static_cast<Index>(s.covered.size()), z_sum(data, s.covered), data.rows());
  Index in_hull = 0;
  for (Index i = 0; i < data.rows(); ++i) in_hull += s.hull.contains(data.x, i) ? 1 : 0;
  s.hull_support = static_cast<double>(in_hull) / static_cast<double>(data.rows());
  s.hollow = in_hull > static_cast<Index>(s.covered.size());
  return s;
}

}  // namespace bumphunt
