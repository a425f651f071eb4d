#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bumphunt/box.hpp"
#include "bumphunt/dataset.hpp"

namespace bumphunt {

/// How peel_step ranks the 2d candidates.
enum class PeelCriterion {
  kMinRemovedMass,    // argmin of the response mass removed (I_n of the slab)
  kMaxRemainingMean,  // argmax of the mean left in the box
};

/// When a peeling sequence stops.
enum class PeelStopRule {
  kMinSupport,  // peel while the peeled box keeps support >= beta
  kThreshold,   // peel while the current box has support >= beta + alpha
};

struct PrimConfig {
  double alpha = 0.05;
  double beta = 0.05;
  int coverage = 20;
  bool pasting = false;
  std::optional<double> rho;  // acceptance threshold, default: global mean of z
  PeelCriterion criterion = PeelCriterion::kMinRemovedMass;
  PeelStopRule stop_rule = PeelStopRule::kMinSupport;

  void validate() const;
};

enum class Side { kLow, kHigh };

struct PeelCandidate {
  Index dim = 0;
  Side side = Side::kLow;
  double cut = 0.0;        // quantile order statistic; points at or beyond it go
  double new_bound = 0.0;  // surviving extreme value, the box's new face
  Index removed_count = 0;
  double removed_sum = 0.0;
  bool is_void = true;     // removes nothing, or everything
};

/// The 2d one-sided quantile peels of `box`, ordered (dim 0 low, dim 0 high, dim 1 low, ...).
std::vector<PeelCandidate> peel_candidates(const Dataset& data, std::span<const Index> active, const AxisBox& box,
                                           double alpha);

struct PeelChoice {
  PeelCandidate candidate;
  AxisBox box;
};

/// Best candidate under `criterion`; ties go to the lower dimension, then to
/// the low side. Empty when every candidate is void.
std::optional<PeelChoice> peel_step(const Dataset& data, std::span<const Index> active, const AxisBox& box,
                                    double alpha, PeelCriterion criterion = PeelCriterion::kMinRemovedMass);

enum class TraceAction { kPeel, kPaste, kAcceptBox, kRejectBox };

std::string to_string(TraceAction action);
std::string to_string(Side side);

struct TraceStep {
  int round = 0;
  TraceAction action = TraceAction::kPeel;
  Index dim = -1;
  Side side = Side::kLow;
  double value = 0.0;  // new face position for peel/paste
  BoxStats stats;      // box stats after the action, relative to the round's active set
};

struct PeelResult {
  AxisBox box;
  BoxStats stats;
  ActiveSet inside;
  std::vector<TraceStep> steps;
};

/// Peels from the unbounded box until the stop rule fires or no candidate
/// is left. Throws DataError when |active| < ceil(1 / beta).
PeelResult peel_to_support(const Dataset& data, std::span<const Index> active, const PrimConfig& config);

struct PasteResult {
  AxisBox box;
  int iterations = 0;  // accepted enlargements
  std::vector<TraceStep> steps;
};

/// Pastes slabs of ceil(alpha * count) nearest outside points onto the face
/// that most raises the box mean, while the mean strictly increases.
PasteResult paste_step(const Dataset& data, std::span<const Index> active, const AxisBox& box, double alpha);

/// One covering round: the box found on S^(k) and its statistics there.
struct RoundResult {
  AxisBox box;
  BoxStats stats;
  bool accepted = false;
  int peels = 0;
  int paste_iterations = 0;
  ActiveSet covered;  // rows of S^(k) inside the box, removed afterwards
  double seconds = 0.0;
};

struct BoxTrace {
  Index n = 0;
  double rho = 0.0;
  std::vector<TraceStep> steps;
  std::vector<RoundResult> rounds;
  bool stopped_early = false;
};

/// Peel (+ paste) on S^(1), S^(2) = S^(1) minus B_1, ... for config.coverage
/// rounds, stopping early once fewer than ceil(10 / beta) points remain.
BoxTrace cover(const Dataset& data, const PrimConfig& config);

/// Summary of the first `rounds` rounds of a covering trace, taken as a region.
struct RegionSummary {
  int rounds = 0;
  int accepted = 0;
  ActiveSet covered;         // union of the rounds' covered rows
  BoxStats stats;            // of the covered rows relative to all n rows
  AxisBox hull;              // bounding box of the rounds' boxes
  double hull_support = 0.0; // fraction of all rows inside the hull
  bool hollow = false;       // hull holds rows that no round covered
};

RegionSummary summarize_rounds(const Dataset& data, const BoxTrace& trace, int rounds);

}  // namespace bumphunt
