#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "bumphunt/bench.hpp"
#include "bumphunt/box.hpp"
#include "bumphunt/fastprim.hpp"
#include "bumphunt/pca.hpp"
#include "bumphunt/prim.hpp"

namespace bumphunt {

using nlohmann::json;

// Open box sides serialize as null.
json to_json(const AxisBox& box);
json to_json(const BoxStats& stats);
json to_json(const TraceStep& step);
json to_json(const BoxTrace& trace);
json to_json(const RegionSummary& region);
json to_json(const RotationModel& model);

/// [{coefficients, lower, upper}, ...] with bounds on coefficients' x, i.e.
/// the rotation center folded into the bounds.
json to_json(const LinearRule& rule);

/// "dim,name,lower,upper" with one row per dimension; open sides as -inf/inf.
void write_box_csv(const std::string& path, const AxisBox& box, const std::vector<std::string>& names = {});

/// Tidy results, one record per row.
void write_metrics_csv(const std::string& path, const std::vector<MetricsRecord>& records);

json to_json(const CellAggregate& cell);
json to_json(const GainRow& row);
json to_json(const ExperimentDesign& design);

/// Strict parse: unknown keys and wrong types raise ValidationError.
ExperimentDesign design_from_json(const json& j);

/// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

void write_json(const std::string& path, const json& j);

}  // namespace bumphunt
