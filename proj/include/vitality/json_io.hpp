#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "vitality/archmodel.hpp"
#include "vitality/opcount.hpp"
#include "vitality/simulator.hpp"

// JSON (de)serialisation for configs and reports. Readers are strict: unknown
// keys and wrongly typed values raise arch::ConfigError.

namespace vitality::arch {
void to_json(nlohmann::json& j, const ArrayShape& s);
void from_json(const nlohmann::json& j, ArrayShape& s);
void to_json(nlohmann::json& j, const AcceleratorConfig& c);
void from_json(const nlohmann::json& j, AcceleratorConfig& c);
void to_json(nlohmann::json& j, const EnergyTable& t);
void from_json(const nlohmann::json& j, EnergyTable& t);
}  // namespace vitality::arch

namespace vitality::opcount {
void to_json(nlohmann::json& j, const AttentionDims& d);
void to_json(nlohmann::json& j, const OpCounts& c);
void to_json(nlohmann::json& j, const Stage& s);
void from_json(const nlohmann::json& j, Stage& s);
void to_json(nlohmann::json& j, const StagedModel& m);
void from_json(const nlohmann::json& j, StagedModel& m);
void to_json(nlohmann::json& j, const ModelRow& r);

// Model config file: { "name", "provenance"?, "stages": [ { n, d, h, layers,
// n_vanilla?, mlp_ratio? } ] }
StagedModel load_model(const std::filesystem::path& path);
}  // namespace vitality::opcount

namespace vitality::sim {
void to_json(nlohmann::json& j, const EnergyBreakdown& e);
void to_json(nlohmann::json& j, const Orderings& o);
// `with_timelines` controls whether the per-chunk intervals are embedded.
nlohmann::json report_to_json(const SimReport& r, bool with_timelines = true);
nlohmann::json comparison_to_json(const ModelComparison& c);
// chunk,start,end,task
std::string timeline_csv(const SimReport& r);
}  // namespace vitality::sim
