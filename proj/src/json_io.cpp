#include "vitality/json_io.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <type_traits>

namespace vitality {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed,
                         const char* what) {
  if (!j.is_object()) throw arch::ConfigError(std::string(what) + " must be a JSON object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : allowed) ok = ok || item.key() == k;
    if (!ok) throw arch::ConfigError(std::string(what) + ": unknown field '" + item.key() + "'");
  }
}

template <typename T>
void read_if_present(const json& j, const char* key, T& out, const char* what) {
  auto it = j.find(key);
  if (it == j.end()) return;
  if constexpr (std::is_same_v<T, std::uint64_t>) {
    if (!it->is_number_unsigned()) {
      throw arch::ConfigError(std::string(what) + ": field '" + key +
                              "' must be a non-negative integer");
    }
  }
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw arch::ConfigError(std::string(what) + ": field '" + key + "' has the wrong type");
  }
}

std::uint64_t read_count(const json& j, const char* key, const char* what) {
  auto it = j.find(key);
  if (it == j.end()) throw arch::ConfigError(std::string(what) + ": missing field '" + key + "'");
  if (!it->is_number_unsigned() || it->get<std::uint64_t>() < 1) {
    throw arch::ConfigError(std::string(what) + ": field '" + key + "' must be an integer >= 1");
  }
  return it->get<std::uint64_t>();
}

}  // namespace

namespace arch {

void to_json(json& j, const ArrayShape& s) { j = json{{"rows", s.rows}, {"cols", s.cols}}; }

void from_json(const json& j, ArrayShape& s) {
  reject_unknown_keys(j, {"rows", "cols"}, "array shape");
  read_if_present(j, "rows", s.rows, "array shape");
  read_if_present(j, "cols", s.cols, "array shape");
}

void to_json(json& j, const AcceleratorConfig& c) {
  j = json{{"sa_general", c.sa_general},
           {"sa_diag", c.sa_diag},
           {"accumulator_lanes", c.accumulator_lanes},
           {"adder_lanes", c.adder_lanes},
           {"divider_lanes", c.divider_lanes},
           {"sram_kb_per_buffer", c.sram_kb_per_buffer},
           {"word_bits", c.word_bits},
           {"clock_mhz", c.clock_mhz}};
}

void from_json(const json& j, AcceleratorConfig& c) {
  constexpr const char* what = "accelerator config";
  reject_unknown_keys(j,
                      {"sa_general", "sa_diag", "accumulator_lanes", "adder_lanes",
                       "divider_lanes", "sram_kb_per_buffer", "word_bits", "clock_mhz",
                       "description"},
                      what);
  if (j.contains("sa_general")) from_json(j.at("sa_general"), c.sa_general);
  if (j.contains("sa_diag")) from_json(j.at("sa_diag"), c.sa_diag);
  read_if_present(j, "accumulator_lanes", c.accumulator_lanes, what);
  read_if_present(j, "adder_lanes", c.adder_lanes, what);
  read_if_present(j, "divider_lanes", c.divider_lanes, what);
  read_if_present(j, "sram_kb_per_buffer", c.sram_kb_per_buffer, what);
  read_if_present(j, "word_bits", c.word_bits, what);
  read_if_present(j, "clock_mhz", c.clock_mhz, what);
}

void to_json(json& j, const EnergyTable& t) {
  j = json{{"e_mac", t.e_mac},
           {"e_add", t.e_add},
           {"e_div", t.e_div},
           {"e_acc", t.e_acc},
           {"e_sram_access", t.e_sram_access},
           {"e_dram_access", t.e_dram_access},
           {"gs_pe_overhead", t.gs_pe_overhead}};
}

void from_json(const json& j, EnergyTable& t) {
  constexpr const char* what = "energy table";
  reject_unknown_keys(j,
                      {"e_mac", "e_add", "e_div", "e_acc", "e_sram_access", "e_dram_access",
                       "gs_pe_overhead", "unit", "description"},
                      what);
  if (j.contains("unit") && j.at("unit") != "pJ") {
    throw ConfigError("energy table: only unit \"pJ\" is supported");
  }
  t = reference_energy_table();
  read_if_present(j, "e_mac", t.e_mac, what);
  read_if_present(j, "e_add", t.e_add, what);
  read_if_present(j, "e_div", t.e_div, what);
  read_if_present(j, "e_acc", t.e_acc, what);
  read_if_present(j, "e_sram_access", t.e_sram_access, what);
  read_if_present(j, "e_dram_access", t.e_dram_access, what);
  read_if_present(j, "gs_pe_overhead", t.gs_pe_overhead, what);
}

}  // namespace arch

namespace opcount {

void to_json(json& j, const AttentionDims& d) {
  j = json{{"n", d.n}, {"d", d.d}, {"h", d.h}, {"layers", d.layers}};
}

void to_json(json& j, const OpCounts& c) {
  j = json{{"mul", c.mul}, {"add", c.add}, {"div", c.div}, {"exp", c.exp}};
}

void to_json(json& j, const Stage& s) {
  j = s.dims;
  if (s.vanilla_tokens) j["n_vanilla"] = *s.vanilla_tokens;
  j["mlp_ratio"] = s.mlp_ratio;
}

void from_json(const json& j, Stage& s) {
  constexpr const char* what = "model stage";
  reject_unknown_keys(j, {"n", "d", "h", "layers", "n_vanilla", "mlp_ratio", "note"}, what);
  s.dims.n = read_count(j, "n", what);
  s.dims.d = read_count(j, "d", what);
  s.dims.h = read_count(j, "h", what);
  s.dims.layers = read_count(j, "layers", what);
  if (j.contains("n_vanilla")) s.vanilla_tokens = read_count(j, "n_vanilla", what);
  if (j.contains("mlp_ratio")) s.mlp_ratio = read_count(j, "mlp_ratio", what);
}

void to_json(json& j, const StagedModel& m) {
  j = json{{"name", m.name}, {"stages", m.stages}};
  if (!m.provenance.empty()) j["provenance"] = m.provenance;
}

void from_json(const json& j, StagedModel& m) {
  constexpr const char* what = "model config";
  reject_unknown_keys(j, {"name", "provenance", "stages"}, what);
  if (!j.contains("name") || !j.at("name").is_string()) {
    throw arch::ConfigError("model config: 'name' must be a string");
  }
  m.name = j.at("name").get<std::string>();
  read_if_present(j, "provenance", m.provenance, what);
  if (!j.contains("stages") || !j.at("stages").is_array() || j.at("stages").empty()) {
    throw arch::ConfigError("model config: 'stages' must be a non-empty array");
  }
  m.stages.clear();
  for (const auto& s : j.at("stages")) m.stages.push_back(s.get<Stage>());
}

void to_json(json& j, const ModelRow& r) {
  j = json{{"model", r.name},
           {"taylor", r.taylor},
           {"vanilla", r.vanilla},
           {"ratio", {{"mul", r.ratios.r_mul}, {"add", r.ratios.r_add}, {"div", r.ratios.r_div}}},
           {"formatted",
            {{"taylor_mul", format_millions(r.taylor.mul)},
             {"taylor_add", format_millions(r.taylor.add)},
             {"taylor_div", format_millions(r.taylor.div)},
             {"vanilla_mul", format_millions(r.vanilla.mul)},
             {"vanilla_add", format_millions(r.vanilla.add)},
             {"vanilla_exp", format_millions(r.vanilla.exp)},
             {"vanilla_div", format_millions(r.vanilla.div)},
             {"ratio_mul", format_ratio(r.ratios.r_mul)},
             {"ratio_add", format_ratio(r.ratios.r_add)},
             {"ratio_div", format_ratio(r.ratios.r_div)}}}};
}

StagedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw arch::ConfigError("cannot open model config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw arch::ConfigError(path.string() + ": " + e.what());
  }
  StagedModel m;
  try {
    m = j.get<StagedModel>();
    m.validate();
  } catch (const arch::ConfigError& e) {
    throw arch::ConfigError(path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw arch::ConfigError(path.string() + ": " + e.what());
  }
  return m;
}

}  // namespace opcount

namespace sim {

void to_json(json& j, const EnergyBreakdown& e) {
  j = json{{"data_access", e.data_access},
           {"other_processors", e.other_processors},
           {"systolic_array", e.systolic_array},
           {"overall", e.overall}};
}

void to_json(json& j, const Orderings& o) {
  j = json{{"df_overall_le_gs", o.df_overall_le_gs},
           {"gs_data_access_le_df", o.gs_data_access_le_df},
           {"df_systolic_le_gs", o.df_systolic_le_gs},
           {"df_overall_lt_gs", o.df_overall_lt_gs},
           {"gs_data_access_lt_df", o.gs_data_access_lt_df},
           {"df_systolic_lt_gs", o.df_systolic_lt_gs},
           {"all_hold", o.all_hold()},
           {"ties", json::array()}};
  if (o.df_overall_le_gs && !o.df_overall_lt_gs) j["ties"].push_back("overall");
  if (o.gs_data_access_le_df && !o.gs_data_access_lt_df) j["ties"].push_back("data_access");
  if (o.df_systolic_le_gs && !o.df_systolic_lt_gs) j["ties"].push_back("systolic_array");
}

json report_to_json(const SimReport& r, bool with_timelines) {
  json by_operand = json::object();
  for (const auto& [name, acc] : r.access_tallies.by_operand) {
    by_operand[name] = {{"reads", acc.reads}, {"writes", acc.writes}};
  }
  json steps = json::object();
  for (std::size_t i = 0; i < r.tasks_per_head && i < r.tasks.size(); ++i) {
    const auto& t = r.tasks[i];
    steps[t.label] = {{"chunk", to_string(t.chunk)},
                      {"step", t.step},
                      {"cycles", t.duration},
                      {"start", t.start},
                      {"end", t.end}};
  }
  json j{{"dataflow", arch::to_string(r.dataflow)},
         {"pipelined", r.pipelined},
         {"include_projections", r.include_projections},
         {"dims", r.dims},
         {"head_cycles", r.head_cycles},
         {"sequential_head_cycles", sequential_head_cycles(r)},
         {"total_cycles", r.total_cycles},
         {"latency_seconds", r.latency_seconds},
         {"first_head_tasks", steps},
         {"op_tallies", r.op_tallies},
         {"projection_macs", r.projection_macs},
         {"processor_tallies",
          {{"accumulate", r.processor_tallies.accumulate},
           {"add", r.processor_tallies.add},
           {"divide", r.processor_tallies.divide}}},
         {"access_tallies",
          {{"sram_reads", r.access_tallies.sram_reads},
           {"sram_writes", r.access_tallies.sram_writes},
           {"dram_words", r.access_tallies.dram_words},
           {"by_operand", by_operand}}},
         {"energy_pj", r.energy}};
  if (with_timelines) {
    json tls = json::array();
    for (const auto& tl : r.timelines) {
      json iv = json::array();
      for (const auto& b : tl.busy) iv.push_back(json::array({b.start, b.end, b.task}));
      tls.push_back({{"chunk", to_string(tl.chunk)}, {"intervals", iv}});
    }
    j["timelines"] = tls;
  }
  return j;
}

json comparison_to_json(const ModelComparison& c) {
  json stages = json::array();
  for (const auto& s : c.stages) {
    stages.push_back({{"dims", s.g_stationary.dims},
                      {"g_stationary", report_to_json(s.g_stationary, false)},
                      {"down_forward", report_to_json(s.down_forward, false)},
                      {"delta_pj", s.delta},
                      {"orderings", s.orderings}});
  }
  const double ratio = c.df_total.systolic_array > 0.0
                           ? c.gs_total.systolic_array / c.df_total.systolic_array
                           : 0.0;
  return json{{"model", c.model},
              {"stages", stages},
              {"g_stationary_pj", c.gs_total},
              {"down_forward_pj", c.df_total},
              {"delta_pj", c.delta},
              {"gs_over_df_systolic_ratio", ratio},
              {"orderings", c.orderings}};
}

std::string timeline_csv(const SimReport& r) {
  std::ostringstream os;
  os << "chunk,start,end,task\n";
  for (const auto& tl : r.timelines) {
    for (const auto& b : tl.busy) {
      os << to_string(tl.chunk) << ',' << b.start << ',' << b.end << ",\"" << b.task << "\"\n";
    }
  }
  return os.str();
}

}  // namespace sim

}  // namespace vitality
