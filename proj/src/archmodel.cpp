#include "vitality/archmodel.hpp"

#include <fstream>
#include <sstream>

#include "vitality/json_io.hpp"

namespace vitality::arch {

namespace {

void require_positive(std::uint64_t v, const char* field) {
  if (v < 1) throw ConfigError(std::string("accelerator config: ") + field + " must be >= 1");
}

void require_nonnegative(double v, const char* field) {
  if (!(v >= 0.0)) throw ConfigError(std::string("energy table: ") + field + " must be >= 0");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json parse_object(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return nlohmann::json::object();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError(path.string() + ": top-level value must be an object");
  return j;
}

void write_file(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// Reference implementation figures: component power (mW) and parallel units.
constexpr double kClockHz = 500e6;
constexpr double kSaGeneralMw = 1277.0;
constexpr double kAccumulatorMw = 92.83;
constexpr double kAdderMw = 6.34;
constexpr double kDividerMw = 46.26;
constexpr double kSramMw = 22.9;
constexpr double kSramPortWords = 64.0;

constexpr double per_op_pj(double milliwatts, double units) {
  return milliwatts * 1e-3 / (units * kClockHz) * 1e12;
}

}  // namespace

void AcceleratorConfig::validate() const {
  require_positive(sa_general.rows, "sa_general.rows");
  require_positive(sa_general.cols, "sa_general.cols");
  require_positive(sa_diag.rows, "sa_diag.rows");
  require_positive(sa_diag.cols, "sa_diag.cols");
  if (sa_diag.cols != 1) throw ConfigError("accelerator config: sa_diag.cols must be 1");
  require_positive(accumulator_lanes, "accumulator_lanes");
  require_positive(adder_lanes, "adder_lanes");
  require_positive(divider_lanes, "divider_lanes");
  require_positive(sram_kb_per_buffer, "sram_kb_per_buffer");
  require_positive(word_bits, "word_bits");
  require_positive(clock_mhz, "clock_mhz");
}

void EnergyTable::validate() const {
  require_nonnegative(e_mac, "e_mac");
  require_nonnegative(e_add, "e_add");
  require_nonnegative(e_div, "e_div");
  require_nonnegative(e_acc, "e_acc");
  require_nonnegative(e_sram_access, "e_sram_access");
  require_nonnegative(e_dram_access, "e_dram_access");
  if (!(gs_pe_overhead >= 1.0)) throw ConfigError("energy table: gs_pe_overhead must be >= 1");
}

std::string_view to_string(DataflowKind kind) {
  switch (kind) {
    case DataflowKind::InputStationary: return "input-stationary";
    case DataflowKind::OutputStationary: return "output-stationary";
    case DataflowKind::GStationary: return "g-stationary";
    case DataflowKind::DownForward: return "down-forward";
  }
  return "unknown";
}

DataflowKind parse_dataflow(std::string_view name) {
  for (auto k : {DataflowKind::InputStationary, DataflowKind::OutputStationary,
                 DataflowKind::GStationary, DataflowKind::DownForward}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown dataflow '" + std::string(name) +
                    "' (valid: input-stationary, output-stationary, g-stationary, down-forward)");
}

EnergyTable reference_energy_table() {
  EnergyTable t;
  t.e_mac = per_op_pj(kSaGeneralMw, 64.0 * 64.0);
  t.e_acc = per_op_pj(kAccumulatorMw, 64.0);
  t.e_add = per_op_pj(kAdderMw, 64.0);
  t.e_div = per_op_pj(kDividerMw, 64.0);
  t.e_sram_access = per_op_pj(kSramMw, 4.0 * kSramPortWords);
  t.e_dram_access = 0.0;
  t.gs_pe_overhead = 1.125;
  return t;
}

AcceleratorConfig load_config(const std::filesystem::path& path) {
  const auto j = parse_object(path);
  AcceleratorConfig cfg;
  try {
    cfg = j.get<AcceleratorConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return cfg;
}

void save_config(const AcceleratorConfig& cfg, const std::filesystem::path& path) {
  write_file(path, nlohmann::json(cfg));
}

EnergyTable load_energy_table(const std::filesystem::path& path) {
  const auto j = parse_object(path);
  EnergyTable t;
  try {
    t = j.get<EnergyTable>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  try {
    t.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return t;
}

void save_energy_table(const EnergyTable& table, const std::filesystem::path& path) {
  write_file(path, nlohmann::json(table));
}

}  // namespace vitality::arch
