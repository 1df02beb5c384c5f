#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

namespace vitality::arch {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ArrayShape {
  std::uint64_t rows = 1;
  std::uint64_t cols = 1;
  friend bool operator==(const ArrayShape&, const ArrayShape&) = default;
};

inline constexpr std::array<std::string_view, 4> kSramBuffers = {"Q", "K", "V", "O"};

// Reference values: 64x64 SA-General, 64x1 SA-Diag, 64-lane pre/post-processor
// arrays, four 50 KB SRAM buffers, 16-bit words, 500 MHz.
struct AcceleratorConfig {
  ArrayShape sa_general{64, 64};
  ArrayShape sa_diag{64, 1};
  std::uint64_t accumulator_lanes = 64;
  std::uint64_t adder_lanes = 64;
  std::uint64_t divider_lanes = 64;
  std::uint64_t sram_kb_per_buffer = 50;
  std::uint64_t word_bits = 16;
  std::uint64_t clock_mhz = 500;

  // Throws ConfigError naming the offending field.
  void validate() const;

  std::uint64_t buffer_capacity_words() const {
    return sram_kb_per_buffer * 1024 * 8 / word_bits;
  }
  double cycles_to_seconds(std::uint64_t cycles) const {
    return static_cast<double>(cycles) / (static_cast<double>(clock_mhz) * 1e6);
  }

  friend bool operator==(const AcceleratorConfig&, const AcceleratorConfig&) = default;
};

// Per-operation energies in picojoules.
struct EnergyTable {
  double e_mac = 0.0;
  double e_add = 0.0;
  double e_div = 0.0;
  double e_acc = 0.0;
  double e_sram_access = 0.0;  // per word
  double e_dram_access = 0.0;  // per word
  double gs_pe_overhead = 1.0;

  void validate() const;
  friend bool operator==(const EnergyTable&, const EnergyTable&) = default;
};

enum class DataflowKind { InputStationary, OutputStationary, GStationary, DownForward };

std::string_view to_string(DataflowKind kind);
// Accepts "input-stationary", "output-stationary", "g-stationary", "down-forward".
DataflowKind parse_dataflow(std::string_view name);

// Default table. Unit energies are the component powers of the reference
// 28 nm implementation divided by (parallel units x 500 MHz); the G-stationary
// PE overhead is set so the GS:DF systolic energy ratio is 1.125.
EnergyTable reference_energy_table();

// Missing fields take their defaults. An empty file yields the defaults.
AcceleratorConfig load_config(const std::filesystem::path& path);
void save_config(const AcceleratorConfig& cfg, const std::filesystem::path& path);

EnergyTable load_energy_table(const std::filesystem::path& path);
void save_energy_table(const EnergyTable& table, const std::filesystem::path& path);

}  // namespace vitality::arch
