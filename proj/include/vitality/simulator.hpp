#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vitality/archmodel.hpp"
#include "vitality/opcount.hpp"

namespace vitality::sim {

using arch::AcceleratorConfig;
using arch::ArrayShape;
using arch::DataflowKind;
using arch::EnergyTable;
using opcount::AttentionDims;
using opcount::OpCounts;

enum class Chunk { Accumulator, Adder, Divider, SAGeneral, SADiag };
inline constexpr Chunk kAllChunks[] = {Chunk::Accumulator, Chunk::Adder, Chunk::Divider,
                                      Chunk::SAGeneral, Chunk::SADiag};
std::string_view to_string(Chunk c);

// ---------------------------------------------------------------------------
// Systolic matmul timing
//
// O = A * B with A: rows x inner, B: inner x cols on a P_r x P_c PE array.
//
// Input stationary: B is pinned in P_r x P_c tiles. Per tile (k_t x m_t):
//   k_t                      preload
//   + rows + k_t + m_t - 2   skewed stream of A columns and drain
// Output stationary: O is pinned in P_r x P_c tiles. Per tile (n_t x m_t):
//   (n_t + m_t - 2) fill skew + inner accumulate + n_t drain
// Tiles run back to back without overlap. Output rows leave the array one per
// cycle at the end of the run, so the first complete output row is available
// after cycles - (rows - 1).
// ---------------------------------------------------------------------------

struct MatShape {
  std::uint64_t rows = 1;
  std::uint64_t cols = 1;
};

enum class MatmulFlavor { InputStationary, OutputStationary };

struct MatmulOptions {
  // Input stationary only: B already sits in the PEs, so neither the preload
  // cycles nor the reads of B are spent.
  bool stationary_resident = false;
};

struct MatmulTiming {
  std::uint64_t cycles = 0;
  std::uint64_t first_row_cycles = 0;
  std::uint64_t drain_cycles = 0;  // cycles after the last A element enters
  std::uint64_t macs = 0;
  std::uint64_t tiles = 0;
  std::uint64_t a_reads = 0;
  std::uint64_t b_reads = 0;
  std::uint64_t out_writes = 0;

  std::uint64_t reads() const { return a_reads + b_reads; }
  std::uint64_t writes() const { return out_writes; }
};

MatmulTiming sim_systolic_matmul(MatShape a, MatShape b, ArrayShape array, MatmulFlavor flavor,
                                 MatmulOptions opts = {});

// ---------------------------------------------------------------------------
// Pre/post-processor arrays: one element per lane per cycle, fully pipelined.
// ---------------------------------------------------------------------------

enum class PreOp { Accumulate, Add, Divide };
enum class DividerPattern { NotApplicable, SingleDivisor, MultiDivisor };

// ceil(elements / lanes). The divider pattern changes operand routing only.
// Throws arch::ConfigError for a pattern on a non-divider op (or a divider
// without one).
std::uint64_t sim_preprocessor(PreOp op, std::uint64_t elements, std::uint64_t lanes,
                               DividerPattern pattern = DividerPattern::NotApplicable);

// ---------------------------------------------------------------------------
// Attention-layer schedule
// ---------------------------------------------------------------------------

struct Interval {
  std::uint64_t start = 0;
  std::uint64_t end = 0;  // exclusive
  std::string task;
  friend bool operator==(const Interval&, const Interval&) = default;
};

struct ChunkTimeline {
  Chunk chunk;
  std::vector<Interval> busy;
};

enum class DepKind {
  Full,    // consumer waits for the producer to finish
  Stream,  // consumer may start once the producer emits its first unit
};

struct Dependency {
  std::size_t producer = 0;
  DepKind kind = DepKind::Full;
};

struct ScheduledTask {
  std::string label;
  Chunk chunk = Chunk::SAGeneral;
  int step = 0;  // Taylor-attention step 1..6; 0 for projections/MLP
  std::uint64_t duration = 0;
  std::uint64_t first_emit = 0;  // cycles from start until the first unit is out
  std::uint64_t drain = 0;       // cycles needed after the last streamed input
  std::vector<Dependency> deps;
  std::uint64_t start = 0;
  std::uint64_t end = 0;
};

struct OperandAccess {
  std::uint64_t reads = 0;
  std::uint64_t writes = 0;
  friend bool operator==(const OperandAccess&, const OperandAccess&) = default;
};

struct AccessTallies {
  std::uint64_t sram_reads = 0;
  std::uint64_t sram_writes = 0;
  std::uint64_t dram_words = 0;
  std::map<std::string, OperandAccess> by_operand;  // Q, K, V, G, Z
};

// Energies in picojoules.
struct EnergyBreakdown {
  double data_access = 0.0;
  double other_processors = 0.0;
  double systolic_array = 0.0;
  double overall = 0.0;
};

struct ProcessorTallies {
  std::uint64_t accumulate = 0;
  std::uint64_t add = 0;
  std::uint64_t divide = 0;
};

struct SimOptions {
  DataflowKind dataflow = DataflowKind::DownForward;
  bool pipelined = true;
  bool include_projections = false;
  std::uint64_t mlp_ratio = 4;
};

struct SimReport {
  DataflowKind dataflow = DataflowKind::DownForward;
  bool pipelined = true;
  bool include_projections = false;
  AttentionDims dims;
  std::uint64_t head_cycles = 0;   // one head of one layer
  std::uint64_t total_cycles = 0;  // all h * layers heads back to back
  double latency_seconds = 0.0;
  std::vector<ChunkTimeline> timelines;
  std::vector<ScheduledTask> tasks;  // every task instance, in issue order
  std::size_t tasks_per_head = 0;
  OpCounts op_tallies;               // attention only
  std::uint64_t projection_macs = 0;
  ProcessorTallies processor_tallies;
  AccessTallies access_tallies;
  EnergyBreakdown energy;
};

// Simulates every head of every layer of one stage. Heads run back to back.
// Throws arch::ConfigError if an operand does not fit its SRAM buffer, or if
// G-stationary is requested for a G that does not fit in SA-General.
SimReport sim_attention_layer(const AttentionDims& dims, const AcceleratorConfig& cfg,
                              const SimOptions& opts, const EnergyTable& energy);

// Sum of all task durations of one head, i.e. the fully sequential latency.
std::uint64_t sequential_head_cycles(const SimReport& report);

// Returns human-readable violations: dependency edges not honoured, overlapping
// intervals on a chunk, or total_cycles not matching the timelines.
std::vector<std::string> check_schedule(const SimReport& report);

// ---------------------------------------------------------------------------
// Dataflow comparison
// ---------------------------------------------------------------------------

struct Orderings {
  bool df_overall_le_gs = false;
  bool gs_data_access_le_df = false;
  bool df_systolic_le_gs = false;
  // Strict versions of the same three comparisons.
  bool df_overall_lt_gs = false;
  bool gs_data_access_lt_df = false;
  bool df_systolic_lt_gs = false;

  bool all_hold() const { return df_overall_le_gs && gs_data_access_le_df && df_systolic_le_gs; }
  bool all_strict() const {
    return df_overall_lt_gs && gs_data_access_lt_df && df_systolic_lt_gs;
  }
};

Orderings evaluate_orderings(const EnergyBreakdown& gs, const EnergyBreakdown& df);

struct DataflowComparison {
  SimReport g_stationary;
  SimReport down_forward;
  EnergyBreakdown delta;  // down_forward - g_stationary
  Orderings orderings;
};

DataflowComparison compare_dataflows(const AttentionDims& dims, const AcceleratorConfig& cfg,
                                     const EnergyTable& energy);

struct ModelComparison {
  std::string model;
  std::vector<DataflowComparison> stages;
  EnergyBreakdown gs_total;
  EnergyBreakdown df_total;
  EnergyBreakdown delta;
  Orderings orderings;  // on the totals
};

ModelComparison compare_model(const opcount::StagedModel& model, const AcceleratorConfig& cfg,
                              const EnergyTable& energy);

}  // namespace vitality::sim
