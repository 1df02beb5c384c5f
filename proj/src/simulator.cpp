#include "vitality/simulator.hpp"

#include <algorithm>
#include <optional>
#include <stdexcept>

namespace vitality::sim {

using arch::ConfigError;

namespace {

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

// Splits `extent` into chunks of at most `tile`.
std::vector<std::uint64_t> tile_sizes(std::uint64_t extent, std::uint64_t tile) {
  std::vector<std::uint64_t> out;
  for (std::uint64_t done = 0; done < extent; done += tile) out.push_back(std::min(tile, extent - done));
  return out;
}

void add_access(AccessTallies& t, const std::string& operand, std::uint64_t reads,
                std::uint64_t writes) {
  auto& a = t.by_operand[operand];
  a.reads += reads;
  a.writes += writes;
  t.sram_reads += reads;
  t.sram_writes += writes;
}

void check_buffer(const AcceleratorConfig& cfg, std::string_view buffer, std::uint64_t words,
                  const std::string& what) {
  const auto cap = cfg.buffer_capacity_words();
  if (words > cap) {
    throw ConfigError("SRAM buffer " + std::string(buffer) + " overflow: " + what + " needs " +
                      std::to_string(words) + " words, capacity " + std::to_string(cap));
  }
}

// Per-head task template; start/end are filled by the scheduler.
struct HeadPlan {
  std::vector<ScheduledTask> tasks;
  std::uint64_t attention_macs = 0;
  std::uint64_t projection_macs = 0;
  ProcessorTallies processors;
  AccessTallies access;
};

HeadPlan plan_head(const AttentionDims& dims, const AcceleratorConfig& cfg,
                   const SimOptions& opts) {
  const std::uint64_t n = dims.n;
  const std::uint64_t d = dims.d;
  const bool gs = opts.dataflow == DataflowKind::GStationary;
  HeadPlan plan;
  auto& tasks = plan.tasks;

  auto add_task = [&](std::string label, Chunk chunk, int step, std::uint64_t duration,
                      std::uint64_t first_emit, std::uint64_t drain,
                      std::vector<Dependency> deps) {
    ScheduledTask t;
    t.label = std::move(label);
    t.chunk = chunk;
    t.step = step;
    t.duration = duration;
    t.first_emit = first_emit;
    t.drain = drain;
    t.deps = std::move(deps);
    tasks.push_back(std::move(t));
    return tasks.size() - 1;
  };

  const MatShape nd{n, d};
  const MatShape dd{d, d};

  std::optional<std::size_t> proj_k;
  if (opts.include_projections) {
    std::optional<std::size_t> prev;
    for (const char* name : {"proj_q", "proj_k", "proj_v"}) {
      const auto t = sim_systolic_matmul(nd, dd, cfg.sa_general, MatmulFlavor::InputStationary);
      std::vector<Dependency> deps;
      if (prev) deps.push_back({*prev, DepKind::Full});
      prev = add_task(name, Chunk::SAGeneral, 0, t.cycles, t.cycles, t.drain_cycles, deps);
      if (std::string_view(name) == "proj_k") proj_k = prev;
      plan.projection_macs += t.macs;
    }
  }

  const std::uint64_t row_acc = ceil_div(d, cfg.accumulator_lanes);
  const std::uint64_t row_add = ceil_div(d, cfg.adder_lanes);
  const std::uint64_t row_div = ceil_div(d, cfg.divider_lanes);

  // Step 1: column sums of K, single-divisor mean, subtraction.
  const auto k_sum_cycles = sim_preprocessor(PreOp::Accumulate, n * d, cfg.accumulator_lanes);
  std::vector<Dependency> k_deps;
  if (proj_k) k_deps.push_back({*proj_k, DepKind::Full});
  const auto t_ksum = add_task("k_colsum", Chunk::Accumulator, 1, k_sum_cycles, k_sum_cycles,
                               row_acc, k_deps);
  plan.processors.accumulate += n * d;
  add_access(plan.access, "K", n * d, 0);

  const auto mean_cycles =
      sim_preprocessor(PreOp::Divide, d, cfg.divider_lanes, DividerPattern::SingleDivisor);
  const auto t_mean = add_task("k_mean", Chunk::Divider, 1, mean_cycles, mean_cycles, mean_cycles,
                               {{t_ksum, DepKind::Full}});
  plan.processors.divide += d;

  const auto center_cycles = sim_preprocessor(PreOp::Add, n * d, cfg.adder_lanes);
  const auto t_center = add_task("k_center", Chunk::Adder, 1, center_cycles, row_add, row_add,
                                 {{t_mean, DepKind::Full}});
  plan.processors.add += n * d;
  add_access(plan.access, "K", n * d, 0);

  // Step 2: G = K_hat^T V. K_hat arrives from the adder array over the NoC.
  MatmulTiming g_timing;
  if (gs) {
    if (d > cfg.sa_general.rows || d > cfg.sa_general.cols) {
      throw ConfigError("g-stationary needs G (" + std::to_string(d) + "x" + std::to_string(d) +
                        ") to fit SA-General (" + std::to_string(cfg.sa_general.rows) + "x" +
                        std::to_string(cfg.sa_general.cols) + ")");
    }
    g_timing = sim_systolic_matmul({d, n}, nd, cfg.sa_general, MatmulFlavor::OutputStationary);
    add_access(plan.access, "V", g_timing.b_reads, 0);
    // G stays in the PEs: no write-back.
    plan.access.by_operand["G"];
  } else {
    g_timing = sim_systolic_matmul({d, n}, nd, cfg.sa_general, MatmulFlavor::InputStationary);
    add_access(plan.access, "V", g_timing.b_reads, 0);
    add_access(plan.access, "G", 0, g_timing.out_writes);
  }
  const auto t_g = add_task("G=KhatT*V", Chunk::SAGeneral, 2, g_timing.cycles, g_timing.cycles,
                            g_timing.drain_cycles, {{t_center, DepKind::Stream}});
  plan.attention_macs += g_timing.macs;

  // Step 3: k_hat_sum and v_sum, fed alongside the systolic array.
  const auto sums_cycles = sim_preprocessor(PreOp::Accumulate, 2 * n * d, cfg.accumulator_lanes);
  const auto t_sums = add_task("khat_sum,v_sum", Chunk::Accumulator, 3, sums_cycles, sums_cycles,
                               ceil_div(2 * d, cfg.accumulator_lanes),
                               {{t_center, DepKind::Stream}});
  plan.processors.accumulate += 2 * n * d;
  add_access(plan.access, "V", n * d, 0);

  // Step 4: Q k_hat_sum^T on SA-Diag plus the extra adder unit for t_D.
  // k_hat_sum is preloaded from the accumulator registers, Q is broadcast.
  const auto diag = sim_systolic_matmul(nd, {d, 1}, cfg.sa_diag, MatmulFlavor::InputStationary);
  const auto t_den = add_task("Q*khat_sumT,t_D", Chunk::SADiag, 4, diag.cycles + 1,
                              diag.first_row_cycles + 1, diag.drain_cycles + 1,
                              {{t_g, DepKind::Full}, {t_sums, DepKind::Full}});
  plan.attention_macs += diag.macs;
  plan.processors.add += n;

  // Step 5: QG on SA-General with G stationary, then T_N on the adder array.
  MatmulOptions qg_opts;
  qg_opts.stationary_resident = gs;
  const auto qg =
      sim_systolic_matmul(nd, dd, cfg.sa_general, MatmulFlavor::InputStationary, qg_opts);
  add_access(plan.access, "Q", qg.a_reads, 0);
  if (!gs) add_access(plan.access, "G", qg.b_reads, 0);
  const auto t_qg = add_task("Q*G", Chunk::SAGeneral, 5, qg.cycles, qg.first_row_cycles,
                             qg.drain_cycles, {{t_g, DepKind::Full}, {t_sums, DepKind::Full}});
  plan.attention_macs += qg.macs;

  const auto tn_cycles = sim_preprocessor(PreOp::Add, n * d, cfg.adder_lanes);
  const auto t_tn = add_task("T_N", Chunk::Adder, 5, tn_cycles, row_add, row_add,
                             {{t_qg, DepKind::Stream}});
  plan.processors.add += n * d;

  // Step 6: multi-divisor division.
  const auto z_cycles =
      sim_preprocessor(PreOp::Divide, n * d, cfg.divider_lanes, DividerPattern::MultiDivisor);
  const auto t_z = add_task("Z", Chunk::Divider, 6, z_cycles, row_div, row_div,
                            {{t_tn, DepKind::Stream}, {t_den, DepKind::Stream}});
  plan.processors.divide += n * d;
  add_access(plan.access, "Z", 0, n * d);

  if (opts.include_projections) {
    const auto t = sim_systolic_matmul(nd, dd, cfg.sa_general, MatmulFlavor::InputStationary);
    add_task("proj_o", Chunk::SAGeneral, 0, t.cycles, t.cycles, t.drain_cycles,
             {{t_z, DepKind::Full}});
    plan.projection_macs += t.macs;
  }

  // Compulsory off-chip traffic: Q, K, V in and Z out.
  plan.access.dram_words += 4 * n * d;
  return plan;
}

// Places tasks[first..] on the chunks. Indices in deps are absolute.
void schedule(std::vector<ScheduledTask>& tasks, std::size_t first, std::uint64_t origin,
              bool pipelined, std::map<Chunk, std::uint64_t>& chunk_free) {
  std::uint64_t serial_cursor = origin;
  for (std::size_t i = first; i < tasks.size(); ++i) {
    auto& t = tasks[i];
    if (!pipelined) {
      t.start = serial_cursor;
      t.end = t.start + t.duration;
      serial_cursor = t.end;
      chunk_free[t.chunk] = t.end;
      continue;
    }
    std::uint64_t start = std::max(origin, chunk_free[t.chunk]);
    std::uint64_t end_floor = 0;
    for (const auto& dep : t.deps) {
      const auto& p = tasks[dep.producer];
      if (dep.kind == DepKind::Full) {
        start = std::max(start, p.end);
      } else {
        start = std::max(start, p.start + p.first_emit);
        end_floor = std::max(end_floor, p.end + t.drain);
      }
    }
    t.start = start;
    t.end = std::max(start + t.duration, end_floor);
    chunk_free[t.chunk] = t.end;
  }
}

EnergyBreakdown compute_energy(const SimReport& r, const EnergyTable& e) {
  EnergyBreakdown out;
  const double macs = static_cast<double>(r.op_tallies.mul + r.projection_macs);
  const double pe_factor = r.dataflow == DataflowKind::GStationary ? e.gs_pe_overhead : 1.0;
  out.systolic_array = macs * e.e_mac * pe_factor;
  out.other_processors = static_cast<double>(r.processor_tallies.accumulate) * e.e_acc +
                         static_cast<double>(r.processor_tallies.add) * e.e_add +
                         static_cast<double>(r.processor_tallies.divide) * e.e_div;
  out.data_access = static_cast<double>(r.access_tallies.sram_reads + r.access_tallies.sram_writes) *
                        e.e_sram_access +
                    static_cast<double>(r.access_tallies.dram_words) * e.e_dram_access;
  out.overall = out.data_access + out.other_processors + out.systolic_array;
  return out;
}

EnergyBreakdown operator-(const EnergyBreakdown& a, const EnergyBreakdown& b) {
  return {a.data_access - b.data_access, a.other_processors - b.other_processors,
          a.systolic_array - b.systolic_array, a.overall - b.overall};
}

void accumulate(EnergyBreakdown& into, const EnergyBreakdown& e) {
  into.data_access += e.data_access;
  into.other_processors += e.other_processors;
  into.systolic_array += e.systolic_array;
  into.overall = into.data_access + into.other_processors + into.systolic_array;
}

}  // namespace

std::string_view to_string(Chunk c) {
  switch (c) {
    case Chunk::Accumulator: return "Accumulator";
    case Chunk::Adder: return "Adder";
    case Chunk::Divider: return "Divider";
    case Chunk::SAGeneral: return "SAGeneral";
    case Chunk::SADiag: return "SADiag";
  }
  return "unknown";
}

MatmulTiming sim_systolic_matmul(MatShape a, MatShape b, ArrayShape array, MatmulFlavor flavor,
                                 MatmulOptions opts) {
  if (array.rows < 1 || array.cols < 1) throw ConfigError("PE array dimensions must be >= 1");
  if (a.rows < 1 || a.cols < 1 || b.rows < 1 || b.cols < 1) {
    throw std::invalid_argument("systolic matmul operands must have every dimension >= 1");
  }
  if (a.cols != b.rows) {
    throw std::invalid_argument("systolic matmul inner dimensions differ: " +
                                std::to_string(a.cols) + " vs " + std::to_string(b.rows));
  }
  const std::uint64_t rows = a.rows;
  const std::uint64_t inner = a.cols;
  const std::uint64_t cols = b.cols;

  MatmulTiming t;
  t.macs = rows * inner * cols;
  t.out_writes = rows * cols;

  if (flavor == MatmulFlavor::InputStationary) {
    for (auto k_t : tile_sizes(inner, array.rows)) {
      for (auto m_t : tile_sizes(cols, array.cols)) {
        const std::uint64_t preload = opts.stationary_resident ? 0 : k_t;
        t.cycles += preload + (rows + k_t + m_t - 2);
        t.a_reads += rows * k_t;
        if (!opts.stationary_resident) t.b_reads += k_t * m_t;
        t.drain_cycles = m_t;
        ++t.tiles;
      }
    }
  } else {
    for (auto n_t : tile_sizes(rows, array.rows)) {
      for (auto m_t : tile_sizes(cols, array.cols)) {
        t.cycles += (n_t + m_t - 2) + inner + n_t;
        t.a_reads += n_t * inner;
        t.b_reads += inner * m_t;
        t.drain_cycles = n_t + m_t;
        ++t.tiles;
      }
    }
  }
  t.first_row_cycles = t.cycles - (rows - 1);
  return t;
}

std::uint64_t sim_preprocessor(PreOp op, std::uint64_t elements, std::uint64_t lanes,
                               DividerPattern pattern) {
  if (lanes < 1) throw ConfigError("pre/post-processor lanes must be >= 1");
  const bool is_div = op == PreOp::Divide;
  if (!is_div && pattern != DividerPattern::NotApplicable) {
    throw ConfigError("divider pattern given for a non-divider pre/post-processor");
  }
  if (is_div && pattern == DividerPattern::NotApplicable) {
    throw ConfigError("divider requires a single- or multi-divisor pattern");
  }
  return ceil_div(elements, lanes);
}

SimReport sim_attention_layer(const AttentionDims& dims, const AcceleratorConfig& cfg,
                              const SimOptions& opts, const EnergyTable& energy) {
  dims.validate();
  cfg.validate();
  energy.validate();
  if (opts.dataflow != DataflowKind::GStationary && opts.dataflow != DataflowKind::DownForward) {
    throw ConfigError("attention-layer dataflow must be g-stationary or down-forward, got " +
                      std::string(arch::to_string(opts.dataflow)));
  }

  const std::uint64_t nd = dims.n * dims.d;
  check_buffer(cfg, "Q", nd, "Q");
  check_buffer(cfg, "K", nd, "K");
  check_buffer(cfg, "V", nd, "V");
  check_buffer(cfg, "O", opts.dataflow == DataflowKind::DownForward ? nd + dims.d * dims.d : nd,
               opts.dataflow == DataflowKind::DownForward ? "Z and spilled G" : "Z");

  const HeadPlan plan = plan_head(dims, cfg, opts);

  SimReport r;
  r.dataflow = opts.dataflow;
  r.pipelined = opts.pipelined;
  r.include_projections = opts.include_projections;
  r.dims = dims;
  r.tasks_per_head = plan.tasks.size();

  const std::uint64_t reps = dims.h * dims.layers;
  std::map<Chunk, std::uint64_t> chunk_free;
  std::uint64_t cursor = 0;
  for (std::uint64_t layer = 0; layer < dims.layers; ++layer) {
    for (std::uint64_t head = 0; head < dims.h; ++head) {
      const std::size_t base = r.tasks.size();
      for (auto t : plan.tasks) {
        for (auto& dep : t.deps) dep.producer += base;
        if (dims.h * dims.layers > 1) {
          t.label += "@L" + std::to_string(layer) + "H" + std::to_string(head);
        }
        r.tasks.push_back(std::move(t));
      }
      schedule(r.tasks, base, cursor, opts.pipelined, chunk_free);
      for (std::size_t i = base; i < r.tasks.size(); ++i) cursor = std::max(cursor, r.tasks[i].end);
      if (layer == 0 && head == 0) r.head_cycles = cursor;
    }
    if (opts.include_projections) {
      // Per-layer MLP on SA-General: (n x hd)(hd x r*hd) then back.
      const std::uint64_t width = dims.h * dims.d;
      const std::uint64_t hidden = opts.mlp_ratio * width;
      const std::size_t last = r.tasks.size() - 1;
      const std::size_t base = r.tasks.size();
      const auto fc1 = sim_systolic_matmul({dims.n, width}, {width, hidden}, cfg.sa_general,
                                           MatmulFlavor::InputStationary);
      const auto fc2 = sim_systolic_matmul({dims.n, hidden}, {hidden, width}, cfg.sa_general,
                                           MatmulFlavor::InputStationary);
      for (const auto* m : {&fc1, &fc2}) {
        ScheduledTask t;
        t.label = std::string(m == &fc1 ? "mlp_fc1" : "mlp_fc2") + "@L" + std::to_string(layer);
        t.chunk = Chunk::SAGeneral;
        t.duration = m->cycles;
        t.first_emit = m->cycles;
        t.drain = m->drain_cycles;
        t.deps.push_back({r.tasks.size() == base ? last : r.tasks.size() - 1, DepKind::Full});
        r.tasks.push_back(std::move(t));
        r.projection_macs += m->macs;
      }
      schedule(r.tasks, base, cursor, opts.pipelined, chunk_free);
      cursor = r.tasks.back().end;
    }
  }
  r.total_cycles = cursor;
  r.latency_seconds = cfg.cycles_to_seconds(r.total_cycles);

  r.op_tallies.mul = plan.attention_macs * reps;
  r.op_tallies.add = (plan.attention_macs + plan.processors.accumulate + plan.processors.add) * reps;
  r.op_tallies.div = plan.processors.divide * reps;
  r.op_tallies.exp = 0;
  r.projection_macs += plan.projection_macs * reps;
  r.processor_tallies = {plan.processors.accumulate * reps, plan.processors.add * reps,
                         plan.processors.divide * reps};
  r.access_tallies.sram_reads = plan.access.sram_reads * reps;
  r.access_tallies.sram_writes = plan.access.sram_writes * reps;
  r.access_tallies.dram_words = plan.access.dram_words * reps;
  for (const auto& [name, acc] : plan.access.by_operand) {
    r.access_tallies.by_operand[name] = {acc.reads * reps, acc.writes * reps};
  }

  for (Chunk c : kAllChunks) r.timelines.push_back({c, {}});
  for (const auto& t : r.tasks) {
    auto& tl = r.timelines[static_cast<std::size_t>(t.chunk)];
    tl.busy.push_back({t.start, t.end, t.label});
  }
  for (auto& tl : r.timelines) {
    std::stable_sort(tl.busy.begin(), tl.busy.end(),
                     [](const Interval& a, const Interval& b) { return a.start < b.start; });
  }

  r.energy = compute_energy(r, energy);
  return r;
}

std::uint64_t sequential_head_cycles(const SimReport& report) {
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < report.tasks_per_head && i < report.tasks.size(); ++i) {
    sum += report.tasks[i].duration;
  }
  return sum;
}

std::vector<std::string> check_schedule(const SimReport& report) {
  std::vector<std::string> problems;
  std::uint64_t max_end = 0;
  for (std::size_t i = 0; i < report.tasks.size(); ++i) {
    const auto& t = report.tasks[i];
    max_end = std::max(max_end, t.end);
    if (t.end < t.start + t.duration) problems.push_back(t.label + ": shorter than its duration");
    for (const auto& dep : t.deps) {
      if (dep.producer >= i) {
        problems.push_back(t.label + ": depends on a later task");
        continue;
      }
      const auto& p = report.tasks[dep.producer];
      if (dep.kind == DepKind::Full || !report.pipelined) {
        if (t.start < p.end) problems.push_back(t.label + " starts before " + p.label + " ends");
      } else {
        if (t.start < p.start + p.first_emit) {
          problems.push_back(t.label + " starts before " + p.label + " emits its first unit");
        }
        if (t.end < p.end + t.drain) {
          problems.push_back(t.label + " ends before consuming the last unit of " + p.label);
        }
      }
    }
  }
  for (const auto& tl : report.timelines) {
    for (std::size_t i = 1; i < tl.busy.size(); ++i) {
      if (tl.busy[i].start < tl.busy[i - 1].end) {
        problems.push_back(std::string(to_string(tl.chunk)) + ": " + tl.busy[i].task +
                           " overlaps " + tl.busy[i - 1].task);
      }
    }
  }
  if (max_end != report.total_cycles) problems.push_back("total_cycles does not match timelines");
  return problems;
}

Orderings evaluate_orderings(const EnergyBreakdown& gs, const EnergyBreakdown& df) {
  Orderings o;
  o.df_overall_le_gs = df.overall <= gs.overall;
  o.gs_data_access_le_df = gs.data_access <= df.data_access;
  o.df_systolic_le_gs = df.systolic_array <= gs.systolic_array;
  o.df_overall_lt_gs = df.overall < gs.overall;
  o.gs_data_access_lt_df = gs.data_access < df.data_access;
  o.df_systolic_lt_gs = df.systolic_array < gs.systolic_array;
  return o;
}

DataflowComparison compare_dataflows(const AttentionDims& dims, const AcceleratorConfig& cfg,
                                     const EnergyTable& energy) {
  SimOptions opts;
  opts.pipelined = true;
  opts.dataflow = DataflowKind::GStationary;
  DataflowComparison c{sim_attention_layer(dims, cfg, opts, energy), {}, {}, {}};
  opts.dataflow = DataflowKind::DownForward;
  c.down_forward = sim_attention_layer(dims, cfg, opts, energy);
  c.delta = c.down_forward.energy - c.g_stationary.energy;
  c.orderings = evaluate_orderings(c.g_stationary.energy, c.down_forward.energy);
  return c;
}

ModelComparison compare_model(const opcount::StagedModel& model, const AcceleratorConfig& cfg,
                              const EnergyTable& energy) {
  model.validate();
  ModelComparison m;
  m.model = model.name;
  for (const auto& stage : model.stages) {
    m.stages.push_back(compare_dataflows(stage.dims, cfg, energy));
    accumulate(m.gs_total, m.stages.back().g_stationary.energy);
    accumulate(m.df_total, m.stages.back().down_forward.energy);
  }
  m.delta = m.df_total - m.gs_total;
  m.orderings = evaluate_orderings(m.gs_total, m.df_total);
  return m;
}

}  // namespace vitality::sim
