#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <future>
#include <iomanip>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "vitality/archmodel.hpp"
#include "vitality/attention.hpp"
#include "vitality/json_io.hpp"
#include "vitality/opcount.hpp"
#include "vitality/simulator.hpp"

#ifndef VITALITY_VERSION
#define VITALITY_VERSION "dev"
#endif
#ifndef VITALITY_DEFAULT_CONFIG_DIR
#define VITALITY_DEFAULT_CONFIG_DIR "configs"
#endif

namespace vitality::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string> kCountOpsPresets = {"deit-tiny", "mobilevit-xs", "levit-128"};
const std::vector<std::string> kDataflowPresets = {"deit-base", "mobilevit-xxs", "mobilevit-xs",
                                                   "levit-128s", "levit-128"};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

json manifest(const std::string& command, const std::vector<std::string>& config_paths,
              std::uint64_t seed) {
  return json{{"command", command},
              {"config_paths", config_paths},
              {"seed", seed},
              {"tool_version", VITALITY_VERSION},
              {"timestamp", utc_timestamp()}};
}

fs::path config_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kConfigDirEnv); env && *env) return env;
  return VITALITY_DEFAULT_CONFIG_DIR;
}

fs::path preset_path(const fs::path& dir, const std::string& name) {
  return dir / "models" / (name + ".json");
}

void write_output(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw arch::ConfigError("cannot write " + path);
  f << text;
}

// ---------------------------------------------------------------------------

struct RunAttentionArgs {
  std::int64_t n = 0;
  std::int64_t d = 0;
  std::uint64_t seed = 0;
  std::string kernel = "taylor";
  std::optional<double> constant_v;
};

int cmd_run_attention(const RunAttentionArgs& a, std::ostream& out) {
  if (a.n < 1 || a.d < 1) throw UsageError("--n and --d must be >= 1");
  const auto n = static_cast<std::size_t>(a.n);
  const auto d = static_cast<std::size_t>(a.d);
  std::mt19937_64 rng(a.seed);
  auto q = attention::random_gaussian(n, d, rng);
  auto k = attention::random_gaussian(n, d, rng);
  auto v = a.constant_v ? linalg::Matrix(n, d, *a.constant_v) : attention::random_gaussian(n, d, rng);
  const attention::AttentionInputs inp(std::move(q), std::move(k), std::move(v));

  const auto softmax_z = attention::softmax_attention(inp);
  const auto centered_z = attention::mean_centered_softmax_attention(inp);
  json j{{"manifest", manifest("run-attention", {}, a.seed)},
         {"n", n},
         {"d", d},
         {"kernel", a.kernel},
         {"max_abs_softmax_vs_mean_centered", linalg::max_abs_diff(softmax_z, centered_z)}};

  linalg::Matrix z = softmax_z;
  if (a.kernel == "taylor") {
    try {
      const auto lin = attention::taylor_attention_linear(inp);
      const auto quad = attention::taylor_attention_quadratic(inp);
      j["max_abs_linear_vs_quadratic"] = linalg::max_abs_diff(lin.z, quad);
      j["max_abs_taylor_vs_softmax"] = linalg::max_abs_diff(lin.z, softmax_z);
      z = lin.z;
    } catch (const linalg::SingularDenominatorError& e) {
      throw UsageError(e.what());
    }
  }
  double sum = 0.0;
  double abs_sum = 0.0;
  for (double x : z.values()) {
    sum += x;
    abs_sum += std::abs(x);
  }
  j["checksum"] = {{"sum", sum}, {"abs_sum", abs_sum}};
  if (a.constant_v) {
    double dev = 0.0;
    for (double x : z.values()) dev = std::max(dev, std::abs(x - *a.constant_v));
    j["max_abs_deviation_from_constant_v"] = dev;
  }
  out << j.dump(2) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct CountOpsArgs {
  std::vector<std::string> model_configs;
  std::string format = "text";
  std::string output;
};

int cmd_count_ops(const CountOpsArgs& a, const fs::path& cfg_dir, std::ostream& out) {
  std::vector<std::string> paths = a.model_configs;
  if (paths.empty()) {
    for (const auto& p : kCountOpsPresets) paths.push_back(preset_path(cfg_dir, p).string());
  }
  std::vector<opcount::StagedModel> models;
  for (const auto& p : paths) models.push_back(opcount::load_model(p));
  const auto rows = opcount::model_table(models);

  std::string text;
  if (a.format == "json") {
    json j{{"manifest", manifest("count-ops", paths, 0)}, {"rows", rows}};
    for (std::size_t i = 0; i < models.size(); ++i) j["rows"][i]["stages"] = models[i].stages;
    text = j.dump(2) + "\n";
  } else if (a.format == "csv") {
    text = opcount::render_table_csv(rows);
  } else {
    text = opcount::render_table_text(rows);
  }
  write_output(a.output, text, out);
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string model_config;
  std::string accel_config;
  std::string energy_table;
  std::string dataflow = "down-forward";
  bool pipelined = true;
  bool include_projections = false;
  bool timelines = true;
  std::string timeline_csv;
  std::string output;
};

struct LoadedHardware {
  arch::AcceleratorConfig cfg;
  arch::EnergyTable energy;
  std::vector<std::string> paths;
};

LoadedHardware load_hardware(const std::string& accel, const std::string& energy,
                             const fs::path& cfg_dir) {
  LoadedHardware hw;
  const fs::path accel_path = accel.empty() ? cfg_dir / "accelerator" / "vitality.json" : fs::path(accel);
  const fs::path energy_path =
      energy.empty() ? cfg_dir / "energy" / "reference.json" : fs::path(energy);
  hw.cfg = arch::load_config(accel_path);
  hw.energy = arch::load_energy_table(energy_path);
  hw.paths = {accel_path.string(), energy_path.string()};
  return hw;
}

int cmd_simulate(const SimulateArgs& a, const fs::path& cfg_dir, std::ostream& out) {
  const std::string model_path =
      a.model_config.empty() ? preset_path(cfg_dir, "deit-tiny").string() : a.model_config;
  const auto model = opcount::load_model(model_path);
  const auto hw = load_hardware(a.accel_config, a.energy_table, cfg_dir);

  json stages = json::array();
  std::uint64_t total_cycles = 0;
  sim::EnergyBreakdown total_energy;
  std::ostringstream csv;
  csv << "chunk,start,end,task\n";
  for (const auto& stage : model.stages) {
    sim::SimOptions opts;
    opts.dataflow = arch::parse_dataflow(a.dataflow);
    opts.pipelined = a.pipelined;
    opts.include_projections = a.include_projections;
    opts.mlp_ratio = stage.mlp_ratio;
    const auto r = sim::sim_attention_layer(stage.dims, hw.cfg, opts, hw.energy);
    stages.push_back(sim::report_to_json(r, a.timelines));
    for (const auto& tl : r.timelines) {
      for (const auto& b : tl.busy) {
        csv << sim::to_string(tl.chunk) << ',' << b.start + total_cycles << ','
            << b.end + total_cycles << ",\"" << b.task << "\"\n";
      }
    }
    total_cycles += r.total_cycles;
    total_energy.data_access += r.energy.data_access;
    total_energy.other_processors += r.energy.other_processors;
    total_energy.systolic_array += r.energy.systolic_array;
  }
  total_energy.overall =
      total_energy.data_access + total_energy.other_processors + total_energy.systolic_array;

  std::vector<std::string> paths{model_path};
  paths.insert(paths.end(), hw.paths.begin(), hw.paths.end());
  json j{{"manifest", manifest("simulate", paths, 0)},
         {"model", model.name},
         {"accelerator", hw.cfg},
         {"energy_table", hw.energy},
         {"stages", stages},
         {"totals",
          {{"total_cycles", total_cycles},
           {"latency_seconds", hw.cfg.cycles_to_seconds(total_cycles)},
           {"energy_pj", total_energy}}}};
  write_output(a.output, j.dump(2) + "\n", out);
  if (!a.timeline_csv.empty()) write_output(a.timeline_csv, csv.str(), out);
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct CompareArgs {
  std::vector<std::string> model_configs;
  std::string accel_config;
  std::string energy_table;
  std::string output;
};

std::string fmt_uj(double pj) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << pj * 1e-6;
  return os.str();
}

int cmd_compare(const CompareArgs& a, const fs::path& cfg_dir, std::ostream& out,
                std::ostream& err) {
  std::vector<std::string> paths = a.model_configs;
  if (paths.empty()) {
    for (const auto& p : kDataflowPresets) paths.push_back(preset_path(cfg_dir, p).string());
  }
  std::vector<opcount::StagedModel> models;
  for (const auto& p : paths) models.push_back(opcount::load_model(p));
  const auto hw = load_hardware(a.accel_config, a.energy_table, cfg_dir);

  // Presets are independent; simulate them concurrently, assemble in name order.
  std::vector<std::future<sim::ModelComparison>> jobs;
  for (const auto& m : models) {
    jobs.push_back(std::async(std::launch::async,
                              [&m, &hw] { return sim::compare_model(m, hw.cfg, hw.energy); }));
  }
  std::vector<sim::ModelComparison> results;
  for (auto& f : jobs) results.push_back(f.get());
  std::stable_sort(results.begin(), results.end(),
                   [](const auto& x, const auto& y) { return x.model < y.model; });

  bool all_hold = true;
  json list = json::array();
  std::ostringstream summary;
  summary << std::left << std::setw(16) << "model" << std::right << std::setw(12) << "GS uJ"
          << std::setw(12) << "DF uJ" << std::setw(12) << "GS data" << std::setw(12) << "DF data"
          << std::setw(12) << "GS SA" << std::setw(12) << "DF SA" << "  orderings\n";
  for (const auto& c : results) {
    all_hold = all_hold && c.orderings.all_hold();
    list.push_back(sim::comparison_to_json(c));
    summary << std::left << std::setw(16) << c.model << std::right << std::setw(12)
            << fmt_uj(c.gs_total.overall) << std::setw(12) << fmt_uj(c.df_total.overall)
            << std::setw(12) << fmt_uj(c.gs_total.data_access) << std::setw(12)
            << fmt_uj(c.df_total.data_access) << std::setw(12) << fmt_uj(c.gs_total.systolic_array)
            << std::setw(12) << fmt_uj(c.df_total.systolic_array) << "  "
            << (c.orderings.all_strict() ? "hold"
                                         : (c.orderings.all_hold() ? "hold (ties)" : "VIOLATED"))
            << '\n';
  }
  paths.insert(paths.end(), hw.paths.begin(), hw.paths.end());
  json j{{"manifest", manifest("compare-dataflows", paths, 0)},
         {"energy_table", hw.energy},
         {"models", list},
         {"all_orderings_hold", all_hold}};

  if (a.output.empty() || a.output == "-") {
    out << j.dump(2) << '\n';
    err << summary.str();
  } else {
    write_output(a.output, j.dump(2) + "\n", out);
    out << summary.str();
  }
  return all_hold ? kExitOk : kExitOrderingFailed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Taylor attention kernels, operation counts and accelerator simulation",
               "vitality"};
  app.require_subcommand(1);
  std::string cfg_dir_flag;
  app.add_option("--config-dir", cfg_dir_flag,
                 std::string("directory holding models/, accelerator/, energy/ (env ") +
                     kConfigDirEnv + ")");
  app.set_version_flag("--version", VITALITY_VERSION);

  RunAttentionArgs ra;
  auto* run_att = app.add_subcommand("run-attention", "run the attention kernels on seeded data");
  run_att->add_option("--n", ra.n, "token count")->required();
  run_att->add_option("--d", ra.d, "head dimension")->required();
  run_att->add_option("--seed", ra.seed, "generator seed");
  run_att->add_option("--kernel", ra.kernel, "softmax | taylor")
      ->check(CLI::IsMember({"softmax", "taylor"}));
  run_att->add_option("--constant-v", ra.constant_v, "fill V with this constant");

  CountOpsArgs co;
  auto* count = app.add_subcommand("count-ops", "operation counts: Taylor vs. softmax attention");
  count->add_option("--model-config", co.model_configs, "model config JSON (repeatable)");
  count->add_option("--format", co.format, "text | csv | json")
      ->check(CLI::IsMember({"text", "csv", "json"}));
  count->add_option("--output", co.output, "write here instead of stdout");

  SimulateArgs sa;
  auto* simulate = app.add_subcommand("simulate", "cycle-level simulation of Taylor attention");
  simulate->add_option("--model-config", sa.model_config, "model config JSON");
  simulate->add_option("--accel-config", sa.accel_config, "accelerator config JSON");
  simulate->add_option("--energy-table", sa.energy_table, "energy table JSON");
  simulate->add_option("--dataflow", sa.dataflow, "g-stationary | down-forward")
      ->check(CLI::IsMember({"g-stationary", "down-forward"}));
  simulate->add_flag("--pipelined,!--no-pipelined", sa.pipelined, "intra-layer pipelining");
  simulate->add_flag("--include-projections", sa.include_projections,
                     "also run QKV/O projections and the MLP on SA-General");
  simulate->add_flag("!--no-timelines", sa.timelines, "omit per-chunk intervals from the JSON");
  simulate->add_option("--timeline-csv", sa.timeline_csv, "write chunk,start,end,task CSV");
  simulate->add_option("--output", sa.output, "write JSON here instead of stdout");

  CompareArgs ca;
  auto* compare =
      app.add_subcommand("compare-dataflows", "energy of G-stationary vs. down-forward dataflow");
  compare->add_option("--model-config", ca.model_configs, "model config JSON (repeatable)");
  compare->add_option("--accel-config", ca.accel_config, "accelerator config JSON");
  compare->add_option("--energy-table", ca.energy_table, "energy table JSON");
  compare->add_option("--output", ca.output, "write JSON here; summary goes to stdout");

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << VITALITY_VERSION << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  const fs::path cfg_dir = config_dir(cfg_dir_flag);
  try {
    if (*run_att) return cmd_run_attention(ra, out);
    if (*count) return cmd_count_ops(co, cfg_dir, out);
    if (*simulate) return cmd_simulate(sa, cfg_dir, out);
    if (*compare) return cmd_compare(ca, cfg_dir, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const arch::ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}

}  // namespace vitality::cli
