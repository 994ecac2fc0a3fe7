#include "radego/baseline_sa.hpp"
#include "radego/estimator.hpp"
#include "radego/evaluation.hpp"
#include "radego/io.hpp"
#include "radego/simulation.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

using namespace radego;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

int default_jobs() {
  if (const char* env = std::getenv("RADEGO_JOBS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
    std::cerr << "warning: ignoring invalid RADEGO_JOBS='" << env << "'\n";
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

struct ConfigSource {
  std::string preset;
  std::string config;
  double scale = 1.0;
  std::optional<std::uint64_t> seed;
};

void add_config_options(CLI::App* cmd, ConfigSource& src) {
  cmd->add_option("--preset", src.preset, "Built-in experiment: psr, psr-c, sim or sim-c");
  cmd->add_option("--config", src.config, "INI config file")->check(CLI::ExistingFile);
  cmd->add_option("--scale", src.scale, "Fraction of runs per configuration")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", src.seed, "Override the simulation seed");
}

RunConfig resolve_config(const ConfigSource& src) {
  if (!src.preset.empty() && !src.config.empty()) throw UsageError("--preset and --config are mutually exclusive");
  RunConfig cfg = src.config.empty() ? default_config(experiment_from_string(src.preset.empty() ? "sim" : src.preset))
                                     : load_config(src.config);
  cfg.simulation = scaled(cfg.simulation, src.scale);
  if (src.seed) cfg.simulation.seed = *src.seed;
  validate(cfg.simulation);
  validate(cfg.estimator);
  return cfg;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path);
  return out;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const ConfigSource& src, const std::string& out_dir) {
  const RunConfig cfg = resolve_config(src);
  const DatasetInfo info = write_dataset(out_dir, cfg);
  const json summary = {{"out", out_dir},
                        {"pairs", info.pairs},
                        {"config_hash", info.config_hash},
                        {"data_hash", info.data_hash},
                        {"seed", cfg.simulation.seed}};
  std::cout << summary.dump() << '\n';
  return 0;
}

struct RegisterArgs {
  std::string prev;
  std::string cur;
  std::size_t index = 0;
  std::string method = "msm";
  bool doppler = false;
  int dof = 2;
  std::string config;
  std::optional<double> dt_std;
};

int cmd_register(const RegisterArgs& a, bool dof_given) {
  EstimatorConfig est;
  TimingInfo timing;
  double nominal_dt = timing.dt;
  if (!a.config.empty()) {
    const RunConfig cfg = load_config(a.config);
    est = cfg.estimator;
    nominal_dt = cfg.simulation.dt;
    timing.dt_std = cfg.simulation.dt_std;
  }
  if (dof_given || a.config.empty()) est.dof = a.dof == 3 ? Dof::ThreeDoF : Dof::TwoDoF;
  est.use_doppler = est.use_doppler || a.doppler;
  if (a.dt_std) timing.dt_std = *a.dt_std;
  if (a.method != "msm" && a.method != "sa") throw UsageError("--method must be msm or sa");

  const auto prev = read_scans(std::filesystem::path(a.prev));
  const auto cur = read_scans(std::filesystem::path(a.cur));
  if (a.index >= prev.size() || a.index >= cur.size())
    throw InvalidInput("--index " + std::to_string(a.index) + " out of range (" + std::to_string(prev.size()) +
                       " prev, " + std::to_string(cur.size()) + " cur scans)");
  const Scan& p = prev[a.index];
  const Scan& c = cur[a.index];
  const double dt = c.timestamp - p.timestamp;
  timing.dt = dt > 0.0 ? dt : nominal_dt;

  if (est.use_doppler) {
    const RegistrationProblem problem = assemble_problem(p, c, est, timing);
    for (const auto& w : problem.warnings()) std::cerr << "warning: " << w << '\n';
  }

  const auto start = std::chrono::steady_clock::now();
  const MotionState s = a.method == "msm" ? register_scans(p, c, est, timing) : sa_register(p, c, est, timing);
  const double runtime = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

  json cov = json::array();
  for (Eigen::Index i = 0; i < s.covariance.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < s.covariance.cols(); ++j) {
      const double v = s.covariance(i, j);
      row.push_back(std::isfinite(v) ? json(v) : json(nullptr));
    }
    cov.push_back(std::move(row));
  }
  const json out = {{"method", a.method + (est.use_doppler ? "-d" : "")},
                    {"dof", dimension(s.dof)},
                    {"transform", {{"x", s.translation.x()}, {"y", s.translation.y()}, {"theta", s.rotation}}},
                    {"covariance", std::move(cov)},
                    {"covariance_valid", s.covariance_valid},
                    {"converged", s.converged},
                    {"iterations", s.iterations},
                    {"cost", s.cost},
                    {"runtime_ms", runtime}};
  std::cout << out.dump() << '\n';
  return s.converged ? 0 : kExitNumeric;
}

struct BenchmarkArgs {
  ConfigSource src;
  std::string data;
  std::string methods = "msm,sa";
  std::string out = "report.csv";
  std::string runs_out;
  std::string dataset;
  int jobs = 1;
  bool timing = false;
  bool per_scene = false;
};

int cmd_benchmark(const BenchmarkArgs& a) {
  const std::vector<Method> methods = parse_methods(a.methods);
  RunConfig cfg;
  std::string hash;
  std::vector<RunResult> results;
  if (!a.data.empty()) {
    if (!a.src.preset.empty() || !a.src.config.empty()) throw UsageError("--data excludes --preset and --config");
    const Dataset ds = read_dataset(a.data);
    cfg = ds.config;
    hash = ds.config_hash;
    results = run_dataset(ds.pairs, methods, cfg.estimator, {cfg.simulation.dt, cfg.simulation.dt_std}, a.jobs);
  } else {
    cfg = resolve_config(a.src);
    hash = config_hash(cfg);
    results = run_monte_carlo(cfg.simulation, methods, cfg.estimator, a.jobs);
  }
  const std::string dataset = a.dataset.empty() ? to_string(cfg.simulation.experiment) : a.dataset;

  std::vector<ReportRow> rows;
  for (Method m : methods) rows.push_back(to_row(build_report(results, m, dataset, a.timing)));
  if (a.per_scene)
    for (Method m : methods)
      for (const auto& r : build_scene_reports(results, m, dataset, a.timing)) rows.push_back(to_row(r));

  if (a.out == "-") {
    write_report_csv(std::cout, rows, hash);
  } else {
    auto os = open_output(a.out);
    write_report_csv(os, rows, hash);
  }
  if (!a.runs_out.empty()) {
    auto os = open_output(a.runs_out);
    write_runs_csv(os, results, dataset, hash, a.timing);
  }
  for (const auto& r : rows) {
    if (r.dataset != dataset) continue;
    std::cerr << r.method << ": rmse " << format_double(r.rmse_m) << " m / " << format_double(r.rmse_deg)
              << " deg, anees " << format_double(r.anees) << (r.chi2_pass ? "" : " (chi2 check failed)") << ", "
              << r.n_failures << "/" << r.n_runs << " failures\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Radar ego-motion estimation by probabilistic point-set registration"};
  app.require_subcommand(1);

  ConfigSource sim_src;
  std::string sim_out;
  auto* simulate = app.add_subcommand("simulate", "Generate a Monte-Carlo dataset of scan pairs");
  add_config_options(simulate, sim_src);
  simulate->add_option("--out", sim_out, "Output directory")->required();

  RegisterArgs reg;
  auto* registr = app.add_subcommand("register", "Register one pair of scans and print the result as JSON");
  registr->add_option("prev", reg.prev, "Previous scan file (JSON lines)")->required()->check(CLI::ExistingFile);
  registr->add_option("cur", reg.cur, "Current scan file (JSON lines)")->required()->check(CLI::ExistingFile);
  registr->add_option("--index", reg.index, "Line of the pair within both files (0-based)");
  registr->add_option("--method", reg.method, "msm or sa")->check(CLI::IsMember({"msm", "sa"}));
  registr->add_flag("--doppler", reg.doppler, "Add Doppler factors (2DoF only)");
  auto* dof_opt = registr->add_option("--dof", reg.dof, "State dimension")->check(CLI::IsMember({2, 3}));
  registr->add_option("--config", reg.config, "INI config with estimator settings")->check(CLI::ExistingFile);
  registr->add_option("--dt-std", reg.dt_std, "Standard deviation of the scan interval in seconds");

  BenchmarkArgs bench;
  bench.jobs = default_jobs();
  auto* benchmark = app.add_subcommand("benchmark", "Run the Monte-Carlo evaluation and write the report CSV");
  add_config_options(benchmark, bench.src);
  benchmark->add_option("--data", bench.data, "Dataset directory written by simulate")->check(CLI::ExistingDirectory);
  benchmark->add_option("--methods", bench.methods, "Comma separated: msm, sa, msm-d, sa-d");
  benchmark->add_option("--out", bench.out, "Report CSV path, '-' for stdout");
  benchmark->add_option("--runs-out", bench.runs_out, "Optional per-run CSV path");
  benchmark->add_option("--dataset", bench.dataset, "Dataset name in the report (default: experiment name)");
  benchmark->add_option("--jobs", bench.jobs, "Worker threads (default: RADEGO_JOBS or core count)")
      ->check(CLI::PositiveNumber);
  benchmark->add_flag("--timing", bench.timing, "Record wall-clock runtimes (makes output non-reproducible)");
  benchmark->add_flag("--per-scene", bench.per_scene, "Append one row per scene");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*simulate) return cmd_simulate(sim_src, sim_out);
    if (*registr) return cmd_register(reg, dof_opt->count() > 0);
    if (*benchmark) return cmd_benchmark(bench);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
