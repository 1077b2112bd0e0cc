#include "cotstream/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "cotstream/config.hpp"
#include "cotstream/error.hpp"
#include "cotstream/simulate.hpp"
#include "cotstream/stream.hpp"

namespace cotstream::cli {

namespace {

// Flags shared by `run` and `simulate`; each overrides the config file.
struct Overrides {
  std::string config;
  std::optional<std::string> dataset;
  std::optional<std::string> task;
  std::optional<std::size_t> limit;
  std::optional<std::size_t> batches;
  std::optional<std::string> strategy;
  std::optional<std::size_t> xi;
  std::optional<std::size_t> demo_cap;
  std::optional<std::size_t> budget;
  std::optional<std::string> backend;
  std::optional<std::string> cache;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> format;
  bool print_config = false;

  void add_common(CLI::App& app) {
    app.add_option("--config", config, "Run configuration file (TOML)");
    app.add_option("--dataset", dataset, "Dataset JSONL file");
    app.add_option("--task", task, "Task kind: arithmetic, yesno, symbolic");
    app.add_option("--limit", limit, "Use only the first N records");
    app.add_option("--batches", batches, "Number of stream batches m");
    app.add_option("--xi", xi, "Depth threshold (newline count) for deep/shallow");
    app.add_option("--demo-cap", demo_cap, "Maximum demonstrations kept by selective strategies");
    app.add_option("--budget", budget, "Prompt token budget");
    app.add_option("--out", out, "Output file");
    app.add_flag("--print-config", print_config, "Print the resolved configuration and exit");
  }

  void apply(RunConfig& cfg) const {
    if (dataset) cfg.dataset_path = *dataset;
    if (task) cfg.task = task_from_string(*task);
    if (limit) cfg.limit = *limit;
    if (batches) cfg.batches = *batches;
    if (strategy) cfg.strategy.kind = strategy_from_string(*strategy);
    if (xi) cfg.strategy.xi = *xi;
    if (demo_cap) cfg.strategy.demo_cap = *demo_cap;
    if (budget) cfg.budget_tokens = *budget;
    if (backend) cfg.backend = backend_kind_from_string(*backend);
    if (cache) cfg.cache_path = *cache;
    if (seed) cfg.seed = *seed;
    if (out) cfg.out_path = *out;
    if (format) cfg.format = report_format_from_string(*format);
  }

  RunConfig resolve() const {
    RunConfig cfg = config.empty() ? RunConfig{} : load_run_config(config);
    apply(cfg);
    return cfg;
  }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + path);
  f << text;
  if (!f) throw Error(ErrorKind::Io, "failed writing " + path);
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Validation:
    case ErrorKind::Parse:
    case ErrorKind::Io: return kValidation;
    case ErrorKind::Budget:
    case ErrorKind::Backend: return kRuntime;
  }
  return kRuntime;
}

int cmd_run(const Overrides& o, CLI::App& sub, std::ostream& out, std::ostream& err) {
  if (o.config.empty()) {
    err << "error: run needs --config <file>\n" << sub.help();
    return kValidation;
  }
  auto cfg = o.resolve();
  if (o.print_config) {
    out << to_toml(cfg);
    return kOk;
  }
  validate(cfg);
  auto dataset = load_dataset(cfg.dataset_path, *cfg.task, cfg.limit);
  auto backend = make_backend(cfg, dataset);

  StreamOptions options;
  options.decoding = cfg.decoding;
  options.update_after_final = cfg.update_after_final;
  options.record_timing = cfg.timing;
  auto report = run_stream(dataset, cfg.batches, cfg.strategy, *backend, cfg.budget_tokens, cfg.seed, options);
  report.config = config_snapshot(cfg);
  report.config_hash = config_hash(cfg);

  if (cfg.out_path.empty()) {
    out << (cfg.format == ReportFormat::Csv ? report_csv(report) : report_json(report));
  } else {
    write_report(report, cfg.out_path, cfg.format);
  }
  if (!cfg.audit_path.empty()) write_audit_jsonl(report, cfg.audit_path);

  if (report.aborted_at_batch) {
    err << "error: run aborted at batch " << *report.aborted_at_batch << ": " << report.abort_reason << "\n";
    return kRuntime;
  }
  return kOk;
}

int cmd_simulate(const Overrides& o, const std::string& seeds, const std::string& strategies,
                 const std::optional<double>& correct_base, const std::optional<double>& shallow_bonus,
                 const std::optional<double>& wrong_penalty, std::size_t synthetic_size,
                 std::size_t threads, std::ostream& out) {
  auto cfg = o.resolve();
  cfg.backend = BackendKind::Mock;
  if (correct_base) cfg.mock.correct_base = *correct_base;
  if (shallow_bonus) cfg.mock.shallow_bonus = *shallow_bonus;
  if (wrong_penalty) cfg.mock.wrong_penalty = *wrong_penalty;
  if (o.print_config) {
    out << to_toml(cfg);
    return kOk;
  }

  SimulationSpec spec;
  if (cfg.dataset_path.empty()) {
    spec.dataset = synthetic_dataset(cfg.task.value_or(TaskKind::Arithmetic), synthetic_size);
  } else {
    validate(cfg);
    spec.dataset = load_dataset(cfg.dataset_path, *cfg.task, cfg.limit);
  }
  if (cfg.batches < 1) throw Error(ErrorKind::Validation, "batches must be at least 1");
  cfg.strategy.validate();
  spec.batches = cfg.batches;
  std::tie(spec.seed_begin, spec.seed_end) = parse_seed_range(seeds);
  std::stringstream list(strategies);
  for (std::string name; std::getline(list, name, ',');) {
    if (!name.empty()) spec.strategies.push_back(strategy_from_string(name));
  }
  spec.strategy = cfg.strategy;
  spec.mock = cfg.mock;
  spec.budget_tokens = cfg.budget_tokens;
  spec.decoding = cfg.decoding;
  spec.threads = threads;

  auto result = simulate(spec);
  write_text(cfg.out_path.string(), aggregate_csv(result.rows), out);
  return kOk;
}

// Long format: one row per (batch, metric).
std::string long_table(const RunReport& r) {
  std::ostringstream os;
  os << "strategy,batch,metric,value\n";
  char buf[32];
  for (const auto& b : r.batches) {
    const auto& p = b.prompt_stats_before;
    auto row = [&](std::string_view metric, double v, bool integral) {
      std::snprintf(buf, sizeof buf, integral ? "%.0f" : "%.4f", v);
      os << to_string(b.strategy_kind) << ',' << b.batch_index << ',' << metric << ',' << buf << '\n';
    };
    row("accuracy", b.accuracy, false);
    row("n", static_cast<double>(b.n), true);
    row("n_correct", static_cast<double>(b.n_correct), true);
    row("prompt_demos", static_cast<double>(p.n_demos), true);
    row("prompt_wrong_fraction", p.wrong_fraction, false);
    row("prompt_mean_depth", p.mean_newline_depth, false);
    row("prompt_tokens", static_cast<double>(p.token_total), true);
  }
  return os.str();
}

int cmd_report(const std::string& input, const std::string& format, const std::string& path,
               std::ostream& out) {
  auto report = parse_report_json(read_file(input));
  if (format == "csv") {
    write_text(path, report_csv(report), out);
  } else if (format == "long") {
    write_text(path, long_table(report), out);
  } else {
    throw Error(ErrorKind::Validation, "unknown report format '" + format + "' (csv or long)");
  }
  return kOk;
}

}  // namespace

int execute(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Streaming chain-of-thought prompt optimization harness", "cotstream"};
  app.require_subcommand(1);

  Overrides run_o;
  auto* run = app.add_subcommand("run", "Run one stream from a config file");
  run_o.add_common(*run);
  run->add_option("--strategy", run_o.strategy,
                  "Update strategy: zero-shot, concat, correct, wrong, shallow, deep");
  run->add_option("--backend", run_o.backend, "Backend: mock, http, cached:http, cached:mock");
  run->add_option("--cache", run_o.cache, "Record/replay cache file (JSONL)");
  run->add_option("--seed", run_o.seed, "Run seed");
  run->add_option("--format", run_o.format, "Report format: json or csv");

  Overrides sim_o;
  std::string seeds = "0..30";
  std::string strategies = "shallow,deep";
  std::optional<double> correct_base, shallow_bonus, wrong_penalty;
  std::size_t synthetic_size = 600;
  std::size_t threads = 0;
  auto* sim = app.add_subcommand("simulate", "Scripted-mock runs over a seed range, aggregated per batch");
  sim_o.add_common(*sim);
  sim->add_option("--seeds", seeds, "Seed range a..b (half-open)")->capture_default_str();
  sim->add_option("--strategies", strategies, "Comma-separated strategies")->capture_default_str();
  sim->add_option("--correct-base", correct_base, "Mock base correctness probability");
  sim->add_option("--shallow-bonus", shallow_bonus, "Mock bonus per shallow-demo fraction");
  sim->add_option("--wrong-penalty", wrong_penalty, "Mock penalty per wrong-demo fraction");
  sim->add_option("--synthetic-size", synthetic_size, "Samples in the generated corpus when no dataset is given")
      ->capture_default_str();
  sim->add_option("--threads", threads, "Worker threads (0: all cores)");

  std::string report_in, report_format = "csv", report_out;
  auto* rep = app.add_subcommand("report", "Convert a JSON run report to CSV or a long-format table");
  rep->add_option("input", report_in, "JSON report")->required();
  rep->add_option("--format", report_format, "csv or long")->capture_default_str();
  rep->add_option("--out", report_out, "Output file (default: stdout)");

  std::vector<std::string> args(argv.begin() + (argv.empty() ? 0 : 1), argv.end());
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return kValidation;
  }

  try {
    if (run->parsed()) return cmd_run(run_o, *run, out, err);
    if (sim->parsed())
      return cmd_simulate(sim_o, seeds, strategies, correct_base, shallow_bonus, wrong_penalty,
                          synthetic_size, threads, out);
    if (rep->parsed()) return cmd_report(report_in, report_format, report_out, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kValidation;
}

}  // namespace cotstream::cli
