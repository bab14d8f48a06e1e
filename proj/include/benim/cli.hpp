#pragma once

// Command-line front end. run_cli() is the whole program; tools/benim_cli.cpp
// only forwards argv.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "benim/io.hpp"

namespace benim {

namespace cli {

enum class LogLevel { error, info, debug };

inline LogLevel log_level() {
  const char* v = std::getenv("BENIM_LOG_LEVEL");
  if (!v) return LogLevel::error;
  const std::string s(v);
  if (s == "debug") return LogLevel::debug;
  if (s == "info") return LogLevel::info;
  return LogLevel::error;
}

/// Failure carrying an exit code and a short machine-readable code.
struct CommandError : std::runtime_error {
  CommandError(int exit, std::string c, const std::string& msg, json extra = json::object())
      : std::runtime_error(msg), exit_code(exit), code(std::move(c)), details(std::move(extra)) {}
  int exit_code;
  std::string code;
  json details;
};

struct Context {
  RunConfig config;
  std::filesystem::path out_dir;
  unsigned workers = 1;
  std::optional<std::string> method_flag;
  std::ostream* out = &std::cout;
  std::ostream* log = &std::cerr;

  void info(const std::string& msg) const {
    if (log_level() != LogLevel::error) *log << "info: " << msg << "\n";
  }
};

inline json read_json_file(const std::filesystem::path& p) {
  const std::string text = read_text_file(p);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(p.string() + ": invalid JSON: " + e.what());
  }
}

inline const std::string& require_input(const std::optional<std::string>& v, const char* name) {
  if (!v) throw InputError(std::string("config: missing inputs.") + name);
  return *v;
}

inline Method parse_method(const std::string& name) {
  try {
    return method_from_string(name);
  } catch (const std::invalid_argument& e) {
    throw CommandError(2, "unknown_method", e.what(), {{"valid_methods", method_names()}});
  }
}

inline std::string hashed_config(const RunConfig& c) { return c.hash(); }

inline void cmd_generate(Context& ctx, OutputSet& outs) {
  const auto& c = ctx.config;
  if (!c.generator) throw InputError("config: missing generator");
  GeneratorConfig g = *c.generator;
  g.seed = ExperimentSeeds(c.seed).generator;
  auto data = gen_clustered_dataset(g);
  outs.write("dataset.csv", dataset_to_csv(data.dataset));
  outs.write("ground_truth.json", canonical_dump(ground_truth_json(data, c.seed)));
  ctx.info("generated " + std::to_string(data.dataset.size()) + " records");
}

inline void cmd_train(Context& ctx, OutputSet& outs) {
  const auto& c = ctx.config;
  const auto data = load_dataset_csv(require_input(c.inputs.dataset, "dataset"));
  ForestConfig fc = c.forest;
  fc.seed = ExperimentSeeds(c.seed).forest;
  if (static_cast<std::size_t>(fc.resolved_features(data.dim())) > data.dim())
    throw InputError("forest: features_per_split exceeds feature count");
  const auto model = fit_rsf(data, fc, ctx.workers);
  outs.write("model.json", canonical_dump(to_json(model)));
  const auto ci = model_cindex(model, data.records());
  *ctx.out << "training_cindex=" << (ci ? format_double(*ci) : std::string("none")) << "\n";
}

inline void cmd_explain(Context& ctx, OutputSet& outs) {
  const auto& c = ctx.config;
  const std::string method_name =
      ctx.method_flag ? *ctx.method_flag : c.explain.method.value_or("survbenim-local");
  const Method method = parse_method(method_name);
  const auto data = load_dataset_csv(require_input(c.inputs.dataset, "dataset"));
  const auto model = rsf_from_json(read_json_file(require_input(c.inputs.model, "model")));
  if (model.dim() != data.dim()) throw InputError("model and dataset dimensions differ");
  if (model.time_grid() != data.distinct_times())
    throw InputError("model was not trained on this dataset (time grids differ)");

  std::vector<Vector> anchors = c.explain.anchors;
  std::vector<std::optional<std::size_t>> rows(anchors.size());
  for (auto r : c.explain.anchor_rows) {
    if (r >= data.size()) throw InputError("explain.anchor_rows: row " + std::to_string(r) + " out of range");
    anchors.push_back(data[r].features);
    rows.push_back(r);
  }
  if (anchors.empty()) {
    anchors.push_back(data[0].features);
    rows.push_back(0);
  }
  for (const auto& a : anchors)
    if (a.size() != data.dim()) throw InputError("explain.anchors: dimension mismatch");

  const std::uint64_t base = ExperimentSeeds(c.seed).explainer;
  auto anchor_cfg = [&](std::size_t a) {
    ExplainerConfig ec = c.explainer;
    ec.seed = derive_seed(base, a);
    return ec;
  };
  std::vector<ExplanationResult> results(anchors.size());
  if (method == Method::survbenim_global) {
    ExplainerConfig ec = c.explainer;
    ec.seed = base;
    const auto global = fit_survbenim_global(model, data, anchors, ec);
    for (std::size_t a = 0; a < anchors.size(); ++a)
      results[a] = global.explain(anchors[a], anchor_cfg(a).seed);
  } else {
    parallel_for(anchors.size(), ctx.workers, [&](std::size_t a) {
      results[a] = explain_instance(method, model, data, anchors[a], anchor_cfg(a));
    });
  }
  const std::string hash = hashed_config(c);
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    char name[64];
    std::snprintf(name, sizeof(name), "explanation_%03zu.json", a);
    outs.write(name, canonical_dump(to_json(results[a], rows[a], hash)));
  }
  ctx.info("wrote " + std::to_string(anchors.size()) + " explanations");
}

inline void write_reports(OutputSet& outs, const std::vector<MetricsReport>& reports,
                          std::optional<double> ci, const std::string& hash) {
  outs.write("report.json", canonical_dump(metrics_json(reports, ci, hash)));
  outs.write("report.csv", metrics_table_csv(reports));
  outs.write("per_instance.csv", per_instance_csv(reports));
}

inline void cmd_evaluate(Context& ctx, OutputSet& outs) {
  const auto& c = ctx.config;
  const std::string hash = hashed_config(c);
  if (!c.inputs.explanations.empty()) {
    // Score stored explanations against the ground-truth sidecar.
    const auto data = load_dataset_csv(require_input(c.inputs.dataset, "dataset"));
    const auto model = rsf_from_json(read_json_file(require_input(c.inputs.model, "model")));
    const auto truth =
        ground_truth_from_json(read_json_file(require_input(c.inputs.ground_truth, "ground_truth")));
    if (truth.cluster_of.size() != data.size())
      throw InputError("ground truth does not match the dataset size");
    std::vector<MetricsReport> reports;
    std::map<std::string, std::size_t> index;
    for (const auto& path : c.inputs.explanations) {
      const auto stored = explanation_from_json(read_json_file(path));
      const std::string m = to_string(stored.result.method);
      if (!index.count(m)) {
        index[m] = reports.size();
        reports.push_back({});
        reports.back().method = m;
        reports.back().config_hash = hash;
      }
      InstanceMetrics row;
      if (!stored.anchor_row || *stored.anchor_row >= data.size()) {
        row.skipped = true;
        row.reason = "explanation has no dataset row";
      } else {
        try {
          row = score_explanation(stored.result, model,
                                  truth.b_true[truth.cluster_of[*stored.anchor_row]]);
        } catch (const std::exception& e) {
          row.skipped = true;
          row.reason = e.what();
        }
        row.anchor_row = *stored.anchor_row;
      }
      reports[index[m]].per_instance.push_back(std::move(row));
    }
    for (auto& r : reports) finalize_report(r);
    write_reports(outs, reports, model_cindex(model, data.records()), hash);
    return;
  }
  ExperimentConfig ec = c.experiment;
  if (!c.method_names_raw.empty()) {
    ec.methods.clear();
    for (const auto& m : c.method_names_raw) ec.methods.push_back(parse_method(m));
  }
  auto res = run_experiment(ec, ctx.workers);
  for (auto& r : res.reports) r.config_hash = hash;
  write_reports(outs, res.reports, res.blackbox_test_cindex, hash);
  for (const auto& r : res.reports)
    ctx.info(r.method + " MCI=" + format_double(r.mci.mean) + " MSFD=" + format_double(r.msfd.mean));
}

inline void cmd_export_curves(Context& ctx, OutputSet& outs) {
  const auto& c = ctx.config;
  if (c.inputs.explanations.empty()) throw InputError("config: missing inputs.explanations");
  for (const auto& path : c.inputs.explanations) {
    const auto stored = explanation_from_json(read_json_file(path));
    if (stored.result.curves.empty())
      throw InputError(path + ": method " + to_string(stored.result.method) +
                       " has no feature curves");
    outs.write("curves_" + std::filesystem::path(path).stem().string() + ".csv",
               curves_csv(stored.result.curves));
  }
}

inline void cmd_schemas(Context&, OutputSet& outs) {
  for (const auto& [name, s] : schemas()) outs.write(name + ".schema.json", canonical_dump(s));
}

inline void print_error(std::ostream& err, const std::string& code, const std::string& msg,
                        json extra = json::object()) {
  json line = std::move(extra);
  line["error"] = msg;
  line["code"] = code;
  err << line.dump() << "\n";
}

}  // namespace cli

/// Exit codes: 0 success, 1 runtime failure, 2 invalid input or usage.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  using namespace cli;
  CLI::App app{"SurvBeNIM survival explanation toolkit"};
  app.require_subcommand(1);
  std::string config_path, out_dir = "out", method;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;

  struct Command {
    const char* name;
    const char* help;
    void (*run)(Context&, OutputSet&);
    bool needs_config;
  };
  const std::vector<Command> commands{
      {"generate", "generate a synthetic dataset and its ground truth", cmd_generate, true},
      {"train-blackbox", "train the random survival forest", cmd_train, true},
      {"explain", "explain instances with one method", cmd_explain, true},
      {"evaluate", "score explanations or run a full experiment", cmd_evaluate, true},
      {"export-curves", "export importance or shape curves as CSV", cmd_export_curves, true},
      {"schemas", "write the JSON schemas", cmd_schemas, false}};
  std::vector<CLI::App*> subs;
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    if (c.needs_config) sub->add_option("--config", config_path, "run configuration (JSON)")->required();
    sub->add_option("--out", out_dir, "output directory")->capture_default_str();
    if (c.needs_config) {
      sub->add_option("--seed", seed, "overrides the config seed");
      sub->add_option("--workers", workers, "worker threads (default: logical CPUs)")
          ->check(CLI::PositiveNumber);
    }
    if (std::string(c.name) == "explain")
      sub->add_option("--method", method, "survbenim-local | survbenim-global | survbex | survlime | survnam");
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    print_error(err, "usage", e.what());
    return 2;
  }

  std::size_t which = 0;
  while (!subs[which]->parsed()) ++which;
  const Command& cmd = commands[which];

  std::unique_ptr<OutputSet> outs;
  try {
    Context ctx;
    ctx.out = &out;
    ctx.log = &err;
    ctx.out_dir = out_dir;
    if (!method.empty()) ctx.method_flag = method;
    if (cmd.needs_config) {
      json raw = read_json_file(config_path);
      if (seed && raw.is_object()) raw["seed"] = *seed;
      ctx.config = parse_run_config(raw);
    }
    ctx.workers = workers.value_or(ctx.config.workers.value_or(default_workers()));
    if (ctx.method_flag) parse_method(*ctx.method_flag);  // fail before any work
    outs = std::make_unique<OutputSet>(out_dir);
    cmd.run(ctx, *outs);
    return 0;
  } catch (const CommandError& e) {
    if (outs) outs->rollback();
    print_error(err, e.code, e.what(), e.details);
    return e.exit_code;
  } catch (const InputError& e) {
    if (outs) outs->rollback();
    print_error(err, "invalid_input", e.what());
    return 2;
  } catch (const std::exception& e) {
    if (outs) outs->rollback();
    print_error(err, "failure", e.what());
    return 1;
  }
}

}  // namespace benim
