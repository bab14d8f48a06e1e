#pragma once

// Persistence: dataset CSV, canonical JSON documents for configs, models,
// explanations and reports, and CSV tables for curves and metrics.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "benim/experiment.hpp"
#include "benim/schemas.hpp"

namespace benim {

/// Invalid user input (config, CSV, JSON document). Maps to CLI exit code 2.
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& msg) : std::invalid_argument(msg) {}
};

// ---------------------------------------------------------------------------
// Numbers and text

/// Locale-independent, 17 significant digits (round-trips every double).
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::string read_text_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InputError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// 64-bit FNV-1a, hex encoded.
inline std::string fnv1a_hex(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Sorted keys, two-space indent, trailing newline.
inline std::string canonical_dump(const json& j) { return j.dump(2) + "\n"; }

inline std::string config_hash(const json& config) { return fnv1a_hex(config.dump()); }

// ---------------------------------------------------------------------------
// Dataset CSV: header f1..fd,time,event

inline std::string dataset_to_csv(const SurvivalDataset& data) {
  std::string out;
  for (std::size_t k = 0; k < data.dim(); ++k) out += "f" + std::to_string(k + 1) + ",";
  out += "time,event\n";
  for (const auto& r : data.records()) {
    for (double v : r.features) out += format_double(v) + ",";
    out += format_double(r.time) + "," + (r.event ? "1" : "0") + "\n";
  }
  return out;
}

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i)
    if (i == line.size() || line[i] == ',') {
      cells.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  return cells;
}

inline std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

}  // namespace detail

/// Rows are numbered from 1 after the header. Errors name the row and column.
inline SurvivalDataset dataset_from_csv(const std::string& text) {
  std::vector<std::string_view> lines;
  {
    std::string_view all(text);
    if (all.size() >= 3 && all.substr(0, 3) == "\xEF\xBB\xBF") all.remove_prefix(3);
    std::size_t start = 0;
    for (std::size_t i = 0; i <= all.size(); ++i)
      if (i == all.size() || all[i] == '\n') {
        std::string_view l = all.substr(start, i - start);
        if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
        lines.push_back(l);
        start = i + 1;
      }
    while (!lines.empty() && detail::trim(lines.back()).empty()) lines.pop_back();
  }
  if (lines.empty()) throw InputError("header: file is empty");

  const auto header = detail::split_csv_line(lines[0]);
  std::vector<std::string> names;
  for (auto h : header) names.push_back(detail::trim(h));
  auto find = [&](const std::string& n) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == n) return i;
    return std::nullopt;
  };
  const auto time_col = find("time");
  const auto event_col = find("event");
  if (!time_col) throw InputError("header, column time: missing");
  if (!event_col) throw InputError("header, column event: missing");
  std::vector<std::size_t> feature_cols;
  for (std::size_t k = 1;; ++k) {
    auto c = find("f" + std::to_string(k));
    if (!c) break;
    feature_cols.push_back(*c);
  }
  if (feature_cols.empty()) throw InputError("header, column f1: missing");
  if (feature_cols.size() + 2 != names.size()) {
    for (const auto& n : names)
      if (n != "time" && n != "event" &&
          std::find_if(feature_cols.begin(), feature_cols.end(),
                       [&](std::size_t c) { return names[c] == n; }) == feature_cols.end())
        throw InputError("header, column " + n + ": unexpected column");
    throw InputError("header: duplicate columns");
  }

  std::vector<SurvivalRecord> records;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::string row = "row " + std::to_string(li);
    const auto cells = detail::split_csv_line(lines[li]);
    if (cells.size() != names.size())
      throw InputError(row + ": expected " + std::to_string(names.size()) + " cells, found " +
                       std::to_string(cells.size()));
    auto number = [&](std::size_t col) {
      auto v = parse_double(cells[col]);
      if (!v || !std::isfinite(*v))
        throw InputError(row + ", column " + names[col] + ": not a finite number");
      return *v;
    };
    SurvivalRecord r;
    for (std::size_t c : feature_cols) r.features.push_back(number(c));
    r.time = number(*time_col);
    if (r.time < 0.0) throw InputError(row + ", column time: negative time");
    const std::string ev = detail::trim(cells[*event_col]);
    if (ev == "1") r.event = true;
    else if (ev == "0") r.event = false;
    else throw InputError(row + ", column event: must be 0 or 1");
    records.push_back(std::move(r));
  }
  if (records.empty()) throw InputError("dataset has no rows");
  try {
    return SurvivalDataset(std::move(records));
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
}

inline SurvivalDataset load_dataset_csv(const std::filesystem::path& path) {
  return dataset_from_csv(read_text_file(path));
}

// ---------------------------------------------------------------------------
// Strict JSON reading

/// Reads fields of a JSON object and rejects fields that were never read.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw InputError(path_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  void optional(const std::string& key, T& out) {
    auto it = j_.find(key);
    if (it == j_.end()) return;
    seen_.insert(key);
    out = convert<T>(*it, path_ + "." + key);
  }

  template <typename T>
  T required(const std::string& key) {
    if (!j_.contains(key)) throw InputError(path_ + ": missing field '" + key + "'");
    T out{};
    optional(key, out);
    return out;
  }

  const json* child(const std::string& key) {
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }

  std::string path(const std::string& key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw InputError(path_ + ": unknown field '" + k + "'");
  }

  template <typename T>
  static T convert(const json& v, const std::string& path) {
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw InputError(path + ": expected a number");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw InputError(path + ": expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw InputError(path + ": expected an integer");
        if constexpr (std::is_unsigned_v<T>)
          if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)
            throw InputError(path + ": expected a nonnegative integer");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw InputError(path + ": expected a string");
      }
      return v.get<T>();
    } catch (const json::exception& e) {
      throw InputError(path + ": " + e.what());
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

// ---------------------------------------------------------------------------
// Config sections

inline json to_json(const GeneratorConfig& g) {
  json clusters = json::array();
  for (const auto& c : g.clusters)
    clusters.push_back(
        {{"center", c.center}, {"radius", c.radius}, {"b_true", c.b_true}, {"n_points", c.n_points}});
  return {{"clusters", clusters},
          {"weibull_scale", g.weibull_scale},
          {"weibull_shape", g.weibull_shape},
          {"risk_mode", to_string(g.risk_mode)},
          {"feature_distribution", to_string(g.feature_distribution)},
          {"uniform_low", g.uniform_low},
          {"uniform_high", g.uniform_high},
          {"censoring_fraction", g.censoring_fraction},
          {"direct_noise", g.direct_noise}};
}

/// A preset, optionally overridden field by field, or a fully custom config.
inline GeneratorConfig generator_from_json(const json& j, const std::string& path = "generator") {
  ObjectReader r(j, path);
  GeneratorConfig g;
  if (r.has("preset")) {
    const auto name = r.required<std::string>("preset");
    try {
      g = preset(name);
    } catch (const std::invalid_argument& e) {
      throw InputError(r.path("preset") + ": " + e.what());
    }
  }
  if (const json* cl = r.child("clusters")) {
    if (!cl->is_array()) throw InputError(r.path("clusters") + ": expected an array");
    g.clusters.clear();
    for (std::size_t i = 0; i < cl->size(); ++i) {
      ObjectReader c((*cl)[i], r.path("clusters") + "[" + std::to_string(i) + "]");
      ClusterSpec spec;
      spec.center = c.required<Vector>("center");
      spec.b_true = c.required<Vector>("b_true");
      c.optional("radius", spec.radius);
      c.optional("n_points", spec.n_points);
      c.finish();
      g.clusters.push_back(std::move(spec));
    }
  }
  r.optional("weibull_scale", g.weibull_scale);
  r.optional("weibull_shape", g.weibull_shape);
  if (r.has("risk_mode")) g.risk_mode = risk_mode_from_string(r.required<std::string>("risk_mode"));
  if (r.has("feature_distribution"))
    g.feature_distribution =
        feature_distribution_from_string(r.required<std::string>("feature_distribution"));
  r.optional("uniform_low", g.uniform_low);
  r.optional("uniform_high", g.uniform_high);
  r.optional("censoring_fraction", g.censoring_fraction);
  r.optional("direct_noise", g.direct_noise);
  r.finish();
  try {
    g.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(path + ": " + e.what());
  }
  return g;
}

inline json to_json(const ForestConfig& f) {
  return {{"n_trees", f.n_trees},
          {"max_depth", f.max_depth},
          {"features_per_split", f.features_per_split},
          {"min_leaf_events", f.min_leaf_events},
          {"bootstrap", f.bootstrap},
          {"seed", f.seed}};
}

inline ForestConfig forest_from_json(const json& j, const std::string& path = "forest") {
  ObjectReader r(j, path);
  ForestConfig f;
  r.optional("n_trees", f.n_trees);
  r.optional("max_depth", f.max_depth);
  r.optional("features_per_split", f.features_per_split);
  r.optional("min_leaf_events", f.min_leaf_events);
  r.optional("bootstrap", f.bootstrap);
  r.optional("seed", f.seed);
  r.finish();
  try {
    f.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(path + ": " + e.what());
  }
  return f;
}

inline json to_json(const MLPConfig& m) {
  return {{"hidden_layers", m.hidden_layers},
          {"activation", to_string(m.activation)},
          {"output_transform", to_string(m.output_transform)},
          {"init_scale", m.init_scale},
          {"seed", m.seed}};
}

inline MLPConfig mlp_from_json(const json& j, const std::string& path, MLPConfig m = {}) {
  ObjectReader r(j, path);
  r.optional("hidden_layers", m.hidden_layers);
  if (r.has("activation")) m.activation = activation_from_string(r.required<std::string>("activation"));
  if (r.has("output_transform"))
    m.output_transform = output_transform_from_string(r.required<std::string>("output_transform"));
  r.optional("init_scale", m.init_scale);
  r.optional("seed", m.seed);
  r.finish();
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(path + ": " + e.what());
  }
  return m;
}

inline json to_json(const ExplainerConfig& e) {
  return {{"n_points", e.n_points},
          {"sigma_sample", e.sigma_sample},
          {"sigma_weight", e.sigma_weight},
          {"tau", e.kernel.tau},
          {"varkappa", e.kernel.varkappa},
          {"use_time_weighting", e.kernel.use_time_weighting},
          {"subnet", to_json(e.subnet)},
          {"optimizer", e.optimizer == OptimizerMethod::adam ? "adam" : "sgd"},
          {"learning_rate", e.learning_rate},
          {"local_epochs", e.local_epochs},
          {"global_epochs", e.global_epochs},
          {"curve_points", e.curve_points},
          {"log_epsilon", e.log_epsilon},
          {"survnam_loss", e.survnam_loss == SurvNamLoss::log_chf ? "log_chf" : "chf"},
          {"keep_loss_history", e.keep_loss_history}};
}

inline ExplainerConfig explainer_from_json(const json& j, const std::string& path = "explainer") {
  ObjectReader r(j, path);
  ExplainerConfig e;
  r.optional("n_points", e.n_points);
  r.optional("sigma_sample", e.sigma_sample);
  r.optional("sigma_weight", e.sigma_weight);
  r.optional("tau", e.kernel.tau);
  r.optional("varkappa", e.kernel.varkappa);
  r.optional("use_time_weighting", e.kernel.use_time_weighting);
  if (const json* s = r.child("subnet")) e.subnet = mlp_from_json(*s, r.path("subnet"), e.subnet);
  if (r.has("optimizer")) {
    const auto o = r.required<std::string>("optimizer");
    if (o == "adam") e.optimizer = OptimizerMethod::adam;
    else if (o == "sgd") e.optimizer = OptimizerMethod::sgd;
    else throw InputError(r.path("optimizer") + ": expected adam or sgd");
  }
  r.optional("learning_rate", e.learning_rate);
  r.optional("local_epochs", e.local_epochs);
  r.optional("global_epochs", e.global_epochs);
  r.optional("curve_points", e.curve_points);
  r.optional("log_epsilon", e.log_epsilon);
  if (r.has("survnam_loss")) {
    const auto l = r.required<std::string>("survnam_loss");
    if (l == "log_chf") e.survnam_loss = SurvNamLoss::log_chf;
    else if (l == "chf") e.survnam_loss = SurvNamLoss::chf;
    else throw InputError(r.path("survnam_loss") + ": expected log_chf or chf");
  }
  r.optional("keep_loss_history", e.keep_loss_history);
  r.finish();
  if (e.n_points == 0 || !(e.sigma_sample > 0.0) || !(e.sigma_weight > 0.0) ||
      !(e.kernel.tau > 0.0) || !(e.learning_rate > 0.0) || e.local_epochs < 0 ||
      e.global_epochs < 0 || e.curve_points < 2)
    throw InputError(path + ": parameter out of range");
  return e;
}

// ---------------------------------------------------------------------------
// Run configuration

struct RunConfig {
  json raw;                  // the validated document, with CLI overrides applied
  std::uint64_t seed = 0;
  std::optional<unsigned> workers;
  std::optional<GeneratorConfig> generator;
  ForestConfig forest;
  ExplainerConfig explainer;
  ExperimentConfig experiment;
  std::vector<std::string> method_names_raw;
  struct Inputs {
    std::optional<std::string> dataset, model, ground_truth;
    std::vector<std::string> explanations;
  } inputs;
  struct Explain {
    std::optional<std::string> method;
    std::vector<std::size_t> anchor_rows;
    std::vector<Vector> anchors;
  } explain;

  // Worker count does not affect results, so it is left out of the hash.
  std::string hash() const {
    json j = raw;
    if (j.is_object()) j.erase("workers");
    return config_hash(j);
  }
};

/// Validates against the run_config schema, then parses with unknown-field
/// rejection. Method names are kept as strings so that callers can report
/// unknown methods with their own exit code.
inline RunConfig parse_run_config(const json& j) {
  if (auto errs = schema_validator("run_config").errors(j); !errs.empty())
    throw InputError("config " + errs.front());
  RunConfig c;
  c.raw = j;
  ObjectReader r(j, "$");
  r.required<int>("format_version");
  r.optional("seed", c.seed);
  if (r.has("workers")) c.workers = r.required<unsigned>("workers");
  if (const json* g = r.child("generator")) c.generator = generator_from_json(*g, "$.generator");
  if (const json* f = r.child("forest")) c.forest = forest_from_json(*f, "$.forest");
  if (const json* e = r.child("explainer")) c.explainer = explainer_from_json(*e, "$.explainer");
  if (const json* ex = r.child("experiment")) {
    ObjectReader er(*ex, "$.experiment");
    er.optional("methods", c.method_names_raw);
    er.optional("test_points", c.experiment.test_points);
    er.optional("test_fraction", c.experiment.test_fraction);
    er.finish();
  }
  if (const json* in = r.child("inputs")) {
    ObjectReader ir(*in, "$.inputs");
    if (ir.has("dataset")) c.inputs.dataset = ir.required<std::string>("dataset");
    if (ir.has("model")) c.inputs.model = ir.required<std::string>("model");
    if (ir.has("ground_truth")) c.inputs.ground_truth = ir.required<std::string>("ground_truth");
    ir.optional("explanations", c.inputs.explanations);
    ir.finish();
  }
  if (const json* ex = r.child("explain")) {
    ObjectReader er(*ex, "$.explain");
    if (er.has("method")) c.explain.method = er.required<std::string>("method");
    er.optional("anchor_rows", c.explain.anchor_rows);
    er.optional("anchors", c.explain.anchors);
    er.finish();
  }
  r.finish();
  c.experiment.forest = c.forest;
  c.experiment.explainer = c.explainer;
  if (c.generator) c.experiment.generator = *c.generator;
  c.experiment.seed = c.seed;
  return c;
}

// ---------------------------------------------------------------------------
// Documents

inline json to_json(const StepFunction& s) {
  return {{"times", s.times}, {"values", s.values}, {"initial_value", s.initial_value}};
}

inline StepFunction step_function_from_json(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  StepFunction s{r.required<Vector>("times"), r.required<Vector>("values"),
                 r.required<double>("initial_value")};
  r.finish();
  if (s.times.size() != s.values.size()) throw InputError(path + ": length mismatch");
  return s;
}

inline json ground_truth_json(const GeneratedData& g, std::uint64_t seed) {
  return {{"format_version", kFormatVersion},
          {"kind", "ground_truth"},
          {"seed", seed},
          {"generator", to_json(g.config)},
          {"b_true", g.b_true},
          {"cluster_of", g.cluster_of}};
}

struct GroundTruth {
  std::vector<Vector> b_true;
  std::vector<std::size_t> cluster_of;
};

inline GroundTruth ground_truth_from_json(const json& j) {
  if (auto errs = schema_validator("ground_truth").errors(j); !errs.empty())
    throw InputError("ground truth " + errs.front());
  GroundTruth g;
  g.b_true = j.at("b_true").get<std::vector<Vector>>();
  g.cluster_of = j.at("cluster_of").get<std::vector<std::size_t>>();
  for (auto c : g.cluster_of)
    if (c >= g.b_true.size()) throw InputError("ground truth: cluster index out of range");
  return g;
}

inline json to_json(const RSFModel& m) {
  json trees = json::array();
  for (const auto& t : m.trees()) {
    json nodes = json::array(), leaves = json::array();
    for (const auto& n : t.nodes)
      nodes.push_back({{"feature", n.feature},
                       {"threshold", n.threshold},
                       {"left", n.left},
                       {"right", n.right},
                       {"leaf", n.leaf}});
    for (const auto& l : t.leaves) leaves.push_back(to_json(l.chf));
    trees.push_back({{"nodes", nodes}, {"leaves", leaves}});
  }
  return {{"format_version", kFormatVersion},
          {"kind", "rsf_model"},
          {"dim", m.dim()},
          {"config", to_json(m.config())},
          {"time_grid", m.time_grid()},
          {"trees", trees}};
}

inline RSFModel rsf_from_json(const json& j) {
  if (auto errs = schema_validator("rsf_model").errors(j); !errs.empty())
    throw InputError("model " + errs.front());
  const auto dim = j.at("dim").get<std::size_t>();
  std::vector<SurvivalTree> trees;
  for (std::size_t ti = 0; ti < j.at("trees").size(); ++ti) {
    const json& jt = j.at("trees")[ti];
    SurvivalTree t;
    for (const auto& jn : jt.at("nodes"))
      t.nodes.push_back({jn.at("feature").get<int>(), jn.at("threshold").get<double>(),
                         jn.at("left").get<int>(), jn.at("right").get<int>(),
                         jn.at("leaf").get<int>()});
    for (const auto& jl : jt.at("leaves")) {
      SurvivalLeaf l;
      l.chf = step_function_from_json(jl, "leaf");
      t.leaves.push_back(std::move(l));
    }
    // Structural checks so that prediction cannot index out of range.
    const int n_nodes = static_cast<int>(t.nodes.size());
    const int n_leaves = static_cast<int>(t.leaves.size());
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
      const auto& n = t.nodes[i];
      const bool ok = n.feature < 0
                          ? (n.leaf >= 0 && n.leaf < n_leaves)
                          : (static_cast<std::size_t>(n.feature) < dim &&
                             n.left > static_cast<int>(i) && n.left < n_nodes &&
                             n.right > static_cast<int>(i) && n.right < n_nodes);
      if (!ok)
        throw InputError("model: tree " + std::to_string(ti) + " node " + std::to_string(i) +
                         " is malformed");
    }
    trees.push_back(std::move(t));
  }
  try {
    return RSFModel(std::move(trees), j.at("time_grid").get<Vector>(),
                    forest_from_json(j.at("config"), "config"), dim);
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("model: ") + e.what());
  }
}

namespace detail {

inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace detail

inline json to_json(const ExplanationResult& r, std::optional<std::size_t> anchor_row,
                    const std::string& hash) {
  json curves = json::array();
  for (const auto& c : r.curves)
    curves.push_back({{"feature", c.feature}, {"grid", c.grid}, {"values", c.values}});
  json history = json::array();
  for (double v : r.diagnostics.loss_history) history.push_back(detail::finite_or_null(v));
  json normalized = nullptr;
  try {
    normalized = normalize_importance(r.importance).normalized;
  } catch (const std::invalid_argument&) {
  }
  json network = nullptr;
  if (!r.network_params.empty())
    network = {{"config", to_json(r.network_config)}, {"params", r.network_params}};
  return {{"format_version", kFormatVersion},
          {"kind", "explanation"},
          {"method", to_string(r.method)},
          {"anchor", r.anchor},
          {"anchor_row", anchor_row ? json(*anchor_row) : json(nullptr)},
          {"importance", r.importance},
          {"importance_normalized", normalized},
          {"curves", curves},
          {"fitted_sf", to_json(r.fitted_sf)},
          {"diagnostics",
           {{"initial_loss", detail::finite_or_null(r.diagnostics.initial_loss)},
            {"final_loss", detail::finite_or_null(r.diagnostics.final_loss)},
            {"epochs", r.diagnostics.epochs},
            {"seed", r.diagnostics.seed},
            {"loss_history", history}}},
          {"network", network},
          {"config_hash", hash}};
}

struct StoredExplanation {
  ExplanationResult result;
  std::optional<std::size_t> anchor_row;
};

inline StoredExplanation explanation_from_json(const json& j) {
  if (auto errs = schema_validator("explanation").errors(j); !errs.empty())
    throw InputError("explanation " + errs.front());
  StoredExplanation s;
  auto& r = s.result;
  r.method = method_from_string(j.at("method").get<std::string>());
  r.anchor = j.at("anchor").get<Vector>();
  if (!j.at("anchor_row").is_null()) s.anchor_row = j.at("anchor_row").get<std::size_t>();
  r.importance = j.at("importance").get<Vector>();
  for (const auto& c : j.at("curves"))
    r.curves.push_back({c.at("feature").get<std::size_t>(), c.at("grid").get<Vector>(),
                        c.at("values").get<Vector>()});
  r.fitted_sf = step_function_from_json(j.at("fitted_sf"), "fitted_sf");
  const json& d = j.at("diagnostics");
  auto num = [](const json& v) {
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  };
  r.diagnostics.initial_loss = num(d.at("initial_loss"));
  r.diagnostics.final_loss = num(d.at("final_loss"));
  r.diagnostics.epochs = d.at("epochs").get<int>();
  r.diagnostics.seed = d.at("seed").get<std::uint64_t>();
  for (const auto& v : d.at("loss_history")) r.diagnostics.loss_history.push_back(num(v));
  if (!j.at("network").is_null()) {
    r.network_config = mlp_from_json(j.at("network").at("config"), "network.config");
    r.network_params = j.at("network").at("params").get<Vector>();
  }
  return s;
}

inline json to_json(const MetricsReport& rep) {
  auto agg = [](const Aggregate& a) {
    return json{{"mean", a.count ? detail::finite_or_null(a.mean) : json(nullptr)},
                {"sd", a.count ? detail::finite_or_null(a.sd) : json(nullptr)},
                {"count", a.count}};
  };
  json rows = json::array();
  for (const auto& m : rep.per_instance) {
    auto val = [&](double v) { return m.skipped ? json(nullptr) : detail::finite_or_null(v); };
    rows.push_back({{"anchor_row", m.anchor_row},
                    {"skipped", m.skipped},
                    {"reason", m.reason},
                    {"D", val(m.D)},
                    {"KL", val(m.KL)},
                    {"C", (!m.skipped && m.C) ? json(*m.C) : json(nullptr)},
                    {"sf_distance", val(m.sf_distance)},
                    {"importance", m.importance},
                    {"truth", m.truth}});
  }
  return {{"method", rep.method},
          {"skipped", rep.skipped},
          {"aggregates",
           {{"MSD", agg(rep.msd)}, {"MKL", agg(rep.mkl)}, {"MCI", agg(rep.mci)},
            {"MSFD", agg(rep.msfd)}}},
          {"per_instance", rows}};
}

inline json metrics_json(std::span<const MetricsReport> reports,
                         std::optional<double> blackbox_cindex, const std::string& hash) {
  json methods = json::array();
  for (const auto& r : reports) methods.push_back(to_json(r));
  return {{"format_version", kFormatVersion},
          {"kind", "metrics_report"},
          {"config_hash", hash},
          {"blackbox_test_cindex", blackbox_cindex ? json(*blackbox_cindex) : json(nullptr)},
          {"methods", methods}};
}

/// One row per method: mean and SD of MSD, MKL, MCI and MSFD.
inline std::string metrics_table_csv(std::span<const MetricsReport> reports) {
  std::string out = "method,MSD,MSD_sd,MKL,MKL_sd,MCI,MCI_sd,MSFD,MSFD_sd,n,skipped\n";
  auto cell = [](const Aggregate& a) {
    return a.count ? format_double(a.mean) + "," + format_double(a.sd) : std::string(",");
  };
  for (const auto& r : reports)
    out += r.method + "," + cell(r.msd) + "," + cell(r.mkl) + "," + cell(r.mci) + "," +
           cell(r.msfd) + "," + std::to_string(r.per_instance.size()) + "," +
           std::to_string(r.skipped) + "\n";
  return out;
}

/// Raw per-instance values (for boxplots).
inline std::string per_instance_csv(std::span<const MetricsReport> reports) {
  std::string out = "method,anchor_row,D,KL,C,sf_distance,skipped\n";
  for (const auto& r : reports)
    for (const auto& m : r.per_instance) {
      out += r.method + "," + std::to_string(m.anchor_row) + ",";
      if (m.skipped) {
        out += ",,,,1\n";
        continue;
      }
      out += format_double(m.D) + "," + format_double(m.KL) + "," +
             (m.C ? format_double(*m.C) : std::string()) + "," + format_double(m.sf_distance) +
             ",0\n";
    }
  return out;
}

/// feature,grid_value,function_value with 1-based feature numbers.
inline std::string curves_csv(const std::vector<FeatureCurve>& curves) {
  std::string out = "feature,grid_value,function_value\n";
  for (const auto& c : curves)
    for (std::size_t i = 0; i < c.grid.size(); ++i)
      out += "f" + std::to_string(c.feature + 1) + "," + format_double(c.grid[i]) + "," +
             format_double(c.values[i]) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Output staging

/// Collects output files; each is written to a temporary name and renamed,
/// and `rollback` removes everything written so far.
class OutputSet {
 public:
  explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::filesystem::path write(const std::string& name, const std::string& content) {
    namespace fs = std::filesystem;
    if (!created_dir_ && !fs::exists(dir_)) {
      fs::create_directories(dir_);
      created_dir_ = true;
    }
    const fs::path target = dir_ / name;
    const fs::path tmp = dir_ / (name + ".partial");
    {
      std::ofstream out(tmp, std::ios::binary);
      if (!out) throw std::runtime_error("cannot write " + tmp.string());
      out << content;
      if (!out) throw std::runtime_error("cannot write " + tmp.string());
    }
    written_.push_back(target);
    fs::rename(tmp, target);
    return target;
  }

  void rollback() noexcept {
    std::error_code ec;
    for (const auto& p : written_) {
      std::filesystem::remove(p, ec);
      std::filesystem::remove(p.string() + ".partial", ec);
    }
    written_.clear();
    if (created_dir_) std::filesystem::remove(dir_, ec);  // only if now empty
  }

  const std::vector<std::filesystem::path>& files() const { return written_; }

 private:
  std::filesystem::path dir_;
  bool created_dir_ = false;
  std::vector<std::filesystem::path> written_;
};

}  // namespace benim
