#pragma once

// Published JSON schemas of every document the library reads or writes.
// `benim schemas --out DIR` writes them to disk; schemas/ holds a copy.

#include <map>
#include <stdexcept>
#include <string>

#include "benim/json_schema.hpp"

namespace benim {

inline constexpr int kFormatVersion = 1;

namespace schema_text {

inline constexpr const char* kDefs = R"json(
  "$defs": {
    "number_array": {"type": "array", "items": {"type": "number"}},
    "seed": {"type": "integer", "minimum": 0},
    "step_function": {
      "type": "object",
      "additionalProperties": false,
      "required": ["times", "values", "initial_value"],
      "properties": {
        "times": {"$ref": "#/$defs/number_array"},
        "values": {"$ref": "#/$defs/number_array"},
        "initial_value": {"type": "number"}
      }
    },
    "cluster": {
      "type": "object",
      "additionalProperties": false,
      "required": ["center", "b_true"],
      "properties": {
        "center": {"$ref": "#/$defs/number_array", "minItems": 1},
        "radius": {"type": "number", "minimum": 0},
        "b_true": {"$ref": "#/$defs/number_array", "minItems": 1},
        "n_points": {"type": "integer", "minimum": 1}
      }
    },
    "generator": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "preset": {"enum": ["2c5f", "2c20f", "5c10f", "cox5", "nonlinear-cox5", "nonlinear-direct5"]},
        "clusters": {"type": "array", "minItems": 1, "items": {"$ref": "#/$defs/cluster"}},
        "weibull_scale": {"type": "number", "minimum": 0},
        "weibull_shape": {"type": "number", "minimum": 0},
        "risk_mode": {"enum": ["linear_cox", "nonlinear_cox", "nonlinear_direct"]},
        "feature_distribution": {"enum": ["cluster_ball", "uniform"]},
        "uniform_low": {"type": "number"},
        "uniform_high": {"type": "number"},
        "censoring_fraction": {"type": "number", "minimum": 0, "maximum": 1},
        "direct_noise": {"type": "number", "minimum": 0}
      }
    },
    "forest": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "n_trees": {"type": "integer", "minimum": 1},
        "max_depth": {"type": "integer", "minimum": 0},
        "features_per_split": {"type": "integer", "minimum": 0},
        "min_leaf_events": {"type": "integer", "minimum": 1},
        "bootstrap": {"type": "boolean"},
        "seed": {"$ref": "#/$defs/seed"}
      }
    },
    "mlp": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "hidden_layers": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "activation": {"enum": ["relu", "tanh", "softplus"]},
        "output_transform": {"enum": ["identity", "softplus", "abs"]},
        "init_scale": {"type": "number", "minimum": 0},
        "seed": {"$ref": "#/$defs/seed"}
      }
    },
    "explainer": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "n_points": {"type": "integer", "minimum": 1},
        "sigma_sample": {"type": "number", "minimum": 0},
        "sigma_weight": {"type": "number", "minimum": 0},
        "tau": {"type": "number", "minimum": 0},
        "varkappa": {"type": "number"},
        "use_time_weighting": {"type": "boolean"},
        "subnet": {"$ref": "#/$defs/mlp"},
        "optimizer": {"enum": ["sgd", "adam"]},
        "learning_rate": {"type": "number", "minimum": 0},
        "local_epochs": {"type": "integer", "minimum": 0},
        "global_epochs": {"type": "integer", "minimum": 0},
        "curve_points": {"type": "integer", "minimum": 2},
        "log_epsilon": {"type": "number", "minimum": 0},
        "survnam_loss": {"enum": ["log_chf", "chf"]},
        "keep_loss_history": {"type": "boolean"}
      }
    },
    "method": {"enum": ["survbenim-local", "survbenim-global", "survbex", "survlime", "survnam"]},
    "aggregate": {
      "type": "object",
      "additionalProperties": false,
      "required": ["mean", "sd", "count"],
      "properties": {
        "mean": {"type": ["number", "null"]},
        "sd": {"type": ["number", "null"]},
        "count": {"type": "integer", "minimum": 0}
      }
    }
  })json";

inline constexpr const char* kRunConfig = R"json({
  "$schema": "https://json-schema.org/draft/2020-12/schema",
  "title": "benim run configuration",
  "type": "object",
  "additionalProperties": false,
  "required": ["format_version"],
  "properties": {
    "format_version": {"const": 1},
    "seed": {"$ref": "#/$defs/seed"},
    "workers": {"type": "integer", "minimum": 1},
    "generator": {"$ref": "#/$defs/generator"},
    "forest": {"$ref": "#/$defs/forest"},
    "explainer": {"$ref": "#/$defs/explainer"},
    "experiment": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "methods": {"type": "array", "minItems": 1, "items": {"type": "string"}},
        "test_points": {"type": "integer", "minimum": 1},
        "test_fraction": {"type": "number", "minimum": 0, "maximum": 1}
      }
    },
    "inputs": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "dataset": {"type": "string"},
        "model": {"type": "string"},
        "ground_truth": {"type": "string"},
        "explanations": {"type": "array", "items": {"type": "string"}}
      }
    },
    "explain": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "method": {"type": "string"},
        "anchor_rows": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "anchors": {"type": "array", "items": {"$ref": "#/$defs/number_array"}}
      }
    }
  },)json";

inline constexpr const char* kGroundTruth = R"json({
  "$schema": "https://json-schema.org/draft/2020-12/schema",
  "title": "benim synthetic ground truth",
  "type": "object",
  "additionalProperties": false,
  "required": ["format_version", "kind", "seed", "generator", "b_true", "cluster_of"],
  "properties": {
    "format_version": {"const": 1},
    "kind": {"const": "ground_truth"},
    "seed": {"$ref": "#/$defs/seed"},
    "generator": {"$ref": "#/$defs/generator"},
    "b_true": {"type": "array", "minItems": 1, "items": {"$ref": "#/$defs/number_array"}},
    "cluster_of": {"type": "array", "items": {"type": "integer", "minimum": 0}}
  },)json";

inline constexpr const char* kModel = R"json({
  "$schema": "https://json-schema.org/draft/2020-12/schema",
  "title": "benim random survival forest",
  "type": "object",
  "additionalProperties": false,
  "required": ["format_version", "kind", "dim", "config", "time_grid", "trees"],
  "properties": {
    "format_version": {"const": 1},
    "kind": {"const": "rsf_model"},
    "dim": {"type": "integer", "minimum": 1},
    "config": {"$ref": "#/$defs/forest"},
    "time_grid": {"$ref": "#/$defs/number_array"},
    "trees": {
      "type": "array",
      "minItems": 1,
      "items": {
        "type": "object",
        "additionalProperties": false,
        "required": ["nodes", "leaves"],
        "properties": {
          "nodes": {
            "type": "array",
            "minItems": 1,
            "items": {
              "type": "object",
              "additionalProperties": false,
              "required": ["feature", "threshold", "left", "right", "leaf"],
              "properties": {
                "feature": {"type": "integer", "minimum": -1},
                "threshold": {"type": "number"},
                "left": {"type": "integer", "minimum": -1},
                "right": {"type": "integer", "minimum": -1},
                "leaf": {"type": "integer", "minimum": -1}
              }
            }
          },
          "leaves": {"type": "array", "items": {"$ref": "#/$defs/step_function"}}
        }
      }
    }
  },)json";

inline constexpr const char* kExplanation = R"json({
  "$schema": "https://json-schema.org/draft/2020-12/schema",
  "title": "benim explanation result",
  "type": "object",
  "additionalProperties": false,
  "required": ["format_version", "kind", "method", "anchor", "anchor_row", "importance",
               "importance_normalized", "curves", "fitted_sf", "diagnostics", "network",
               "config_hash"],
  "properties": {
    "format_version": {"const": 1},
    "kind": {"const": "explanation"},
    "method": {"$ref": "#/$defs/method"},
    "anchor": {"$ref": "#/$defs/number_array"},
    "anchor_row": {"type": ["integer", "null"], "minimum": 0},
    "importance": {"$ref": "#/$defs/number_array"},
    "importance_normalized": {"anyOf": [{"$ref": "#/$defs/number_array"}, {"type": "null"}]},
    "curves": {
      "type": "array",
      "items": {
        "type": "object",
        "additionalProperties": false,
        "required": ["feature", "grid", "values"],
        "properties": {
          "feature": {"type": "integer", "minimum": 0},
          "grid": {"$ref": "#/$defs/number_array"},
          "values": {"$ref": "#/$defs/number_array"}
        }
      }
    },
    "fitted_sf": {"$ref": "#/$defs/step_function"},
    "diagnostics": {
      "type": "object",
      "additionalProperties": false,
      "required": ["initial_loss", "final_loss", "epochs", "seed", "loss_history"],
      "properties": {
        "initial_loss": {"type": ["number", "null"]},
        "final_loss": {"type": ["number", "null"]},
        "epochs": {"type": "integer", "minimum": 0},
        "seed": {"$ref": "#/$defs/seed"},
        "loss_history": {"type": "array", "items": {"type": ["number", "null"]}}
      }
    },
    "network": {
      "anyOf": [
        {"type": "null"},
        {
          "type": "object",
          "additionalProperties": false,
          "required": ["config", "params"],
          "properties": {
            "config": {"$ref": "#/$defs/mlp"},
            "params": {"$ref": "#/$defs/number_array"}
          }
        }
      ]
    },
    "config_hash": {"type": "string"}
  },)json";

inline constexpr const char* kMetricsReport = R"json({
  "$schema": "https://json-schema.org/draft/2020-12/schema",
  "title": "benim metrics report",
  "type": "object",
  "additionalProperties": false,
  "required": ["format_version", "kind", "config_hash", "blackbox_test_cindex", "methods"],
  "properties": {
    "format_version": {"const": 1},
    "kind": {"const": "metrics_report"},
    "config_hash": {"type": "string"},
    "blackbox_test_cindex": {"type": ["number", "null"]},
    "methods": {
      "type": "array",
      "items": {
        "type": "object",
        "additionalProperties": false,
        "required": ["method", "skipped", "aggregates", "per_instance"],
        "properties": {
          "method": {"$ref": "#/$defs/method"},
          "skipped": {"type": "integer", "minimum": 0},
          "aggregates": {
            "type": "object",
            "additionalProperties": false,
            "required": ["MSD", "MKL", "MCI", "MSFD"],
            "properties": {
              "MSD": {"$ref": "#/$defs/aggregate"},
              "MKL": {"$ref": "#/$defs/aggregate"},
              "MCI": {"$ref": "#/$defs/aggregate"},
              "MSFD": {"$ref": "#/$defs/aggregate"}
            }
          },
          "per_instance": {
            "type": "array",
            "items": {
              "type": "object",
              "additionalProperties": false,
              "required": ["anchor_row", "skipped", "reason", "D", "KL", "C", "sf_distance",
                           "importance", "truth"],
              "properties": {
                "anchor_row": {"type": "integer", "minimum": 0},
                "skipped": {"type": "boolean"},
                "reason": {"type": "string"},
                "D": {"type": ["number", "null"]},
                "KL": {"type": ["number", "null"]},
                "C": {"type": ["number", "null"]},
                "sf_distance": {"type": ["number", "null"]},
                "importance": {"$ref": "#/$defs/number_array"},
                "truth": {"$ref": "#/$defs/number_array"}
              }
            }
          }
        }
      }
    }
  },)json";

}  // namespace schema_text

/// Schema name -> parsed schema document.
inline const std::map<std::string, json>& schemas() {
  static const std::map<std::string, json> all = [] {
    std::map<std::string, json> m;
    auto add = [&](const char* name, const char* head) {
      m[name] = json::parse(std::string(head) + schema_text::kDefs + "\n}");
    };
    add("run_config", schema_text::kRunConfig);
    add("ground_truth", schema_text::kGroundTruth);
    add("rsf_model", schema_text::kModel);
    add("explanation", schema_text::kExplanation);
    add("metrics_report", schema_text::kMetricsReport);
    return m;
  }();
  return all;
}

inline const SchemaValidator& schema_validator(const std::string& name) {
  static const std::map<std::string, SchemaValidator> validators = [] {
    std::map<std::string, SchemaValidator> v;
    for (const auto& [k, s] : schemas()) v.emplace(k, SchemaValidator(s));
    return v;
  }();
  auto it = validators.find(name);
  if (it == validators.end()) throw std::invalid_argument("unknown schema " + name);
  return it->second;
}

}  // namespace benim
