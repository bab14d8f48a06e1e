#pragma once

// Types shared by all explainers: neighborhood sampling, configuration,
// results, black-box targets on a neighborhood and the training loop.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "benim/autodiff.hpp"
#include "benim/blackbox.hpp"
#include "benim/mlp.hpp"
#include "benim/optim.hpp"
#include "benim/rng.hpp"
#include "benim/survival.hpp"

namespace benim {

struct NeighborhoodSample {
  Vector anchor;
  std::vector<Vector> points;
  Vector weights;
  double sigma_sample = 0.2;
  double sigma_weight = 0.4;
  std::uint64_t seed = 0;

  std::size_t size() const { return points.size(); }
};

inline double neighborhood_weight(std::span<const double> z, std::span<const double> x,
                                  double sigma_weight) {
  return std::exp(-squared_distance(z, x) / (sigma_weight * sigma_weight));
}

/// z_j ~ Normal(x, sigma_sample^2 I), v_j = exp(-||z_j - x||^2 / sigma_weight^2).
inline NeighborhoodSample sample_neighborhood(std::span<const double> x, std::size_t n_points,
                                              double sigma_sample, double sigma_weight,
                                              std::uint64_t seed) {
  if (!(sigma_sample > 0.0) || !(sigma_weight > 0.0))
    throw std::invalid_argument("neighborhood sigmas must be positive");
  if (n_points == 0) throw std::invalid_argument("neighborhood needs at least one point");
  NeighborhoodSample s;
  s.anchor.assign(x.begin(), x.end());
  s.sigma_sample = sigma_sample;
  s.sigma_weight = sigma_weight;
  s.seed = seed;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  s.points.reserve(n_points);
  s.weights.reserve(n_points);
  for (std::size_t j = 0; j < n_points; ++j) {
    Vector z(x.size());
    for (std::size_t k = 0; k < z.size(); ++k) z[k] = x[k] + sigma_sample * normal(rng);
    s.weights.push_back(neighborhood_weight(z, x, sigma_weight));
    s.points.push_back(std::move(z));
  }
  return s;
}

struct KernelConfig {
  double tau = 1.0;
  /// Time-weighting kernel parameter; <= 0 selects (t_max / 4)^2.
  double varkappa = 0.0;
  bool use_time_weighting = false;

  double resolved_varkappa(const Vector& grid) const {
    if (varkappa > 0.0) return varkappa;
    const double tmax = grid.empty() ? 1.0 : grid.back();
    return (tmax / 4.0) * (tmax / 4.0);
  }
};

enum class SurvNamLoss { log_chf, chf };

struct ExplainerConfig {
  std::size_t n_points = 100;
  double sigma_sample = 0.2;
  double sigma_weight = 0.4;
  KernelConfig kernel;
  MLPConfig subnet{{16, 16}, Activation::tanh, OutputTransform::softplus, 0.5, 0};
  OptimizerMethod optimizer = OptimizerMethod::adam;
  double learning_rate = 1e-2;
  int local_epochs = 200;
  int global_epochs = 500;
  std::size_t curve_points = 64;
  /// Intervals whose CHF is below this are excluded from log-CHF losses.
  double log_epsilon = 1e-6;
  SurvNamLoss survnam_loss = SurvNamLoss::log_chf;
  std::uint64_t seed = 0;
  bool keep_loss_history = true;
};

enum class Method { survbenim_local, survbenim_global, survbex, survlime, survnam };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::survbenim_local: return "survbenim-local";
    case Method::survbenim_global: return "survbenim-global";
    case Method::survbex: return "survbex";
    case Method::survlime: return "survlime";
    case Method::survnam: return "survnam";
  }
  return "?";
}

inline const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names{"survbenim-local", "survbenim-global", "survbex",
                                              "survlime", "survnam"};
  return names;
}

inline Method method_from_string(const std::string& s) {
  if (s == "survbenim-local") return Method::survbenim_local;
  if (s == "survbenim-global") return Method::survbenim_global;
  if (s == "survbex") return Method::survbex;
  if (s == "survlime") return Method::survlime;
  if (s == "survnam") return Method::survnam;
  std::string msg = "unknown method '" + s + "'; valid methods:";
  for (const auto& n : method_names()) msg += " " + n;
  throw std::invalid_argument(msg);
}

struct FeatureCurve {
  std::size_t feature = 0;
  Vector grid;
  Vector values;
};

struct Diagnostics {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int epochs = 0;
  std::uint64_t seed = 0;
  Vector loss_history;
};

struct ExplanationResult {
  Method method = Method::survbenim_local;
  Vector anchor;
  Vector importance;
  std::vector<FeatureCurve> curves;  // SurvBeNIM (h_j) and SurvNAM (g_j) only
  StepFunction fitted_sf;
  Diagnostics diagnostics;
  Vector network_params;  // empty for methods without a network
  MLPConfig network_config;
};

/// Black-box predictions on a neighborhood, as interval values on the grid.
struct NeighborhoodTargets {
  std::vector<Vector> sf;   // S^{(i)}(z_j)
  std::vector<Vector> chf;  // H^{(i)}(z_j)
};

inline NeighborhoodTargets predict_targets(const SurvivalModel& bb,
                                           const NeighborhoodSample& sample) {
  NeighborhoodTargets t;
  t.sf.reserve(sample.size());
  t.chf.reserve(sample.size());
  for (const auto& z : sample.points) {
    StepFunction chf = bb.predict_chf(z);
    t.chf.push_back(chf.interval_values());
    t.sf.push_back(chf_to_sf(chf).interval_values());
  }
  return t;
}

/// Per-feature evaluation grid spanning the observed feature range.
inline Vector feature_grid(const SurvivalDataset& data, std::size_t k, std::size_t points) {
  double lo = data[0].features[k], hi = lo;
  for (const auto& r : data.records()) {
    lo = std::min(lo, r.features[k]);
    hi = std::max(hi, r.features[k]);
  }
  Vector g(points);
  for (std::size_t i = 0; i < points; ++i)
    g[i] = points == 1 ? lo
                       : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  return g;
}

inline std::vector<FeatureCurve> network_curves(const ImportanceNetwork& net,
                                                const SurvivalDataset& data,
                                                std::size_t points) {
  std::vector<FeatureCurve> curves;
  for (std::size_t k = 0; k < net.features(); ++k) {
    FeatureCurve c;
    c.feature = k;
    c.grid = feature_grid(data, k, points);
    for (double v : c.grid) c.values.push_back(net(k, v));
    curves.push_back(std::move(c));
  }
  return curves;
}

/// Full-batch first-order minimization of `loss(tape, params)`.
template <typename Loss>
Diagnostics minimize(Loss&& loss, std::vector<double>& params, const ExplainerConfig& cfg,
                     int epochs) {
  Diagnostics diag;
  diag.epochs = epochs;
  diag.seed = cfg.seed;
  OptimizerState opt(cfg.optimizer, cfg.learning_rate);
  ad::Tape tape;
  std::vector<ad::Var> vars;
  std::vector<double> grad(params.size());
  auto evaluate = [&](bool with_grad) {
    tape.clear();
    vars.clear();
    for (double p : params) vars.push_back(tape.variable(p));
    ad::Var out = loss(tape, std::span<const ad::Var>(vars));
    const double value = out.value();
    if (!std::isfinite(value)) {
      std::ostringstream os;
      os << "loss became non-finite (" << value << ") after " << opt.step << " steps";
      throw std::runtime_error(os.str());
    }
    if (with_grad) {
      const auto& adj = tape.backward(out);
      for (std::size_t i = 0; i < params.size(); ++i) grad[i] = adj[vars[i].index()];
    }
    return value;
  };
  for (int e = 0; e < epochs; ++e) {
    const double value = evaluate(true);
    if (e == 0) diag.initial_loss = value;
    if (cfg.keep_loss_history) diag.loss_history.push_back(value);
    optimizer_step(opt, params, grad);
  }
  diag.final_loss = evaluate(false);
  if (epochs == 0) diag.initial_loss = diag.final_loss;
  return diag;
}

}  // namespace benim
