#pragma once

// Synthetic survival data: Weibull-Cox times over clustered or uniform
// features, nonlinear risk variants and independent uniform censoring.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "benim/rng.hpp"
#include "benim/survival.hpp"

namespace benim {

enum class RiskMode { linear_cox, nonlinear_cox, nonlinear_direct };
enum class FeatureDistribution { cluster_ball, uniform };

struct ClusterSpec {
  Vector center;
  double radius = 0.2;
  Vector b_true;
  std::size_t n_points = 200;
};

struct GeneratorConfig {
  std::vector<ClusterSpec> clusters;
  double weibull_scale = 1e-5;
  double weibull_shape = 2.0;
  RiskMode risk_mode = RiskMode::linear_cox;
  FeatureDistribution feature_distribution = FeatureDistribution::cluster_ball;
  double uniform_low = -5.0;
  double uniform_high = 5.0;
  double censoring_fraction = 0.3;
  /// Multiplicative lognormal noise of nonlinear_direct times.
  double direct_noise = 0.05;
  std::uint64_t seed = 0;

  std::size_t dim() const { return clusters.empty() ? 0 : clusters.front().b_true.size(); }

  void validate() const {
    if (clusters.empty()) throw std::invalid_argument("generator needs at least one cluster");
    const std::size_t d = dim();
    if (d == 0) throw std::invalid_argument("b_true must be nonempty");
    for (const auto& c : clusters) {
      if (c.b_true.size() != d || c.center.size() != d)
        throw std::invalid_argument("cluster dimension mismatch");
      if (!(c.radius > 0.0)) throw std::invalid_argument("cluster radius must be positive");
      if (c.n_points == 0) throw std::invalid_argument("cluster must have points");
    }
    if (!(weibull_scale > 0.0) || !(weibull_shape > 0.0))
      throw std::invalid_argument("Weibull parameters must be positive");
    if (!(censoring_fraction >= 0.0 && censoring_fraction < 1.0))
      throw std::invalid_argument("censoring_fraction must lie in [0, 1)");
    if (!(uniform_high > uniform_low)) throw std::invalid_argument("empty uniform range");
  }
};

struct GeneratedData {
  SurvivalDataset dataset;
  std::vector<std::size_t> cluster_of;  // per record
  std::vector<Vector> b_true;           // per cluster
  GeneratorConfig config;
};

/// T = (-ln u / (lambda exp(risk)))^(1/v).
inline double gen_time(double risk, double lambda, double shape, double u) {
  if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("u must lie in (0, 1)");
  if (!(lambda > 0.0) || !(shape > 0.0))
    throw std::invalid_argument("Weibull parameters must be positive");
  return std::pow(-std::log(u) / (lambda * std::exp(risk)), 1.0 / shape);
}

inline double nonlinear_risk(std::span<const double> x) {
  if (x.size() < 5) throw std::invalid_argument("nonlinear risk needs 5 features");
  return x[0] * x[0] + std::max(0.0, x[1]) + std::abs(x[2]) + 1e-20 * x[3] + 1e-20 * x[4];
}

/// Upper bound q of Uniform(0, q) censoring so that the expected censored
/// fraction mean_i min(1, T_i / q) equals `fraction`.
inline double calibrate_censoring(std::span<const double> times, double fraction) {
  if (fraction <= 0.0) return std::numeric_limits<double>::infinity();
  auto censored = [&](double q) {
    double s = 0.0;
    for (double t : times) s += std::min(1.0, t / q);
    return s / static_cast<double>(times.size());
  };
  double hi = *std::max_element(times.begin(), times.end());
  if (hi <= 0.0) return std::numeric_limits<double>::infinity();
  double lo = hi;
  while (censored(lo) < fraction) lo *= 0.5;
  while (censored(hi) > fraction) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (censored(mid) > fraction ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline GeneratedData gen_clustered_dataset(const GeneratorConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.dim();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> box(cfg.uniform_low, cfg.uniform_high);

  GeneratedData out;
  out.config = cfg;
  std::vector<Vector> features;
  Vector times;
  for (std::size_t c = 0; c < cfg.clusters.size(); ++c) {
    const auto& cl = cfg.clusters[c];
    out.b_true.push_back(cl.b_true);
    for (std::size_t p = 0; p < cl.n_points; ++p) {
      Vector x(d);
      if (cfg.feature_distribution == FeatureDistribution::cluster_ball) {
        // Uniform in the d-ball: isotropic direction, radius R u^(1/d).
        double norm = 0.0;
        for (double& v : x) {
          v = normal(rng);
          norm += v * v;
        }
        norm = std::sqrt(norm);
        const double r = cl.radius * std::pow(unit(rng), 1.0 / static_cast<double>(d));
        for (std::size_t k = 0; k < d; ++k) x[k] = cl.center[k] + r * x[k] / norm;
      } else {
        for (double& v : x) v = box(rng);
      }
      double u = unit(rng);
      while (u <= 0.0) u = unit(rng);
      double t = 0.0;
      switch (cfg.risk_mode) {
        case RiskMode::linear_cox: {
          double risk = 0.0;
          for (std::size_t k = 0; k < d; ++k) risk += cl.b_true[k] * x[k];
          t = gen_time(risk, cfg.weibull_scale, cfg.weibull_shape, u);
          break;
        }
        case RiskMode::nonlinear_cox:
          t = gen_time(nonlinear_risk(x), cfg.weibull_scale, cfg.weibull_shape, u);
          break;
        case RiskMode::nonlinear_direct:
          t = nonlinear_risk(x) * std::exp(cfg.direct_noise * normal(rng));
          break;
      }
      features.push_back(std::move(x));
      times.push_back(t);
      out.cluster_of.push_back(c);
    }
  }

  const double q = calibrate_censoring(times, cfg.censoring_fraction);
  std::vector<SurvivalRecord> records;
  records.reserve(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    SurvivalRecord r;
    r.features = std::move(features[i]);
    if (std::isfinite(q)) {
      const double c = q * unit(rng);
      r.event = times[i] <= c;
      r.time = std::min(times[i], c);
    } else {
      r.event = true;
      r.time = times[i];
    }
    records.push_back(std::move(r));
  }
  out.dataset = SurvivalDataset(std::move(records));
  return out;
}

/// Uniform(-5, 5) features with the nonlinear risk replacing b^T x, either
/// inside the Weibull-Cox generator or as the time itself.
inline GeneratedData gen_nonlinear_dataset(GeneratorConfig cfg) {
  if (cfg.risk_mode == RiskMode::linear_cox) cfg.risk_mode = RiskMode::nonlinear_cox;
  cfg.feature_distribution = FeatureDistribution::uniform;
  return gen_clustered_dataset(cfg);
}

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"2c5f", "2c20f", "5c10f", "cox5", "nonlinear-cox5",
                                              "nonlinear-direct5"};
  return names;
}

/// Built-in generator configurations.
inline GeneratorConfig preset(const std::string& name, std::uint64_t seed = 0) {
  GeneratorConfig g;
  g.seed = seed;
  if (name == "2c5f" || name == "2c20f") {
    const std::size_t d = name == "2c5f" ? 5 : 20;
    Vector b1(d, 0.0), b2(d, 0.0);
    b1[0] = 0.5, b1[1] = 0.25, b1[2] = 0.12;
    b2[d - 3] = 0.12, b2[d - 2] = 0.25, b2[d - 1] = 0.5;
    g.clusters = {{Vector(d, 0.25), 0.2, b1, 200}, {Vector(d, 0.75), 0.2, b2, 200}};
    return g;
  }
  if (name == "5c10f") {
    const std::vector<Vector> bs{
        {0, 0, 0.4, 0.8, 0, 0, 0, 0, 0, 0}, {0, 0, 0.8, 0, 0, 0, 0, 0.4, 0, 0},
        {0, 0, 0, 0.4, 0, 0.8, 0, 0, 0, 0}, {0, 0.4, 0.8, 0, 0, 0, 0, 0, 0, 0},
        {0, 0, 0, 0, 0, 0, 0.8, 0, 0.4, 0}};
    for (std::size_t i = 0; i < 5; ++i)
      g.clusters.push_back({Vector(10, 0.1 + 0.2 * static_cast<double>(i)), 0.2, bs[i], 200});
    return g;
  }
  if (name == "cox5") {
    g.feature_distribution = FeatureDistribution::uniform;
    g.clusters = {{Vector(5, 0.0), 5.0, {0.5, 0.25, 0.12, 0, 0}, 400}};
    return g;
  }
  if (name == "nonlinear-cox5" || name == "nonlinear-direct5") {
    g.feature_distribution = FeatureDistribution::uniform;
    g.risk_mode = name == "nonlinear-cox5" ? RiskMode::nonlinear_cox : RiskMode::nonlinear_direct;
    // Ground truth marks the three features entering the risk.
    g.clusters = {{Vector(5, 0.0), 5.0, {1, 1, 1, 0, 0}, 400}};
    return g;
  }
  std::string msg = "unknown preset '" + name + "'; valid presets:";
  for (const auto& n : preset_names()) msg += " " + n;
  throw std::invalid_argument(msg);
}

inline std::string to_string(RiskMode m) {
  switch (m) {
    case RiskMode::linear_cox: return "linear_cox";
    case RiskMode::nonlinear_cox: return "nonlinear_cox";
    case RiskMode::nonlinear_direct: return "nonlinear_direct";
  }
  return "?";
}

inline RiskMode risk_mode_from_string(const std::string& s) {
  if (s == "linear_cox") return RiskMode::linear_cox;
  if (s == "nonlinear_cox") return RiskMode::nonlinear_cox;
  if (s == "nonlinear_direct") return RiskMode::nonlinear_direct;
  throw std::invalid_argument("unknown risk mode: " + s);
}

inline std::string to_string(FeatureDistribution f) {
  return f == FeatureDistribution::cluster_ball ? "cluster_ball" : "uniform";
}

inline FeatureDistribution feature_distribution_from_string(const std::string& s) {
  if (s == "cluster_ball") return FeatureDistribution::cluster_ball;
  if (s == "uniform") return FeatureDistribution::uniform;
  throw std::invalid_argument("unknown feature distribution: " + s);
}

}  // namespace benim
