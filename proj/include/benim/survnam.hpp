#pragma once

// SurvNAM: an additive shape function g(z) = sum_k g_k(z^k) inside a Cox
// surrogate H_0(t) exp(g(z)).

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "benim/autodiff.hpp"
#include "benim/explanation.hpp"
#include "benim/mlp.hpp"
#include "benim/survbenim.hpp"
#include "benim/survlime.hpp"

namespace benim {

struct NamProblem {
  NeighborhoodSample sample;
  LogChfMoments log_moments;
  // CHF-form moments: sum w H^2, sum w H H0, sum w H0^2 over finite intervals.
  Vector chf_a, chf_b, chf_c;
};

inline NamProblem make_nam_problem(const SurvivalModel& bb, const SurvivalDataset& data,
                                   std::span<const double> x, const ExplainerConfig& cfg,
                                   const StepFunction& baseline_chf, std::uint64_t sample_seed) {
  require_same_grid(bb, data);
  NamProblem p;
  p.sample = sample_neighborhood(x, cfg.n_points, cfg.sigma_sample, cfg.sigma_weight,
                                 sample_seed);
  auto targets = predict_targets(bb, p.sample);
  const Vector widths = interval_widths(data.distinct_times());
  const Vector base = baseline_chf.interval_values();
  p.log_moments = log_chf_moments(targets.chf, base, widths, cfg.log_epsilon);
  bool usable = false;
  for (double w : p.log_moments.w) usable = usable || w > 0.0;
  if (cfg.survnam_loss == SurvNamLoss::log_chf && !usable)
    throw std::runtime_error("all intervals excluded from the SurvNAM fit");
  for (const auto& h : targets.chf) {
    double a = 0.0, b = 0.0, c = 0.0;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      if (!std::isfinite(h[i]) || !std::isfinite(base[i])) continue;
      a += widths[i] * h[i] * h[i];
      b += widths[i] * h[i] * base[i];
      c += widths[i] * base[i] * base[i];
    }
    p.chf_a.push_back(a);
    p.chf_b.push_back(b);
    p.chf_c.push_back(c);
  }
  return p;
}

inline ImportanceNetwork make_shape_network(std::size_t d, const ExplainerConfig& cfg) {
  MLPConfig mc = cfg.subnet;
  mc.output_transform = OutputTransform::identity;
  mc.seed = derive_seed(cfg.seed, 0x5eed);
  return ImportanceNetwork(d, mc);
}

/// Differentiable SurvNAM loss, log form by default:
/// sum_j v_j sum_i w_i (ln H_ij - ln H0_i - g(z_j))^2,
/// or the CHF form sum_j v_j sum_i w_i (H_ij - H0_i exp(g(z_j)))^2.
inline ad::Var survnam_loss(ad::Tape& tape, const ImportanceNetwork& net,
                            std::span<const ad::Var> w, const NamProblem& p, SurvNamLoss form) {
  std::vector<ad::Var> g;
  g.reserve(p.sample.size());
  for (const auto& z : p.sample.points) {
    auto parts = net.evaluate(tape, w, z);
    g.push_back(ad::sum(parts));
  }
  if (form == SurvNamLoss::log_chf)
    return log_chf_loss<ad::Var>(p.log_moments, p.sample.weights, g, tape.constant(0.0));
  ad::Var total = tape.constant(0.0);
  for (std::size_t j = 0; j < g.size(); ++j) {
    ad::Var e = exp(g[j]);
    total = total + (p.chf_a[j] - e * (2.0 * p.chf_b[j]) + square(e) * p.chf_c[j]) *
                        p.sample.weights[j];
  }
  return total;
}

/// b^model_k = standard deviation of g_k(z_j^{(k)}) over the neighborhood.
inline Vector shape_spread(const ImportanceNetwork& net, const NeighborhoodSample& s) {
  Vector out(net.features());
  for (std::size_t k = 0; k < out.size(); ++k) {
    double mean = 0.0, sq = 0.0;
    for (const auto& z : s.points) {
      const double v = net(k, z[k]);
      mean += v;
      sq += v * v;
    }
    const double n = static_cast<double>(s.size());
    mean /= n;
    out[k] = std::sqrt(std::max(0.0, sq / n - mean * mean));
  }
  return out;
}

namespace detail {

inline ExplanationResult nam_result(const ImportanceNetwork& net, const SurvivalDataset& data,
                                    std::span<const double> x, const NeighborhoodSample& sample,
                                    const StepFunction& h0, const ExplainerConfig& cfg) {
  ExplanationResult res;
  res.method = Method::survnam;
  res.anchor.assign(x.begin(), x.end());
  res.importance = shape_spread(net, sample);
  for (double v : res.importance)
    if (!std::isfinite(v)) throw std::runtime_error("non-finite importance value");
  res.curves = network_curves(net, data, cfg.curve_points);
  double g = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) g += net(k, x[k]);
  StepFunction chf = h0;
  for (double& v : chf.values) v *= std::exp(g);
  res.fitted_sf = chf_to_sf(chf);
  res.network_params = net.params();
  res.network_config = net.config();
  return res;
}

}  // namespace detail

inline ExplanationResult fit_survnam(const SurvivalModel& bb, const SurvivalDataset& data,
                                     std::span<const double> x, const ExplainerConfig& cfg,
                                     std::optional<StepFunction> baseline_chf = std::nullopt) {
  const StepFunction h0 = baseline_chf ? *baseline_chf : nelson_aalen(data);
  NamProblem p = make_nam_problem(bb, data, x, cfg, h0, anchor_seed(cfg, 0));
  ImportanceNetwork net = make_shape_network(data.dim(), cfg);
  Diagnostics diag = minimize(
      [&](ad::Tape& tape, std::span<const ad::Var> w) {
        return survnam_loss(tape, net, w, p, cfg.survnam_loss);
      },
      net.params(), cfg, cfg.local_epochs);
  auto res = detail::nam_result(net, data, x, p.sample, h0, cfg);
  res.diagnostics = std::move(diag);
  return res;
}

/// One shape network trained over the neighborhoods of all anchors.
class GlobalNamExplainer {
 public:
  GlobalNamExplainer(ImportanceNetwork net, const SurvivalDataset& data, StepFunction h0,
                     ExplainerConfig cfg, Diagnostics diag)
      : net_(std::move(net)), data_(&data), h0_(std::move(h0)), cfg_(std::move(cfg)),
        diag_(std::move(diag)) {}

  const ImportanceNetwork& network() const { return net_; }

  ExplanationResult explain(std::span<const double> x, std::uint64_t sample_seed) const {
    auto sample = sample_neighborhood(x, cfg_.n_points, cfg_.sigma_sample, cfg_.sigma_weight,
                                      sample_seed);
    auto res = detail::nam_result(net_, *data_, x, sample, h0_, cfg_);
    res.diagnostics = diag_;
    return res;
  }

 private:
  ImportanceNetwork net_;
  const SurvivalDataset* data_;
  StepFunction h0_;
  ExplainerConfig cfg_;
  Diagnostics diag_;
};

inline GlobalNamExplainer fit_survnam_global(const SurvivalModel& bb, const SurvivalDataset& data,
                                             std::span<const Vector> anchors,
                                             const ExplainerConfig& cfg) {
  if (anchors.empty()) throw std::invalid_argument("global fit needs at least one anchor");
  StepFunction h0 = nelson_aalen(data);
  std::vector<NamProblem> problems;
  for (std::size_t r = 0; r < anchors.size(); ++r)
    problems.push_back(make_nam_problem(bb, data, anchors[r], cfg, h0, anchor_seed(cfg, r)));
  ImportanceNetwork net = make_shape_network(data.dim(), cfg);
  Diagnostics diag = minimize(
      [&](ad::Tape& tape, std::span<const ad::Var> w) {
        ad::Var total = tape.constant(0.0);
        for (const auto& p : problems) total = total + survnam_loss(tape, net, w, p, cfg.survnam_loss);
        return total;
      },
      net.params(), cfg, cfg.global_epochs);
  return GlobalNamExplainer(std::move(net), data, std::move(h0), cfg, std::move(diag));
}

}  // namespace benim
