#pragma once

// SurvBeNIM: per-feature importance networks h_j inside the kernel of a Beran
// estimator, fitted so the estimator reproduces black-box SFs around an anchor.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "benim/autodiff.hpp"
#include "benim/blackbox.hpp"
#include "benim/explanation.hpp"
#include "benim/kernel_beran.hpp"
#include "benim/mlp.hpp"
#include "benim/rng.hpp"

namespace benim {

struct TimeWeighting {
  Vector expectations;             // m_j
  std::vector<Vector> weights;     // weights[j][i] = p_{i,j}
};

/// m_j = sum_i (t_i - t_{i-1}) S^{(i)}(z_j) and
/// p_{.,j} = softmax_i(-(m_j - (t_i + t_{i-1})/2)^2 / varkappa).
inline TimeWeighting time_weights(std::span<const Vector> blackbox_sfs,
                                  std::span<const double> time_grid, double varkappa) {
  if (!(varkappa > 0.0)) throw std::invalid_argument("varkappa must be positive");
  const Vector widths = interval_widths(time_grid);
  Vector mid(time_grid.size());
  double prev = 0.0;
  for (std::size_t i = 0; i < time_grid.size(); ++i) {
    mid[i] = 0.5 * (time_grid[i] + prev);
    prev = time_grid[i];
  }
  TimeWeighting tw;
  for (const auto& s : blackbox_sfs) {
    if (s.size() != time_grid.size()) throw std::invalid_argument("grid misalignment");
    double m = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) m += widths[i] * s[i];
    Vector logits(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) logits[i] = -square(m - mid[i]) / varkappa;
    tw.expectations.push_back(m);
    tw.weights.push_back(softmax(logits));
  }
  return tw;
}

/// One anchor's neighborhood with the black-box SFs it is compared against.
struct LocalProblem {
  NeighborhoodSample sample;
  std::vector<Vector> target_sf;
  std::optional<TimeWeighting> time_weighting;
};

inline LocalProblem make_local_problem(const SurvivalModel& bb, const SurvivalDataset& data,
                                       std::span<const double> x, const ExplainerConfig& cfg,
                                       std::uint64_t sample_seed) {
  require_same_grid(bb, data);
  LocalProblem p;
  p.sample = sample_neighborhood(x, cfg.n_points, cfg.sigma_sample, cfg.sigma_weight,
                                 sample_seed);
  p.target_sf = predict_targets(bb, p.sample).sf;
  if (cfg.kernel.use_time_weighting)
    p.time_weighting = time_weights(p.target_sf, data.distinct_times(),
                                    cfg.kernel.resolved_varkappa(data.distinct_times()));
  return p;
}

/// sum_j v_j sum_i p_ij (S^{(i)}(z_j) - S_B^{(i)}(z_j))^2 (t_i - t_{i-1}), where the
/// surrogate at z_j uses kernel scales `scales_at(j)`. Shared by SurvBeNIM and
/// SurvBeX; `surrogate` yields interval values (double or tape variables).
template <typename T, typename Surrogate>
T weighted_sf_loss(const LocalProblem& p, std::span<const double> widths,
                   Surrogate&& surrogate, T zero) {
  T total = zero;
  for (std::size_t j = 0; j < p.sample.size(); ++j) {
    const auto approx = surrogate(j);
    const auto& target = p.target_sf[j];
    if (approx.size() != target.size() || target.size() != widths.size())
      throw std::invalid_argument("grid misalignment");
    const Vector* pw = p.time_weighting ? &p.time_weighting->weights[j] : nullptr;
    T inner = zero;
    for (std::size_t i = 1; i < target.size(); ++i) {
      double c = widths[i] * (pw ? (*pw)[i] : 1.0);
      if (c == 0.0) continue;
      inner = inner + square(approx[i] - target[i]) * c;
    }
    total = total + inner * p.sample.weights[j];
  }
  return total;
}

/// Differentiable local loss for a network whose parameters are `w`.
inline ad::Var benim_local_loss(ad::Tape& tape, const ImportanceNetwork& net,
                                std::span<const ad::Var> w, const LocalProblem& p,
                                const SurvivalDataset& data, const KernelConfig& kernel) {
  const Vector widths = interval_widths(data.distinct_times());
  return weighted_sf_loss<ad::Var>(
      p, widths,
      [&](std::size_t j) {
        auto h = net.evaluate(tape, w, p.sample.points[j]);
        return kernel_beran_intervals(tape, data, p.sample.points[j], h, kernel.tau);
      },
      tape.constant(0.0));
}

/// Plain-value local loss for the network's current parameters.
inline double benim_local_loss(const ImportanceNetwork& net, const LocalProblem& p,
                               const SurvivalDataset& data, const KernelConfig& kernel) {
  const Vector widths = interval_widths(data.distinct_times());
  return weighted_sf_loss<double>(
      p, widths,
      [&](std::size_t j) {
        return kernel_beran_intervals(data, p.sample.points[j], net.evaluate(p.sample.points[j]),
                                      kernel.tau);
      },
      0.0);
}

/// Surrogate SF at z with the network's importance values at z.
inline StepFunction benim_surrogate_sf(const SurvivalDataset& data, std::span<const double> z,
                                       const ImportanceNetwork& net, const KernelConfig& kernel) {
  return kernel_beran_sf(data, z, net.evaluate(z), kernel.tau);
}

inline ImportanceNetwork make_importance_network(std::size_t d, const ExplainerConfig& cfg) {
  MLPConfig mc = cfg.subnet;
  mc.seed = derive_seed(cfg.seed, 0x5eed);
  return ImportanceNetwork(d, mc);
}

/// b^model_k = mean of h_k(z_j^{(k)}) over the neighborhood.
inline Vector mean_importance(const ImportanceNetwork& net, const NeighborhoodSample& s) {
  Vector b(net.features(), 0.0);
  for (const auto& z : s.points)
    for (std::size_t k = 0; k < b.size(); ++k) b[k] += net(k, z[k]);
  for (double& v : b) v /= static_cast<double>(s.size());
  return b;
}

inline std::uint64_t anchor_seed(const ExplainerConfig& cfg, std::size_t r) {
  return derive_seed(cfg.seed, r);
}

namespace detail {

inline ExplanationResult benim_result(Method method, const ImportanceNetwork& net,
                                      const SurvivalDataset& data, std::span<const double> x,
                                      const NeighborhoodSample& sample,
                                      const ExplainerConfig& cfg) {
  ExplanationResult res;
  res.method = method;
  res.anchor.assign(x.begin(), x.end());
  res.importance = mean_importance(net, sample);
  for (double v : res.importance)
    if (!std::isfinite(v)) throw std::runtime_error("non-finite importance value");
  res.curves = network_curves(net, data, cfg.curve_points);
  res.fitted_sf = benim_surrogate_sf(data, x, net, cfg.kernel);
  res.network_params = net.params();
  res.network_config = net.config();
  return res;
}

}  // namespace detail

/// Trains a network for a single explained instance.
inline ExplanationResult fit_survbenim_local(const SurvivalModel& bb, const SurvivalDataset& data,
                                             std::span<const double> x,
                                             const ExplainerConfig& cfg) {
  LocalProblem p = make_local_problem(bb, data, x, cfg, anchor_seed(cfg, 0));
  ImportanceNetwork net = make_importance_network(data.dim(), cfg);
  Diagnostics diag = minimize(
      [&](ad::Tape& tape, std::span<const ad::Var> w) {
        return benim_local_loss(tape, net, w, p, data, cfg.kernel);
      },
      net.params(), cfg, cfg.local_epochs);
  auto res = detail::benim_result(Method::survbenim_local, net, data, x, p.sample, cfg);
  res.diagnostics = std::move(diag);
  return res;
}

/// A network trained once over many anchors' neighborhoods.
class GlobalBenimExplainer {
 public:
  GlobalBenimExplainer(ImportanceNetwork net, const SurvivalDataset& data, ExplainerConfig cfg,
                       Diagnostics diag)
      : net_(std::move(net)), data_(&data), cfg_(std::move(cfg)), diag_(std::move(diag)) {}

  const ImportanceNetwork& network() const { return net_; }
  const Diagnostics& diagnostics() const { return diag_; }

  /// Explains any instance without retraining; the neighborhood used for
  /// averaging h is drawn with `sample_seed`.
  ExplanationResult explain(std::span<const double> x, std::uint64_t sample_seed) const {
    auto sample = sample_neighborhood(x, cfg_.n_points, cfg_.sigma_sample, cfg_.sigma_weight,
                                      sample_seed);
    auto res = detail::benim_result(Method::survbenim_global, net_, *data_, x, sample, cfg_);
    res.diagnostics = diag_;
    return res;
  }

 private:
  ImportanceNetwork net_;
  const SurvivalDataset* data_;
  ExplainerConfig cfg_;
  Diagnostics diag_;
};

/// Sum of per-anchor local losses at the given parameters.
inline ad::Var benim_global_loss(ad::Tape& tape, const ImportanceNetwork& net,
                                 std::span<const ad::Var> w, std::span<const LocalProblem> problems,
                                 const SurvivalDataset& data, const KernelConfig& kernel) {
  ad::Var total = tape.constant(0.0);
  for (const auto& p : problems) total = total + benim_local_loss(tape, net, w, p, data, kernel);
  return total;
}

/// Anchor r's neighborhood is drawn with anchor_seed(cfg, r), so a single
/// anchor reproduces fit_survbenim_local exactly.
inline GlobalBenimExplainer fit_survbenim_global(const SurvivalModel& bb,
                                                 const SurvivalDataset& data,
                                                 std::span<const Vector> anchors,
                                                 const ExplainerConfig& cfg,
                                                 std::optional<int> epochs = std::nullopt) {
  if (anchors.empty()) throw std::invalid_argument("global fit needs at least one anchor");
  std::vector<LocalProblem> problems;
  problems.reserve(anchors.size());
  for (std::size_t r = 0; r < anchors.size(); ++r)
    problems.push_back(make_local_problem(bb, data, anchors[r], cfg, anchor_seed(cfg, r)));
  ImportanceNetwork net = make_importance_network(data.dim(), cfg);
  Diagnostics diag = minimize(
      [&](ad::Tape& tape, std::span<const ad::Var> w) {
        return benim_global_loss(tape, net, w, problems, data, cfg.kernel);
      },
      net.params(), cfg, epochs.value_or(cfg.global_epochs));
  return GlobalBenimExplainer(std::move(net), data, cfg, std::move(diag));
}

}  // namespace benim
