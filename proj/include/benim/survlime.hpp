#pragma once

// SurvLIME: a Cox surrogate H_0(t) exp(b^T z) fitted by weighted least squares
// on log cumulative hazards.

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>

#include "benim/explanation.hpp"
#include "benim/survbenim.hpp"

namespace benim {

/// Per-point summary of the log-CHF residuals: sum_i w_i (y_ij - g)^2 =
/// W_j g^2 - 2 g Y_j + Q_j over the usable intervals.
struct LogChfMoments {
  Vector w;   // W_j
  Vector y;   // Y_j
  Vector q;   // Q_j
};

inline LogChfMoments log_chf_moments(std::span<const Vector> chfs,
                                     std::span<const double> baseline,
                                     std::span<const double> widths, double epsilon) {
  LogChfMoments m;
  for (const auto& h : chfs) {
    if (h.size() != baseline.size() || baseline.size() != widths.size())
      throw std::invalid_argument("grid misalignment");
    double w = 0.0, y = 0.0, q = 0.0;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      if (!(h[i] > epsilon) || !(baseline[i] > epsilon) || widths[i] <= 0.0) continue;
      if (!std::isfinite(h[i]) || !std::isfinite(baseline[i])) continue;
      const double r = std::log(h[i]) - std::log(baseline[i]);
      w += widths[i];
      y += widths[i] * r;
      q += widths[i] * r * r;
    }
    m.w.push_back(w);
    m.y.push_back(y);
    m.q.push_back(q);
  }
  return m;
}

/// sum_j v_j sum_i w_i (ln H_ij - ln H0_i - g_j)^2 for predicted log ratios g_j.
template <typename T>
T log_chf_loss(const LogChfMoments& m, std::span<const double> v, std::span<const T> g, T zero) {
  T total = zero;
  for (std::size_t j = 0; j < g.size(); ++j) {
    if (m.w[j] == 0.0) continue;
    total = total + (g[j] * g[j] * m.w[j] - g[j] * (2.0 * m.y[j]) + m.q[j]) * v[j];
  }
  return total;
}

/// Minimizes sum_j v_j sum_i w_i (ln H^{(i)}(z_j) - ln H_0^{(i)} - b^T z_j)^2 over
/// intervals where both CHFs exceed `epsilon`. Rank-deficient designs yield
/// the minimum-norm solution.
inline Vector survlime_solve(const NeighborhoodSample& sample, std::span<const Vector> chfs,
                             std::span<const double> baseline, std::span<const double> widths,
                             double epsilon) {
  const std::size_t n_pts = sample.size();
  const std::size_t d = sample.anchor.size();
  // The per-point sum over intervals collapses to a single row with weight
  // v_j * W_j and target equal to the weighted mean log ratio.
  const LogChfMoments mom = log_chf_moments(chfs, baseline, widths, epsilon);
  Eigen::MatrixXd design(n_pts, d);
  Eigen::VectorXd target(n_pts);
  bool any = false;
  for (std::size_t j = 0; j < n_pts; ++j) {
    const double wsum = mom.w[j], ysum = mom.y[j];
    const double row_w = std::sqrt(sample.weights[j] * wsum);
    for (std::size_t k = 0; k < d; ++k) design(j, k) = row_w * sample.points[j][k];
    target(j) = wsum > 0.0 ? row_w * ysum / wsum : 0.0;
    any = any || (wsum > 0.0 && sample.weights[j] > 0.0);
  }
  if (!any) throw std::runtime_error("all intervals excluded from the SurvLIME fit");
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design);
  Eigen::VectorXd b = cod.solve(target);
  return Vector(b.data(), b.data() + b.size());
}

/// Baseline CHF defaults to the Nelson-Aalen estimate of the dataset.
inline ExplanationResult fit_survlime(const SurvivalModel& bb, const SurvivalDataset& data,
                                      std::span<const double> x, const ExplainerConfig& cfg,
                                      std::optional<StepFunction> baseline_chf = std::nullopt) {
  require_same_grid(bb, data);
  StepFunction h0 = baseline_chf ? *baseline_chf : nelson_aalen(data);
  if (h0.times != data.distinct_times())
    throw std::invalid_argument("baseline CHF grid does not match the dataset");
  auto sample = sample_neighborhood(x, cfg.n_points, cfg.sigma_sample, cfg.sigma_weight,
                                    anchor_seed(cfg, 0));
  auto targets = predict_targets(bb, sample);
  const Vector widths = interval_widths(data.distinct_times());
  const Vector base = h0.interval_values();
  Vector b = survlime_solve(sample, targets.chf, base, widths, cfg.log_epsilon);
  Vector g(sample.size());
  for (std::size_t j = 0; j < g.size(); ++j)
    for (std::size_t k = 0; k < b.size(); ++k) g[j] += b[k] * sample.points[j][k];
  const double loss = log_chf_loss<double>(
      log_chf_moments(targets.chf, base, widths, cfg.log_epsilon), sample.weights, g, 0.0);

  ExplanationResult res;
  res.method = Method::survlime;
  res.anchor.assign(x.begin(), x.end());
  res.importance = b;
  res.fitted_sf = cox_sf(CoxModel(h0, b), x);
  res.diagnostics.seed = cfg.seed;
  res.diagnostics.final_loss = loss;
  return res;
}

}  // namespace benim
