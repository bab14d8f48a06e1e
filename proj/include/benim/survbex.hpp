#pragma once

// SurvBeX: a coefficient vector b inside the Beran kernel,
// weights = softmax(-||b ⊙ (z - x_i)||^2 / tau).

#include <cmath>
#include <span>
#include <vector>

#include "benim/autodiff.hpp"
#include "benim/explanation.hpp"
#include "benim/kernel_beran.hpp"
#include "benim/survbenim.hpp"

namespace benim {

inline ad::Var survbex_loss(ad::Tape& tape, std::span<const ad::Var> b, const LocalProblem& p,
                            const SurvivalDataset& data, const KernelConfig& kernel) {
  const Vector widths = interval_widths(data.distinct_times());
  std::vector<ad::Var> scales;
  scales.reserve(b.size());
  for (const auto& bk : b) scales.push_back(square(bk));
  return weighted_sf_loss<ad::Var>(
      p, widths,
      [&](std::size_t j) {
        return kernel_beran_intervals(tape, data, p.sample.points[j], scales, kernel.tau);
      },
      tape.constant(0.0));
}

inline Vector survbex_scales(std::span<const double> b) {
  Vector s(b.size());
  for (std::size_t k = 0; k < b.size(); ++k) s[k] = b[k] * b[k];
  return s;
}

/// Starts from b = 1 (plain Gaussian-kernel Beran) and descends the weighted
/// SF distance. The importance vector is |b|.
inline ExplanationResult fit_survbex(const SurvivalModel& bb, const SurvivalDataset& data,
                                     std::span<const double> x, const ExplainerConfig& cfg) {
  LocalProblem p = make_local_problem(bb, data, x, cfg, anchor_seed(cfg, 0));
  std::vector<double> b(data.dim(), 1.0);
  Diagnostics diag = minimize(
      [&](ad::Tape& tape, std::span<const ad::Var> w) {
        return survbex_loss(tape, w, p, data, cfg.kernel);
      },
      b, cfg, cfg.local_epochs);
  ExplanationResult res;
  res.method = Method::survbex;
  res.anchor.assign(x.begin(), x.end());
  for (double v : b) res.importance.push_back(std::abs(v));
  res.fitted_sf = kernel_beran_sf(data, x, survbex_scales(b), cfg.kernel.tau);
  res.diagnostics = std::move(diag);
  return res;
}

}  // namespace benim
