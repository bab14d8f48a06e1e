#pragma once

// Beran estimator whose kernel weights each feature's squared distance by a
// per-feature scale: weights_i = softmax_i(-tau^-1 sum_k s_k (x_i^k - z^k)^2).
// SurvBeNIM feeds s_k = h_k(z^k); SurvBeX feeds s_k = b_k^2.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "benim/autodiff.hpp"
#include "benim/survival.hpp"

namespace benim {

struct KernelWeights {
  Vector exponent;  // A(x_i, s) per training point
  Vector weights;   // softmax(-A)
};

/// Exponent term A and its softmax weights over the training points.
inline KernelWeights benim_kernel(const SurvivalDataset& data, std::span<const double> z,
                                  std::span<const double> scales, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (z.size() != data.dim() || scales.size() != data.dim())
    throw std::invalid_argument("dimension mismatch");
  KernelWeights out;
  out.exponent.resize(data.size());
  Vector logits(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& x = data[i].features;
    double a = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) a += scales[k] * (x[k] - z[k]) * (x[k] - z[k]);
    out.exponent[i] = a / tau;
    logits[i] = -out.exponent[i];
  }
  out.weights = softmax(logits);
  return out;
}

namespace detail {

/// Forward state of the scaled-kernel Beran estimator at one point, kept for
/// the adjoint pass.
struct KernelBeranState {
  const SurvivalDataset* data = nullptr;
  Vector z;
  double tau = 1.0;
  Vector expw;                       // exp(-(A_i - min A)) in record order
  Vector tail;                       // tail sums over sorted positions, size n+1
  std::vector<std::size_t> grid_of;  // grid slot of each sorted position
  std::vector<char> active;          // sorted position contributes a factor
  Vector interval;                   // surrogate SF on [t_{i-1}, t_i)
  double final_value = 1.0;          // SF from the last grid time onwards

  void forward(std::span<const double> scales) {
    const auto& d = *data;
    const std::size_t n = d.size();
    const auto& order = d.sorted_index();
    const auto& grid = d.distinct_times();
    Vector a(n);
    double amin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const auto& x = d[i].features;
      double s = 0.0;
      for (std::size_t k = 0; k < z.size(); ++k) s += scales[k] * (x[k] - z[k]) * (x[k] - z[k]);
      a[i] = s / tau;
      amin = std::min(amin, a[i]);
    }
    expw.resize(n);
    for (std::size_t i = 0; i < n; ++i) expw[i] = std::exp(-(a[i] - amin));
    tail.assign(n + 1, 0.0);
    for (std::size_t r = n; r-- > 0;) tail[r] = tail[r + 1] + expw[order[r]];
    const double total = tail[0];

    grid_of.resize(n);
    active.assign(n, 0);
    interval.assign(grid.size(), 1.0);
    double log_s = 0.0;
    bool dead = false;
    std::size_t pos = 0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      while (pos < n && d[order[pos]].time == grid[g]) {
        grid_of[pos] = g;
        if (!dead && d[order[pos]].event && tail[pos] > kWeightTolerance * total) {
          if (tail[pos + 1] > 0.0) {
            log_s += std::log(tail[pos + 1]) - std::log(tail[pos]);
            active[pos] = 1;
          } else {
            dead = true;
          }
        }
        ++pos;
      }
      if (g + 1 < grid.size()) interval[g + 1] = dead ? 0.0 : std::exp(log_s);
    }
    final_value = dead ? 0.0 : std::exp(log_s);
  }

  /// Accumulates d(loss)/d(scales) given d(loss)/d(interval).
  void backward(std::span<const double> interval_adj, std::span<double> scale_adj) const {
    const auto& d = *data;
    const std::size_t n = d.size();
    const auto& order = d.sorted_index();
    const std::size_t m = interval.size();
    // suffix[g] = sum over interval slots i > g of adj_i * S_i: the sensitivity
    // of the loss to log-factors contributed at grid slot g.
    Vector suffix(m + 1, 0.0);
    for (std::size_t i = m; i-- > 1;)
      suffix[i - 1] = suffix[i] + interval_adj[i] * interval[i];
    // adjoint w.r.t. tail[r]
    Vector tail_adj(n + 1, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      if (!active[r]) continue;
      const double gsum = suffix[grid_of[r]];
      if (gsum == 0.0) continue;
      tail_adj[r + 1] += gsum / tail[r + 1];
      tail_adj[r] -= gsum / tail[r];
    }
    // tail[r] = sum_{q >= r} expw[order[q]], so expw at q collects prefix sums.
    double prefix = 0.0;
    Vector a_adj(n);
    for (std::size_t q = 0; q < n; ++q) {
      prefix += tail_adj[q];
      const std::size_t i = order[q];
      a_adj[i] = -expw[i] * prefix;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (a_adj[i] == 0.0) continue;
      const auto& x = d[i].features;
      for (std::size_t k = 0; k < z.size(); ++k)
        scale_adj[k] += a_adj[i] * (x[k] - z[k]) * (x[k] - z[k]) / tau;
    }
  }
};

}  // namespace detail

/// Surrogate SF values on each interval [t_{i-1}, t_i) of the dataset grid.
inline Vector kernel_beran_intervals(const SurvivalDataset& data, std::span<const double> z,
                                     std::span<const double> scales, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (z.size() != data.dim() || scales.size() != data.dim())
    throw std::invalid_argument("dimension mismatch");
  detail::KernelBeranState st;
  st.data = &data;
  st.z.assign(z.begin(), z.end());
  st.tau = tau;
  st.forward(scales);
  return st.interval;
}

/// Surrogate SF as a step function on the dataset grid.
inline StepFunction kernel_beran_sf(const SurvivalDataset& data, std::span<const double> z,
                                    std::span<const double> scales, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (z.size() != data.dim() || scales.size() != data.dim())
    throw std::invalid_argument("dimension mismatch");
  detail::KernelBeranState st;
  st.data = &data;
  st.z.assign(z.begin(), z.end());
  st.tau = tau;
  st.forward(scales);
  const auto& grid = data.distinct_times();
  Vector values(grid.size());
  for (std::size_t g = 0; g + 1 < grid.size(); ++g) values[g] = st.interval[g + 1];
  if (!grid.empty()) values.back() = st.final_value;
  return {grid, std::move(values), 1.0};
}

/// Differentiable surrogate interval values; `scales` live on `tape`.
/// `data` must outlive the tape's backward pass.
inline std::vector<ad::Var> kernel_beran_intervals(ad::Tape& tape, const SurvivalDataset& data,
                                                   std::span<const double> z,
                                                   std::span<const ad::Var> scales, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (z.size() != data.dim() || scales.size() != data.dim())
    throw std::invalid_argument("dimension mismatch");
  auto st = std::make_shared<detail::KernelBeranState>();
  st->data = &data;
  st->z.assign(z.begin(), z.end());
  st->tau = tau;
  Vector s(scales.size());
  for (std::size_t k = 0; k < s.size(); ++k) s[k] = scales[k].value();
  st->forward(s);
  return tape.custom(scales, st->interval,
                     [st](std::span<const double> out_adj, std::span<double> in_adj) {
                       st->backward(out_adj, in_adj);
                     });
}

}  // namespace benim
