#pragma once

// Comparison measures between importance vectors and between SFs, and the
// aggregated per-method report.

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "benim/survival.hpp"

namespace benim {

struct ImportanceVector {
  Vector raw;
  Vector normalized;
};

/// |raw| / sum |raw|.
inline ImportanceVector normalize_importance(std::span<const double> raw) {
  ImportanceVector iv;
  iv.raw.assign(raw.begin(), raw.end());
  double total = 0.0;
  for (double v : raw) {
    if (!std::isfinite(v)) throw std::invalid_argument("importance vector is not finite");
    total += std::abs(v);
  }
  if (total == 0.0) throw std::invalid_argument("importance vector is all zero");
  for (double v : raw) iv.normalized.push_back(std::abs(v) / total);
  return iv;
}

inline double dist_D(std::span<const double> b_model, std::span<const double> b_true) {
  return squared_distance(b_model, b_true);
}

inline constexpr double kKlSmoothing = 1e-6;

/// sum b_true ln(b_true / b_model) after lifting entries below kKlSmoothing
/// to kKlSmoothing and renormalizing both vectors.
inline double dist_KL(std::span<const double> b_model, std::span<const double> b_true) {
  if (b_model.size() != b_true.size()) throw std::invalid_argument("dimension mismatch");
  auto smooth = [](std::span<const double> v) {
    Vector out(v.begin(), v.end());
    double total = 0.0;
    for (double& x : out) {
      x = std::max(x, kKlSmoothing);
      total += x;
    }
    for (double& x : out) x /= total;
    return out;
  };
  const Vector p = smooth(b_true), q = smooth(b_model);
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) kl += p[i] * std::log(p[i] / q[i]);
  return std::max(0.0, kl);
}

/// Fraction of pairs with b_true_i < b_true_j that also have
/// b_model_i < b_model_j; nullopt when b_true has no strictly ordered pair.
inline std::optional<double> cindex_vec(std::span<const double> b_model,
                                        std::span<const double> b_true) {
  if (b_model.size() != b_true.size()) throw std::invalid_argument("dimension mismatch");
  std::size_t num = 0, den = 0;
  for (std::size_t i = 0; i < b_true.size(); ++i)
    for (std::size_t j = 0; j < b_true.size(); ++j) {
      if (!(b_true[i] < b_true[j])) continue;
      ++den;
      if (b_model[i] < b_model[j]) ++num;
    }
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

/// sum_i (S^{(i)} - S_bb^{(i)})^2 (t_i - t_{i-1}) over the intervals of `grid`.
inline double sf_distance(const StepFunction& surrogate, const StepFunction& blackbox,
                          std::span<const double> grid) {
  auto same = [&](const StepFunction& s) {
    return s.times.size() == grid.size() && std::equal(s.times.begin(), s.times.end(), grid.begin());
  };
  if (!same(surrogate) || !same(blackbox)) throw std::invalid_argument("grid mismatch");
  const Vector a = surrogate.interval_values(), b = blackbox.interval_values();
  const Vector w = interval_widths(grid);
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]) * w[i];
  return s;
}

struct InstanceMetrics {
  std::size_t anchor_row = 0;  // index of the anchor in its source dataset
  bool skipped = false;
  std::string reason;
  double D = 0.0;
  double KL = 0.0;
  std::optional<double> C;
  double sf_distance = 0.0;
  Vector importance;           // normalized b^model
  Vector truth;                // normalized b_true
};

struct Aggregate {
  double mean = 0.0;
  double sd = 0.0;
  std::size_t count = 0;
};

struct MetricsReport {
  std::string method;
  std::string config_hash;
  std::vector<InstanceMetrics> per_instance;
  Aggregate msd, mkl, mci, msfd;
  std::size_t skipped = 0;
};

/// Unweighted mean and sample standard deviation of `values`.
inline Aggregate aggregate(std::span<const double> values) {
  Aggregate a;
  a.count = values.size();
  if (values.empty()) return a;
  for (double v : values) a.mean += v;
  a.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return a;
}

/// Recomputes MSD, MKL, MCI and MSFD over the non-skipped rows. MCI averages
/// only rows whose C is defined.
inline void finalize_report(MetricsReport& report) {
  Vector d, kl, c, sfd;
  report.skipped = 0;
  for (const auto& row : report.per_instance) {
    if (row.skipped) {
      ++report.skipped;
      continue;
    }
    d.push_back(row.D);
    kl.push_back(row.KL);
    sfd.push_back(row.sf_distance);
    if (row.C) c.push_back(*row.C);
  }
  report.msd = aggregate(d);
  report.mkl = aggregate(kl);
  report.mci = aggregate(c);
  report.msfd = aggregate(sfd);
}

}  // namespace benim
