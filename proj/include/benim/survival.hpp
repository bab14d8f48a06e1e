#pragma once

// Core survival types and estimators: datasets, step functions, Kaplan-Meier,
// Nelson-Aalen, the kernel-weighted Beran estimator, the Cox model and the
// time-based concordance index.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace benim {

using Vector = std::vector<double>;

struct SurvivalRecord {
  Vector features;
  bool event = false;
  double time = 0.0;
};

/// Tolerance below which a remaining (tail) weight mass is treated as zero.
inline constexpr double kWeightTolerance = 1e-12;

class SurvivalDataset {
 public:
  SurvivalDataset() = default;

  explicit SurvivalDataset(std::vector<SurvivalRecord> records)
      : records_(std::move(records)) {
    if (records_.empty()) throw std::invalid_argument("dataset is empty");
    dim_ = records_.front().features.size();
    bool any_event = false;
    for (std::size_t i = 0; i < records_.size(); ++i) {
      const auto& r = records_[i];
      if (r.features.size() != dim_)
        throw std::invalid_argument("record " + std::to_string(i) +
                                    " has inconsistent feature count");
      if (!(r.time >= 0.0) || !std::isfinite(r.time))
        throw std::invalid_argument("record " + std::to_string(i) +
                                    " has invalid time");
      for (double v : r.features)
        if (!std::isfinite(v))
          throw std::invalid_argument("record " + std::to_string(i) +
                                      " has non-finite feature");
      any_event = any_event || r.event;
    }
    if (!any_event)
      throw std::invalid_argument("dataset has no uncensored records");

    // Ties: uncensored records precede censored ones at equal times.
    sorted_.resize(records_.size());
    std::iota(sorted_.begin(), sorted_.end(), std::size_t{0});
    std::stable_sort(sorted_.begin(), sorted_.end(),
                     [this](std::size_t a, std::size_t b) {
                       const auto& ra = records_[a];
                       const auto& rb = records_[b];
                       if (ra.time != rb.time) return ra.time < rb.time;
                       return ra.event && !rb.event;
                     });
    for (std::size_t idx : sorted_) {
      double t = records_[idx].time;
      if (times_.empty() || times_.back() != t) times_.push_back(t);
    }
  }

  std::size_t size() const { return records_.size(); }
  std::size_t dim() const { return dim_; }
  const std::vector<SurvivalRecord>& records() const { return records_; }
  const SurvivalRecord& operator[](std::size_t i) const { return records_[i]; }
  /// Permutation ordering records by ascending time.
  const std::vector<std::size_t>& sorted_index() const { return sorted_; }
  /// Distinct observed times, strictly increasing.
  const Vector& distinct_times() const { return times_; }

  SurvivalDataset subset(std::span<const std::size_t> rows) const {
    std::vector<SurvivalRecord> out;
    out.reserve(rows.size());
    for (auto r : rows) out.push_back(records_.at(r));
    return SurvivalDataset(std::move(out));
  }

 private:
  std::vector<SurvivalRecord> records_;
  std::size_t dim_ = 0;
  std::vector<std::size_t> sorted_;
  Vector times_;
};

/// Right-continuous piecewise-constant function: `initial_value` on
/// [0, times[0]) and `values[i]` on [times[i], times[i+1]).
struct StepFunction {
  Vector times;
  Vector values;
  double initial_value = 1.0;

  StepFunction() = default;
  StepFunction(Vector t, Vector v, double init)
      : times(std::move(t)), values(std::move(v)), initial_value(init) {
    if (times.size() != values.size())
      throw std::invalid_argument("step function: times/values size mismatch");
    for (std::size_t i = 1; i < times.size(); ++i)
      if (!(times[i] > times[i - 1]))
        throw std::invalid_argument("step function: times not increasing");
  }

  double operator()(double t) const {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return initial_value;
    return values[static_cast<std::size_t>(it - times.begin()) - 1];
  }

  std::size_t size() const { return times.size(); }

  /// Value on each interval [t_{i-1}, t_i), i = 1..m, with t_0 = 0.
  Vector interval_values() const {
    Vector out(times.size());
    if (out.empty()) return out;
    out[0] = initial_value;
    for (std::size_t i = 1; i < times.size(); ++i) out[i] = values[i - 1];
    return out;
  }
};

/// Interval lengths t_i - t_{i-1} with t_0 = 0.
inline Vector interval_widths(std::span<const double> grid) {
  Vector w(grid.size());
  double prev = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    w[i] = grid[i] - prev;
    prev = grid[i];
  }
  return w;
}

inline bool is_survival_function(const StepFunction& sf, double tol = 1e-12) {
  if (std::abs(sf.initial_value - 1.0) > tol) return false;
  double prev = sf.initial_value;
  for (double v : sf.values) {
    if (!(v >= -tol && v <= 1.0 + tol)) return false;
    if (v > prev + tol) return false;
    prev = v;
  }
  return true;
}

/// Restricted mean of the time to event up to the last grid point.
inline double expected_time(const StepFunction& sf) {
  auto vals = sf.interval_values();
  auto w = interval_widths(sf.times);
  double m = 0.0;
  for (std::size_t i = 0; i < vals.size(); ++i) m += w[i] * vals[i];
  return m;
}

inline StepFunction chf_to_sf(const StepFunction& chf) {
  Vector v(chf.values.size());
  std::transform(chf.values.begin(), chf.values.end(), v.begin(),
                 [](double h) { return std::exp(-h); });
  return {chf.times, std::move(v), std::exp(-chf.initial_value)};
}

/// -ln S. Points where S == 0 map to +infinity.
inline StepFunction sf_to_chf(const StepFunction& sf) {
  auto neglog = [](double s) {
    return s > 0.0 ? -std::log(s) : std::numeric_limits<double>::infinity();
  };
  Vector v(sf.values.size());
  std::transform(sf.values.begin(), sf.values.end(), v.begin(), neglog);
  return {sf.times, std::move(v), neglog(sf.initial_value)};
}

struct WeightVector {
  Vector weights;

  WeightVector() = default;
  explicit WeightVector(Vector w) : weights(std::move(w)) {
    double total = 0.0;
    for (double x : weights) {
      if (!(x >= 0.0) || !std::isfinite(x))
        throw std::invalid_argument("weights must be finite and nonnegative");
      total += x;
    }
    if (std::abs(total - 1.0) > 1e-9)
      throw std::invalid_argument("weights must sum to 1");
  }

  std::size_t size() const { return weights.size(); }
  double operator[](std::size_t i) const { return weights[i]; }
};

/// Classic product-limit estimator prod(1 - d_k / n_k) over distinct times.
inline StepFunction kaplan_meier(const SurvivalDataset& data) {
  const auto& grid = data.distinct_times();
  const auto& order = data.sorted_index();
  Vector values(grid.size());
  double s = 1.0;
  std::size_t at_risk = data.size();
  std::size_t pos = 0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::size_t events = 0, leaving = 0;
    while (pos < order.size() && data[order[pos]].time == grid[g]) {
      events += data[order[pos]].event ? 1 : 0;
      ++leaving;
      ++pos;
    }
    if (events > 0)
      s *= 1.0 - static_cast<double>(events) / static_cast<double>(at_risk);
    at_risk -= leaving;
    values[g] = s;
  }
  return {grid, std::move(values), 1.0};
}

/// Nelson-Aalen cumulative hazard sum(d_k / n_k) over distinct times.
inline StepFunction nelson_aalen(const SurvivalDataset& data) {
  const auto& grid = data.distinct_times();
  const auto& order = data.sorted_index();
  Vector values(grid.size());
  double h = 0.0;
  std::size_t at_risk = data.size();
  std::size_t pos = 0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::size_t events = 0, leaving = 0;
    while (pos < order.size() && data[order[pos]].time == grid[g]) {
      events += data[order[pos]].event ? 1 : 0;
      ++leaving;
      ++pos;
    }
    h += static_cast<double>(events) / static_cast<double>(at_risk);
    at_risk -= leaving;
    values[g] = h;
  }
  return {grid, std::move(values), 0.0};
}

namespace detail {

/// Walks the sorted records and reports, per event with usable weight, the
/// tail masses before and after it. Tail sums are accumulated from the end
/// so that 1 - sum_{j<=i} alpha_j never suffers cancellation.
template <typename OnGrid, typename OnEvent>
void beran_walk(const SurvivalDataset& data, std::span<const double> alpha,
                OnEvent&& on_event, OnGrid&& on_grid) {
  const auto& order = data.sorted_index();
  const std::size_t n = order.size();
  Vector tail(n + 1, 0.0);  // tail[r] = sum of alpha over sorted positions >= r
  for (std::size_t r = n; r-- > 0;) tail[r] = tail[r + 1] + alpha[order[r]];
  const double total = tail[0];
  const auto& grid = data.distinct_times();
  std::size_t pos = 0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    while (pos < n && data[order[pos]].time == grid[g]) {
      if (data[order[pos]].event) {
        double before = tail[pos];
        double after = tail[pos + 1];
        if (before > kWeightTolerance * total) on_event(before, after);
      }
      ++pos;
    }
    on_grid(g);
  }
}

inline void check_alpha(const SurvivalDataset& data, const WeightVector& alpha) {
  if (alpha.size() != data.size())
    throw std::invalid_argument("weight vector length does not match dataset");
}

}  // namespace detail

/// Beran conditional survival function in ratio form
/// prod_{t_i <= t} (tail_after / tail_before)^{delta_i}.
/// An uncensored step whose remaining mass is below kWeightTolerance carries
/// no weight and is skipped; once the numerator mass hits zero the SF stays 0.
inline StepFunction beran_sf(const SurvivalDataset& data,
                             const WeightVector& alpha) {
  detail::check_alpha(data, alpha);
  const auto& grid = data.distinct_times();
  Vector values(grid.size());
  double s = 1.0;
  detail::beran_walk(
      data, alpha.weights,
      [&](double before, double after) { s *= after / before; },
      [&](std::size_t g) { values[g] = s; });
  return {grid, std::move(values), 1.0};
}

/// Beran cumulative hazard, accumulated as sum of ln(before) - ln(after).
/// After the SF reaches zero the CHF is +infinity.
inline StepFunction beran_chf(const SurvivalDataset& data,
                              const WeightVector& alpha) {
  detail::check_alpha(data, alpha);
  const auto& grid = data.distinct_times();
  Vector values(grid.size());
  double h = 0.0;
  detail::beran_walk(
      data, alpha.weights,
      [&](double before, double after) {
        h = after > 0.0 ? h + std::log(before) - std::log(after)
                        : std::numeric_limits<double>::infinity();
      },
      [&](std::size_t g) { values[g] = h; });
  return {grid, std::move(values), 0.0};
}

inline double squared_distance(std::span<const double> a,
                               std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dimension mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

/// Numerically stable softmax.
inline Vector softmax(std::span<const double> logits) {
  Vector out(logits.begin(), logits.end());
  if (out.empty()) return out;
  double mx = *std::max_element(out.begin(), out.end());
  double total = 0.0;
  for (double& v : out) {
    v = std::exp(v - mx);
    total += v;
  }
  for (double& v : out) v /= total;
  return out;
}

/// softmax(-||x - x_i||^2 / tau) over the training points.
inline WeightVector gaussian_weights(std::span<const double> x,
                                     const SurvivalDataset& data, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (x.size() != data.dim()) throw std::invalid_argument("dimension mismatch");
  Vector logits(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    logits[i] = -squared_distance(x, data[i].features) / tau;
  return WeightVector(softmax(logits));
}

struct CoxModel {
  StepFunction baseline_chf;
  StepFunction baseline_sf;
  Vector coefficients;

  CoxModel() = default;
  CoxModel(StepFunction h0, Vector b)
      : baseline_chf(std::move(h0)),
        baseline_sf(chf_to_sf(baseline_chf)),
        coefficients(std::move(b)) {}

  double risk(std::span<const double> x) const {
    if (x.size() != coefficients.size())
      throw std::invalid_argument("dimension mismatch");
    double r = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) r += coefficients[k] * x[k];
    return r;
  }
};

inline StepFunction cox_chf(const CoxModel& model, std::span<const double> x) {
  const double scale = std::exp(model.risk(x));
  StepFunction out = model.baseline_chf;
  for (double& v : out.values) v *= scale;
  out.initial_value *= scale;
  return out;
}

inline StepFunction cox_sf(const CoxModel& model, std::span<const double> x) {
  const double power = std::exp(model.risk(x));
  StepFunction out = model.baseline_sf;
  for (double& v : out.values) v = std::pow(v, power);
  out.initial_value = std::pow(out.initial_value, power);
  return out;
}

/// Concordance over pairs with T_i < T_j and delta_i = 1. Pairs with tied
/// predictions are excluded. Returns nullopt when no pair is comparable.
inline std::optional<double> cindex_times(std::span<const double> true_times,
                                          std::span<const double> predicted,
                                          const std::vector<bool>& events) {
  const std::size_t n = true_times.size();
  if (predicted.size() != n || events.size() != n)
    throw std::invalid_argument("cindex: length mismatch");
  std::size_t concordant = 0, comparable = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!events[i]) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (!(true_times[i] < true_times[j])) continue;
      if (predicted[i] == predicted[j]) continue;
      ++comparable;
      if (predicted[i] < predicted[j]) ++concordant;
    }
  }
  if (comparable == 0) return std::nullopt;
  return static_cast<double>(concordant) / static_cast<double>(comparable);
}

}  // namespace benim
