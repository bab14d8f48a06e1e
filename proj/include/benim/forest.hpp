#pragma once

// Random survival forest with log-rank splitting and Nelson-Aalen leaves.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

#include "benim/blackbox.hpp"
#include "benim/rng.hpp"
#include "benim/survival.hpp"

namespace benim {

struct ForestConfig {
  int n_trees = 100;
  int max_depth = 8;
  /// 0 selects max(1, round(sqrt(d))).
  int features_per_split = 0;
  int min_leaf_events = 3;
  bool bootstrap = true;
  std::uint64_t seed = 0;

  int resolved_features(std::size_t d) const {
    int k = features_per_split > 0
                ? features_per_split
                : std::max(1, static_cast<int>(std::lround(std::sqrt(static_cast<double>(d)))));
    if (static_cast<std::size_t>(k) > d)
      throw std::invalid_argument("features_per_split exceeds feature count");
    return k;
  }

  void validate() const {
    if (n_trees < 1) throw std::invalid_argument("n_trees must be >= 1");
    if (max_depth < 0) throw std::invalid_argument("max_depth must be >= 0");
    if (min_leaf_events < 1) throw std::invalid_argument("min_leaf_events must be >= 1");
    if (features_per_split < 0)
      throw std::invalid_argument("features_per_split must be >= 0");
  }
};

struct TimeEvent {
  double time;
  bool event;
};

namespace detail {

/// Log-rank statistic for samples sorted by time; `left[i]` marks group
/// membership. Returns 0 when the variance vanishes.
inline double logrank_sorted(std::span<const TimeEvent> sorted,
                             std::span<const char> left) {
  double num = 0.0, var = 0.0;
  double n = static_cast<double>(sorted.size());
  double n_left = 0.0;
  for (char l : left) n_left += l ? 1.0 : 0.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    const double t = sorted[i].time;
    double d = 0.0, d_left = 0.0, leave = 0.0, leave_left = 0.0;
    std::size_t j = i;
    for (; j < sorted.size() && sorted[j].time == t; ++j) {
      leave += 1.0;
      if (left[j]) leave_left += 1.0;
      if (sorted[j].event) {
        d += 1.0;
        if (left[j]) d_left += 1.0;
      }
    }
    if (d > 0.0 && n > 1.0) {
      const double frac = n_left / n;
      num += d_left - d * frac;
      var += d * frac * (1.0 - frac) * (n - d) / (n - 1.0);
    }
    n -= leave;
    n_left -= leave_left;
    i = j;
  }
  if (var <= 1e-12) return 0.0;
  return num * num / var;
}

inline std::vector<TimeEvent> sorted_pairs(std::vector<TimeEvent> v) {
  std::stable_sort(v.begin(), v.end(), [](const TimeEvent& a, const TimeEvent& b) {
    if (a.time != b.time) return a.time < b.time;
    return a.event && !b.event;
  });
  return v;
}

}  // namespace detail

/// Two-sample log-rank chi-square statistic (squared standardized form).
/// Defined as 0 when either group has no events.
inline double logrank_statistic(std::span<const TimeEvent> left,
                                std::span<const TimeEvent> right) {
  if (left.empty() || right.empty())
    throw std::invalid_argument("log-rank groups must be nonempty");
  auto has_event = [](std::span<const TimeEvent> g) {
    return std::any_of(g.begin(), g.end(), [](const TimeEvent& r) { return r.event; });
  };
  if (!has_event(left) || !has_event(right)) return 0.0;
  std::vector<std::pair<TimeEvent, char>> all;
  for (auto r : left) all.push_back({r, 1});
  for (auto r : right) all.push_back({r, 0});
  std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.first.time != b.first.time) return a.first.time < b.first.time;
    return a.first.event && !b.first.event;
  });
  std::vector<TimeEvent> te;
  std::vector<char> mask;
  for (auto& [r, l] : all) {
    te.push_back(r);
    mask.push_back(l);
  }
  return detail::logrank_sorted(te, mask);
}

inline double logrank_statistic(const SurvivalDataset& left, const SurvivalDataset& right) {
  auto pairs = [](const SurvivalDataset& d) {
    std::vector<TimeEvent> v;
    for (const auto& r : d.records()) v.push_back({r.time, r.event});
    return v;
  };
  auto l = pairs(left), r = pairs(right);
  return logrank_statistic(l, r);
}

/// Leaf cumulative hazard; `chf.times` is a subset of the forest grid holding
/// the leaf's jump times.
struct SurvivalLeaf {
  StepFunction chf{{}, {}, 0.0};
  std::vector<std::size_t> grid_index;  // position of each jump in the grid
  std::vector<double> increments;

  void bind(const Vector& grid) {
    grid_index.clear();
    increments.clear();
    double prev = 0.0;
    for (std::size_t k = 0; k < chf.times.size(); ++k) {
      auto it = std::lower_bound(grid.begin(), grid.end(), chf.times[k]);
      if (it == grid.end() || *it != chf.times[k])
        throw std::invalid_argument("leaf time not on the forest grid");
      grid_index.push_back(static_cast<std::size_t>(it - grid.begin()));
      increments.push_back(chf.values[k] - prev);
      prev = chf.values[k];
    }
  }
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int leaf = -1;  // index into SurvivalTree::leaves
};

struct SurvivalTree {
  std::vector<TreeNode> nodes;
  std::vector<SurvivalLeaf> leaves;

  const SurvivalLeaf& find_leaf(std::span<const double> x) const {
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
      const auto& nd = nodes[static_cast<std::size_t>(i)];
      i = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
    }
    return leaves[static_cast<std::size_t>(nodes[static_cast<std::size_t>(i)].leaf)];
  }

  int depth() const {
    std::vector<std::pair<int, int>> stack{{0, 0}};
    int best = 0;
    while (!stack.empty()) {
      auto [i, dep] = stack.back();
      stack.pop_back();
      best = std::max(best, dep);
      const auto& nd = nodes[static_cast<std::size_t>(i)];
      if (nd.feature >= 0) {
        stack.push_back({nd.left, dep + 1});
        stack.push_back({nd.right, dep + 1});
      }
    }
    return best;
  }
};

/// Nelson-Aalen CHF of `rows` (duplicates count) restricted to its jump times.
inline StepFunction leaf_nelson_aalen(const SurvivalDataset& data,
                                      std::span<const std::size_t> rows) {
  std::vector<TimeEvent> te;
  te.reserve(rows.size());
  for (auto r : rows) te.push_back({data[r].time, data[r].event});
  te = detail::sorted_pairs(std::move(te));
  Vector times, values;
  double h = 0.0;
  double at_risk = static_cast<double>(te.size());
  std::size_t i = 0;
  while (i < te.size()) {
    const double t = te[i].time;
    double d = 0.0, leave = 0.0;
    for (; i < te.size() && te[i].time == t; ++i) {
      leave += 1.0;
      if (te[i].event) d += 1.0;
    }
    if (d > 0.0) {
      h += d / at_risk;
      times.push_back(t);
      values.push_back(h);
    }
    at_risk -= leave;
  }
  return {std::move(times), std::move(values), 0.0};
}

class RSFModel final : public SurvivalModel {
 public:
  RSFModel() = default;
  RSFModel(std::vector<SurvivalTree> trees, Vector grid, ForestConfig cfg, std::size_t dim)
      : trees_(std::move(trees)), grid_(std::move(grid)), config_(cfg), dim_(dim) {
    for (auto& t : trees_)
      for (auto& l : t.leaves) l.bind(grid_);
  }

  std::size_t dim() const override { return dim_; }
  const Vector& time_grid() const override { return grid_; }
  const std::vector<SurvivalTree>& trees() const { return trees_; }
  const ForestConfig& config() const { return config_; }

  /// Mean of the per-tree leaf CHFs on the shared grid.
  StepFunction predict_chf(std::span<const double> x) const override {
    if (x.size() != dim_) throw std::invalid_argument("dimension mismatch");
    Vector jumps(grid_.size(), 0.0);
    for (const auto& tree : trees_) {
      const auto& leaf = tree.find_leaf(x);
      for (std::size_t k = 0; k < leaf.grid_index.size(); ++k)
        jumps[leaf.grid_index[k]] += leaf.increments[k];
    }
    const double inv = 1.0 / static_cast<double>(trees_.size());
    double acc = 0.0;
    for (double& v : jumps) {
      acc += v;
      v = acc * inv;
    }
    return {grid_, std::move(jumps), 0.0};
  }

 private:
  std::vector<SurvivalTree> trees_;
  Vector grid_;
  ForestConfig config_;
  std::size_t dim_ = 0;
};

namespace detail {

class TreeBuilder {
 public:
  TreeBuilder(const SurvivalDataset& data, const ForestConfig& cfg, std::uint64_t seed)
      : data_(data), cfg_(cfg), rng_(seed), mtry_(cfg.resolved_features(data.dim())) {}

  SurvivalTree build(std::vector<std::size_t> rows) {
    grow(std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double score = 0.0;
  };

  int grow(std::vector<std::size_t> rows, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    Split s;
    if (depth < cfg_.max_depth) s = best_split(rows);
    if (s.feature < 0) {
      SurvivalLeaf leaf;
      leaf.chf = leaf_nelson_aalen(data_, rows);
      tree_.leaves.push_back(std::move(leaf));
      tree_.nodes[static_cast<std::size_t>(id)].leaf =
          static_cast<int>(tree_.leaves.size()) - 1;
      return id;
    }
    std::vector<std::size_t> l, r;
    for (auto i : rows)
      (data_[i].features[static_cast<std::size_t>(s.feature)] <= s.threshold ? l : r).push_back(i);
    rows.clear();
    rows.shrink_to_fit();
    int left = grow(std::move(l), depth + 1);
    int right = grow(std::move(r), depth + 1);
    auto& nd = tree_.nodes[static_cast<std::size_t>(id)];
    nd.feature = s.feature;
    nd.threshold = s.threshold;
    nd.left = left;
    nd.right = right;
    return id;
  }

  Split best_split(const std::vector<std::size_t>& rows) {
    Split best;
    std::size_t total_events = 0;
    for (auto i : rows) total_events += data_[i].event ? 1 : 0;
    const auto min_ev = static_cast<std::size_t>(cfg_.min_leaf_events);
    if (total_events < 2 * min_ev) return best;

    // Node samples ordered by time; `pos[k]` maps row k to its rank.
    std::vector<std::size_t> by_time(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) by_time[k] = k;
    std::stable_sort(by_time.begin(), by_time.end(), [&](std::size_t a, std::size_t b) {
      const auto& ra = data_[rows[a]];
      const auto& rb = data_[rows[b]];
      if (ra.time != rb.time) return ra.time < rb.time;
      return ra.event && !rb.event;
    });
    std::vector<TimeEvent> sorted(rows.size());
    std::vector<std::size_t> rank(rows.size());
    for (std::size_t k = 0; k < by_time.size(); ++k) {
      const auto& r = data_[rows[by_time[k]]];
      sorted[k] = {r.time, r.event};
      rank[by_time[k]] = k;
    }

    std::vector<std::size_t> feats(data_.dim());
    for (std::size_t j = 0; j < feats.size(); ++j) feats[j] = j;
    std::shuffle(feats.begin(), feats.end(), rng_);
    feats.resize(static_cast<std::size_t>(mtry_));
    std::sort(feats.begin(), feats.end());

    std::vector<char> mask(rows.size());
    std::vector<std::size_t> by_value(rows.size());
    for (std::size_t f : feats) {
      for (std::size_t k = 0; k < rows.size(); ++k) by_value[k] = k;
      std::stable_sort(by_value.begin(), by_value.end(), [&](std::size_t a, std::size_t b) {
        return data_[rows[a]].features[f] < data_[rows[b]].features[f];
      });
      std::fill(mask.begin(), mask.end(), 0);
      std::size_t left_events = 0;
      for (std::size_t k = 0; k + 1 < by_value.size(); ++k) {
        const std::size_t row = by_value[k];
        mask[rank[row]] = 1;
        left_events += data_[rows[row]].event ? 1 : 0;
        const double v = data_[rows[row]].features[f];
        const double next = data_[rows[by_value[k + 1]]].features[f];
        if (!(next > v)) continue;
        if (left_events < min_ev || total_events - left_events < min_ev) continue;
        const double stat = logrank_sorted(sorted, mask);
        if (stat > best.score) {
          best.score = stat;
          best.feature = static_cast<int>(f);
          best.threshold = 0.5 * (v + next);
        }
      }
    }
    return best;
  }

  const SurvivalDataset& data_;
  const ForestConfig& cfg_;
  std::mt19937_64 rng_;
  int mtry_;
  SurvivalTree tree_;
};

}  // namespace detail

/// Grows `cfg.n_trees` trees; tree t uses a seed derived from (cfg.seed, t),
/// so the result does not depend on `workers`.
inline RSFModel fit_rsf(const SurvivalDataset& data, const ForestConfig& cfg,
                        unsigned workers = 1) {
  cfg.validate();
  cfg.resolved_features(data.dim());
  std::vector<SurvivalTree> trees(static_cast<std::size_t>(cfg.n_trees));
  auto grow_tree = [&](std::size_t t) {
    const std::uint64_t seed = derive_seed(cfg.seed, t);
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> rows(data.size());
    if (cfg.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
      for (auto& r : rows) r = pick(rng);
    } else {
      for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    }
    detail::TreeBuilder builder(data, cfg, derive_seed(seed, 1));
    trees[t] = builder.build(std::move(rows));
  };
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(trees.size())));
  if (workers == 1) {
    for (std::size_t t = 0; t < trees.size(); ++t) grow_tree(t);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t t = w; t < trees.size(); t += workers) grow_tree(t);
      });
    for (auto& th : pool) th.join();
  }
  return RSFModel(std::move(trees), data.distinct_times(), cfg, data.dim());
}

inline std::pair<StepFunction, StepFunction> rsf_predict(const RSFModel& model,
                                                         std::span<const double> x) {
  StepFunction chf = model.predict_chf(x);
  StepFunction sf = chf_to_sf(chf);
  return {std::move(sf), std::move(chf)};
}

}  // namespace benim
