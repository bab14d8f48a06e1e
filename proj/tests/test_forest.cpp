#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "benim/experiment.hpp"
#include "benim/forest.hpp"
#include "benim/synth.hpp"

using namespace benim;

namespace {

// Textbook log-rank from the pooled risk table: at each distinct event time
// count the risk sets and deaths of both groups directly.
double logrank_oracle(const std::vector<TimeEvent>& a, const std::vector<TimeEvent>& b) {
  std::set<double> times;
  for (const auto& r : a)
    if (r.event) times.insert(r.time);
  for (const auto& r : b)
    if (r.event) times.insert(r.time);
  double o_minus_e = 0.0, v = 0.0;
  for (double t : times) {
    double n1 = 0, n2 = 0, d1 = 0, d2 = 0;
    for (const auto& r : a) {
      n1 += r.time >= t;
      d1 += r.time == t && r.event;
    }
    for (const auto& r : b) {
      n2 += r.time >= t;
      d2 += r.time == t && r.event;
    }
    const double n = n1 + n2, d = d1 + d2;
    o_minus_e += d1 - d * n1 / n;
    if (n > 1) v += d * (n1 / n) * (n2 / n) * (n - d) / (n - 1);
  }
  return v > 0 ? o_minus_e * o_minus_e / v : 0.0;
}

SurvivalDataset from_rows(const std::vector<Vector>& x, const std::vector<double>& t,
                          const std::vector<bool>& e) {
  std::vector<SurvivalRecord> recs;
  for (std::size_t i = 0; i < x.size(); ++i) recs.push_back({x[i], e[i], t[i]});
  return SurvivalDataset(recs);
}

SurvivalDataset cox_data(std::size_t n, std::uint64_t seed) {
  GeneratorConfig g = preset("cox5", seed);
  g.clusters[0].n_points = n;
  return gen_clustered_dataset(g).dataset;
}

}  // namespace

TEST(LogRank, IdenticalGroupsGiveZero) {
  std::vector<TimeEvent> g{{1, true}, {2, false}, {3, true}, {4, true}};
  EXPECT_NEAR(logrank_statistic(g, g), 0.0, 1e-9);
}

TEST(LogRank, SeparatedGroupsMatchRiskTableOracle) {
  std::vector<TimeEvent> l(5, {1.0, true}), r(5, {10.0, true});
  EXPECT_NEAR(logrank_statistic(l, r), logrank_oracle(l, r), 1e-12);
  EXPECT_NEAR(logrank_statistic(l, r), 9.0, 1e-12);
}

TEST(LogRank, RandomGroupsMatchOracle) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> t(1, 6);
  std::bernoulli_distribution e(0.7);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<TimeEvent> a, b;
    for (int i = 0; i < 4 + rep % 7; ++i) a.push_back({double(t(rng)), e(rng)});
    for (int i = 0; i < 3 + rep % 5; ++i) b.push_back({double(t(rng)), e(rng)});
    a[0].event = b[0].event = true;
    EXPECT_NEAR(logrank_statistic(a, b), logrank_oracle(a, b), 1e-9);
  }
}

TEST(LogRank, GroupWithoutEventsGivesZero) {
  std::vector<TimeEvent> l{{1, true}, {2, true}}, r{{3, false}, {0.5, false}};
  EXPECT_EQ(logrank_statistic(l, r), 0.0);
}

TEST(LogRank, DatasetOverload) {
  auto a = from_rows({{0}, {0}, {0}}, {1, 2, 3}, {true, true, false});
  auto b = from_rows({{1}, {1}}, {5, 6}, {true, true});
  std::vector<TimeEvent> ta{{1, true}, {2, true}, {3, false}}, tb{{5, true}, {6, true}};
  EXPECT_NEAR(logrank_statistic(a, b), logrank_oracle(ta, tb), 1e-12);
}

TEST(Forest, DepthZeroEqualsNelsonAalen) {
  auto d = cox_data(60, 3);
  ForestConfig cfg;
  cfg.n_trees = 1;
  cfg.max_depth = 0;
  cfg.bootstrap = false;
  auto m = fit_rsf(d, cfg);
  auto na = nelson_aalen(d);
  auto [sf, chf] = rsf_predict(m, d[0].features);
  ASSERT_EQ(chf.times, na.times);
  for (std::size_t i = 0; i < na.values.size(); ++i) {
    EXPECT_NEAR(chf.values[i], na.values[i], 1e-12);
    EXPECT_NEAR(sf.values[i], std::exp(-na.values[i]), 1e-12);
  }
}

TEST(Forest, DepthZeroIsConstantInX) {
  auto d = cox_data(50, 4);
  ForestConfig cfg;
  cfg.n_trees = 3;
  cfg.max_depth = 0;
  cfg.bootstrap = false;
  auto m = fit_rsf(d, cfg);
  EXPECT_EQ(m.predict_chf(d[0].features).values, m.predict_chf(Vector(5, 100.0)).values);
}

TEST(Forest, RootSplitsOnSeparatingFeature) {
  std::vector<Vector> x;
  std::vector<double> t;
  std::vector<bool> e;
  const double noise[] = {0.3, 0.9, 0.1, 0.7, 0.2, 0.8, 0.6, 0.4};
  const double times[] = {1, 2, 1.5, 2.5, 10, 11, 10.5, 11.5};
  for (int i = 0; i < 8; ++i) {
    x.push_back({i < 4 ? 0.0 : 1.0, noise[i]});
    t.push_back(times[i]);
    e.push_back(true);
  }
  auto d = from_rows(x, t, e);
  ForestConfig cfg;
  cfg.n_trees = 1;
  cfg.bootstrap = false;
  cfg.features_per_split = 2;
  cfg.min_leaf_events = 1;

  // Exhaustive oracle over all features and midpoints.
  double best = -1;
  int best_f = -1;
  double best_thr = 0;
  for (int f = 0; f < 2; ++f) {
    std::set<double> vals;
    for (auto& r : x) vals.insert(r[f]);
    std::vector<double> v(vals.begin(), vals.end());
    for (std::size_t k = 0; k + 1 < v.size(); ++k) {
      const double thr = 0.5 * (v[k] + v[k + 1]);
      std::vector<TimeEvent> l, r;
      for (int i = 0; i < 8; ++i) (x[i][f] <= thr ? l : r).push_back({t[i], e[i]});
      const double s = logrank_oracle(l, r);
      if (s > best) {
        best = s;
        best_f = f;
        best_thr = thr;
      }
    }
  }
  ASSERT_EQ(best_f, 0);
  auto m = fit_rsf(d, cfg);
  const auto& root = m.trees()[0].nodes[0];
  EXPECT_EQ(root.feature, best_f);
  EXPECT_DOUBLE_EQ(root.threshold, best_thr);
}

TEST(Forest, DeterministicAcrossRunsAndWorkers) {
  auto d = cox_data(120, 5);
  ForestConfig cfg;
  cfg.n_trees = 8;
  cfg.seed = 77;
  auto a = fit_rsf(d, cfg, 1);
  auto b = fit_rsf(d, cfg, 1);
  auto c = fit_rsf(d, cfg, 4);
  for (std::size_t t = 0; t < a.trees().size(); ++t) {
    ASSERT_EQ(a.trees()[t].nodes.size(), b.trees()[t].nodes.size());
    ASSERT_EQ(a.trees()[t].nodes.size(), c.trees()[t].nodes.size());
    for (std::size_t k = 0; k < a.trees()[t].nodes.size(); ++k) {
      EXPECT_EQ(a.trees()[t].nodes[k].threshold, b.trees()[t].nodes[k].threshold);
      EXPECT_EQ(a.trees()[t].nodes[k].threshold, c.trees()[t].nodes[k].threshold);
    }
  }
  for (std::size_t i = 0; i < 10; ++i)
    EXPECT_EQ(a.predict_chf(d[i].features).values, c.predict_chf(d[i].features).values);
}

TEST(Forest, EnsembleAveragesChfs) {
  const Vector grid{1.0, 2.0};
  auto tree_with = [&](double h) {
    SurvivalTree t;
    t.nodes.push_back({});
    t.nodes[0].leaf = 0;
    SurvivalLeaf l;
    l.chf = StepFunction({1.0}, {h}, 0.0);
    t.leaves.push_back(l);
    return t;
  };
  RSFModel m({tree_with(0.2), tree_with(0.4)}, grid, ForestConfig{}, 1);
  auto [sf, chf] = rsf_predict(m, Vector{0.0});
  EXPECT_NEAR(chf.values[0], 0.3, 1e-15);
  EXPECT_NEAR(sf.values[0], std::exp(-0.3), 1e-15);
  EXPECT_NEAR(sf(1.5), std::exp(-0.3), 1e-15);
}

TEST(Forest, PredictionsAreSurvivalFunctionsAndDepthBounded) {
  auto d = cox_data(200, 6);
  ForestConfig cfg;
  cfg.n_trees = 10;
  cfg.max_depth = 3;
  cfg.seed = 2;
  auto m = fit_rsf(d, cfg);
  for (const auto& t : m.trees()) EXPECT_LE(t.depth(), 3);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-6, 6);
  for (int rep = 0; rep < 50; ++rep) {
    Vector x(5);
    for (double& v : x) v = u(rng);
    EXPECT_TRUE(is_survival_function(m.predict_sf(x)));
  }
}

TEST(Forest, LeavesRespectMinimumEvents) {
  auto d = cox_data(200, 8);
  ForestConfig cfg;
  cfg.n_trees = 3;
  cfg.bootstrap = false;
  cfg.min_leaf_events = 5;
  auto m = fit_rsf(d, cfg);
  for (const auto& t : m.trees()) {
    std::vector<int> events(t.leaves.size(), 0);
    for (std::size_t i = 0; i < d.size(); ++i) {
      const auto* leaf = &t.find_leaf(d[i].features);
      events[static_cast<std::size_t>(leaf - t.leaves.data())] += d[i].event;
    }
    for (int e : events) EXPECT_GE(e, 5);
  }
}

TEST(Forest, TrainingConcordanceOnStrongCox) {
  GeneratorConfig g = preset("cox5", 10);
  g.clusters[0].b_true = {1.0, 0.6, 0.3, 0, 0};
  auto d = gen_clustered_dataset(g).dataset;
  ForestConfig cfg;
  cfg.n_trees = 30;
  cfg.seed = 1;
  auto m = fit_rsf(d, cfg);
  auto ci = model_cindex(m, d.records());
  ASSERT_TRUE(ci.has_value());
  EXPECT_GT(*ci, 0.6);
}

TEST(Forest, ConfigValidation) {
  ForestConfig cfg;
  cfg.n_trees = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  ForestConfig too_many;
  too_many.features_per_split = 9;
  EXPECT_THROW(too_many.resolved_features(5), std::invalid_argument);
  EXPECT_EQ(ForestConfig{}.resolved_features(5), 2);
  EXPECT_EQ(ForestConfig{}.resolved_features(20), 4);
}
