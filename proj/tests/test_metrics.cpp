#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "benim/experiment.hpp"
#include "benim/metrics.hpp"

using namespace benim;

namespace {

ExperimentConfig tiny_experiment(std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.generator = preset("2c5f");
  for (auto& c : cfg.generator.clusters) c.n_points = 60;
  cfg.forest.n_trees = 5;
  cfg.forest.max_depth = 4;
  cfg.explainer.n_points = 15;
  cfg.explainer.local_epochs = 5;
  cfg.explainer.global_epochs = 5;
  cfg.explainer.subnet.hidden_layers = {4};
  cfg.methods = {Method::survbenim_local, Method::survbenim_global, Method::survbex,
                 Method::survlime, Method::survnam};
  cfg.test_points = 4;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST(Normalize, Examples) {
  auto a = normalize_importance(Vector{1, 1, 2});
  EXPECT_EQ(a.normalized, (Vector{0.25, 0.25, 0.5}));
  auto b = normalize_importance(Vector{-1, 1});
  EXPECT_EQ(b.normalized, (Vector{0.5, 0.5}));
  const Vector t{0.5, 0.25, 0.12, 0, 0};
  auto c = normalize_importance(t);
  for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(c.normalized[k], t[k] / 0.87, 1e-15);
  double s = 0;
  for (double v : c.normalized) s += v;
  EXPECT_NEAR(s, 1.0, 1e-9);
  EXPECT_EQ(c.raw, t);
}

TEST(Normalize, RejectsZeroAndNonFinite) {
  EXPECT_THROW(normalize_importance(Vector{0, 0, 0}), std::invalid_argument);
  EXPECT_THROW(normalize_importance(Vector{1, NAN}), std::invalid_argument);
}

TEST(Distances, IdentityGivesPerfectScores) {
  const Vector b = normalize_importance(Vector{0.5, 0.25, 0.12, 0, 0}).normalized;
  EXPECT_EQ(dist_D(b, b), 0.0);
  EXPECT_NEAR(dist_KL(b, b), 0.0, 1e-15);
  EXPECT_EQ(cindex_vec(b, b).value(), 1.0);
}

TEST(Distances, FullReversal) {
  EXPECT_EQ(cindex_vec(Vector{1, 0}, Vector{0, 1}).value(), 0.0);
}

TEST(Distances, NoPairsIsDistinguished) {
  EXPECT_FALSE(cindex_vec(Vector{0.1, 0.9}, Vector{0.5, 0.5}).has_value());
  EXPECT_THROW(cindex_vec(Vector{1}, Vector{1, 2}), std::invalid_argument);
}

TEST(Distances, SpreadsheetOracle) {
  const Vector truth_raw{0, 0, 0.12, 0.25, 0.5};
  Vector truth(5);
  for (int k = 0; k < 5; ++k) truth[k] = truth_raw[k] / 0.87;
  const Vector model{0.1, 0.05, 0.2, 0.4, 0.25};

  double d = 0;
  for (int k = 0; k < 5; ++k) d += std::pow(model[k] - truth[k], 2);
  EXPECT_NEAR(dist_D(model, truth), d, 1e-15);

  // Smoothing: zeros lifted to 1e-6 then both vectors renormalized.
  Vector p = truth, q = model;
  double sp = 0, sq = 0;
  for (int k = 0; k < 5; ++k) {
    p[k] = std::max(p[k], 1e-6), sp += p[k];
    q[k] = std::max(q[k], 1e-6), sq += q[k];
  }
  double kl = 0;
  for (int k = 0; k < 5; ++k) kl += (p[k] / sp) * std::log((p[k] / sp) / (q[k] / sq));
  EXPECT_NEAR(dist_KL(model, truth), kl, 1e-14);

  // Ordered pairs of truth: (0,2),(0,3),(0,4),(1,2),(1,3),(1,4),(2,3),(2,4),(3,4);
  // the model orders all but (3,4) the same way.
  EXPECT_NEAR(cindex_vec(model, truth).value(), 8.0 / 9.0, 1e-15);
}

TEST(Distances, NonnegativeOnRandomVectors) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int rep = 0; rep < 100; ++rep) {
    Vector a(6), b(6);
    for (auto& v : a) v = u(rng);
    for (auto& v : b) v = u(rng);
    a = normalize_importance(a).normalized;
    b = normalize_importance(b).normalized;
    EXPECT_GT(dist_D(a, b), 0.0);
    EXPECT_GT(dist_KL(a, b), 0.0);
  }
}

TEST(Distances, ConcordanceInvariantUnderMonotoneTransform) {
  const Vector truth{0.1, 0.4, 0.2, 0.3, 0.0};
  const Vector raw{0.3, 2.0, -0.5, 1.1, 0.05};
  Vector abs_raw, cubed;
  for (double v : raw) abs_raw.push_back(std::abs(v)), cubed.push_back(std::pow(std::abs(v), 3) + 2);
  EXPECT_EQ(cindex_vec(abs_raw, truth), cindex_vec(cubed, truth));
  EXPECT_EQ(cindex_vec(abs_raw, truth), cindex_vec(normalize_importance(raw).normalized, truth));
}

TEST(SfDistance, Examples) {
  const Vector grid{2.0, 5.0, 10.0};
  StepFunction a(grid, {0.8, 0.5, 0.2}, 1.0), b(grid, {0.7, 0.4, 0.1}, 1.0);
  EXPECT_EQ(sf_distance(a, a, grid), 0.0);
  // Constant gap 0.1 over the whole horizon [0, 10).
  StepFunction c(grid, {0.8, 0.5, 0.2}, 0.9);
  StepFunction e(grid, {0.7, 0.4, 0.1}, 0.8);
  EXPECT_NEAR(sf_distance(c, e, grid), 0.1, 1e-15);
  // Interval values: [1,.8,.5] vs [1,.7,.4], widths 2,3,5.
  EXPECT_NEAR(sf_distance(a, b, grid), 0.01 * 3 + 0.01 * 5, 1e-15);
}

TEST(SfDistance, RandomFourIntervalOracle) {
  const Vector grid{0.5, 1.5, 1.7, 4.0};
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  Vector va(4), vb(4);
  double pa = 1, pb = 1;
  for (int i = 0; i < 4; ++i) va[i] = pa *= u(rng), vb[i] = pb *= u(rng);
  StepFunction a(grid, va, 1.0), b(grid, vb, 1.0);
  const double ia[] = {1, va[0], va[1], va[2]}, ib[] = {1, vb[0], vb[1], vb[2]};
  const double w[] = {0.5, 1.0, 0.2, 2.3};
  double oracle = 0;
  for (int i = 0; i < 4; ++i) oracle += std::pow(ia[i] - ib[i], 2) * w[i];
  EXPECT_NEAR(sf_distance(a, b, grid), oracle, 1e-14);
}

TEST(SfDistance, GridMismatchIsAnError) {
  StepFunction a({1, 2}, {0.5, 0.2}, 1.0), b({1, 3}, {0.5, 0.2}, 1.0);
  EXPECT_THROW(sf_distance(a, b, a.times), std::invalid_argument);
}

TEST(Aggregate, MeanAndSampleSd) {
  auto a = aggregate(Vector{1, 2, 3, 4});
  EXPECT_DOUBLE_EQ(a.mean, 2.5);
  EXPECT_NEAR(a.sd, std::sqrt(5.0 / 3.0), 1e-15);
  EXPECT_EQ(a.count, 4u);
  EXPECT_EQ(aggregate(Vector{}).count, 0u);
}

TEST(Aggregate, SkipsSkippedRowsAndUndefinedConcordance) {
  MetricsReport r;
  InstanceMetrics x;
  x.D = 1, x.KL = 2, x.C = 0.5, x.sf_distance = 3;
  InstanceMetrics y = x;
  y.D = 3, y.C.reset();
  InstanceMetrics z;
  z.skipped = true;
  z.D = 100;
  r.per_instance = {x, y, z};
  finalize_report(r);
  EXPECT_EQ(r.skipped, 1u);
  EXPECT_DOUBLE_EQ(r.msd.mean, 2.0);
  EXPECT_EQ(r.mci.count, 1u);
  EXPECT_DOUBLE_EQ(r.mci.mean, 0.5);
}

TEST(Experiment, ConstantSubnetsWithUniformTruthHaveNoPairs) {
  auto d = gen_clustered_dataset(preset("cox5", 1)).dataset;
  CoxBlackBox bb(CoxModel(nelson_aalen(d), Vector(5, 0.1)));
  ExplanationResult res;
  res.anchor = d[0].features;
  res.importance = Vector(5, 2.0);
  res.fitted_sf = bb.predict_sf(res.anchor);
  auto row = score_explanation(res, bb, Vector(5, 1.0));
  EXPECT_FALSE(row.C.has_value());
  EXPECT_EQ(row.D, 0.0);
  EXPECT_EQ(row.sf_distance, 0.0);
}

TEST(Experiment, AggregatesAreColumnMeans) {
  auto res = run_experiment(tiny_experiment(2), 1);
  ASSERT_EQ(res.reports.size(), 5u);
  for (const auto& rep : res.reports) {
    ASSERT_EQ(rep.per_instance.size(), 4u);
    double d = 0, kl = 0, sfd = 0, c = 0;
    std::size_t n = 0, nc = 0;
    for (const auto& row : rep.per_instance) {
      if (row.skipped) continue;
      ++n;
      d += row.D, kl += row.KL, sfd += row.sf_distance;
      // Recompute the row from its stored vectors.
      EXPECT_NEAR(row.D, dist_D(row.importance, row.truth), 1e-15);
      if (row.C) c += *row.C, ++nc;
    }
    ASSERT_GT(n, 0u) << rep.method;
    EXPECT_NEAR(rep.msd.mean, d / n, 1e-12);
    EXPECT_NEAR(rep.mkl.mean, kl / n, 1e-12);
    EXPECT_NEAR(rep.msfd.mean, sfd / n, 1e-12);
    if (nc) EXPECT_NEAR(rep.mci.mean, c / nc, 1e-12);
  }
}

TEST(Experiment, TruthFollowsTheAnchorsCluster) {
  auto res = run_experiment(tiny_experiment(3), 1);
  for (std::size_t a = 0; a < res.anchor_rows.size(); ++a) {
    const auto& x = res.data.dataset[res.anchor_rows[a]].features;
    const Vector& expected = x[0] < 0.5 ? res.data.b_true[0] : res.data.b_true[1];
    const auto& row = res.reports[0].per_instance[a];
    EXPECT_EQ(row.truth, normalize_importance(expected).normalized);
  }
}

TEST(Experiment, DeterministicAcrossWorkerCounts) {
  auto a = run_experiment(tiny_experiment(4), 1);
  auto b = run_experiment(tiny_experiment(4), 3);
  EXPECT_EQ(a.anchor_rows, b.anchor_rows);
  for (std::size_t m = 0; m < a.reports.size(); ++m)
    for (std::size_t i = 0; i < a.reports[m].per_instance.size(); ++i) {
      EXPECT_EQ(a.reports[m].per_instance[i].importance, b.reports[m].per_instance[i].importance);
      EXPECT_EQ(a.reports[m].per_instance[i].sf_distance, b.reports[m].per_instance[i].sf_distance);
    }
}

TEST(Experiment, ExplainerFailureBecomesSkippedRow) {
  auto cfg = tiny_experiment(5);
  cfg.methods = {Method::survlime};
  cfg.explainer.log_epsilon = 1e12;  // excludes every interval
  auto res = run_experiment(cfg, 1);
  const auto& rep = res.reports[0];
  EXPECT_EQ(rep.skipped, rep.per_instance.size());
  for (const auto& row : rep.per_instance) {
    EXPECT_TRUE(row.skipped);
    EXPECT_NE(row.reason.find("excluded"), std::string::npos);
  }
}

TEST(Split, ShuffledTestRowsAndSortedTrainRows) {
  auto d = gen_clustered_dataset(preset("2c5f", 1)).dataset;
  auto s = split_dataset(d, 0.2, 7);
  EXPECT_EQ(s.test_rows.size(), 80u);
  EXPECT_EQ(s.train_rows.size(), 320u);
  EXPECT_TRUE(std::is_sorted(s.train_rows.begin(), s.train_rows.end()));
  EXPECT_FALSE(std::is_sorted(s.test_rows.begin(), s.test_rows.end()));
  std::vector<std::size_t> all = s.test_rows;
  all.insert(all.end(), s.train_rows.begin(), s.train_rows.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i], i);
  EXPECT_THROW(split_dataset(d, 0.0, 1), std::invalid_argument);
}
