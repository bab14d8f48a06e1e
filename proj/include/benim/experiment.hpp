#pragma once

// Experiment driver: generator -> random survival forest -> explainers ->
// per-instance metrics and per-method reports.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "benim/explanation.hpp"
#include "benim/forest.hpp"
#include "benim/metrics.hpp"
#include "benim/parallel.hpp"
#include "benim/survbenim.hpp"
#include "benim/survbex.hpp"
#include "benim/survlime.hpp"
#include "benim/survnam.hpp"
#include "benim/synth.hpp"

namespace benim {

struct ExperimentConfig {
  GeneratorConfig generator = preset("2c5f");
  ForestConfig forest;
  ExplainerConfig explainer;
  std::vector<Method> methods{Method::survbenim_local, Method::survbex, Method::survlime,
                              Method::survnam};
  std::size_t test_points = 20;  // M
  double test_fraction = 0.2;
  std::uint64_t seed = 0;

  void validate() const {
    generator.validate();
    forest.validate();
    if (methods.empty()) throw std::invalid_argument("no methods selected");
    if (test_points == 0) throw std::invalid_argument("test_points must be positive");
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
      throw std::invalid_argument("test_fraction must lie in (0, 1)");
  }
};

/// Seeds of every stage derived from the experiment seed.
struct ExperimentSeeds {
  std::uint64_t generator, split, forest, explainer;

  explicit ExperimentSeeds(std::uint64_t seed)
      : generator(derive_seed(seed, 1)),
        split(derive_seed(seed, 2)),
        forest(derive_seed(seed, 3)),
        explainer(derive_seed(seed, 4)) {}
};

struct TrainTestSplit {
  std::vector<std::size_t> train_rows, test_rows;  // indices into the full dataset
  SurvivalDataset train, test;
};

/// Shuffles rows with `seed` and puts the first ceil(fraction * n) in the test
/// part, kept in shuffled order so that any prefix is a random sample.
inline TrainTestSplit split_dataset(const SurvivalDataset& data, double test_fraction,
                                    std::uint64_t seed) {
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(rows.begin(), rows.end(), rng);
  const auto n_test = static_cast<std::size_t>(
      std::ceil(test_fraction * static_cast<double>(data.size())));
  if (n_test == 0 || n_test >= data.size()) throw std::invalid_argument("degenerate split");
  TrainTestSplit s;
  s.test_rows.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_test));
  s.train_rows.assign(rows.begin() + static_cast<std::ptrdiff_t>(n_test), rows.end());
  std::sort(s.train_rows.begin(), s.train_rows.end());
  s.train = data.subset(s.train_rows);
  // The test part may be entirely censored; it is only used as a pool of anchors.
  std::vector<SurvivalRecord> recs;
  for (std::size_t r : s.test_rows) recs.push_back(data[r]);
  bool any_event = false;
  for (const auto& r : recs) any_event = any_event || r.event;
  if (any_event) s.test = SurvivalDataset(std::move(recs));
  return s;
}

/// Held-out concordance of a model, scoring each record by its predicted
/// expected (restricted mean) time.
inline std::optional<double> model_cindex(const SurvivalModel& bb,
                                          std::span<const SurvivalRecord> records) {
  Vector t, pred;
  std::vector<bool> ev;
  for (const auto& r : records) {
    t.push_back(r.time);
    pred.push_back(expected_time(bb.predict_sf(r.features)));
    ev.push_back(r.event);
  }
  return cindex_times(t, pred, ev);
}

/// One explanation call; the result's fitted SF lives on the training grid.
inline ExplanationResult explain_instance(Method m, const SurvivalModel& bb,
                                          const SurvivalDataset& train, std::span<const double> x,
                                          const ExplainerConfig& cfg) {
  switch (m) {
    case Method::survbenim_local: return fit_survbenim_local(bb, train, x, cfg);
    case Method::survbex: return fit_survbex(bb, train, x, cfg);
    case Method::survlime: return fit_survlime(bb, train, x, cfg);
    case Method::survnam: return fit_survnam(bb, train, x, cfg);
    case Method::survbenim_global: {
      const Vector anchor(x.begin(), x.end());
      return fit_survbenim_global(bb, train, std::span<const Vector>(&anchor, 1), cfg)
          .explain(x, anchor_seed(cfg, 0));
    }
  }
  throw std::invalid_argument("unknown method");
}

inline InstanceMetrics score_explanation(const ExplanationResult& res, const SurvivalModel& bb,
                                         std::span<const double> b_true) {
  InstanceMetrics row;
  const auto model = normalize_importance(res.importance);
  const auto truth = normalize_importance(b_true);
  row.importance = model.normalized;
  row.truth = truth.normalized;
  row.D = dist_D(model.normalized, truth.normalized);
  row.KL = dist_KL(model.normalized, truth.normalized);
  row.C = cindex_vec(model.normalized, truth.normalized);
  row.sf_distance = sf_distance(res.fitted_sf, bb.predict_sf(res.anchor), bb.time_grid());
  return row;
}

struct ExperimentResult {
  GeneratedData data;
  TrainTestSplit split;
  RSFModel model;
  std::optional<double> blackbox_test_cindex;
  std::vector<std::size_t> anchor_rows;  // indices into the full dataset
  std::vector<MetricsReport> reports;    // one per configured method
  // explanations[m][a]; empty optional when the fit failed.
  std::vector<std::vector<std::optional<ExplanationResult>>> explanations;
};

/// Deterministic for a fixed config regardless of `workers`: every fit draws
/// its seed from (explainer seed, anchor index).
inline ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                       unsigned workers = default_workers()) {
  cfg.validate();
  const ExperimentSeeds seeds(cfg.seed);
  ExperimentResult out;

  GeneratorConfig gen = cfg.generator;
  gen.seed = seeds.generator;
  out.data = gen_clustered_dataset(gen);
  out.split = split_dataset(out.data.dataset, cfg.test_fraction, seeds.split);

  ForestConfig fc = cfg.forest;
  fc.seed = seeds.forest;
  out.model = fit_rsf(out.split.train, fc, workers);
  {
    std::vector<SurvivalRecord> test;
    for (std::size_t r : out.split.test_rows) test.push_back(out.data.dataset[r]);
    out.blackbox_test_cindex = model_cindex(out.model, test);
  }

  const std::size_t m_pts = std::min(cfg.test_points, out.split.test_rows.size());
  out.anchor_rows.assign(out.split.test_rows.begin(),
                         out.split.test_rows.begin() + static_cast<std::ptrdiff_t>(m_pts));
  std::vector<Vector> anchors;
  for (std::size_t r : out.anchor_rows) anchors.push_back(out.data.dataset[r].features);

  const std::size_t n_methods = cfg.methods.size();
  out.explanations.assign(n_methods, std::vector<std::optional<ExplanationResult>>(m_pts));
  std::vector<std::vector<std::string>> failures(n_methods, std::vector<std::string>(m_pts));

  auto anchor_cfg = [&](std::size_t a) {
    ExplainerConfig ec = cfg.explainer;
    ec.seed = derive_seed(seeds.explainer, a);
    return ec;
  };

  // Jobs: the global fit (if any) first since it is the longest, then every
  // (local method, anchor) pair.
  struct Job {
    std::size_t method;
    std::size_t anchor;
    bool global;
  };
  std::vector<Job> jobs;
  for (std::size_t mi = 0; mi < n_methods; ++mi)
    if (cfg.methods[mi] == Method::survbenim_global) jobs.push_back({mi, 0, true});
  for (std::size_t mi = 0; mi < n_methods; ++mi)
    if (cfg.methods[mi] != Method::survbenim_global)
      for (std::size_t a = 0; a < m_pts; ++a) jobs.push_back({mi, a, false});

  std::vector<std::optional<GlobalBenimExplainer>> globals(n_methods);
  std::vector<std::string> global_failure(n_methods);
  const auto& train = out.split.train;
  const auto& bb = out.model;

  parallel_for(jobs.size(), workers, [&](std::size_t j) {
    const Job& job = jobs[j];
    if (job.global) {
      ExplainerConfig ec = cfg.explainer;
      ec.seed = seeds.explainer;
      try {
        globals[job.method].emplace(fit_survbenim_global(bb, train, anchors, ec));
      } catch (const std::exception& e) {
        global_failure[job.method] = e.what();
      }
      return;
    }
    try {
      out.explanations[job.method][job.anchor] =
          explain_instance(cfg.methods[job.method], bb, train, anchors[job.anchor],
                           anchor_cfg(job.anchor));
    } catch (const std::exception& e) {
      failures[job.method][job.anchor] = e.what();
    }
  });

  for (std::size_t mi = 0; mi < n_methods; ++mi) {
    if (cfg.methods[mi] != Method::survbenim_global) continue;
    for (std::size_t a = 0; a < m_pts; ++a) {
      if (!globals[mi]) {
        failures[mi][a] = global_failure[mi];
        continue;
      }
      try {
        out.explanations[mi][a] = globals[mi]->explain(anchors[a], anchor_cfg(a).seed);
      } catch (const std::exception& e) {
        failures[mi][a] = e.what();
      }
    }
  }

  for (std::size_t mi = 0; mi < n_methods; ++mi) {
    MetricsReport report;
    report.method = to_string(cfg.methods[mi]);
    for (std::size_t a = 0; a < m_pts; ++a) {
      const std::size_t row = out.anchor_rows[a];
      const Vector& b_true = out.data.b_true[out.data.cluster_of[row]];
      InstanceMetrics im;
      const auto& res = out.explanations[mi][a];
      if (res) {
        try {
          im = score_explanation(*res, bb, b_true);
        } catch (const std::exception& e) {
          im.skipped = true;
          im.reason = e.what();
        }
      } else {
        im.skipped = true;
        im.reason = failures[mi][a];
      }
      im.anchor_row = row;
      report.per_instance.push_back(std::move(im));
    }
    finalize_report(report);
    out.reports.push_back(std::move(report));
  }
  return out;
}

}  // namespace benim
