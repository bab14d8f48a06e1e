#pragma once

#include <span>
#include <stdexcept>

#include "benim/survival.hpp"

namespace benim {

/// A survival model accessed only through its predicted SF/CHF on a fixed
/// time grid. Implementations must be safe for concurrent const calls.
class SurvivalModel {
 public:
  virtual ~SurvivalModel() = default;
  virtual std::size_t dim() const = 0;
  virtual const Vector& time_grid() const = 0;
  virtual StepFunction predict_chf(std::span<const double> x) const = 0;
  virtual StepFunction predict_sf(std::span<const double> x) const {
    return chf_to_sf(predict_chf(x));
  }
};

class CoxBlackBox final : public SurvivalModel {
 public:
  explicit CoxBlackBox(CoxModel model) : model_(std::move(model)) {}
  std::size_t dim() const override { return model_.coefficients.size(); }
  const Vector& time_grid() const override { return model_.baseline_chf.times; }
  StepFunction predict_chf(std::span<const double> x) const override {
    return cox_chf(model_, x);
  }
  StepFunction predict_sf(std::span<const double> x) const override {
    return cox_sf(model_, x);
  }
  const CoxModel& model() const { return model_; }

 private:
  CoxModel model_;
};

inline void require_same_grid(const SurvivalModel& bb, const SurvivalDataset& data) {
  if (bb.time_grid() != data.distinct_times())
    throw std::invalid_argument(
        "black-box time grid does not match the dataset's distinct times");
  if (bb.dim() != data.dim())
    throw std::invalid_argument("black-box dimension does not match dataset");
}

}  // namespace benim
