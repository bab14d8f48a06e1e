#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "benim/autodiff.hpp"

namespace benim {

enum class Activation { relu, tanh, softplus };
enum class OutputTransform { identity, softplus, abs };

struct MLPConfig {
  std::vector<int> hidden_layers{16, 16};
  Activation activation = Activation::tanh;
  OutputTransform output_transform = OutputTransform::identity;
  double init_scale = 0.5;
  std::uint64_t seed = 0;

  void validate() const {
    for (int h : hidden_layers)
      if (h <= 0) throw std::invalid_argument("hidden layer sizes must be positive");
    if (!(init_scale > 0.0)) throw std::invalid_argument("init_scale must be positive");
  }

  /// Layer widths including the scalar input and scalar output.
  std::vector<int> widths() const {
    std::vector<int> w{1};
    w.insert(w.end(), hidden_layers.begin(), hidden_layers.end());
    w.push_back(1);
    return w;
  }

  std::size_t parameter_count() const {
    auto w = widths();
    std::size_t n = 0;
    for (std::size_t l = 1; l < w.size(); ++l)
      n += static_cast<std::size_t>(w[l - 1] * w[l] + w[l]);
    return n;
  }
};

namespace detail {

template <typename T>
T activate(Activation a, const T& x) {
  using std::tanh;
  switch (a) {
    case Activation::relu: return relu(x);
    case Activation::tanh: return tanh(x);
    case Activation::softplus: return softplus(x);
  }
  throw std::logic_error("unknown activation");
}

template <typename T>
T output_transform(OutputTransform o, const T& x) {
  using std::abs;
  switch (o) {
    case OutputTransform::identity: return x;
    case OutputTransform::softplus: return softplus(x);
    case OutputTransform::abs: return abs(x);
  }
  throw std::logic_error("unknown output transform");
}

}  // namespace detail

/// Forward pass of a single-input, single-output MLP. Parameters are laid out
/// layer by layer: row-major weights (out x in) followed by biases.
template <typename T>
T mlp_forward(const MLPConfig& cfg, std::span<const T> params, const T& input) {
  const auto w = cfg.widths();
  std::vector<T> act{input};
  std::vector<T> next;
  std::size_t off = 0;
  for (std::size_t l = 1; l < w.size(); ++l) {
    const auto in = static_cast<std::size_t>(w[l - 1]);
    const auto out = static_cast<std::size_t>(w[l]);
    const std::size_t bias_off = off + in * out;
    next.clear();
    next.reserve(out);
    for (std::size_t o = 0; o < out; ++o) {
      T z = params[bias_off + o];
      for (std::size_t i = 0; i < in; ++i) z = z + params[off + o * in + i] * act[i];
      next.push_back(l + 1 < w.size() ? detail::activate(cfg.activation, z) : z);
    }
    off = bias_off + out;
    act.swap(next);
  }
  return detail::output_transform(cfg.output_transform, act[0]);
}

inline double mlp_forward(const MLPConfig& cfg, std::span<const double> params,
                          double input) {
  if (!std::isfinite(input)) throw std::invalid_argument("non-finite network input");
  return mlp_forward<double>(cfg, params, input);
}

/// d independent single-input subnetworks sharing one flat parameter vector;
/// subnet j reads only its own slice.
class ImportanceNetwork {
 public:
  ImportanceNetwork() = default;

  ImportanceNetwork(std::size_t n_features, MLPConfig cfg)
      : cfg_(std::move(cfg)), d_(n_features) {
    cfg_.validate();
    per_net_ = cfg_.parameter_count();
    params_.resize(per_net_ * d_);
    // Every subnet starts from the same draw, so relabeling features relabels
    // the trained subnets.
    std::mt19937_64 rng(cfg_.seed);
    std::uniform_real_distribution<double> u(-cfg_.init_scale, cfg_.init_scale);
    for (std::size_t i = 0; i < per_net_; ++i) params_[i] = u(rng);
    for (std::size_t j = 1; j < d_; ++j)
      std::copy_n(params_.begin(), per_net_, params_.begin() + j * per_net_);
  }

  ImportanceNetwork(std::size_t n_features, MLPConfig cfg, std::vector<double> params)
      : cfg_(std::move(cfg)), d_(n_features) {
    cfg_.validate();
    per_net_ = cfg_.parameter_count();
    if (params.size() != per_net_ * d_)
      throw std::invalid_argument("parameter vector has wrong length");
    params_ = std::move(params);
  }

  std::size_t features() const { return d_; }
  std::size_t params_per_subnet() const { return per_net_; }
  const MLPConfig& config() const { return cfg_; }
  const std::vector<double>& params() const { return params_; }
  std::vector<double>& params() { return params_; }

  std::span<const double> slice(std::size_t j) const {
    return std::span<const double>(params_).subspan(j * per_net_, per_net_);
  }

  double operator()(std::size_t j, double x) const {
    return mlp_forward(cfg_, slice(j), x);
  }

  /// All d subnet outputs at the coordinates of `z`.
  std::vector<double> evaluate(std::span<const double> z) const {
    if (z.size() != d_) throw std::invalid_argument("dimension mismatch");
    std::vector<double> h(d_);
    for (std::size_t j = 0; j < d_; ++j) h[j] = (*this)(j, z[j]);
    return h;
  }

  /// Differentiable evaluation with the parameters given as tape variables.
  std::vector<ad::Var> evaluate(ad::Tape& tape, std::span<const ad::Var> w,
                                std::span<const double> z) const {
    if (z.size() != d_) throw std::invalid_argument("dimension mismatch");
    std::vector<ad::Var> h;
    h.reserve(d_);
    for (std::size_t j = 0; j < d_; ++j)
      h.push_back(mlp_forward<ad::Var>(cfg_, w.subspan(j * per_net_, per_net_),
                                       tape.constant(z[j])));
    return h;
  }

 private:
  MLPConfig cfg_;
  std::size_t d_ = 0;
  std::size_t per_net_ = 0;
  std::vector<double> params_;
};

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::softplus: return "softplus";
  }
  return "?";
}

inline std::string to_string(OutputTransform o) {
  switch (o) {
    case OutputTransform::identity: return "identity";
    case OutputTransform::softplus: return "softplus";
    case OutputTransform::abs: return "abs";
  }
  return "?";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "softplus") return Activation::softplus;
  throw std::invalid_argument("unknown activation: " + s);
}

inline OutputTransform output_transform_from_string(const std::string& s) {
  if (s == "identity") return OutputTransform::identity;
  if (s == "softplus") return OutputTransform::softplus;
  if (s == "abs") return OutputTransform::abs;
  throw std::invalid_argument("unknown output transform: " + s);
}

}  // namespace benim
