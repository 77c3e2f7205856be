#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "coacor/core/error.hpp"
#include "coacor/core/rng.hpp"
#include "coacor/core/tensor.hpp"

namespace coacor {

/// A named trainable tensor plus its Adam moment estimates.
struct Parameter {
  std::string name;
  ad::Tensor tensor;
  std::vector<double> adam_m;
  std::vector<double> adam_v;
  std::uint64_t step_count = 0;

  Parameter(std::string n, ad::Shape shape)
      : name(std::move(n)), tensor(ad::Tensor::zeros(std::move(shape), true)) {
    adam_m.assign(tensor.size(), 0.0);
    adam_v.assign(tensor.size(), 0.0);
  }

  void reset_optimizer_state() {
    std::fill(adam_m.begin(), adam_m.end(), 0.0);
    std::fill(adam_v.begin(), adam_v.end(), 0.0);
    step_count = 0;
  }
};

/// Ordered, name-addressable parameter collection owned by a model.
///
/// Insertion order is the serialization order. Parameters are held by
/// pointer-stable storage so model code can keep references.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore& other) { copy_from(other); }
  ParameterStore& operator=(const ParameterStore& other) {
    if (this != &other) {
      params_.clear();
      index_.clear();
      copy_from(other);
    }
    return *this;
  }
  ParameterStore(ParameterStore&&) = default;
  ParameterStore& operator=(ParameterStore&&) = default;

  Parameter& add(const std::string& name, ad::Shape shape) {
    if (index_.count(name)) fail(ErrorKind::kArgument, "duplicate parameter " + name);
    index_[name] = params_.size();
    params_.push_back(std::make_unique<Parameter>(name, std::move(shape)));
    return *params_.back();
  }

  Parameter& get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) fail(ErrorKind::kArgument, "unknown parameter " + name);
    return *params_[it->second];
  }
  const Parameter& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) fail(ErrorKind::kArgument, "unknown parameter " + name);
    return *params_[it->second];
  }
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  std::vector<Parameter*> all() {
    std::vector<Parameter*> out;
    for (auto& p : params_) out.push_back(p.get());
    return out;
  }

  std::vector<const Parameter*> all() const {
    std::vector<const Parameter*> out;
    for (const auto& p : params_) out.push_back(p.get());
    return out;
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->tensor.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p->tensor.zero_grad();
  }

  /// Copies values (not optimizer state) from a store with identical layout.
  void assign_values(const ParameterStore& other) {
    if (other.size() != size()) fail(ErrorKind::kArgument, "parameter layout mismatch");
    for (std::size_t i = 0; i < size(); ++i) {
      auto src = other[i].tensor.values();
      auto dst = params_[i]->tensor.mutable_values();
      if (src.size() != dst.size() || other[i].name != params_[i]->name) {
        fail(ErrorKind::kArgument, "parameter layout mismatch at " + params_[i]->name);
      }
      std::copy(src.begin(), src.end(), dst.begin());
    }
  }

 private:
  void copy_from(const ParameterStore& other) {
    for (const auto& p : other.params_) {
      Parameter& q = add(p->name, p->tensor.shape());
      auto src = p->tensor.values();
      std::copy(src.begin(), src.end(), q.tensor.mutable_values().begin());
      q.adam_m = p->adam_m;
      q.adam_v = p->adam_v;
      q.step_count = p->step_count;
    }
  }

  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct AdamOptions {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update over `params`, then zeroes their grads.
/// A non-finite gradient aborts the whole step before anything is modified.
inline void adam_step(const std::vector<Parameter*>& params, const AdamOptions& opt) {
  for (const Parameter* p : params) {
    for (double g : p->tensor.grad()) {
      if (!std::isfinite(g)) {
        fail(ErrorKind::kDivergence, "non-finite gradient in parameter " + p->name);
      }
    }
  }
  for (Parameter* p : params) {
    ++p->step_count;
    const double t = static_cast<double>(p->step_count);
    const double c1 = 1.0 - std::pow(opt.beta1, t);
    const double c2 = 1.0 - std::pow(opt.beta2, t);
    auto values = p->tensor.mutable_values();
    auto grad = p->tensor.mutable_grad();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grad[i];
      p->adam_m[i] = opt.beta1 * p->adam_m[i] + (1.0 - opt.beta1) * g;
      p->adam_v[i] = opt.beta2 * p->adam_v[i] + (1.0 - opt.beta2) * g * g;
      const double m_hat = p->adam_m[i] / c1;
      const double v_hat = p->adam_v[i] / c2;
      values[i] -= opt.lr * m_hat / (std::sqrt(v_hat) + opt.eps);
      grad[i] = 0.0;
    }
  }
}

inline double global_grad_norm(const std::vector<Parameter*>& params) {
  double total = 0.0;
  for (const Parameter* p : params)
    for (double g : p->tensor.grad()) total += g * g;
  return std::sqrt(total);
}

/// Rescales all grads so their joint L2 norm is at most `max_norm`.
/// Returns the scale that was applied (1 when no clipping happened).
inline double clip_global_norm(const std::vector<Parameter*>& params, double max_norm) {
  if (!(max_norm > 0.0)) fail(ErrorKind::kArgument, "clip_global_norm: max_norm must be positive");
  const double norm = global_grad_norm(params);
  if (!(norm > max_norm)) return 1.0;
  const double factor = max_norm / norm;
  for (Parameter* p : params)
    for (double& g : p->tensor.mutable_grad()) g *= factor;
  return factor;
}

/// Weight init: U(-0.08, 0.08) for matrices, zeros for vectors (biases).
inline void init_uniform(ParameterStore& store, Rng& rng, double range = 0.08) {
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto values = store[i].tensor.mutable_values();
    if (store[i].tensor.rank() >= 2) {
      for (double& v : values) v = rng.uniform(-range, range);
    } else {
      std::fill(values.begin(), values.end(), 0.0);
    }
  }
}

}  // namespace coacor
