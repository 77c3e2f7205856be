#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "coacor/core/optim.hpp"
#include "coacor/core/tensor.hpp"

namespace coacor::testing {

// |analytic - numeric| / max(|analytic|, |numeric|, kRelFloor)
inline constexpr double kRelFloor = 1e-6;
inline constexpr double kStep = 1e-5;

struct GradReport {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  std::string worst;
};

struct Leaf {
  std::string name;
  ad::Tensor tensor;  // requires_grad
};

inline std::vector<Leaf> leaves_of(ParameterStore& store) {
  std::vector<Leaf> out;
  for (Parameter* p : store.all()) out.push_back({p->name, p->tensor});
  return out;
}

/// Reverse-mode gradients of `loss_fn` against central differences for
/// every coordinate of every leaf (or every `stride`-th one).
inline GradReport check_gradients(std::vector<Leaf> leaves,
                                  const std::function<ad::Tensor()>& loss_fn,
                                  std::size_t stride = 1) {
  for (auto& l : leaves) l.tensor.zero_grad();
  {
    ad::Tape tape;
    ad::Tensor loss = loss_fn();
    tape.backward(loss);
  }
  GradReport report;
  for (auto& l : leaves) {
    std::vector<double> analytic(l.tensor.grad().begin(), l.tensor.grad().end());
    auto values = l.tensor.mutable_values();
    for (std::size_t i = 0; i < values.size(); i += stride) {
      const double saved = values[i];
      double plus, minus;
      {
        ad::NoGrad ng;
        values[i] = saved + kStep;
        plus = loss_fn().item();
        values[i] = saved - kStep;
        minus = loss_fn().item();
      }
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * kStep);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), kRelFloor});
      const double rel = std::abs(analytic[i] - numeric) / denom;
      ++report.checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst = l.name + "[" + std::to_string(i) + "] analytic=" +
                       std::to_string(analytic[i]) + " numeric=" + std::to_string(numeric);
      }
    }
    l.tensor.zero_grad();
  }
  return report;
}

/// Fills every value of `store` from U(-range, range).
inline void randomize(ParameterStore& store, std::uint64_t seed, double range = 0.5) {
  Rng rng(seed);
  for (Parameter* p : store.all())
    for (double& v : p->tensor.mutable_values()) v = rng.uniform(-range, range);
}

inline ad::Tensor random_vector(std::size_t n, Rng& rng, bool requires_grad = false,
                                double range = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-range, range);
  return ad::Tensor::vector(std::move(v), requires_grad);
}

inline ad::Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng, bool requires_grad = false,
                                double range = 1.0) {
  std::vector<double> v(r * c);
  for (double& x : v) x = rng.uniform(-range, range);
  return ad::Tensor::matrix(r, c, std::move(v), requires_grad);
}

}  // namespace coacor::testing
