#pragma once

#include <string>
#include <utility>
#include <vector>

#include "coacor/core/optim.hpp"
#include "coacor/core/tensor.hpp"

namespace coacor::retrieval {

/// Fused gate weights of one LSTM. Rows are laid out as four blocks of
/// `hidden` rows in the order input, forget, output, candidate.
struct LstmWeights {
  Parameter* recurrent = nullptr;  // [4h x h]   W_i, W_f, W_o, W_g
  Parameter* input = nullptr;      // [4h x d]   U_i, U_f, U_o, U_g
  Parameter* bias = nullptr;       // [4h]       b_i, b_f, b_o, b_g
  std::size_t input_size = 0;
  std::size_t hidden = 0;

  static LstmWeights create(ParameterStore& store, const std::string& prefix,
                            std::size_t input_size, std::size_t hidden) {
    LstmWeights w;
    w.recurrent = &store.add(prefix + ".W", {4 * hidden, hidden});
    w.input = &store.add(prefix + ".U", {4 * hidden, input_size});
    w.bias = &store.add(prefix + ".b", {4 * hidden});
    w.input_size = input_size;
    w.hidden = hidden;
    return w;
  }

  static LstmWeights bind(ParameterStore& store, const std::string& prefix) {
    LstmWeights w;
    w.recurrent = &store.get(prefix + ".W");
    w.input = &store.get(prefix + ".U");
    w.bias = &store.get(prefix + ".b");
    w.hidden = w.recurrent->tensor.dim(1);
    w.input_size = w.input->tensor.dim(1);
    return w;
  }

  /// Sets the forget-gate bias block to `value`.
  void set_forget_bias(double value) {
    auto b = bias->tensor.mutable_values();
    for (std::size_t i = hidden; i < 2 * hidden; ++i) b[i] = value;
  }
};

struct LstmState {
  ad::Tensor h;  // hidden state
  ad::Tensor g;  // memory cell
};

inline LstmState zero_state(std::size_t hidden) {
  return {ad::Tensor::zeros({hidden}), ad::Tensor::zeros({hidden})};
}

/// One LSTM update:
///   i, f, o = sigmoid(W h + U x + b),  g~ = tanh(W h + U x + b)
///   g = f * g_prev + i * g~,           h = o * tanh(g)
inline LstmState lstm_step(const ad::Tensor& x, const LstmState& prev, const LstmWeights& w) {
  using namespace ad;
  if (x.rank() != 1 || x.size() != w.input_size || prev.h.size() != w.hidden ||
      prev.g.size() != w.hidden) {
    fail(ErrorKind::kDimension,
         "lstm_step: input " + shape_string(x.shape()) + ", state " +
             shape_string(prev.h.shape()) + " incompatible with weights " +
             shape_string(w.input->tensor.shape()));
  }
  const std::size_t h = w.hidden;
  Tensor pre = add(add(matvec(w.recurrent->tensor, prev.h), matvec(w.input->tensor, x)),
                   w.bias->tensor);
  Tensor i = sigmoid(slice(pre, 0, h));
  Tensor f = sigmoid(slice(pre, h, h));
  Tensor o = sigmoid(slice(pre, 2 * h, h));
  Tensor cand = tanh(slice(pre, 3 * h, h));
  Tensor g = add(mul(f, prev.g), mul(i, cand));
  Tensor out = mul(o, tanh(g));
  return {out, g};
}

/// Per-step outputs of a bidirectional pass.
struct BiLstmOutput {
  std::vector<ad::Tensor> states;  // [forward_t, backward_t] per step
  LstmState forward_final;         // after the last token
  LstmState backward_final;        // after reading back to the first token
};

struct BiLstm {
  LstmWeights forward;
  LstmWeights backward;

  static BiLstm create(ParameterStore& store, const std::string& prefix,
                       std::size_t input_size, std::size_t hidden) {
    BiLstm b{LstmWeights::create(store, prefix + ".fwd", input_size, hidden),
             LstmWeights::create(store, prefix + ".bwd", input_size, hidden)};
    return b;
  }
  static BiLstm bind(ParameterStore& store, const std::string& prefix) {
    return {LstmWeights::bind(store, prefix + ".fwd"), LstmWeights::bind(store, prefix + ".bwd")};
  }

  std::size_t output_size() const { return 2 * forward.hidden; }

  BiLstmOutput run(const std::vector<ad::Tensor>& inputs) const {
    const std::size_t steps = inputs.size();
    if (steps == 0) fail(ErrorKind::kArgument, "BiLstm::run: empty sequence");
    std::vector<ad::Tensor> fwd(steps), bwd(steps);
    LstmState s = zero_state(forward.hidden);
    for (std::size_t t = 0; t < steps; ++t) {
      s = lstm_step(inputs[t], s, forward);
      fwd[t] = s.h;
    }
    BiLstmOutput out;
    out.forward_final = s;
    s = zero_state(backward.hidden);
    for (std::size_t t = steps; t-- > 0;) {
      s = lstm_step(inputs[t], s, backward);
      bwd[t] = s.h;
    }
    out.backward_final = s;
    out.states.reserve(steps);
    for (std::size_t t = 0; t < steps; ++t) out.states.push_back(ad::concat({fwd[t], bwd[t]}));
    return out;
  }
};

}  // namespace coacor::retrieval
