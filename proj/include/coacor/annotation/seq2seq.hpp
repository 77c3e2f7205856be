#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "coacor/core/optim.hpp"
#include "coacor/core/rng.hpp"
#include "coacor/core/tensor.hpp"
#include "coacor/data/vocab.hpp"
#include "coacor/retrieval/lstm.hpp"

namespace coacor::annotation {

using data::TokenId;
using retrieval::BiLstm;
using retrieval::LstmState;
using retrieval::LstmWeights;

struct Seq2SeqConfig {
  std::size_t code_vocab = 0;
  std::size_t nl_vocab = 0;
  std::size_t embed_dim = 256;
  std::size_t enc_hidden = 256;  // per direction; the decoder uses 2x this
  double dropout = 0.1;

  std::size_t dec_hidden() const { return 2 * enc_hidden; }
};

/// Token ids excluded at generation time: PAD, UNK and START.
using GenerationMask = std::vector<unsigned char>;

inline GenerationMask generation_mask(std::size_t nl_vocab) {
  GenerationMask mask(nl_vocab, 0);
  mask[data::kPad] = mask[data::kUnk] = mask[data::kStart] = 1;
  return mask;
}

struct EncodedCode {
  ad::Tensor outputs;  // [T x 2*enc_hidden], one row per real code token
  LstmState init;      // decoder start state: concatenated final states
};

/// Result of one decoder step.
struct StepOutput {
  ad::Tensor log_probs;    // [|V_n|]
  ad::Tensor attention;    // [T]
  ad::Tensor attentional;  // h~ = tanh(W_a [v_attn, h_dec]), the MDP state vector
  LstmState state;
};

/// Attention-based encoder-decoder P(N | C).
///
/// Bi-LSTM code encoder; LSTM decoder initialized from the concatenated final
/// encoder states; dot-product global attention; softmax(W h~ + b) output.
class Seq2SeqModel {
 public:
  Seq2SeqModel(const Seq2SeqConfig& config, std::uint64_t init_seed) : config_(config) {
    if (config.code_vocab == 0 || config.nl_vocab <= data::kNumSpecials ||
        config.embed_dim == 0 || config.enc_hidden == 0) {
      fail(ErrorKind::kArgument, "Seq2SeqModel: invalid dimensions");
    }
    const std::size_t d = config.dec_hidden();
    store_.add("code_embedding", {config.code_vocab, config.embed_dim});
    store_.add("nl_embedding", {config.nl_vocab, config.embed_dim});
    BiLstm::create(store_, "encoder", config.embed_dim, config.enc_hidden);
    LstmWeights::create(store_, "decoder", config.embed_dim, d);
    store_.add("attention.W", {d, 2 * config.enc_hidden + d});
    store_.add("output.W", {config.nl_vocab, d});
    store_.add("output.b", {config.nl_vocab});
    Rng rng(init_seed);
    init_uniform(store_, rng);
    bind();
    encoder_.forward.set_forget_bias(1.0);
    encoder_.backward.set_forget_bias(1.0);
    decoder_.set_forget_bias(1.0);
  }

  Seq2SeqModel(const Seq2SeqModel& other) : config_(other.config_), store_(other.store_) { bind(); }
  Seq2SeqModel& operator=(const Seq2SeqModel& other) {
    if (this != &other) {
      config_ = other.config_;
      store_ = other.store_;
      bind();
    }
    return *this;
  }

  const Seq2SeqConfig& config() const { return config_; }
  ParameterStore& params() { return store_; }
  const ParameterStore& params() const { return store_; }
  std::size_t state_size() const { return config_.dec_hidden(); }

  EncodedCode encode(std::span<const TokenId> ids, std::size_t length,
                     Rng* dropout_rng = nullptr) const {
    if (length == 0 || length > ids.size()) {
      fail(ErrorKind::kArgument, "encode: length " + std::to_string(length) + " outside [1, " +
                                     std::to_string(ids.size()) + "]");
    }
    std::vector<ad::Tensor> inputs;
    inputs.reserve(length);
    for (std::size_t t = 0; t < length; ++t) {
      inputs.push_back(maybe_drop(ad::embedding(code_embedding_->tensor, ids[t]), dropout_rng));
    }
    auto run = encoder_.run(inputs);
    EncodedCode enc;
    enc.outputs = ad::stack(run.states);
    enc.init.h = ad::concat({run.forward_final.h, run.backward_final.h});
    enc.init.g = ad::concat({run.forward_final.g, run.backward_final.g});
    return enc;
  }

  /// One decoder step consuming `prev_token`. With `mask`, excluded ids get
  /// probability zero (generation policy); without it the full softmax.
  StepOutput step(TokenId prev_token, const LstmState& state, const EncodedCode& enc,
                  const GenerationMask* mask = nullptr, Rng* dropout_rng = nullptr) const {
    if (prev_token >= config_.nl_vocab) {
      fail(ErrorKind::kArgument, "decode_step: token id " + std::to_string(prev_token) +
                                     " outside vocabulary of " + std::to_string(config_.nl_vocab));
    }
    ad::Tensor x = maybe_drop(ad::embedding(nl_embedding_->tensor, prev_token), dropout_rng);
    StepOutput out;
    out.state = retrieval::lstm_step(x, state, decoder_);
    ad::Tensor scores = ad::matvec(enc.outputs, out.state.h);
    out.attention = ad::softmax(scores);
    ad::Tensor context = ad::matvec_transposed(enc.outputs, out.attention);
    out.attentional = ad::tanh(ad::matvec(attention_->tensor, ad::concat({context, out.state.h})));
    ad::Tensor logits =
        ad::add(ad::matvec(output_w_->tensor, out.attentional), output_b_->tensor);
    out.log_probs = mask ? ad::log_softmax(logits, *mask) : ad::log_softmax(logits);
    return out;
  }

 private:
  ad::Tensor maybe_drop(ad::Tensor x, Rng* rng) const {
    if (rng == nullptr || config_.dropout <= 0.0) return x;
    std::vector<double> mask(x.size());
    const double keep = 1.0 - config_.dropout;
    for (double& m : mask) m = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
    return ad::apply_mask(x, mask);
  }

  void bind() {
    code_embedding_ = &store_.get("code_embedding");
    nl_embedding_ = &store_.get("nl_embedding");
    encoder_ = BiLstm::bind(store_, "encoder");
    decoder_ = LstmWeights::bind(store_, "decoder");
    attention_ = &store_.get("attention.W");
    output_w_ = &store_.get("output.W");
    output_b_ = &store_.get("output.b");
  }

  Seq2SeqConfig config_;
  ParameterStore store_;
  Parameter* code_embedding_ = nullptr;
  Parameter* nl_embedding_ = nullptr;
  BiLstm encoder_;
  LstmWeights decoder_;
  Parameter* attention_ = nullptr;
  Parameter* output_w_ = nullptr;
  Parameter* output_b_ = nullptr;
};

/// Decoder state during generation; `attentional` represents MDP state s_t.
struct DecodeState {
  std::size_t t = 0;
  LstmState dec;
  ad::Tensor attentional;
  std::vector<TokenId> generated;
};

/// Distribution over V_n for the next token plus the advanced state.
inline std::pair<std::vector<double>, DecodeState> decode_step(
    const Seq2SeqModel& model, TokenId prev_token, const DecodeState& state,
    const EncodedCode& enc) {
  ad::NoGrad no_grad;
  auto out = model.step(prev_token, state.dec, enc);
  std::vector<double> probs(out.log_probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = std::exp(out.log_probs[i]);
  DecodeState next{state.t + 1, out.state, out.attentional, state.generated};
  return {std::move(probs), std::move(next)};
}

/// Teacher-forced pass over `targets` (which should end with EOS).
struct TeacherForced {
  std::vector<ad::Tensor> token_log_probs;  // scalar log P(n_t | n_<t, C)
  std::vector<ad::Tensor> states;           // h~_t per step
};

inline TeacherForced teacher_force(const Seq2SeqModel& model, const EncodedCode& enc,
                                   std::span<const TokenId> targets,
                                   const GenerationMask* mask = nullptr,
                                   Rng* dropout_rng = nullptr) {
  TeacherForced tf;
  LstmState state = enc.init;
  TokenId prev = data::kStart;
  for (TokenId target : targets) {
    auto out = model.step(prev, state, enc, mask, dropout_rng);
    tf.token_log_probs.push_back(ad::pick(out.log_probs, target));
    tf.states.push_back(out.attentional);
    state = out.state;
    prev = target;
  }
  return tf;
}

/// log P(N | C) = sum_t log P(n_t | n_<t, C), including the EOS term.
inline double sequence_log_prob(const Seq2SeqModel& model, std::span<const TokenId> code,
                                std::size_t code_length, std::span<const TokenId> annotation,
                                const GenerationMask* mask = nullptr) {
  ad::NoGrad no_grad;
  auto enc = model.encode(code, code_length);
  auto tf = teacher_force(model, enc, annotation, mask);
  double total = 0.0;
  for (const auto& lp : tf.token_log_probs) total += lp.item();
  return total;
}

/// Training pair for likelihood training; `target` ends with EOS.
struct AnnotationPair {
  std::vector<TokenId> code;
  std::size_t code_length = 0;
  std::vector<TokenId> target;
};

/// Mean per-token negative log-likelihood under teacher forcing.
inline ad::Tensor mle_loss(const Seq2SeqModel& model, std::span<const AnnotationPair> batch,
                           Rng* dropout_rng = nullptr, const GenerationMask* mask = nullptr) {
  if (batch.empty()) fail(ErrorKind::kArgument, "mle_loss: empty batch");
  std::vector<ad::Tensor> terms;
  std::size_t tokens = 0;
  for (const auto& pair : batch) {
    auto enc = model.encode(pair.code, pair.code_length, dropout_rng);
    auto tf = teacher_force(model, enc, pair.target, mask, dropout_rng);
    for (auto& lp : tf.token_log_probs) terms.push_back(lp);
    tokens += pair.target.size();
  }
  return ad::scale(ad::sum_all(terms), -1.0 / static_cast<double>(tokens));
}

struct Generation {
  std::vector<TokenId> tokens;  // surface tokens, EOS excluded
  bool ended_with_eos = false;
};

/// Argmax decoding under the generation mask; stops at EOS or `max_len`.
inline Generation greedy_decode(const Seq2SeqModel& model, std::span<const TokenId> code,
                                std::size_t code_length, std::size_t max_len = 20) {
  ad::NoGrad no_grad;
  const auto mask = generation_mask(model.config().nl_vocab);
  auto enc = model.encode(code, code_length);
  Generation gen;
  LstmState state = enc.init;
  TokenId prev = data::kStart;
  for (std::size_t t = 0; t < max_len; ++t) {
    auto out = model.step(prev, state, enc, &mask);
    auto lp = out.log_probs.values();
    const TokenId best = static_cast<TokenId>(std::max_element(lp.begin(), lp.end()) - lp.begin());
    if (best == data::kEos) {
      gen.ended_with_eos = true;
      break;
    }
    gen.tokens.push_back(best);
    state = out.state;
    prev = best;
  }
  return gen;
}

/// One sampled rollout: chosen ids (EOS kept when emitted), their log-probs
/// under the masked policy, state vectors h~_t and per-step entropies.
struct SampledRollout {
  std::vector<TokenId> tokens;
  std::vector<double> log_probs;
  std::vector<std::vector<double>> states;
  std::vector<double> entropies;
  bool ended_with_eos = false;

  std::vector<TokenId> surface() const {
    std::vector<TokenId> out = tokens;
    if (ended_with_eos) out.pop_back();
    return out;
  }
};

inline SampledRollout sample_decode(const Seq2SeqModel& model, std::span<const TokenId> code,
                                    std::size_t code_length, Rng& rng, std::size_t max_len = 20) {
  ad::NoGrad no_grad;
  const auto mask = generation_mask(model.config().nl_vocab);
  auto enc = model.encode(code, code_length);
  SampledRollout roll;
  LstmState state = enc.init;
  TokenId prev = data::kStart;
  for (std::size_t t = 0; t < max_len; ++t) {
    auto out = model.step(prev, state, enc, &mask);
    auto lp = out.log_probs.values();
    double u = rng.uniform();
    TokenId chosen = data::kEos;
    double entropy = 0.0;
    TokenId last_valid = data::kEos;
    for (std::size_t i = 0; i < lp.size(); ++i) {
      if (mask[i]) continue;
      const double p = std::exp(lp[i]);
      if (p > 0.0) entropy -= p * lp[i];
      last_valid = i;
    }
    bool picked = false;
    for (std::size_t i = 0; i < lp.size() && !picked; ++i) {
      if (mask[i]) continue;
      const double p = std::exp(lp[i]);
      if (u < p) {
        chosen = i;
        picked = true;
      } else {
        u -= p;
      }
    }
    if (!picked) chosen = last_valid;  // rounding slack
    roll.tokens.push_back(chosen);
    roll.log_probs.push_back(lp[chosen]);
    roll.states.emplace_back(out.attentional.values().begin(), out.attentional.values().end());
    roll.entropies.push_back(entropy);
    if (chosen == data::kEos) {
      roll.ended_with_eos = true;
      break;
    }
    state = out.state;
    prev = chosen;
  }
  return roll;
}

}  // namespace coacor::annotation
