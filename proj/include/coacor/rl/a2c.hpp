#pragma once

#include <cmath>
#include <cstdint>
#include <iostream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coacor/annotation/seq2seq.hpp"
#include "coacor/annotation/train.hpp"
#include "coacor/core/optim.hpp"
#include "coacor/data/corpus.hpp"
#include "coacor/rl/reward.hpp"

namespace coacor::rl {

using annotation::Seq2SeqModel;

/// One sampled annotation rollout with its terminal reward.
struct Episode {
  std::size_t code_index = 0;
  std::vector<TokenId> code;
  std::size_t code_length = 0;
  std::vector<TokenId> tokens;  // chosen ids; ends with EOS unless truncated
  std::vector<double> log_probs;
  std::vector<std::vector<double>> states;
  std::vector<double> entropies;
  bool ended_with_eos = false;
  double reward = 0.0;  // R(C, N)

  std::size_t length() const { return tokens.size(); }

  std::vector<TokenId> annotation() const {
    std::vector<TokenId> out = tokens;
    if (ended_with_eos) out.pop_back();
    return out;
  }

  /// r(s_t, n_t): zero everywhere except the terminal step.
  std::vector<double> step_rewards() const {
    std::vector<double> r(tokens.size(), 0.0);
    if (!r.empty()) r.back() = reward;
    return r;
  }

  /// R_t = sum over t' >= t of r(s_t', n_t').
  std::vector<double> returns() const {
    auto r = step_rewards();
    std::vector<double> out(r.size(), 0.0);
    double acc = 0.0;
    for (std::size_t t = r.size(); t-- > 0;) {
      acc += r[t];
      out[t] = acc;
    }
    return out;
  }
};

inline Episode sample_episode(const Seq2SeqModel& actor, std::size_t code_index,
                              const annotation::AnnotationPair& pair, Rng& rng,
                              std::size_t max_len) {
  auto roll = annotation::sample_decode(actor, pair.code, pair.code_length, rng, max_len);
  Episode ep;
  ep.code_index = code_index;
  ep.code = pair.code;
  ep.code_length = pair.code_length;
  ep.tokens = std::move(roll.tokens);
  ep.log_probs = std::move(roll.log_probs);
  ep.states = std::move(roll.states);
  ep.entropies = std::move(roll.entropies);
  ep.ended_with_eos = roll.ended_with_eos;
  return ep;
}

/// State-value network: its own attention seq2seq plus a linear head
/// V(s_t) = w^T h~_t + b over the critic decoder's attentional state.
class CriticModel {
 public:
  explicit CriticModel(const Seq2SeqModel& body) : body_(body) {
    head_.add("value.w", {body_.state_size()});
    head_.add("value.b", {1});
  }

  Seq2SeqModel& body() { return body_; }
  const Seq2SeqModel& body() const { return body_; }
  ParameterStore& head() { return head_; }
  const ParameterStore& head() const { return head_; }

  std::vector<Parameter*> all_params() {
    auto out = body_.params().all();
    for (Parameter* p : head_.all()) out.push_back(p);
    return out;
  }

  /// Per-step values teacher-forced on the episode's tokens.
  std::vector<ad::Tensor> value_tensors(const Episode& ep) const {
    auto enc = body_.encode(ep.code, ep.code_length);
    auto tf = annotation::teacher_force(body_, enc, ep.tokens);
    const auto& w = head_.get("value.w").tensor;
    const auto& b = head_.get("value.b").tensor;
    std::vector<ad::Tensor> values;
    values.reserve(tf.states.size());
    for (const auto& h : tf.states) values.push_back(ad::add(ad::dot(w, h), ad::pick(b, 0)));
    return values;
  }

 private:
  Seq2SeqModel body_;
  ParameterStore head_;
};

/// V(s_t) for every step of `ep`, without recording gradients.
inline std::vector<double> critic_values(const CriticModel& critic, const Episode& ep) {
  if (ep.tokens.empty()) fail(ErrorKind::kArgument, "critic_values: empty episode");
  ad::NoGrad no_grad;
  std::vector<double> out;
  for (const auto& v : critic.value_tensors(ep)) out.push_back(v.item());
  return out;
}

/// Mean over all (episode, step) pairs of (V(s_t) - R(C, N))^2.
inline ad::Tensor critic_loss(const CriticModel& critic, std::span<const Episode> episodes) {
  if (episodes.empty()) fail(ErrorKind::kArgument, "critic_loss: no episodes");
  std::vector<ad::Tensor> terms;
  for (const auto& ep : episodes) {
    for (const auto& v : critic.value_tensors(ep)) {
      terms.push_back(ad::square(ad::add_constant(v, -ep.reward)));
    }
  }
  return ad::scale(ad::sum_all(terms), 1.0 / static_cast<double>(terms.size()));
}

struct ActorObjective {
  ad::Tensor loss;
  std::size_t skipped = 0;  // episodes dropped for non-finite advantages
};

/// -(1/B) sum_e sum_t A_t log P(n_t | n_<t, C) with A_t = R_t - V(s_t).
/// `values[e]` holds the critic's (constant) estimates for episode e.
inline ActorObjective actor_objective(const Seq2SeqModel& actor,
                                      std::span<const Episode> episodes,
                                      const std::vector<std::vector<double>>& values) {
  if (episodes.size() != values.size()) {
    fail(ErrorKind::kArgument, "actor_objective: one value list per episode required");
  }
  const auto mask = annotation::generation_mask(actor.config().nl_vocab);
  ActorObjective obj;
  std::vector<ad::Tensor> terms;
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    const Episode& ep = episodes[e];
    const auto returns = ep.returns();
    if (values[e].size() != returns.size()) {
      fail(ErrorKind::kArgument, "actor_objective: value/step count mismatch");
    }
    std::vector<double> advantages(returns.size());
    bool finite = true;
    for (std::size_t t = 0; t < returns.size(); ++t) {
      advantages[t] = returns[t] - values[e][t];
      finite = finite && std::isfinite(advantages[t]);
    }
    if (!finite) {
      std::cerr << "warning: skipping episode for code " << ep.code_index
                << " with non-finite advantage\n";
      ++obj.skipped;
      continue;
    }
    auto enc = actor.encode(ep.code, ep.code_length);
    auto tf = annotation::teacher_force(actor, enc, ep.tokens, &mask);
    for (std::size_t t = 0; t < tf.token_log_probs.size(); ++t) {
      terms.push_back(ad::scale(tf.token_log_probs[t], -advantages[t]));
    }
  }
  if (terms.empty()) {
    obj.loss = ad::Tensor::scalar(0.0);
    return obj;
  }
  obj.loss = ad::scale(ad::sum_all(terms), 1.0 / static_cast<double>(episodes.size()));
  return obj;
}

/// Plain policy-gradient objective: -(1/B) sum_e sum_t R_t log P(n_t | ...).
inline ad::Tensor reinforce_objective(const Seq2SeqModel& actor,
                                      std::span<const Episode> episodes) {
  const auto mask = annotation::generation_mask(actor.config().nl_vocab);
  std::vector<ad::Tensor> terms;
  for (const Episode& ep : episodes) {
    const auto returns = ep.returns();
    auto enc = actor.encode(ep.code, ep.code_length);
    auto tf = annotation::teacher_force(actor, enc, ep.tokens, &mask);
    for (std::size_t t = 0; t < tf.token_log_probs.size(); ++t) {
      terms.push_back(ad::scale(tf.token_log_probs[t], -returns[t]));
    }
  }
  return ad::scale(ad::sum_all(terms), 1.0 / static_cast<double>(episodes.size()));
}

struct UpdateStats {
  double loss = 0.0;
  std::size_t skipped = 0;
};

/// One actor step: advantages use critic values as constants.
inline UpdateStats actor_update(Seq2SeqModel& actor, const CriticModel& critic,
                                std::span<const Episode> episodes, double lr,
                                double clip_norm = 5.0) {
  std::vector<std::vector<double>> values;
  values.reserve(episodes.size());
  for (const auto& ep : episodes) values.push_back(critic_values(critic, ep));
  auto params = actor.params().all();
  ad::Tape tape;
  auto obj = actor_objective(actor, episodes, values);
  tape.backward(obj.loss);
  clip_global_norm(params, clip_norm);
  adam_step(params, {.lr = lr});
  return {obj.loss.item(), obj.skipped};
}

inline double critic_update(CriticModel& critic, std::span<const Episode> episodes, double lr,
                            double clip_norm = 5.0) {
  auto params = critic.all_params();
  ad::Tape tape;
  ad::Tensor loss = critic_loss(critic, episodes);
  tape.backward(loss);
  clip_global_norm(params, clip_norm);
  adam_step(params, {.lr = lr});
  return loss.item();
}

struct A2cOptions {
  std::size_t epochs = 40;
  std::size_t critic_pretrain_epochs = 10;
  std::size_t batch_size = 64;
  double actor_lr = 0.0001;
  double critic_lr = 0.0001;
  double clip_norm = 5.0;
  std::size_t max_code_len = 120;
  std::size_t max_query_len = 20;
  std::size_t max_annotation_len = 20;
  RewardSpec reward;
};

struct A2cEpochLog {
  std::size_t epoch = 0;
  double mean_reward = 0.0;
  double critic_loss = 0.0;
  double actor_entropy = 0.0;
  double val_reward = 0.0;
};

struct A2cResult {
  Seq2SeqModel actor;  // best validation-reward epoch (pretrained actor if epochs == 0)
  CriticModel critic;
  std::vector<A2cEpochLog> critic_pretrain_log;
  std::vector<A2cEpochLog> log;
  std::size_t best_epoch = 0;
  double best_val_reward = 0.0;
  double initial_val_reward = 0.0;
};

/// Rewards for training and validation annotations.
///
/// MRR mode ranks each snippet against K distractors under the frozen QC
/// model; training pools are resampled per episode from the training split,
/// validation pools are fixed per example and drawn from train + val.
class RewardOracle {
 public:
  RewardOracle(const RewardSpec& spec, std::shared_ptr<const retrieval::RetrievalModel> frozen_cr,
               const data::Corpus& train, const data::Corpus& val,
               const data::Vocabulary& code_vocab, const data::Vocabulary& nl_vocab,
               std::size_t max_code_len, std::size_t max_query_len)
      : spec_(spec), train_size_(train.size()) {
    for (const auto* split : {&train, &val})
      for (const auto& ex : *split) {
        auto q = data::encode_and_pad(ex.query_tokens, nl_vocab, max_query_len);
        references_.emplace_back(q.ids.begin(), q.ids.begin() + q.length);
        ids_.push_back(ex.id);
      }
    if (spec.kind == RewardKind::kMrr) {
      if (!frozen_cr) fail(ErrorKind::kDependency, "MRR reward requires a QC retrieval model");
      train_provider_ = std::make_unique<RetrievalRewardProvider>(frozen_cr, train, code_vocab,
                                                                  max_code_len, max_query_len);
      data::Corpus base = train;
      base.insert(base.end(), val.begin(), val.end());
      eval_provider_ = std::make_unique<RetrievalRewardProvider>(frozen_cr, base, code_vocab,
                                                                 max_code_len, max_query_len);
    }
  }

  double train_reward(std::size_t index, std::span<const TokenId> annotation, Rng& rng) const {
    if (spec_.kind == RewardKind::kBleu) return bleu_reward(annotation, references_.at(index));
    const auto pool = train_provider_->sample_pool(index, spec_.pool_size, rng);
    return train_provider_->reward(index, annotation, pool);
  }

  double val_reward(std::size_t val_index, std::span<const TokenId> annotation) const {
    const std::size_t index = train_size_ + val_index;
    if (spec_.kind == RewardKind::kBleu) return bleu_reward(annotation, references_.at(index));
    Rng rng(derive_seed(spec_.seed, "val-pool/" + ids_.at(index)));
    const auto pool = eval_provider_->sample_pool(index, spec_.pool_size, rng);
    return eval_provider_->reward(index, annotation, pool);
  }

 private:
  RewardSpec spec_;
  std::size_t train_size_;
  std::vector<std::vector<TokenId>> references_;
  std::vector<std::string> ids_;
  std::unique_ptr<RetrievalRewardProvider> train_provider_;
  std::unique_ptr<RetrievalRewardProvider> eval_provider_;
};

/// Mean validation reward of greedy annotations.
inline double mean_val_reward(const Seq2SeqModel& actor,
                              const std::vector<annotation::AnnotationPair>& val_pairs,
                              const RewardOracle& oracle, std::size_t max_len) {
  if (val_pairs.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < val_pairs.size(); ++i) {
    auto gen = annotation::greedy_decode(actor, val_pairs[i].code, val_pairs[i].code_length, max_len);
    total += oracle.val_reward(i, gen.tokens);
  }
  return total / static_cast<double>(val_pairs.size());
}

namespace detail {

inline std::vector<Episode> sample_batch(const Seq2SeqModel& actor,
                                         const std::vector<annotation::AnnotationPair>& pairs,
                                         std::span<const std::size_t> indices,
                                         const RewardOracle& oracle, Rng& rng,
                                         std::size_t max_len) {
  std::vector<Episode> batch;
  batch.reserve(indices.size());
  for (std::size_t idx : indices) {
    Episode ep = sample_episode(actor, idx, pairs[idx], rng, max_len);
    const auto annotation = ep.annotation();
    try {
      ep.reward = oracle.train_reward(idx, annotation, rng);
    } catch (const Error& e) {
      fail(e.kind(), "reward provider failed for training example " + std::to_string(idx) +
                         ": " + e.what());
    }
    batch.push_back(std::move(ep));
  }
  return batch;
}

}  // namespace detail

/// Advantage actor-critic training of a pretrained annotation model.
///
/// The critic starts as a copy of the pretrained actor with a zero value
/// head, is pretrained on rollouts of the frozen actor, then actor and
/// critic are updated jointly once per batch of episodes. The returned actor
/// is the joint epoch with the best mean validation reward.
inline A2cResult train_a2c(const data::Corpus& train, const data::Corpus& val,
                           const data::Vocabulary& code_vocab, const data::Vocabulary& nl_vocab,
                           std::shared_ptr<const retrieval::RetrievalModel> frozen_cr,
                           const Seq2SeqModel& pretrained, const A2cOptions& opt) {
  if (train.empty()) fail(ErrorKind::kCorpus, "train_a2c: empty training set");
  if (opt.batch_size == 0) fail(ErrorKind::kConfig, "train_a2c: batch_size must be positive");
  const RewardOracle oracle(opt.reward, frozen_cr, train, val, code_vocab, nl_vocab,
                            opt.max_code_len, opt.max_query_len);
  const auto pairs = annotation::make_annotation_pairs(train, code_vocab, nl_vocab,
                                                       opt.max_code_len, opt.max_query_len);
  const auto val_pairs = annotation::make_annotation_pairs(val, code_vocab, nl_vocab,
                                                           opt.max_code_len, opt.max_query_len);
  Seq2SeqModel actor = pretrained;
  for (Parameter* p : actor.params().all()) p->reset_optimizer_state();
  CriticModel critic(actor);
  for (Parameter* p : critic.all_params()) p->reset_optimizer_state();

  A2cResult result{pretrained, critic, {}, {}, 0, 0.0, 0.0};
  result.initial_val_reward = mean_val_reward(actor, val_pairs, oracle, opt.max_annotation_len);
  result.best_val_reward = result.initial_val_reward;

  Rng rng(derive_seed(opt.reward.seed, "a2c"));
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  auto run_epoch = [&](std::size_t epoch, bool update_actor) {
    shuffle(order, rng);
    A2cEpochLog row;
    row.epoch = epoch;
    double reward_sum = 0.0, entropy_sum = 0.0, critic_sum = 0.0;
    std::size_t episodes = 0, steps = 0, batches = 0;
    for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
      const std::size_t end = std::min(order.size(), start + opt.batch_size);
      auto batch = detail::sample_batch(actor, pairs,
                                        std::span(order).subspan(start, end - start), oracle, rng,
                                        opt.max_annotation_len);
      for (const auto& ep : batch) {
        reward_sum += ep.reward;
        for (double h : ep.entropies) entropy_sum += h;
        steps += ep.length();
      }
      episodes += batch.size();
      if (update_actor) actor_update(actor, critic, batch, opt.actor_lr, opt.clip_norm);
      critic_sum += critic_update(critic, batch, opt.critic_lr, opt.clip_norm);
      ++batches;
    }
    row.mean_reward = reward_sum / static_cast<double>(episodes);
    row.actor_entropy = steps ? entropy_sum / static_cast<double>(steps) : 0.0;
    row.critic_loss = critic_sum / static_cast<double>(batches);
    return row;
  };

  for (std::size_t e = 1; e <= opt.critic_pretrain_epochs; ++e) {
    auto row = run_epoch(e, false);
    row.val_reward = result.initial_val_reward;
    result.critic_pretrain_log.push_back(row);
  }

  bool have_best = false;
  for (std::size_t e = 1; e <= opt.epochs; ++e) {
    auto row = run_epoch(e, true);
    row.val_reward = mean_val_reward(actor, val_pairs, oracle, opt.max_annotation_len);
    result.log.push_back(row);
    if (!have_best || row.val_reward > result.best_val_reward) {
      have_best = true;
      result.best_val_reward = row.val_reward;
      result.best_epoch = e;
      result.actor.params().assign_values(actor.params());
      result.critic = critic;
    }
  }
  if (!have_best) result.critic = critic;
  return result;
}

}  // namespace coacor::rl
