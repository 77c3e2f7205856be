// Acceptance runner: one PASS/FAIL line per criterion, exit status 0 only if
// every selected criterion passes. Optional arguments pick criteria by number.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "coacor/annotation/train.hpp"
#include "coacor/data/synthetic.hpp"
#include "coacor/eval/bleu.hpp"
#include "coacor/eval/ensemble.hpp"
#include "coacor/eval/mrr.hpp"
#include "coacor/retrieval/train.hpp"
#include "coacor/rl/a2c.hpp"
#include "support/grad_check.hpp"

using namespace coacor;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and budgets.
constexpr double kGradTol = 1e-4;
constexpr double kGradBudgetSec = 5.0;
constexpr double kMrrTol = 1e-12;
constexpr double kCrOverfitBudgetSec = 60.0;
constexpr std::size_t kCrOverfitEpochs = 200;
constexpr double kCaOverfitBudgetSec = 120.0;
constexpr std::size_t kCaOverfitEpochs = 300;
constexpr double kRlMinGain = 0.05;
constexpr int kRlMinSeeds = 3;
constexpr double kRlBudgetSec = 15 * 60.0;
constexpr double kTiePrecision = 1e-9;
constexpr int kEnsembleMinStrict = 2;
constexpr double kBleuTol = 1e-6;
constexpr double kAttentionTol = 1e-9;
constexpr double kCollinearTol = 1e-12;
constexpr double kPipelineBudgetSec = 20 * 60.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct Vocabs {
  data::Vocabulary code, nl;
};

Vocabs vocabs_of(const data::Corpus& corpus) {
  std::vector<data::TokenList> q, c;
  for (const auto& e : corpus) {
    q.push_back(e.query_tokens);
    c.push_back(e.code_tokens);
  }
  return {data::build_vocab(c, 1, data::Side::kCode), data::build_vocab(q, 1, data::Side::kNl)};
}

// ---------------------------------------------------------------- 1

Outcome gradient_suite() {
  using coacor::testing::check_gradients;
  using coacor::testing::leaves_of;
  using coacor::testing::randomize;
  Stopwatch sw;
  double worst = 0.0;
  std::string where;
  auto note = [&](const char* name, const coacor::testing::GradReport& r) {
    if (r.max_rel_err >= worst) {
      worst = r.max_rel_err;
      where = std::string(name) + " " + r.worst;
    }
  };
  {
    ParameterStore store;
    auto w = retrieval::LstmWeights::create(store, "cell", 3, 4);
    randomize(store, 1);
    Rng rng(2);
    auto x = coacor::testing::random_vector(3, rng, true);
    auto h0 = coacor::testing::random_vector(4, rng, true);
    auto g0 = coacor::testing::random_vector(4, rng, true);
    auto leaves = leaves_of(store);
    leaves.push_back({"x", x});
    leaves.push_back({"h0", h0});
    leaves.push_back({"g0", g0});
    note("lstm", check_gradients(leaves, [&] {
           auto s = retrieval::lstm_step(x, {h0, g0}, w);
           return ad::add(ad::dot(s.h, ad::Tensor::vector({0.3, -1.0, 0.5, 2.0})),
                          ad::sum(ad::square(s.g)));
         }));
  }
  const std::vector<data::TokenId> code = {4, 5, 6, 7};
  {
    annotation::Seq2SeqModel m({8, 10, 4, 3, 0.0}, 3);
    randomize(m.params(), 4);
    note("attention", check_gradients(leaves_of(m.params()), [&] {
           auto enc = m.encode(code, 3);
           auto out = m.step(6, enc.init, enc);
           return ad::add(ad::pick(out.log_probs, 5), ad::dot(out.attentional, out.state.g));
         }));
  }
  {
    retrieval::RetrievalModel m({9, 11, 4, 3, 0.0}, 5);
    randomize(m.params(), 6);
    const std::vector<data::TokenId> q = {4, 6, 8}, c = {5, 9, 10, 4}, n = {7, 6, 5};
    note("ranking", check_gradients(leaves_of(m.params()), [&] {
           return retrieval::ranking_loss(m.encode(q, 3, data::Side::kNl),
                                          m.encode(c, 4, data::Side::kCode),
                                          m.encode(n, 3, data::Side::kCode), 1.5);
         }));
  }
  {
    annotation::Seq2SeqModel m({8, 10, 4, 3, 0.0}, 7);
    randomize(m.params(), 8);
    std::vector<annotation::AnnotationPair> batch = {{code, 4, {4, 6, data::kEos}},
                                                     {{7, 6, 0}, 2, {5, data::kEos}}};
    note("mle", check_gradients(leaves_of(m.params()), [&] { return annotation::mle_loss(m, batch); }));
  }
  {
    annotation::Seq2SeqModel body({8, 10, 4, 3, 0.0}, 9);
    randomize(body.params(), 10);
    rl::CriticModel critic(body);
    randomize(critic.head(), 11);
    std::vector<rl::Episode> eps(2);
    eps[0].code = code;
    eps[0].code_length = 4;
    eps[0].tokens = {4, 6, data::kEos};
    eps[0].reward = 0.5;
    eps[1].code = code;
    eps[1].code_length = 3;
    eps[1].tokens = {7, 5};
    eps[1].reward = 0.2;
    std::vector<coacor::testing::Leaf> leaves;
    for (Parameter* p : critic.all_params()) leaves.push_back({p->name, p->tensor});
    note("critic", check_gradients(leaves, [&] { return rl::critic_loss(critic, eps); }));
  }
  const double t = sw.seconds();
  return {worst < kGradTol && t < kGradBudgetSec,
          "max rel err " + fmt("%.2e", worst) + " (" + where + "), " + fmt("%.2f", t) + " s"};
}

// ---------------------------------------------------------------- 2

// Independent rank: sort candidate indices by descending score with the
// target first among equals, then locate the target.
std::size_t oracle_rank(const std::vector<double>& scores, std::size_t target) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    if ((a == target) != (b == target)) return a == target;
    return a < b;
  });
  return static_cast<std::size_t>(std::find(order.begin(), order.end(), target) - order.begin()) + 1;
}

Outcome oracle_equivalence() {
  constexpr std::size_t kPools = 100, kPool = 50;
  Rng rng(31);
  std::vector<eval::EvalItem> items;
  for (std::size_t i = 0; i < kPools; ++i) items.push_back({"i" + std::to_string(i), "g" + std::to_string(i)});
  std::vector<std::vector<double>> table(kPools, std::vector<double>(kPools));
  for (auto& row : table)
    for (double& v : row) v = std::floor(rng.uniform() * 16.0) / 16.0;
  auto res = eval::mrr_evaluate("oracle", items, [&](std::size_t q, std::size_t c) { return table[q][c]; },
                                kPool - 1, 5);
  std::size_t mrr_mismatch = 0;
  double oracle_total = 0.0;
  for (std::size_t i = 0; i < kPools; ++i) {
    auto pool = eval::sample_pool(items, i, kPool - 1, 5, "oracle");
    std::vector<double> scores = {table[i][i]};
    for (auto j : pool) scores.push_back(table[i][j]);
    const auto r = oracle_rank(scores, 0);
    mrr_mismatch += r != res.ranks[i];
    oracle_total += 1.0 / static_cast<double>(r);
  }
  mrr_mismatch += res.mrr != oracle_total / kPools ? 1 : 0;

  retrieval::RetrievalModel cr({12, 9, 4, 3, 0.0}, 41);
  coacor::testing::randomize(cr.params(), 42);
  std::size_t reward_mismatch = 0;
  for (std::size_t p = 0; p < kPools; ++p) {
    std::vector<std::vector<double>> cands;
    for (std::size_t j = 0; j < kPool; ++j) {
      std::vector<data::TokenId> ids = {static_cast<data::TokenId>(4 + rng.index(5)),
                                        static_cast<data::TokenId>(4 + rng.index(5))};
      cands.push_back(cr.embed(ids, 2, data::Side::kCode));
    }
    std::vector<data::TokenId> ann = {static_cast<data::TokenId>(4 + rng.index(8)),
                                      static_cast<data::TokenId>(4 + rng.index(8))};
    const auto q = cr.embed(ann, 2, data::Side::kNl);
    std::vector<double> scores;
    for (const auto& c : cands) {
      double dot = 0, nq = 0, nc = 0;
      for (std::size_t k = 0; k < q.size(); ++k) {
        dot += q[k] * c[k];
        nq += q[k] * q[k];
        nc += c[k] * c[k];
      }
      scores.push_back(dot / (std::sqrt(nq) * std::sqrt(nc)));
    }
    const double expect = 1.0 / static_cast<double>(oracle_rank(scores, 0));
    reward_mismatch += rl::retrieval_reward(cr, ann, cands) != expect;
  }
  const double known = eval::mean_reciprocal_rank({1, 2, 4});
  const bool known_ok = std::abs(known - 7.0 / 12.0) <= kMrrTol;
  return {mrr_mismatch == 0 && reward_mismatch == 0 && known_ok,
          std::to_string(mrr_mismatch) + " MRR and " + std::to_string(reward_mismatch) +
              " reward mismatches over 100 pools of 50; MRR{1,2,4} = " + fmt("%.15f", known)};
}

// ---------------------------------------------------------------- 3, 4

Outcome retrieval_overfit() {
  Stopwatch sw;
  const auto corpus = data::disjoint_corpus(8);
  const auto v = vocabs_of(corpus);
  retrieval::CrTrainOptions opt;
  opt.epochs = kCrOverfitEpochs;
  opt.batch_size = 8;
  opt.lr = 0.01;
  opt.eval_k = 7;
  auto res = retrieval::train_cr(corpus, corpus, v.nl, v.code, {v.nl.size(), v.code.size(), 16, 16, 0.0}, opt);
  std::size_t first = 0;
  for (const auto& row : res.log)
    if (first == 0 && row.val_mrr == 1.0) first = row.epoch;
  const double t = sw.seconds();
  return {first > 0 && t < kCrOverfitBudgetSec,
          (first ? "val MRR 1.0 at epoch " + std::to_string(first) : std::string("val MRR never 1.0")) +
              ", " + fmt("%.1f", t) + " s"};
}

Outcome annotation_overfit() {
  Stopwatch sw;
  const auto corpus = data::disjoint_corpus(8);
  const auto v = vocabs_of(corpus);
  annotation::MleOptions opt;
  opt.epochs = kCaOverfitEpochs;
  opt.batch_size = 8;
  opt.lr = 0.01;
  auto res = annotation::train_mle(corpus, corpus, v.code, v.nl, {v.code.size(), v.nl.size(), 16, 16, 0.0}, opt);
  std::size_t exact = 0;
  for (const auto& ex : corpus) {
    auto code = data::encode_and_pad(ex.code_tokens, v.code, 120);
    auto gen = annotation::greedy_decode(res.model, code.ids, code.length);
    exact += v.nl.decode(gen.tokens) == ex.query_tokens;
  }
  const double t = sw.seconds();
  return {exact == corpus.size() && t < kCaOverfitBudgetSec,
          std::to_string(exact) + "/8 queries reproduced (best epoch " + std::to_string(res.best_epoch) +
              "), " + fmt("%.1f", t) + " s"};
}

// ---------------------------------------------------------------- 5, 6

struct DeskConfig {
  std::size_t dim = 32;
  std::size_t max_code_len = 40;
  std::size_t cr_epochs = 60;
  double cr_lr = 0.005;
  std::size_t ca_epochs = 100;
  double ca_lr = 0.01;
  std::size_t batch_size = 32;
  std::size_t rl_epochs = 40;
  std::size_t rl_critic_epochs = 10;
  double rl_lr = 3e-3;
  std::size_t reward_k = 49;
  std::size_t eval_k = 19;
  std::size_t qn_epochs = 100;
  double qn_lr = 0.01;
};

struct SeedRun {
  std::uint64_t seed = 0;
  double mle_reward = 0.0;
  double rl_reward = 0.0;
  double qc_mrr = 0.0;
  double best_interior_mrr = 0.0;
  double best_interior_lambda = 0.0;
  double seconds = 0.0;
};

SeedRun desk_experiment(std::uint64_t seed, const DeskConfig& cfg) {
  Stopwatch sw;
  SeedRun run;
  run.seed = seed;
  data::TemplatedCorpusOptions topt;
  topt.seed = derive_seed(seed, "synth");
  data::Corpus corpus;
  for (const auto& r : data::templated_sql_corpus(topt)) corpus.push_back(data::tokenize_example(r));
  const auto split = data::split_dataset(corpus, {}, seed);
  const auto v = vocabs_of(split.train);

  retrieval::CrTrainOptions co;
  co.epochs = cfg.cr_epochs;
  co.batch_size = cfg.batch_size;
  co.lr = cfg.cr_lr;
  co.eval_k = cfg.eval_k;
  co.seed = seed;
  co.max_code_len = cfg.max_code_len;
  auto qc = retrieval::train_cr(split.train, split.val, v.nl, v.code,
                                {v.nl.size(), v.code.size(), cfg.dim, cfg.dim, 0.0}, co);

  // No validation set: the pretrained actor is the final epoch.
  annotation::MleOptions mo;
  mo.epochs = cfg.ca_epochs;
  mo.batch_size = cfg.batch_size;
  mo.lr = cfg.ca_lr;
  mo.seed = seed;
  mo.max_code_len = cfg.max_code_len;
  auto mle = annotation::train_mle(split.train, {}, v.code, v.nl,
                                   {v.code.size(), v.nl.size(), cfg.dim, cfg.dim, 0.0}, mo);

  rl::A2cOptions ao;
  ao.epochs = cfg.rl_epochs;
  ao.critic_pretrain_epochs = cfg.rl_critic_epochs;
  ao.batch_size = cfg.batch_size;
  ao.actor_lr = cfg.rl_lr;
  ao.critic_lr = cfg.rl_lr;
  ao.max_code_len = cfg.max_code_len;
  ao.reward.pool_size = cfg.reward_k;
  ao.reward.seed = seed;
  auto frozen = std::make_shared<const retrieval::RetrievalModel>(qc.model);
  auto a2c = rl::train_a2c(split.train, split.val, v.code, v.nl, frozen, mle.model, ao);
  run.mle_reward = a2c.initial_val_reward;
  run.rl_reward = a2c.log.back().val_reward;  // after the last joint epoch

  // QN model on annotations of the selected actor, then the sweep on test.
  const auto& actor = a2c.actor;
  auto ann_of = [&](const data::Corpus& part) {
    return eval::annotated_corpus(
        part, eval::annotate_corpus(actor, part, v.code, v.nl, cfg.max_code_len));
  };
  const auto qn_train = ann_of(split.train), qn_val = ann_of(split.val), qn_test = ann_of(split.test);
  retrieval::CrTrainOptions qo = co;
  qo.epochs = cfg.qn_epochs;
  qo.lr = cfg.qn_lr;
  qo.max_code_len = 20;
  auto qn = retrieval::train_cr(qn_train, qn_val, v.nl, v.nl,
                                {v.nl.size(), v.nl.size(), cfg.dim, cfg.dim, 0.0}, qo);
  eval::EnsembleScorer::Views views;
  views.qc = &qc.model;
  views.qn = &qn.model;
  views.code_vocab = &v.code;
  views.nl_vocab = &v.nl;
  views.max_code_len = cfg.max_code_len;
  eval::EnsembleScorer scorer(views, split.test, &qn_test);
  auto sweep = eval::lambda_sweep("test", retrieval::eval_items(split.test), scorer, cfg.eval_k, seed);
  run.qc_mrr = sweep.mrrs.front();
  run.best_interior_mrr = -1.0;
  for (std::size_t i = 1; i + 1 < sweep.mrrs.size(); ++i) {
    if (sweep.mrrs[i] > run.best_interior_mrr) {
      run.best_interior_mrr = sweep.mrrs[i];
      run.best_interior_lambda = sweep.lambdas[i];
    }
  }
  run.seconds = sw.seconds();
  return run;
}

std::vector<SeedRun>& desk_runs() {
  static std::vector<SeedRun> runs;
  if (runs.empty()) {
    const DeskConfig cfg;
    for (std::uint64_t seed = 1; seed <= 4; ++seed) runs.push_back(desk_experiment(seed, cfg));
  }
  return runs;
}

Outcome rl_improvement() {
  Stopwatch sw;
  const auto& runs = desk_runs();
  double total = 0.0;
  int wins = 0;
  std::string detail;
  for (const auto& r : runs) {
    total += r.seconds;
    const double gain = r.rl_reward - r.mle_reward;
    wins += gain >= kRlMinGain;
    detail += "seed " + std::to_string(r.seed) + ": " + fmt("%.3f", r.mle_reward) + " -> " +
              fmt("%.3f", r.rl_reward) + "; ";
  }
  return {wins >= kRlMinSeeds && total < kRlBudgetSec,
          detail + std::to_string(wins) + "/4 seeds gain >= 0.05, " + fmt("%.0f", total) + " s"};
}

Outcome ensemble_benefit() {
  const auto& runs = desk_runs();
  bool all_ok = true;
  int strict = 0;
  std::string detail;
  for (const auto& r : runs) {
    all_ok = all_ok && r.best_interior_mrr >= r.qc_mrr - kTiePrecision;
    strict += r.best_interior_mrr > r.qc_mrr + kTiePrecision;
    detail += "seed " + std::to_string(r.seed) + ": qc " + fmt("%.3f", r.qc_mrr) + ", lambda " +
              fmt("%.1f", r.best_interior_lambda) + " " + fmt("%.3f", r.best_interior_mrr) + "; ";
  }
  return {all_ok && strict >= kEnsembleMinStrict, detail + std::to_string(strict) + "/4 strict"};
}

// ---------------------------------------------------------------- 7

Outcome bleu_values() {
  using W = std::vector<std::string>;
  const W ref = {"the", "cat", "sat", "down"};
  const double same = eval::sentence_bleu(ref, ref);
  const double disjoint = eval::sentence_bleu(W{"a", "dog", "ran", "off"}, ref);
  const double short_one = eval::sentence_bleu(W{"the", "cat", "sat"}, ref);
  const double expect = std::exp(1.0 - 4.0 / 3.0);
  return {std::abs(same - 1.0) <= kBleuTol && disjoint == 0.0 && std::abs(short_one - expect) <= kBleuTol,
          "identical " + fmt("%.12f", same) + ", disjoint " + fmt("%.1f", disjoint) + ", short " +
              fmt("%.9f", short_one) + " vs " + fmt("%.9f", expect)};
}

// ---------------------------------------------------------------- 8

Outcome structural_invariants() {
  std::vector<std::string> failures;
  annotation::Seq2SeqModel actor({8, 10, 4, 3, 0.0}, 51);
  coacor::testing::randomize(actor.params(), 52);
  std::vector<rl::Episode> eps(2);
  eps[0].code = {4, 5, 6, 7};
  eps[0].code_length = 4;
  eps[0].tokens = {4, 6, 8, data::kEos};
  eps[0].reward = 0.25;
  eps[1].code = {5, 7, 0, 0};
  eps[1].code_length = 2;
  eps[1].tokens = {9, 5};
  eps[1].reward = 1.0;
  auto grads = [&](const std::function<ad::Tensor()>& loss) {
    actor.params().zero_grad();
    {
      ad::Tape tape;
      tape.backward(loss());
    }
    std::vector<double> g;
    for (Parameter* p : actor.params().all()) g.insert(g.end(), p->tensor.grad().begin(), p->tensor.grad().end());
    actor.params().zero_grad();
    return g;
  };
  const auto a2c = grads([&] { return rl::actor_objective(actor, eps, {{0, 0, 0, 0}, {0, 0}}).loss; });
  const auto reinforce = grads([&] { return rl::reinforce_objective(actor, eps); });
  if (a2c != reinforce) failures.push_back("V=0 gradient differs from REINFORCE");

  for (const auto& ep : eps) {
    const auto r = ep.step_rewards();
    for (std::size_t t = 0; t + 1 < r.size(); ++t)
      if (r[t] != 0.0) failures.push_back("non-terminal reward");
    for (double g : ep.returns())
      if (g != ep.reward) failures.push_back("return-to-go not constant");
  }

  double worst_attention = 0.0;
  {
    auto enc = actor.encode(eps[0].code, 4);
    auto state = enc.init;
    ad::NoGrad ng;
    data::TokenId prev = data::kStart;
    for (int t = 0; t < 8; ++t) {
      auto out = actor.step(prev, state, enc);
      double s = 0.0;
      for (double a : out.attention.values()) s += a;
      worst_attention = std::max(worst_attention, std::abs(s - 1.0));
      state = out.state;
      prev = static_cast<data::TokenId>(4 + t % 6);
    }
  }
  if (worst_attention > kAttentionTol) failures.push_back("attention row sum");

  double worst_collinear = 0.0;
  Rng rng(53);
  for (int i = 0; i < 100; ++i) {
    const double qn = 2 * rng.uniform() - 1, qc = 2 * rng.uniform() - 1;
    const double l1 = 0.1 * rng.uniform(), l2 = 0.4 + 0.2 * rng.uniform(), l3 = 0.9 + 0.1 * rng.uniform();
    const double s1 = eval::ensemble_score(l1, qn, qc), s2 = eval::ensemble_score(l2, qn, qc),
                 s3 = eval::ensemble_score(l3, qn, qc);
    worst_collinear = std::max(worst_collinear, std::abs((s2 - s1) * (l3 - l1) - (s3 - s1) * (l2 - l1)));
  }
  if (worst_collinear > kCollinearTol) failures.push_back("ensemble not linear in lambda");

  std::string detail = failures.empty() ? "all invariants hold" : failures.front();
  detail += "; attention dev " + fmt("%.1e", worst_attention) + ", collinearity dev " + fmt("%.1e", worst_collinear);
  return {failures.empty(), detail};
}

// ---------------------------------------------------------------- 9

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome pipeline_determinism() {
  Stopwatch sw;
  const fs::path root = fs::temp_directory_path() / "coacor_acceptance_pipeline";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string cli = COACOR_CLI_PATH;
  const std::string corpus = (root / "corpus.jsonl").string();
  const std::string common =
      " --seed 3 --min-freq 1 --max-code-len 40 --cr-embed-dim 16 --cr-hidden 16 --cr-epochs 5"
      " --cr-batch-size 32 --ca-embed-dim 16 --ca-hidden 16 --ca-epochs 5 --ca-batch-size 32"
      " --rl-epochs 2 --rl-critic-epochs 2 --rl-batch-size 32 --reward-k 19 --eval-k 19";
  auto sh = [&](const std::string& args, const fs::path& log) {
    const std::string cmd = "\"" + cli + "\" " + args + " >> \"" + log.string() + "\" 2>&1";
    return std::system(cmd.c_str()) == 0;
  };
  std::string failed;
  if (!sh("synth --corpus \"" + corpus + "\" --seed 3", root / "synth.log")) failed = "synth";
  const std::vector<std::string> steps = {"preprocess",   "train-cr-qc", "train-ca-mle",
                                          "train-ca-rl",  "train-cr-qn", "eval --scorer qc",
                                          "eval --scorer qn", "eval --scorer ensemble", "sweep"};
  for (const char* run : {"a", "b"}) {
    const fs::path out = root / run;
    for (const auto& step : steps) {
      if (!failed.empty()) break;
      if (!sh(step + " --corpus \"" + corpus + "\" --out-dir \"" + out.string() + "\"" + common,
              root / (std::string(run) + ".log"))) {
        failed = std::string(run) + ": " + step;
      }
    }
  }
  if (!failed.empty()) return {false, "command failed (" + failed + "), see " + root.string()};
  std::size_t compared = 0, differing = 0;
  for (const char* dir : {"logs", "reports"}) {
    for (const auto& entry : fs::directory_iterator(root / "a" / dir)) {
      const auto other = root / "b" / dir / entry.path().filename();
      ++compared;
      if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) ++differing;
    }
  }
  const double t = sw.seconds();
  return {differing == 0 && compared >= 10 && t < kPipelineBudgetSec,
          std::to_string(compared) + " log/report files compared, " + std::to_string(differing) +
              " differ, " + fmt("%.1f", t) + " s"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient suite", gradient_suite},
      {"oracle equivalence", oracle_equivalence},
      {"retrieval overfit", retrieval_overfit},
      {"annotation overfit", annotation_overfit},
      {"RL improvement", rl_improvement},
      {"ensemble benefit", ensemble_benefit},
      {"BLEU unit values", bleu_values},
      {"structural invariants", structural_invariants},
      {"pipeline determinism", pipeline_determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    std::cout << "criterion " << id << " " << (o.pass ? "PASS" : "FAIL") << "  " << criteria[i].first
              << ": " << o.detail << std::endl;
  }
  return all ? 0 : 1;
}
