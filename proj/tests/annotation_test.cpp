#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "coacor/annotation/seq2seq.hpp"
#include "coacor/annotation/train.hpp"
#include "coacor/data/synthetic.hpp"
#include "support/grad_check.hpp"

using namespace coacor;
using namespace coacor::annotation;
using ad::Tensor;
using coacor::testing::check_gradients;
using coacor::testing::leaves_of;
using coacor::testing::randomize;

namespace {

constexpr double kGradTol = 1e-4;

Seq2SeqModel tiny(std::uint64_t seed = 1, std::size_t nl_vocab = 10, double range = 0.5) {
  Seq2SeqModel m({8, nl_vocab, 4, 3, 0.0}, seed);
  randomize(m.params(), seed + 50, range);
  return m;
}

void zero_output_layer(Seq2SeqModel& m) {
  for (const char* name : {"output.W", "output.b"}) {
    auto v = m.params().get(name).tensor.mutable_values();
    std::fill(v.begin(), v.end(), 0.0);
  }
}

const std::vector<data::TokenId> kCode = {4, 5, 6, 7, 0, 0};

}  // namespace

TEST(Seq2Seq, EncoderShapesAndPadding) {
  auto m = tiny();
  auto enc = m.encode(kCode, 4);
  EXPECT_EQ(enc.outputs.shape(), (ad::Shape{4, 6}));
  EXPECT_EQ(enc.init.h.size(), m.state_size());
  auto one = m.encode(kCode, 1);
  EXPECT_EQ(one.outputs.shape(), (ad::Shape{1, 6}));
  std::vector<data::TokenId> other_pad = {4, 5, 6, 7, 3, 2};
  auto enc2 = m.encode(other_pad, 4);
  EXPECT_TRUE(std::equal(enc.outputs.values().begin(), enc.outputs.values().end(),
                         enc2.outputs.values().begin()));
  EXPECT_THROW(m.encode(kCode, 0), Error);
}

TEST(Seq2Seq, AttentionRowsSumToOne) {
  auto m = tiny(2);
  auto enc = m.encode(kCode, 4);
  auto state = enc.init;
  data::TokenId prev = data::kStart;
  for (int t = 0; t < 5; ++t) {
    auto out = m.step(prev, state, enc);
    double s = 0;
    for (double a : out.attention.values()) s += a;
    EXPECT_NEAR(s, 1.0, 1e-9);
    double p = 0;
    for (double lp : out.log_probs.values()) p += std::exp(lp);
    EXPECT_NEAR(p, 1.0, 1e-9);
    EXPECT_EQ(out.log_probs.size(), 10u);
    state = out.state;
    prev = static_cast<data::TokenId>(4 + t);
  }
}

TEST(Seq2Seq, SingletonAndUniformAttention) {
  auto m = tiny(3);
  auto one = m.encode(kCode, 1);
  auto out = m.step(data::kStart, one.init, one);
  EXPECT_EQ(out.attention[0], 1.0);
  std::vector<data::TokenId> same = {5, 5, 5};
  auto enc = m.encode(same, 3);
  // identical encoder rows: make them literally identical
  EncodedCode flat{ad::stack({ad::embedding(enc.outputs, 1), ad::embedding(enc.outputs, 1),
                              ad::embedding(enc.outputs, 1)}),
                   enc.init};
  auto u = m.step(data::kStart, flat.init, flat);
  for (double a : u.attention.values()) EXPECT_NEAR(a, 1.0 / 3.0, 1e-15);
}

TEST(Seq2Seq, InvalidTokenRejected) {
  auto m = tiny();
  auto enc = m.encode(kCode, 4);
  EXPECT_THROW(m.step(10, enc.init, enc), Error);
}

TEST(Seq2Seq, AttentionStepGradients) {
  auto m = tiny(4);
  auto r = check_gradients(leaves_of(m.params()), [&] {
    auto enc = m.encode(kCode, 3);
    auto out = m.step(6, enc.init, enc);
    return ad::add(ad::pick(out.log_probs, 5), ad::dot(out.attentional, out.state.g));
  });
  EXPECT_LT(r.max_rel_err, kGradTol) << r.worst;
}

TEST(Seq2Seq, MleLossGradients) {
  auto m = tiny(5);
  std::vector<AnnotationPair> batch = {{kCode, 4, {4, 6, data::kEos}},
                                       {{7, 6, 0}, 2, {5, data::kEos}}};
  auto r = check_gradients(leaves_of(m.params()), [&] { return mle_loss(m, batch); });
  EXPECT_LT(r.max_rel_err, kGradTol) << r.worst;
}

TEST(SequenceLogProb, StepwiseOracle) {
  auto m = tiny(6);
  std::vector<data::TokenId> ann = {5, 8, 4, data::kEos};
  const double lp = sequence_log_prob(m, kCode, 4, ann);
  EXPECT_LE(lp, 0.0);
  auto enc = m.encode(kCode, 4);
  DecodeState st{0, enc.init, {}, {}};
  data::TokenId prev = data::kStart;
  double manual = 0.0;
  for (auto tok : ann) {
    auto [probs, next] = decode_step(m, prev, st, enc);
    manual += std::log(probs[tok]);
    st = next;
    prev = tok;
  }
  EXPECT_NEAR(lp, manual, 1e-12);
  auto [probs, next] = decode_step(m, data::kStart, DecodeState{0, enc.init, {}, {}}, enc);
  EXPECT_NEAR(std::exp(sequence_log_prob(m, kCode, 4, std::vector<data::TokenId>{7})), probs[7],
              1e-14);
}

TEST(MleLoss, UniformModelGivesLogV) {
  auto m = tiny(7);
  zero_output_layer(m);
  std::vector<AnnotationPair> batch = {{kCode, 4, {4, 6, data::kEos}}};
  EXPECT_NEAR(mle_loss(m, batch).item(), std::log(10.0), 1e-12);
}

TEST(MleLoss, CertainModelGivesZero) {
  auto m = tiny(8);
  zero_output_layer(m);
  m.params().get("output.b").tensor.mutable_values()[data::kEos] = 1000.0;
  std::vector<AnnotationPair> batch = {{kCode, 4, {data::kEos}}};
  EXPECT_EQ(mle_loss(m, batch).item(), 0.0);
}

TEST(MleLoss, DecreasesOnToyCorpus) {
  auto corpus = data::disjoint_corpus(4, 3, 4);
  std::vector<data::TokenList> q, c;
  for (auto& e : corpus) {
    q.push_back(e.query_tokens);
    c.push_back(e.code_tokens);
  }
  auto qv = data::build_vocab(q, 1), cv = data::build_vocab(c, 1);
  MleOptions opt;
  opt.epochs = 50;
  opt.batch_size = 4;
  opt.lr = 0.01;
  auto res = train_mle(corpus, corpus, cv, qv, {cv.size(), qv.size(), 8, 6, 0.0}, opt);
  EXPECT_LT(res.log.back().loss, 0.5 * res.log.front().loss);
}

TEST(Greedy, EosFirstGivesEmptyAnnotation) {
  auto m = tiny(9);
  zero_output_layer(m);
  m.params().get("output.b").tensor.mutable_values()[data::kEos] = 5.0;
  auto g = greedy_decode(m, kCode, 4);
  EXPECT_TRUE(g.tokens.empty());
  EXPECT_TRUE(g.ended_with_eos);
}

TEST(Greedy, CappedDeterministicAndMasked) {
  auto m = tiny(10);
  zero_output_layer(m);
  auto b = m.params().get("output.b").tensor.mutable_values();
  b[data::kEos] = -50.0;
  b[data::kUnk] = 50.0;  // masked at generation time
  b[data::kPad] = 50.0;
  b[data::kStart] = 50.0;
  b[6] = 1.0;
  auto g = greedy_decode(m, kCode, 4, 20);
  EXPECT_EQ(g.tokens.size(), 20u);
  EXPECT_FALSE(g.ended_with_eos);
  for (auto t : g.tokens) EXPECT_EQ(t, 6u);
  EXPECT_EQ(greedy_decode(m, kCode, 4, 20).tokens, g.tokens);
}

TEST(Sample, OneHotPolicyEqualsGreedy) {
  auto m = tiny(11);
  auto& W = m.params().get("output.W").tensor;
  for (double& v : W.mutable_values()) v *= 1e4;  // near-deterministic softmax
  Rng rng(3);
  auto g = greedy_decode(m, kCode, 4, 8);
  auto s = sample_decode(m, kCode, 4, rng, 8);
  EXPECT_EQ(s.surface(), g.tokens);
}

TEST(Sample, LogProbsMatchSequenceLogProb) {
  auto m = tiny(12, 10, 0.3);
  Rng rng(4);
  const auto mask = generation_mask(10);
  for (int i = 0; i < 20; ++i) {
    auto s = sample_decode(m, kCode, 4, rng, 6);
    double total = 0;
    for (double lp : s.log_probs) total += lp;
    EXPECT_NEAR(total, sequence_log_prob(m, kCode, 4, s.tokens, &mask), 1e-12);
    EXPECT_EQ(s.states.size(), s.tokens.size());
    for (auto t : s.tokens) {
      EXPECT_NE(t, data::kUnk);
      EXPECT_NE(t, data::kPad);
      EXPECT_NE(t, data::kStart);
    }
  }
}

TEST(Sample, SingleStepFrequenciesMatchDistribution) {
  auto m = tiny(13, 8, 1.0);
  const auto mask = generation_mask(8);
  auto enc = m.encode(kCode, 4);
  std::vector<double> p(8);
  {
    ad::NoGrad ng;
    auto out = m.step(data::kStart, enc.init, enc, &mask);
    for (std::size_t i = 0; i < 8; ++i) p[i] = std::exp(out.log_probs[i]);
  }
  Rng rng(5);
  std::map<data::TokenId, int> counts;
  const int n = 10000;
  for (int i = 0; i < n; ++i) ++counts[sample_decode(m, kCode, 4, rng, 1).tokens[0]];
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(counts[i] / double(n), p[i], 0.02) << i;
}

TEST(TrainMle, TruncatesQueriesAndAppendsEos) {
  data::CorpusExample ex{"x", "g", {"a", "b", "c"}, {"k"}};
  auto nl = data::build_vocab({{"a", "b", "c"}}, 1);
  auto code = data::build_vocab({{"k"}}, 1);
  auto pair = make_annotation_pair(ex, code, nl, 5, 2);
  EXPECT_EQ(pair.target, (std::vector<data::TokenId>{nl.id("a"), nl.id("b"), data::kEos}));
}
