#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coacor/annotation/train.hpp"
#include "coacor/cli/config.hpp"
#include "coacor/data/corpus.hpp"
#include "coacor/data/synthetic.hpp"
#include "coacor/eval/ensemble.hpp"
#include "coacor/io/checkpoint.hpp"
#include "coacor/retrieval/train.hpp"
#include "coacor/rl/a2c.hpp"

namespace coacor::cli {

namespace fs = std::filesystem;

/// Artifact layout below `out_dir`.
struct Layout {
  fs::path root;

  explicit Layout(const Config& cfg) : root(cfg.str("out_dir")) {}

  fs::path split(const std::string& name) const { return root / "data" / (name + ".jsonl"); }
  fs::path vocab(const std::string& side) const { return root / "data" / ("vocab." + side + ".txt"); }
  fs::path preprocess_report() const { return root / "data" / "preprocess_report.json"; }
  fs::path checkpoint(const std::string& name) const { return root / "checkpoints" / (name + ".ckpt"); }
  fs::path log(const std::string& name) const { return root / "logs" / (name + ".csv"); }
  fs::path report(const std::string& name) const { return root / "reports" / name; }
  fs::path annotations(const std::string& split, const std::string& annotator) const {
    return root / "annotations" / (split + "." + annotator + ".jsonl");
  }
};

namespace detail {

inline void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::vector<std::string>& header) : out_(open(path)) {
    row(header);
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

 private:
  static std::ofstream open(const fs::path& path) {
    ensure_parent(path);
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
    return out;
  }
  std::ofstream out_;
};

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline void require_file(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) fail(ErrorKind::kDependency, "missing " + what + ": " + p.string());
}

inline data::Corpus load_split(const Layout& l, const std::string& name) {
  if (name != "train" && name != "val" && name != "test") {
    fail(ErrorKind::kConfig, "dataset must be train, val or test, got '" + name + "'");
  }
  require_file(l.split(name), name + " split (run preprocess first)");
  return data::read_corpus(l.split(name).string());
}

inline data::Vocabulary load_vocab(const Layout& l, const std::string& side) {
  require_file(l.vocab(side), side + " vocabulary (run preprocess first)");
  return data::Vocabulary::load(l.vocab(side).string());
}

/// Training-relevant configuration, recorded in every checkpoint.
inline nlohmann::json config_snapshot(const Config& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : cfg.values()) {
    if (k == "corpus" || k == "out_dir" || k == "dataset" || k == "scorer" || k == "lambda") continue;
    j[k] = v;
  }
  return j;
}

inline std::uint64_t seed_of(const Config& cfg) { return cfg.u64("seed"); }

inline retrieval::RetrievalConfig retrieval_config(const Config& cfg, std::size_t query_vocab,
                                                   std::size_t candidate_vocab) {
  return {query_vocab, candidate_vocab, cfg.size("cr_embed_dim"), cfg.size("cr_hidden"),
          cfg.real("cr_dropout")};
}

inline retrieval::CrTrainOptions cr_options(const Config& cfg, std::size_t max_candidate_len) {
  retrieval::CrTrainOptions opt;
  opt.epochs = cfg.size("cr_epochs");
  opt.batch_size = cfg.size("cr_batch_size");
  opt.lr = cfg.real("cr_lr");
  opt.margin = cfg.real("margin");
  opt.clip_norm = cfg.real("clip_norm");
  opt.max_query_len = cfg.size("max_query_len");
  opt.max_code_len = max_candidate_len;
  opt.eval_k = cfg.size("eval_k");
  opt.seed = seed_of(cfg);
  return opt;
}

inline annotation::Seq2SeqConfig seq2seq_config(const Config& cfg, std::size_t code_vocab,
                                                std::size_t nl_vocab) {
  return {code_vocab, nl_vocab, cfg.size("ca_embed_dim"), cfg.size("ca_hidden"),
          cfg.real("ca_dropout")};
}

inline nlohmann::json retrieval_hyperparams(const retrieval::RetrievalConfig& rc, const Config& cfg) {
  return {{"query_vocab", rc.query_vocab},     {"candidate_vocab", rc.candidate_vocab},
          {"embed_dim", rc.embed_dim},         {"hidden", rc.hidden},
          {"dropout", rc.dropout},             {"config", config_snapshot(cfg)}};
}

inline nlohmann::json seq2seq_hyperparams(const annotation::Seq2SeqConfig& sc, const Config& cfg) {
  return {{"code_vocab", sc.code_vocab}, {"nl_vocab", sc.nl_vocab},   {"embed_dim", sc.embed_dim},
          {"enc_hidden", sc.enc_hidden}, {"dropout", sc.dropout},     {"config", config_snapshot(cfg)}};
}

inline void expect_kind(const io::Checkpoint& ck, const std::string& kind, const fs::path& path) {
  if (ck.model_kind() != kind) {
    fail(ErrorKind::kCheckpoint, path.string() + " holds a " + ck.model_kind() + " model, expected " + kind);
  }
}

inline retrieval::RetrievalModel load_retrieval(const fs::path& path, const std::string& kind,
                                                const data::Vocabulary& query_vocab,
                                                const data::Vocabulary& candidate_vocab,
                                                const std::string& candidate_side) {
  require_file(path, kind + " checkpoint");
  auto ck = io::load_checkpoint(path.string());
  expect_kind(ck, kind, path);
  ck.verify_vocab("nl", query_vocab.content_hash());
  ck.verify_vocab(candidate_side, candidate_vocab.content_hash());
  const auto& h = ck.hyperparams();
  retrieval::RetrievalConfig rc{h.at("query_vocab").get<std::size_t>(),
                                h.at("candidate_vocab").get<std::size_t>(),
                                h.at("embed_dim").get<std::size_t>(), h.at("hidden").get<std::size_t>(),
                                h.at("dropout").get<double>()};
  retrieval::RetrievalModel model(rc, 0);
  ck.restore("model", model.params());
  return model;
}

inline annotation::Seq2SeqConfig seq2seq_from(const io::Checkpoint& ck) {
  const auto& h = ck.hyperparams();
  return {h.at("code_vocab").get<std::size_t>(), h.at("nl_vocab").get<std::size_t>(),
          h.at("embed_dim").get<std::size_t>(), h.at("enc_hidden").get<std::size_t>(),
          h.at("dropout").get<double>()};
}

/// Loads the annotation model `name` (ca-mle or ca-rl).
inline annotation::Seq2SeqModel load_annotator(const Layout& l, const std::string& name,
                                               const data::Vocabulary& code_vocab,
                                               const data::Vocabulary& nl_vocab) {
  if (name != "ca-mle" && name != "ca-rl") {
    fail(ErrorKind::kConfig, "qn_annotator must be ca-mle or ca-rl, got '" + name + "'");
  }
  const auto path = l.checkpoint(name);
  require_file(path, name + " checkpoint");
  auto ck = io::load_checkpoint(path.string());
  expect_kind(ck, name == "ca-mle" ? "CA" : "CA-RL", path);
  ck.verify_vocab("code", code_vocab.content_hash());
  ck.verify_vocab("nl", nl_vocab.content_hash());
  annotation::Seq2SeqModel model(seq2seq_from(ck), 0);
  ck.restore(name == "ca-mle" ? "model" : "actor", model.params());
  return model;
}

/// Annotations of `split` from the configured annotator: read from disk when
/// present, otherwise decoded from the CA checkpoint.
inline eval::Annotations annotations_for(const Layout& l, const Config& cfg, const std::string& split,
                                         const data::Corpus& corpus,
                                         const data::Vocabulary& code_vocab,
                                         const data::Vocabulary& nl_vocab) {
  const auto annotator = cfg.str("qn_annotator");
  const auto path = l.annotations(split, annotator);
  if (fs::exists(path)) return eval::read_annotations(path.string());
  if (!fs::exists(l.checkpoint(annotator))) {
    fail(ErrorKind::kConfig, "no annotations for '" + split + "' and no " + annotator +
                                 " checkpoint to generate them");
  }
  auto model = load_annotator(l, annotator, code_vocab, nl_vocab);
  return eval::annotate_corpus(model, corpus, code_vocab, nl_vocab, cfg.size("max_code_len"),
                               cfg.size("max_annotation_len"));
}

inline void write_cr_log(const fs::path& path, const std::vector<retrieval::CrEpochLog>& log) {
  CsvWriter csv(path, {"epoch", "loss", "val_mrr"});
  for (const auto& r : log) csv.row({std::to_string(r.epoch), num(r.loss), num(r.val_mrr)});
}

}  // namespace detail

/// Tokenize, split by query group, build vocabularies from the training split.
inline void cmd_preprocess(const Config& cfg) {
  const Layout l(cfg);
  if (cfg.str("corpus").empty()) fail(ErrorKind::kConfig, "preprocess needs --corpus");
  detail::require_file(cfg.str("corpus"), "corpus");
  const auto raw = data::read_raw_jsonl(cfg.str("corpus"));
  data::Corpus corpus;
  corpus.reserve(raw.size());
  for (const auto& r : raw) {
    try {
      corpus.push_back(data::tokenize_example(r));
    } catch (const Error& e) {
      fail(ErrorKind::kCorpus, "example '" + r.id + "': " + e.what());
    }
  }
  const data::SplitRatios ratios{cfg.real("split_train"), cfg.real("split_val"), cfg.real("split_test")};
  const auto split = data::split_dataset(corpus, ratios, detail::seed_of(cfg));

  std::vector<data::TokenList> code_lists, nl_lists;
  for (const auto& ex : split.train) {
    code_lists.push_back(ex.code_tokens);
    nl_lists.push_back(ex.query_tokens);
  }
  const auto min_freq = cfg.size("min_freq");
  const auto code_vocab = data::build_vocab(code_lists, min_freq, data::Side::kCode);
  const auto nl_vocab = data::build_vocab(nl_lists, min_freq, data::Side::kNl);

  fs::create_directories(l.root / "data");
  code_vocab.save(l.vocab("code").string());
  nl_vocab.save(l.vocab("nl").string());

  nlohmann::json report;
  report["vocab"] = {{"code", code_vocab.size()}, {"nl", nl_vocab.size()}, {"min_freq", min_freq}};
  const std::vector<std::pair<std::string, const data::Corpus*>> parts = {
      {"train", &split.train}, {"val", &split.val}, {"test", &split.test}};
  for (const auto& [name, part] : parts) {
    data::write_corpus(l.split(name).string(), *part);
    std::size_t q_tokens = 0, q_unk = 0, c_tokens = 0, c_unk = 0;
    for (const auto& ex : *part) {
      q_tokens += ex.query_tokens.size();
      c_tokens += ex.code_tokens.size();
      for (const auto& t : ex.query_tokens) q_unk += !nl_vocab.contains(t);
      for (const auto& t : ex.code_tokens) c_unk += !code_vocab.contains(t);
    }
    auto rate = [](std::size_t unk, std::size_t total) {
      return total ? static_cast<double>(unk) / static_cast<double>(total) : 0.0;
    };
    report["splits"][name] = {{"examples", part->size()},
                              {"groups", data::count_groups(*part)},
                              {"query_tokens", q_tokens},
                              {"query_unk", q_unk},
                              {"query_unk_rate", rate(q_unk, q_tokens)},
                              {"code_tokens", c_tokens},
                              {"code_unk", c_unk},
                              {"code_unk_rate", rate(c_unk, c_tokens)}};
  }
  detail::write_json(l.preprocess_report(), report);
  std::cout << "preprocess: " << split.train.size() << "/" << split.val.size() << "/"
            << split.test.size() << " examples, vocab code=" << code_vocab.size()
            << " nl=" << nl_vocab.size() << '\n';
}

inline void cmd_train_cr_qc(const Config& cfg) {
  const Layout l(cfg);
  const auto train = detail::load_split(l, "train");
  const auto val = detail::load_split(l, "val");
  const auto code_vocab = detail::load_vocab(l, "code");
  const auto nl_vocab = detail::load_vocab(l, "nl");
  const auto rc = detail::retrieval_config(cfg, nl_vocab.size(), code_vocab.size());
  const auto result = retrieval::train_cr(train, val, nl_vocab, code_vocab, rc,
                                          detail::cr_options(cfg, cfg.size("max_code_len")));
  detail::write_cr_log(l.log("cr-qc"), result.log);
  io::save_checkpoint(l.checkpoint("cr-qc").string(),
                      {"QC", detail::retrieval_hyperparams(rc, cfg),
                       {{"code", code_vocab.content_hash()}, {"nl", nl_vocab.content_hash()}},
                       {{"model", &result.model.params()}}});
  std::cout << "train-cr-qc: best epoch " << result.best_epoch << ", val MRR "
            << detail::num(result.best_val_mrr) << '\n';
}

inline void cmd_train_ca_mle(const Config& cfg) {
  const Layout l(cfg);
  const auto train = detail::load_split(l, "train");
  const auto val = detail::load_split(l, "val");
  const auto code_vocab = detail::load_vocab(l, "code");
  const auto nl_vocab = detail::load_vocab(l, "nl");
  const auto sc = detail::seq2seq_config(cfg, code_vocab.size(), nl_vocab.size());
  annotation::MleOptions opt;
  opt.epochs = cfg.size("ca_epochs");
  opt.batch_size = cfg.size("ca_batch_size");
  opt.lr = cfg.real("ca_lr");
  opt.clip_norm = cfg.real("clip_norm");
  opt.max_code_len = cfg.size("max_code_len");
  opt.max_query_len = cfg.size("max_query_len");
  opt.max_annotation_len = cfg.size("max_annotation_len");
  opt.seed = detail::seed_of(cfg);
  const auto result = annotation::train_mle(train, val, code_vocab, nl_vocab, sc, opt);
  {
    detail::CsvWriter csv(l.log("ca-mle"), {"epoch", "loss", "val_bleu"});
    for (const auto& r : result.log)
      csv.row({std::to_string(r.epoch), detail::num(r.loss), detail::num(r.val_bleu)});
  }
  io::save_checkpoint(l.checkpoint("ca-mle").string(),
                      {"CA", detail::seq2seq_hyperparams(sc, cfg),
                       {{"code", code_vocab.content_hash()}, {"nl", nl_vocab.content_hash()}},
                       {{"model", &result.model.params()}}});
  std::cout << "train-ca-mle: best epoch " << result.best_epoch << ", val BLEU "
            << detail::num(result.best_val_bleu) << '\n';
}

inline rl::A2cOptions a2c_options(const Config& cfg) {
  rl::A2cOptions opt;
  opt.epochs = cfg.size("rl_epochs");
  opt.critic_pretrain_epochs = cfg.size("rl_critic_epochs");
  opt.batch_size = cfg.size("rl_batch_size");
  opt.actor_lr = cfg.real("rl_actor_lr");
  opt.critic_lr = cfg.real("rl_critic_lr");
  opt.clip_norm = cfg.real("clip_norm");
  opt.max_code_len = cfg.size("max_code_len");
  opt.max_query_len = cfg.size("max_query_len");
  opt.max_annotation_len = cfg.size("max_annotation_len");
  const auto& kind = cfg.str("reward");
  if (kind == "mrr") {
    opt.reward.kind = rl::RewardKind::kMrr;
  } else if (kind == "bleu") {
    opt.reward.kind = rl::RewardKind::kBleu;
  } else {
    fail(ErrorKind::kConfig, "reward must be mrr or bleu, got '" + kind + "'");
  }
  opt.reward.pool_size = cfg.size("reward_k");
  if (opt.reward.pool_size == 0) fail(ErrorKind::kConfig, "reward_k must be at least 1");
  opt.reward.seed = detail::seed_of(cfg);
  return opt;
}

inline void cmd_train_ca_rl(const Config& cfg) {
  const Layout l(cfg);
  const auto opt = a2c_options(cfg);
  // Dependencies first so the error names the missing checkpoint.
  if (opt.reward.kind == rl::RewardKind::kMrr) detail::require_file(l.checkpoint("cr-qc"), "cr-qc checkpoint");
  detail::require_file(l.checkpoint("ca-mle"), "ca-mle checkpoint");
  const auto train = detail::load_split(l, "train");
  const auto val = detail::load_split(l, "val");
  const auto code_vocab = detail::load_vocab(l, "code");
  const auto nl_vocab = detail::load_vocab(l, "nl");
  std::shared_ptr<const retrieval::RetrievalModel> frozen;
  if (opt.reward.kind == rl::RewardKind::kMrr) {
    frozen = std::make_shared<const retrieval::RetrievalModel>(
        detail::load_retrieval(l.checkpoint("cr-qc"), "QC", nl_vocab, code_vocab, "code"));
  }
  const auto pretrained = detail::load_annotator(l, "ca-mle", code_vocab, nl_vocab);
  const auto result = rl::train_a2c(train, val, code_vocab, nl_vocab, frozen, pretrained, opt);
  {
    detail::CsvWriter csv(l.log("ca-rl"), {"epoch", "mean_reward", "critic_loss", "actor_entropy"});
    for (const auto& r : result.log)
      csv.row({std::to_string(r.epoch), detail::num(r.mean_reward), detail::num(r.critic_loss),
               detail::num(r.actor_entropy)});
  }
  {
    detail::CsvWriter csv(l.log("ca-rl.critic"), {"epoch", "mean_reward", "critic_loss", "actor_entropy"});
    for (const auto& r : result.critic_pretrain_log)
      csv.row({std::to_string(r.epoch), detail::num(r.mean_reward), detail::num(r.critic_loss),
               detail::num(r.actor_entropy)});
  }
  {
    detail::CsvWriter csv(l.log("ca-rl.val"), {"epoch", "val_reward"});
    csv.row({"0", detail::num(result.initial_val_reward)});
    for (const auto& r : result.log) csv.row({std::to_string(r.epoch), detail::num(r.val_reward)});
  }
  auto hp = detail::seq2seq_hyperparams(pretrained.config(), cfg);
  hp["reward"] = cfg.str("reward");
  io::save_checkpoint(l.checkpoint("ca-rl").string(),
                      {"CA-RL", hp,
                       {{"code", code_vocab.content_hash()}, {"nl", nl_vocab.content_hash()}},
                       {{"actor", &result.actor.params()},
                        {"critic", &result.critic.body().params()},
                        {"critic.head", &result.critic.head()}}});
  std::cout << "train-ca-rl: best epoch " << result.best_epoch << ", val reward "
            << detail::num(result.best_val_reward) << " (pretrained "
            << detail::num(result.initial_val_reward) << ")\n";
}

/// Greedy annotations of the configured dataset split.
inline void cmd_annotate(const Config& cfg) {
  const Layout l(cfg);
  const auto split = cfg.str("dataset");
  const auto corpus = detail::load_split(l, split);
  const auto code_vocab = detail::load_vocab(l, "code");
  const auto nl_vocab = detail::load_vocab(l, "nl");
  const auto annotator = cfg.str("qn_annotator");
  const auto model = detail::load_annotator(l, annotator, code_vocab, nl_vocab);
  const auto ann = eval::annotate_corpus(model, corpus, code_vocab, nl_vocab,
                                         cfg.size("max_code_len"), cfg.size("max_annotation_len"));
  const auto path = l.annotations(split, annotator);
  detail::ensure_parent(path);
  eval::write_annotations(path.string(), ann);
  std::cout << "annotate: " << ann.size() << " snippets -> " << path.string() << '\n';
}

inline void cmd_train_cr_qn(const Config& cfg) {
  const Layout l(cfg);
  const auto annotator = cfg.str("qn_annotator");
  if (!fs::exists(l.checkpoint(annotator))) {
    fail(ErrorKind::kDependency, "missing " + annotator + " checkpoint: " + l.checkpoint(annotator).string());
  }
  const auto train = detail::load_split(l, "train");
  const auto val = detail::load_split(l, "val");
  const auto code_vocab = detail::load_vocab(l, "code");
  const auto nl_vocab = detail::load_vocab(l, "nl");
  const auto model = detail::load_annotator(l, annotator, code_vocab, nl_vocab);
  const auto max_code = cfg.size("max_code_len");
  const auto max_ann = cfg.size("max_annotation_len");
  const auto train_ann = eval::annotate_corpus(model, train, code_vocab, nl_vocab, max_code, max_ann);
  const auto val_ann = eval::annotate_corpus(model, val, code_vocab, nl_vocab, max_code, max_ann);
  for (const auto& [split, ann] : {std::pair{"train", &train_ann}, std::pair{"val", &val_ann}}) {
    const auto path = l.annotations(split, annotator);
    detail::ensure_parent(path);
    eval::write_annotations(path.string(), *ann);
  }
  const auto rc = detail::retrieval_config(cfg, nl_vocab.size(), nl_vocab.size());
  const auto result = retrieval::train_cr(eval::annotated_corpus(train, train_ann),
                                          eval::annotated_corpus(val, val_ann), nl_vocab, nl_vocab,
                                          rc, detail::cr_options(cfg, max_ann));
  detail::write_cr_log(l.log("cr-qn"), result.log);
  auto hp = detail::retrieval_hyperparams(rc, cfg);
  hp["annotator"] = annotator;
  io::save_checkpoint(l.checkpoint("cr-qn").string(),
                      {"QN", hp, {{"nl", nl_vocab.content_hash()}}, {{"model", &result.model.params()}}});
  std::cout << "train-cr-qn: best epoch " << result.best_epoch << ", val MRR "
            << detail::num(result.best_val_mrr) << '\n';
}

namespace detail {

struct EvalContext {
  data::Corpus corpus;
  data::Corpus annotated;
  data::Vocabulary code_vocab, nl_vocab;
  std::unique_ptr<retrieval::RetrievalModel> qc, qn;
  std::unique_ptr<eval::EnsembleScorer> scorer;
};

inline std::unique_ptr<EvalContext> eval_context(const Config& cfg, bool need_qn) {
  const Layout l(cfg);
  auto ctx = std::make_unique<EvalContext>();
  const auto split = cfg.str("dataset");
  ctx->corpus = load_split(l, split);
  ctx->code_vocab = load_vocab(l, "code");
  ctx->nl_vocab = load_vocab(l, "nl");
  ctx->qc = std::make_unique<retrieval::RetrievalModel>(
      load_retrieval(l.checkpoint("cr-qc"), "QC", ctx->nl_vocab, ctx->code_vocab, "code"));
  eval::EnsembleScorer::Views views{ctx->qc.get(), nullptr, &ctx->code_vocab, &ctx->nl_vocab,
                                    cfg.size("max_query_len"), cfg.size("max_code_len"),
                                    cfg.size("max_annotation_len")};
  if (need_qn) {
    ctx->qn = std::make_unique<retrieval::RetrievalModel>(
        load_retrieval(l.checkpoint("cr-qn"), "QN", ctx->nl_vocab, ctx->nl_vocab, "nl"));
    views.qn = ctx->qn.get();
    const auto ann = annotations_for(l, cfg, split, ctx->corpus, ctx->code_vocab, ctx->nl_vocab);
    ctx->annotated = eval::annotated_corpus(ctx->corpus, ann);
  }
  ctx->scorer = std::make_unique<eval::EnsembleScorer>(views, ctx->corpus,
                                                       need_qn ? &ctx->annotated : nullptr);
  return ctx;
}

}  // namespace detail

/// MRR of the qc, qn or ensemble scorer on the configured dataset split.
inline eval::EvalResult cmd_eval(const Config& cfg) {
  const Layout l(cfg);
  const auto scorer = cfg.str("scorer");
  double lambda = 0.0;
  std::string name = scorer;
  if (scorer == "qc") {
    lambda = 0.0;
  } else if (scorer == "qn") {
    lambda = 1.0;
  } else if (scorer == "ensemble") {
    lambda = cfg.real("lambda");
    if (!(lambda >= 0.0 && lambda <= 1.0)) fail(ErrorKind::kConfig, "lambda must lie in [0, 1]");
    char buf[32];
    std::snprintf(buf, sizeof buf, "ensemble-%g", lambda);
    name = buf;
  } else {
    fail(ErrorKind::kConfig, "scorer must be qc, qn or ensemble, got '" + scorer + "'");
  }
  auto ctx = detail::eval_context(cfg, scorer != "qc");
  const auto split = cfg.str("dataset");
  const auto& s = *ctx->scorer;
  eval::PairScorer fn;
  if (scorer == "qc") {
    fn = [&s](std::size_t q, std::size_t c) { return s.cos_qc(q, c); };
  } else if (scorer == "qn") {
    fn = [&s](std::size_t q, std::size_t c) { return s.cos_qn(q, c); };
  } else {
    fn = s.scorer(lambda);
  }
  auto result = eval::mrr_evaluate(split, retrieval::eval_items(ctx->corpus), fn,
                                   cfg.size("eval_k"), detail::seed_of(cfg));
  const auto path = l.report("eval." + name + "." + split + ".json");
  detail::ensure_parent(path);
  eval::write_report(path.string(), result);
  std::cout << "eval " << name << " on " << split << ": MRR " << detail::num(result.mrr) << '\n';
  return result;
}

inline eval::SweepResult cmd_sweep(const Config& cfg) {
  const Layout l(cfg);
  auto ctx = detail::eval_context(cfg, true);
  const auto split = cfg.str("dataset");
  auto sweep = eval::lambda_sweep(split, retrieval::eval_items(ctx->corpus), *ctx->scorer,
                                  cfg.size("eval_k"), detail::seed_of(cfg));
  const auto csv = l.report("sweep." + split + ".csv");
  detail::ensure_parent(csv);
  eval::write_sweep_csv(csv.string(), sweep);
  detail::write_json(l.report("sweep." + split + ".json"),
                     {{"dataset", split},
                      {"K", cfg.size("eval_k")},
                      {"seed", detail::seed_of(cfg)},
                      {"best_lambda", sweep.best_lambda},
                      {"best_mrr", sweep.best_mrr},
                      {"lambdas", sweep.lambdas},
                      {"mrr", sweep.mrrs}});
  std::cout << "sweep on " << split << ": best lambda " << sweep.best_lambda << ", MRR "
            << detail::num(sweep.best_mrr) << '\n';
  return sweep;
}

/// Writes the templated synthetic SQL corpus to `corpus`.
inline void cmd_synth(const Config& cfg) {
  if (cfg.str("corpus").empty()) fail(ErrorKind::kConfig, "synth needs --corpus");
  data::TemplatedCorpusOptions opt;
  opt.seed = derive_seed(detail::seed_of(cfg), "synth");
  const auto rows = data::templated_sql_corpus(opt);
  detail::ensure_parent(cfg.str("corpus"));
  data::write_raw_jsonl(cfg.str("corpus"), rows);
  std::cout << "synth: " << rows.size() << " examples -> " << cfg.str("corpus") << '\n';
}

}  // namespace coacor::cli
