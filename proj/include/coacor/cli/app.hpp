#pragma once

#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "coacor/cli/commands.hpp"
#include "coacor/cli/config.hpp"

namespace coacor::cli {

struct Command {
  const char* name;
  const char* help;
  std::function<void(const Config&)> run;
};

inline const std::vector<Command>& commands() {
  static const std::vector<Command> list = {
      {"synth", "write the templated synthetic SQL corpus", cmd_synth},
      {"preprocess", "tokenize, split and build vocabularies", cmd_preprocess},
      {"train-cr-qc", "train the query-code retrieval model", cmd_train_cr_qc},
      {"train-ca-mle", "pretrain the annotation model by likelihood", cmd_train_ca_mle},
      {"train-ca-rl", "actor-critic training of the annotation model", cmd_train_ca_rl},
      {"train-cr-qn", "train the query-annotation retrieval model", cmd_train_cr_qn},
      {"annotate", "annotate a dataset split", cmd_annotate},
      {"eval", "MRR of the qc, qn or ensemble scorer", [](const Config& c) { cmd_eval(c); }},
      {"sweep", "ensemble weight sweep", [](const Config& c) { cmd_sweep(c); }},
  };
  return list;
}

/// Runs one command. Returns the process exit code; failures print a single
/// `error[<class>]: <message>` line to `err`.
inline int run(int argc, const char* const* argv, std::ostream& err = std::cerr) {
  CLI::App app{"coacor: code retrieval with annotation-driven rewards"};
  app.require_subcommand(1);
  std::string config_path;
  std::map<std::string, std::string> overrides;
  std::vector<std::pair<CLI::App*, const Command*>> subs;
  for (const auto& cmd : commands()) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    sub->add_option("--config", config_path, "key = value configuration file");
    for (const auto& e : Config::schema()) {
      std::string dashed = e.key;
      for (char& ch : dashed)
        if (ch == '_') ch = '-';
      std::string names = "--" + dashed;
      if (dashed != e.key) names += ",--" + std::string(e.key);
      sub->add_option(names, overrides[e.key], e.help);
    }
    subs.emplace_back(sub, &cmd);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    err << "error[usage]: " << e.what() << '\n';
    return 2;
  }
  try {
    for (const auto& [sub, cmd] : subs) {
      if (!sub->parsed()) continue;
      Config cfg;
      if (!config_path.empty()) cfg.load_file(config_path);
      for (const auto& e : Config::schema()) {
        std::string dashed = e.key;
        for (char& ch : dashed)
          if (ch == '_') ch = '-';
        if (sub->count("--" + dashed) > 0) cfg.set(e.key, overrides[e.key]);
      }
      cmd->run(cfg);
    }
  } catch (const Error& e) {
    err << "error[" << error_kind_name(e.kind()) << "]: " << e.what() << '\n';
    return 10 + static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    err << "error[internal]: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace coacor::cli
