// Copyright 2026 The Debias Toolkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/// @file
/// Command-line front end. Exit codes: 0 ok, 1 configuration or usage
/// error, 2 optimizer did not converge, 3 data error.

#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "debias/config.hpp"
#include "debias/error.hpp"
#include "debias/pipeline.hpp"

namespace debias {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitConvergence = 2;
inline constexpr int kExitData = 3;

/// Runs one invocation. `out` receives progress (only with --verbose) and
/// `err` receives diagnostics.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bias audit and debiasing toolkit for labeled text corpora", "debias"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  bool verbose = false;
  app.add_option("--config", config_path, std::string("JSON run configuration (default: $") + kConfigEnv + ")");
  app.add_option("--out", out_dir, "output directory (overrides output_dir)");
  app.add_option("--seed", seed, "random seed (overrides seed)");
  app.add_flag("-v,--verbose", verbose, "print progress");

  struct Command {
    const char* name;
    const char* help;
  };
  const std::vector<Command> commands{
      {"preprocess", "normalize the corpus and the group corpus"},
      {"audit", "rank n-grams by LMI per class on train and test"},
      {"reweight", "optimize per-document weights against n-gram label bias"},
      {"train", "train the baseline and reweighted classifiers"},
      {"evaluate", "confusion matrix and macro F1 on the test split"},
      {"bias-eval", "compare predicted class membership across dialect groups"},
      {"learning-curve", "macro F1 against training-set portion"},
  };
  for (const auto& c : commands) app.add_subcommand(c.name, c.help);

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  std::ostringstream sink;
  std::ostream& log = verbose ? out : sink;
  try {
    if (config_path.empty()) {
      if (const char* env = std::getenv(kConfigEnv); env && *env) config_path = env;
    }
    if (config_path.empty()) {
      throw ConfigError(std::string("config: no --config given and $") + kConfigEnv + " is not set");
    }
    RunConfig cfg = load_config(config_path);
    if (!out_dir.empty()) cfg.output_dir = std::filesystem::absolute(out_dir);
    if (seed) cfg.seed = *seed;

    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "preprocess") {
      cmd_preprocess(cfg, log);
    } else if (cmd == "audit") {
      cmd_audit(cfg, log);
    } else if (cmd == "reweight") {
      if (!cmd_reweight(cfg, log)) {
        err << "error: reweighting did not converge within " << cfg.reweight.max_iters << " iterations\n";
        return kExitConvergence;
      }
    } else if (cmd == "train") {
      cmd_train(cfg, log);
    } else if (cmd == "evaluate") {
      cmd_evaluate(cfg, log);
    } else if (cmd == "bias-eval") {
      cmd_bias_eval(cfg, log);
    } else if (cmd == "learning-curve") {
      cmd_learning_curve(cfg, log);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

}  // namespace debias
