// SPDX-License-Identifier: Apache-2.0
//
// tcomp: traveling-companion discovery pipeline driver.
//
//   tcomp synth   --run runs/a [--config run.conf] [--set key=value ...]
//   tcomp train   --run runs/a
//   tcomp report  --run runs/a --compare other=runs/b
//   tcomp experiment main --run runs/main
//   tcomp config  [--keys]
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tc/tc.h"

namespace {

struct Options {
  std::string run_dir = "run";
  std::string config_file;
  std::vector<std::string> overrides;
  std::vector<std::string> compare;
  bool quiet = false;
};

int report_failure(tc_status st) {
  std::fprintf(stderr, "error[%s]: %s\n", tc_status_name(st), tc_last_error());
  return static_cast<int>(st);
}

void print_line(void*, const char* line) { std::fprintf(stderr, "%s\n", line); }

// Releases the handle on every exit path.
struct Run {
  tc_run* handle = nullptr;
  ~Run() { tc_run_close(handle); }
};

tc_status configure(const Options& opts, Run& run) {
  tc_status st = tc_run_open(opts.run_dir.c_str(), &run.handle);
  if (st != TC_OK) return st;
  if (!opts.quiet) tc_run_set_log(run.handle, print_line, nullptr);
  if (!opts.config_file.empty()) {
    st = tc_run_load_config(run.handle, opts.config_file.c_str());
    if (st != TC_OK) return st;
  }
  for (const auto& kv : opts.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error[invalid_argument]: override '%s' is not key=value\n",
                   kv.c_str());
      return TC_ERR_INVALID_ARGUMENT;
    }
    st = tc_run_set(run.handle, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
    if (st != TC_OK) return st;
  }
  return TC_OK;
}

void add_common(CLI::App* cmd, Options& opts) {
  cmd->add_option("-r,--run", opts.run_dir, "Run directory")->capture_default_str();
  cmd->add_option("-c,--config", opts.config_file, "key = value configuration file")
      ->check(CLI::ExistingFile);
  cmd->add_option("-s,--set", opts.overrides, "Override one key (key=value), repeatable");
  cmd->add_flag("-q,--quiet", opts.quiet, "No progress lines");
}

std::string config_dump(const tc_run* run) {
  size_t needed = 0;
  tc_run_config_text(run, nullptr, 0, &needed);
  std::string text(needed, '\0');
  if (tc_run_config_text(run, text.data(), text.size(), nullptr) != TC_OK) return {};
  text.resize(needed - 1);
  return text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Traveling-companion discovery from raw trajectories"};
  app.set_version_flag("--version", std::string(tc_version()));
  app.require_subcommand(1);

  Options opts;
  std::string chosen;
  std::string experiment;
  bool list_keys = false;

  for (size_t i = 0; i < tc_stage_count(); ++i) {
    const std::string name = tc_stage_name(i);
    auto* cmd = app.add_subcommand(name, "Run the " + name + " stage");
    add_common(cmd, opts);
    if (name == "report")
      cmd->add_option("--compare", opts.compare, "Join another run as label=dir, repeatable");
    cmd->callback([&chosen, name] { chosen = name; });
  }

  std::string experiment_help = "Run a recipe:";
  for (size_t i = 0; i < tc_experiment_count(); ++i)
    experiment_help += std::string(" ") + tc_experiment_name(i);
  auto* exp = app.add_subcommand("experiment", experiment_help);
  add_common(exp, opts);
  std::vector<std::string> experiment_choices;
  for (size_t i = 0; i < tc_experiment_count(); ++i)
    experiment_choices.emplace_back(tc_experiment_name(i));
  exp->add_option("name", experiment, "Recipe name")
      ->required()
      ->check(CLI::IsMember(experiment_choices));
  exp->callback([&chosen] { chosen = "experiment"; });

  auto* cfg = app.add_subcommand("config", "Print the effective configuration");
  add_common(cfg, opts);
  cfg->add_flag("--keys", list_keys, "List every key with its description");
  cfg->callback([&chosen] { chosen = "config"; });

  CLI11_PARSE(app, argc, argv);

  if (chosen == "config" && list_keys) {
    for (size_t i = 0; i < tc_config_key_count(); ++i)
      std::printf("%-28s %s\n", tc_config_key(i), tc_config_key_help(i));
    return 0;
  }

  Run run;
  tc_status st = configure(opts, run);
  if (st != TC_OK) return report_failure(st);

  if (chosen == "config") {
    std::fputs(config_dump(run.handle).c_str(), stdout);
    return 0;
  }

  if (chosen == "experiment") {
    st = tc_run_experiment(run.handle, experiment.c_str());
  } else if (chosen == "report") {
    std::vector<std::string> labels, dirs;
    for (const auto& item : opts.compare) {
      const auto eq = item.find('=');
      if (eq == std::string::npos || eq == 0 || eq + 1 == item.size()) {
        std::fprintf(stderr, "error[invalid_argument]: --compare '%s' is not label=dir\n",
                     item.c_str());
        return TC_ERR_INVALID_ARGUMENT;
      }
      labels.push_back(item.substr(0, eq));
      dirs.push_back(item.substr(eq + 1));
    }
    std::vector<const char*> label_ptrs, dir_ptrs;
    for (size_t i = 0; i < labels.size(); ++i) {
      label_ptrs.push_back(labels[i].c_str());
      dir_ptrs.push_back(dirs[i].c_str());
    }
    st = tc_run_report(run.handle, label_ptrs.data(), dir_ptrs.data(), labels.size());
  } else {
    st = tc_run_stage(run.handle, chosen.c_str());
  }
  return st == TC_OK ? 0 : report_failure(st);
}
