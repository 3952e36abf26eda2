// SPDX-License-Identifier: Apache-2.0
#include "tc/tc.h"

#include <cstring>
#include <exception>
#include <filesystem>
#include <new>
#include <string>
#include <vector>

#include "tc/error.hpp"
#include "tc/pipeline.hpp"

struct tc_run {
  tc::RunContext ctx;
  tc_log_fn log_fn = nullptr;
  void* log_user = nullptr;
};

namespace {

thread_local std::string g_last_error;

tc_status status_of(tc::ErrorKind kind) {
  switch (kind) {
    case tc::ErrorKind::kInvalidArgument: return TC_ERR_INVALID_ARGUMENT;
    case tc::ErrorKind::kParse: return TC_ERR_PARSE;
    case tc::ErrorKind::kValidation: return TC_ERR_VALIDATION;
    case tc::ErrorKind::kShape: return TC_ERR_SHAPE;
    case tc::ErrorKind::kNumeric: return TC_ERR_NUMERIC;
    case tc::ErrorKind::kIo: return TC_ERR_IO;
    case tc::ErrorKind::kConfig: return TC_ERR_CONFIG;
    case tc::ErrorKind::kMissingArtifact: return TC_ERR_MISSING_ARTIFACT;
    case tc::ErrorKind::kState: return TC_ERR_STATE;
  }
  return TC_ERR_INTERNAL;
}

template <typename F>
tc_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return TC_OK;
  } catch (const tc::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return TC_ERR_IO;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return TC_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return TC_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return TC_ERR_INTERNAL;
  }
}

tc_status null_arg(const char* what) {
  g_last_error = std::string(what) + " must not be null";
  return TC_ERR_INVALID_ARGUMENT;
}

tc_status copy_out(const std::string& value, char* buf, std::size_t cap, std::size_t* needed) {
  if (needed) *needed = value.size() + 1;
  if (!buf || cap < value.size() + 1) {
    if (buf && cap > 0) buf[0] = '\0';
    g_last_error = "buffer too small: need " + std::to_string(value.size() + 1) + " bytes";
    return TC_ERR_INVALID_ARGUMENT;
  }
  std::memcpy(buf, value.c_str(), value.size() + 1);
  return TC_OK;
}

}  // namespace

extern "C" {

const char* tc_version(void) { return "1.0.0"; }

const char* tc_status_name(tc_status status) {
  switch (status) {
    case TC_OK: return "ok";
    case TC_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case TC_ERR_PARSE: return "parse";
    case TC_ERR_VALIDATION: return "validation";
    case TC_ERR_SHAPE: return "shape";
    case TC_ERR_NUMERIC: return "numeric";
    case TC_ERR_IO: return "io";
    case TC_ERR_CONFIG: return "config";
    case TC_ERR_MISSING_ARTIFACT: return "missing_artifact";
    case TC_ERR_STATE: return "state";
    case TC_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* tc_last_error(void) { return g_last_error.c_str(); }

tc_status tc_run_open(const char* run_dir, tc_run** out) {
  if (!run_dir) return null_arg("run_dir");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    auto* run = new tc_run;
    run->ctx.dir = run_dir;
    *out = run;
  });
}

void tc_run_close(tc_run* run) { delete run; }

tc_status tc_run_load_config(tc_run* run, const char* path) {
  if (!run) return null_arg("run");
  if (!path) return null_arg("path");
  return guarded([&] { tc::apply_config_file(run->ctx.config, path); });
}

tc_status tc_run_set(tc_run* run, const char* key, const char* value) {
  if (!run) return null_arg("run");
  if (!key) return null_arg("key");
  if (!value) return null_arg("value");
  return guarded([&] { run->ctx.config.set(key, value); });
}

tc_status tc_run_get(const tc_run* run, const char* key, char* buf, size_t cap, size_t* needed) {
  if (!run) return null_arg("run");
  if (!key) return null_arg("key");
  std::string value;
  const auto st = guarded([&] { value = run->ctx.config.get(key); });
  return st == TC_OK ? copy_out(value, buf, cap, needed) : st;
}

tc_status tc_run_config_text(const tc_run* run, char* buf, size_t cap, size_t* needed) {
  if (!run) return null_arg("run");
  g_last_error.clear();
  return copy_out(run->ctx.config.canonical(), buf, cap, needed);
}

tc_status tc_run_set_log(tc_run* run, tc_log_fn fn, void* user) {
  if (!run) return null_arg("run");
  run->log_fn = fn;
  run->log_user = user;
  if (fn)
    run->ctx.log = [fn, user](const std::string& line) { fn(user, line.c_str()); };
  else
    run->ctx.log = nullptr;
  g_last_error.clear();
  return TC_OK;
}

tc_status tc_run_stage(tc_run* run, const char* stage) {
  if (!run) return null_arg("run");
  if (!stage) return null_arg("stage");
  return guarded([&] { tc::run_stage(run->ctx, stage); });
}

tc_status tc_run_report(tc_run* run, const char* const* labels, const char* const* dirs, size_t n) {
  if (!run) return null_arg("run");
  if (n > 0 && (!labels || !dirs)) return null_arg("labels/dirs");
  return guarded([&] {
    std::vector<tc::ComparedRun> others;
    for (size_t i = 0; i < n; ++i) {
      tc::require(labels[i] && dirs[i], tc::ErrorKind::kInvalidArgument,
                  "comparison entry " + std::to_string(i) + " is null");
      others.push_back({labels[i], dirs[i]});
    }
    tc::run_report(run->ctx, others);
  });
}

tc_status tc_run_experiment(tc_run* run, const char* name) {
  if (!run) return null_arg("run");
  if (!name) return null_arg("name");
  return guarded([&] { tc::run_experiment(run->ctx, name); });
}

size_t tc_config_key_count(void) { return tc::RunConfig::keys().size(); }

const char* tc_config_key(size_t index) {
  const auto& keys = tc::RunConfig::keys();
  return index < keys.size() ? keys[index].c_str() : nullptr;
}

const char* tc_config_key_help(size_t index) {
  static thread_local std::string help;
  const auto& keys = tc::RunConfig::keys();
  if (index >= keys.size()) return nullptr;
  help = tc::RunConfig::describe(keys[index]);
  return help.c_str();
}

size_t tc_stage_count(void) { return tc::stage_names().size(); }

const char* tc_stage_name(size_t index) {
  const auto& names = tc::stage_names();
  return index < names.size() ? names[index].c_str() : nullptr;
}

size_t tc_experiment_count(void) { return tc::experiment_names().size(); }

const char* tc_experiment_name(size_t index) {
  const auto& names = tc::experiment_names();
  return index < names.size() ? names[index].c_str() : nullptr;
}

}  // extern "C"
