// SPDX-License-Identifier: Apache-2.0
//
// Pipeline stages over a run directory, their manifests, and the
// experiment recipes built from them.
//
// Layout of a run directory:
//   data/        trajectories.csv, ground_truth.csv, gates.csv, grid.csv, tokens.csv
//   embeddings/  cells.bin, cells.csv, loss.csv
//   groups/      groups.csv
//   model/       model.ckpt, loss_history.csv
//   encodings/   encodings.csv
//   sweep/       sweep.csv
//   baselines/   convoys.csv, swarms.csv, convoy_summary.csv, swarm_summary.csv
//   report/      summary.csv, companions.csv, comparison.csv, report.md, *.svg
//   manifest/    <stage>.txt with config and artifact SHA-256 hashes
#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tc/config.hpp"

namespace tc {

using LogFn = std::function<void(const std::string&)>;

struct RunContext {
  std::filesystem::path dir;
  RunConfig config;
  LogFn log;  // may be empty
};

/// Stage names accepted by run_stage.
const std::vector<std::string>& stage_names();

/// Runs one stage. Missing prerequisites raise kMissingArtifact naming the
/// file and the stage that produces it.
void run_stage(const RunContext& ctx, const std::string& stage);

struct ComparedRun {
  std::string label;
  std::filesystem::path dir;
};

/// The `report` stage, optionally joined with other finished runs whose
/// best-epsilon metrics are tabulated next to this one.
void run_report(const RunContext& ctx, std::span<const ComparedRun> others);

/// Recipes: "main" (ATTN-MEAN vs LSTM-AE), "pe-ablation" (positional
/// encodings on/off over the time-shifted clone corpus), "baselines"
/// (ATTN-MEAN vs Convoy and Swarm). Sub-runs live under ctx.dir.
void run_experiment(const RunContext& ctx, const std::string& name);
const std::vector<std::string>& experiment_names();

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_bytes(const std::string& bytes);

}  // namespace tc
