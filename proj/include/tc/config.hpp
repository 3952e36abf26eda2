// SPDX-License-Identifier: Apache-2.0
//
// Flat key=value run configuration covering every tunable of the pipeline.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tc/attn_mean.hpp"
#include "tc/baselines.hpp"
#include "tc/cluster.hpp"
#include "tc/embed.hpp"
#include "tc/synth.hpp"

namespace tc {

struct RunConfig {
  std::uint64_t seed = 1;
  // Per-stage seeds; unset means `seed`.
  std::optional<std::uint64_t> synth_seed;
  std::optional<std::uint64_t> embed_seed;
  std::optional<std::uint64_t> train_seed;

  std::string input_trajectories;  // empty: <run>/data/trajectories.csv
  std::string input_gates;         // empty: <run>/data/gates.csv
  std::string input_ground_truth;  // empty: <run>/data/ground_truth.csv

  SynthConfig synth;
  double cell_len = 5.0;
  SkipGramConfig skipgram;
  bool positional_encoding = true;
  std::size_t pack_capacity = 64;
  bool pack_normalize = true;
  TrainConfig train;
  SweepConfig sweep;
  Timestamp baseline_step = 10;
  PatternParams pattern;

  /// Seeds resolved against `seed`.
  SynthConfig resolved_synth() const;
  SkipGramConfig resolved_skipgram() const;
  TrainConfig resolved_train() const;

  /// Applies one assignment; unknown keys and malformed values throw
  /// kConfig naming the key.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  /// Every key in documentation order.
  static const std::vector<std::string>& keys();
  static std::string describe(const std::string& key);

  /// Canonical `key = value` listing of every key (stable for hashing).
  std::string canonical() const;
  void validate() const;
};

/// Parses `key = value` lines; `#` starts a comment. Later lines win.
void apply_config_text(RunConfig& config, std::istream& in, const std::string& origin);
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

}  // namespace tc
