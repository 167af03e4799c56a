// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "forge/augment.hpp"
#include "forge/io.hpp"
#include "forge/selection.hpp"

namespace forge {

// Loaded from one JSON file; relative paths and mock backend paths resolve
// against the file's directory. Both seeds must be given explicitly.
//   {"paths": {"manifest", "image_root"?, "cache_dir"?, "out_dir"},
//    "selection": {"enabled"?, "ratio", "budget", "take_all_top_stratum"?, "seed"},
//    "clustering": {"k"?, "seed"},
//    "augmentation": {"ops"?, "n_per_image"?, "model_id"?, "max_failure_rate"?,
//                     "max_parse_retries"?, "dedup"?, "parallelism"?},
//    "backend": {"scorer", "vlm", "rpm"?, "max_in_flight"?, "api_key_env"?, "score_parallelism"?}}
struct PipelineConfig {
  fs::path manifest;
  fs::path image_root;  // empty: use the manifest's
  fs::path cache_dir;
  fs::path out_dir;
  bool strict_images = false;

  bool selection_enabled = true;
  SelectionConfig selection;

  std::size_t clusters = 5;
  std::uint64_t cluster_seed = 0;

  AugmentConfig augment;
  bool dedup = true;

  std::string scorer = "mock:hash";
  std::string vlm;
  std::string api_key_env = "FORGE_API_KEY";
  double rpm = 0;
  std::size_t max_in_flight = 4;
  std::size_t score_parallelism = 4;
};

PipelineConfig pipeline_config_from_json(const Json& j, const fs::path& base_dir);
PipelineConfig load_pipeline_config(const fs::path& path);
Json to_json(const PipelineConfig& config);
std::string config_hash(const PipelineConfig& config);

// "mock:rel.json" -> "mock:<base>/rel.json"; URLs and built-in mocks unchanged.
std::string resolve_backend_spec(const std::string& spec, const fs::path& base_dir);

inline constexpr std::array<std::string_view, 6> kStages = {"ingest", "score", "select", "cluster", "augment", "emit"};

struct StageStatus {
  std::string name;
  std::string status;  // completed | skipped | failed | not_run
  std::string inputs_sha256;
  std::map<std::string, std::string> outputs;  // relative path -> sha256
  std::optional<std::string> error;
};

struct RunManifest {
  std::string tool_version;
  std::string config_sha256;
  std::string demo_pool_policy;
  std::vector<StageStatus> stages;
  std::optional<std::string> final_dataset_sha256;
};

Json to_json(const RunManifest& manifest);

struct RunOptions {
  bool force = false;
  std::function<void(const std::string&)> log;
};

// Runs the six stages into <out_dir>/<stage>/ and writes
// <out_dir>/run_manifest.json. A stage whose stage.json matches its inputs
// and whose outputs still hash as recorded is skipped unless force is set.
// Stage failures are recorded and rethrown as StageError.
RunManifest run_all(const PipelineConfig& config, const RunOptions& options = {});

inline constexpr std::string_view kDemoPoolPolicy = "one seeded pool per task per run";

}  // namespace forge
