// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "forge/ingest.hpp"
#include "forge/selection.hpp"

namespace forge {

// Published per-dataset image counts of the 24 source datasets.
struct SourceTableRow {
  std::string dataset_id;
  TaskType task;
  std::string visual_context;
  std::uint64_t training_images;
  std::uint64_t clear_images;
  StratumCounts complexity;  // clear images per complexity level
};

const std::vector<SourceTableRow>& source_table();
Availability source_table_availability();

struct FixtureOptions {
  std::uint64_t seed = 1;
  std::size_t records_per_dataset = 30;
  // Every n-th record gets a blurred image (0 disables).
  std::size_t blur_every = 7;
  std::uint64_t budget = 100;
  std::size_t n_per_image = 5;
};

struct FixturePaths {
  std::filesystem::path root;
  std::filesystem::path manifest;
  std::filesystem::path scores_table;  // for "mock:table:<path>"
  std::filesystem::path vlm_script;    // for "mock:<path>"
  std::filesystem::path config;        // run-all config writing to <root>/out
};

// Six small datasets covering all five tasks, one distinct image per record,
// a scorer table and a VLM script that answers every annotation and
// augmentation prompt for every image with well-formed output.
FixturePaths write_fixture(const std::filesystem::path& root, const FixtureOptions& options = {});

}  // namespace forge
