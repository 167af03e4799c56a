// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "forge/augment.hpp"
#include "forge/ingest.hpp"
#include "forge/io.hpp"
#include "forge/scoring.hpp"

namespace forge {

inline constexpr std::string_view kImageToken = "<image>";

struct Turn {
  std::string from;  // "human" | "gpt"
  std::string value;

  bool operator==(const Turn&) const = default;
};

struct InstructionMeta {
  std::string dataset_id;
  TaskType task = TaskType::kFQA;
  AugmentationKind kind = AugmentationKind::kSeed;
  std::optional<int> complexity;  // absent when the image was never scored

  bool operator==(const InstructionMeta&) const = default;
};

// Invariants: conversations alternate human/gpt starting with human, even
// length >= 2; the first human turn holds exactly one <image> token.
struct InstructionRecord {
  std::string id;
  std::string image;  // relative to the corpus image root
  std::vector<Turn> conversations;
  InstructionMeta meta;

  bool operator==(const InstructionRecord&) const = default;
};

Json to_json(const InstructionRecord& record);
InstructionRecord instruction_record_from_json(const Json& row);
// Throws RecordInvalid when the conversation invariants do not hold.
void check_conversation(const InstructionRecord& record);

// "(A) first\n(B) second".
std::string render_choices(const std::vector<std::string>& choices);

struct EmitContext {
  const Corpus* selected = nullptr;
  const ScoreTable* scores = nullptr;  // optional, supplies meta.complexity
  bool require_images = true;          // MissingImage when the file is absent
};

// Throws DanglingParent when the parent is not in the selected set.
// Seed, RephQ and SimpQ questions carry the parent's rendered choices.
InstructionRecord to_instruction_record(const GeneratedQA& pair, const std::string& id, const EmitContext& ctx);

// Ids: the record_id for Seed pairs, "<parent>#<kind>-<i>" otherwise.
std::vector<InstructionRecord> build_instruction_records(const std::vector<GeneratedQA>& pairs,
                                                         const EmitContext& ctx);

inline constexpr std::string_view kDatasetFile = "dataset.jsonl";
inline constexpr std::string_view kDatasetManifestFile = "dataset_manifest.json";

struct EmittedManifest {
  std::string file;
  std::size_t count = 0;
  std::map<std::string, std::size_t> per_kind;  // every kind, zeros included
  std::string sha256;                            // of the JSONL bytes
};

Json to_json(const EmittedManifest& manifest);
EmittedManifest emitted_manifest_from_json(const Json& j);

// Writes dataset.jsonl and dataset_manifest.json atomically into out_dir.
EmittedManifest write_dataset(const std::vector<InstructionRecord>& records, const std::filesystem::path& out_dir);
std::vector<InstructionRecord> read_dataset(const std::filesystem::path& jsonl_path);
EmittedManifest read_dataset_manifest(const std::filesystem::path& out_dir);

struct DatasetReport {
  std::size_t total = 0;
  std::map<std::string, std::size_t> by_kind;
  std::map<std::string, std::size_t> by_task;
  std::map<std::string, std::size_t> by_dataset;
  std::map<std::string, std::size_t> by_complexity;  // "0".."3", "unscored"
  // Target per kind, present when seed count and operators are known.
  std::map<std::string, std::size_t> target_by_kind;
};

struct CompositionTarget {
  std::size_t seeds = 0;
  std::size_t n_per_image = 5;
  OperatorSet ops;
};

std::map<std::string, std::size_t> target_composition(const CompositionTarget& target);
DatasetReport dataset_report(const std::vector<InstructionRecord>& records,
                             const std::optional<CompositionTarget>& target = std::nullopt);
Json to_json(const DatasetReport& report);
std::string render_report(const DatasetReport& report);

}  // namespace forge
