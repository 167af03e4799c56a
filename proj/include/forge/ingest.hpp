// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "forge/io.hpp"

namespace forge {

enum class TaskType { kFQA, kGPS, kMWP, kTQA, kVQA };

inline constexpr std::array<TaskType, 5> kAllTasks = {TaskType::kFQA, TaskType::kGPS,
                                                      TaskType::kMWP, TaskType::kTQA,
                                                      TaskType::kVQA};

std::string_view to_string(TaskType task);
std::optional<TaskType> parse_task(std::string_view name);

enum class AnswerKind { kChoice, kInteger, kFloat, kList, kFreeText };

std::string_view to_string(AnswerKind kind);
std::optional<AnswerKind> parse_answer_kind(std::string_view name);

// Typing rule for upstream data that does not state an answer kind: choice if
// options are present, else float if the answer is a number written with a
// decimal point, else integer if it parses as one, else free text.
AnswerKind infer_answer_kind(std::string_view answer, bool has_choices);

struct SourceRecord {
  std::string record_id;
  std::string dataset_id;
  TaskType task = TaskType::kFQA;
  std::string image_ref;
  std::string question;
  std::string answer;
  AnswerKind answer_kind = AnswerKind::kFreeText;
  std::vector<std::string> choices;  // non-empty iff answer_kind == kChoice

  bool operator==(const SourceRecord&) const = default;
};

Json to_json(const SourceRecord& record);
SourceRecord source_record_from_json(const Json& row);

struct DatasetEntry {
  std::string dataset_id;
  TaskType task = TaskType::kFQA;
  std::filesystem::path records_file;

  bool operator==(const DatasetEntry&) const = default;
};

inline constexpr int kManifestSchemaVersion = 1;

// On disk:
//   {"schema_version": 1, "image_root": "images",
//    "datasets": [{"dataset_id": "DocVQA", "task": "FQA", "records_file": "docvqa.jsonl"}]}
// Relative paths resolve against the manifest's directory.
struct DatasetManifest {
  int schema_version = kManifestSchemaVersion;
  std::filesystem::path image_root;
  std::vector<DatasetEntry> datasets;
};

DatasetManifest read_manifest(const std::filesystem::path& manifest_path);

// Immutable, validated collection of source records in load order.
class Corpus {
 public:
  Corpus() = default;
  // Throws RecordInvalid on duplicate record ids.
  Corpus(std::filesystem::path image_root, std::vector<DatasetEntry> datasets,
         std::vector<SourceRecord> records);

  const std::vector<SourceRecord>& records() const { return records_; }
  const std::vector<DatasetEntry>& datasets() const { return datasets_; }
  const std::filesystem::path& image_root() const { return image_root_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  const SourceRecord* find(std::string_view record_id) const;
  std::optional<TaskType> task_of(std::string_view dataset_id) const;

  // Distinct image_refs in first-appearance order.
  std::vector<std::string> distinct_images() const;
  std::filesystem::path image_path(std::string_view image_ref) const;

  template <typename Pred>
  Corpus filter(Pred&& keep) const {
    std::vector<SourceRecord> kept;
    for (const auto& r : records_) {
      if (keep(r)) kept.push_back(r);
    }
    return Corpus(image_root_, datasets_, std::move(kept));
  }

  std::vector<SourceRecord>::const_iterator begin() const { return records_.begin(); }
  std::vector<SourceRecord>::const_iterator end() const { return records_.end(); }

 private:
  std::filesystem::path image_root_;
  std::vector<DatasetEntry> datasets_;
  std::vector<SourceRecord> records_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct LoadOptions {
  bool strict_images = false;  // MissingImage when an image file is absent
};

Corpus load_corpus(const std::filesystem::path& manifest_path, const LoadOptions& options = {});

// Corpus persistence used between pipeline stages: corpus.jsonl (one record
// per line) plus corpus_meta.json (image root and dataset table).
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus read_corpus(const std::filesystem::path& dir);
std::string serialize_records(const Corpus& corpus);

struct StatsReport {
  std::size_t total = 0;
  std::size_t distinct_images = 0;
  std::map<std::string, std::size_t> per_dataset;
  std::map<TaskType, std::size_t> per_task;
};

StatsReport corpus_stats(const Corpus& corpus);
Json to_json(const StatsReport& stats);

}  // namespace forge
