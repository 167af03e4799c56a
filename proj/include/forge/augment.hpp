// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "forge/clustering.hpp"
#include "forge/genclient.hpp"
#include "forge/ingest.hpp"
#include "forge/io.hpp"

namespace forge {

enum class AugmentationKind { kSeed, kAskImg, kCompQ, kRephQ, kSimpQ };

inline constexpr std::array<AugmentationKind, 5> kAllKinds = {
    AugmentationKind::kSeed, AugmentationKind::kAskImg, AugmentationKind::kCompQ,
    AugmentationKind::kRephQ, AugmentationKind::kSimpQ};

std::string_view to_string(AugmentationKind kind);
// Accepts "Seed", "AskImg", ... in any case.
std::optional<AugmentationKind> parse_augmentation_kind(std::string_view name);

struct GeneratedQA {
  std::string parent_record_id;
  AugmentationKind kind = AugmentationKind::kSeed;
  std::string question;
  std::string answer;
  std::string request_id;  // empty for Seed pairs

  bool operator==(const GeneratedQA&) const = default;
};

Json to_json(const GeneratedQA& qa);
GeneratedQA generated_qa_from_json(const Json& row);

std::string build_qa_generation_prompt(const SourceRecord& record, const DemoPool& demos, std::size_t n = 5);
// Throws InvalidKind unless kind is CompQ, RephQ or SimpQ.
std::string build_question_augment_prompt(AugmentationKind kind, const SourceRecord& record);

struct ParsedQA {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::size_t shortfall = 0;
};

// Reads `Qi:` / `Ai:` lines for i in [1, expected_n]. Throws ParseFailure
// only when no complete pair is found.
ParsedQA parse_qa_block(std::string_view text, std::size_t expected_n);

struct OperatorSet {
  bool askimg = true;
  bool compq = true;
  bool rephq = true;
  bool simpq = true;

  bool enabled(AugmentationKind kind) const;
  bool operator==(const OperatorSet&) const = default;
};

// "askimg,compq,rephq,simpq"; "none" or "" disables all.
OperatorSet parse_ops(std::string_view text);
std::string format_ops(const OperatorSet& ops);

struct AugmentConfig {
  std::string model_id = "gpt-4-vision-preview";
  std::size_t n_per_image = 5;
  OperatorSet ops;
  int max_parse_retries = 2;
  // Fraction of failed operator calls above which the run aborts.
  double max_failure_rate = 0.5;
  int max_tokens = 1024;
  std::size_t parallelism = 8;
};

struct AugmentLogEntry {
  std::string parent_record_id;
  AugmentationKind kind = AugmentationKind::kAskImg;
  std::size_t missing = 0;  // pairs short of target
  std::string reason;
};

struct AugmentedCorpus {
  // Per seed record in record_id order: Seed, AskImg x n, CompQ, RephQ, SimpQ.
  std::vector<GeneratedQA> pairs;
  std::vector<AugmentLogEntry> log;
  std::size_t operator_calls = 0;
  std::size_t failed_calls = 0;
};

// Throws EmptyDemoPool when AskImg is enabled and a task has no pool, and
// AbortThresholdExceeded when failed_calls / operator_calls > max_failure_rate.
AugmentedCorpus synthesize(const Corpus& selected, VlmClient& client, const std::map<TaskType, DemoPool>& pools,
                           const AugmentConfig& config);

// Image content hash per record_id; unreadable images fall back to "ref:<image_ref>".
std::map<std::string, std::string> image_hashes(const Corpus& corpus);

// Drops later pairs whose (image hash, normalized question) was already seen.
// Seed pairs claim their keys first.
AugmentedCorpus dedup(const AugmentedCorpus& corpus, const std::map<std::string, std::string>& image_hash_of);

void write_augmented(const std::filesystem::path& path, const std::vector<GeneratedQA>& pairs);
std::vector<GeneratedQA> read_augmented(const std::filesystem::path& path);
Json to_json(const AugmentLogEntry& entry);

}  // namespace forge
