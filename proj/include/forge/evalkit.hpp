// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "forge/genclient.hpp"
#include "forge/ingest.hpp"
#include "forge/io.hpp"

namespace forge {

enum class Skill { kALG, kARI, kGEO, kLOG, kNUM, kSCI, kSTA };

inline constexpr std::array<Skill, 7> kAllSkills = {Skill::kALG, Skill::kARI, Skill::kGEO, Skill::kLOG,
                                                    Skill::kNUM, Skill::kSCI, Skill::kSTA};

std::string_view to_string(Skill skill);
std::optional<Skill> parse_skill(std::string_view name);

struct EvalItem {
  std::string item_id;
  TaskType task = TaskType::kFQA;
  AnswerKind answer_kind = AnswerKind::kFreeText;
  std::vector<std::string> choices;
  std::string gold;
  std::vector<Skill> skills;  // non-empty, no repeats
};

// Rows: {item_id, task, answer_kind, choices?, answer, skills: ["ALG", ...]}.
// Throws RecordInvalid when gold does not fit answer_kind or skills is empty.
EvalItem eval_item_from_json(const Json& row);
Json to_json(const EvalItem& item);
std::vector<EvalItem> read_eval_items(const std::filesystem::path& path);

// Normalized answer shapes: choice -> upper-case letter; integer/float ->
// shortest decimal form; list -> "[e1, e2]" of normalized elements;
// free text -> normalize_text. `extracted == false` marks extraction failure.
struct Prediction {
  bool extracted = false;
  std::string value;

  static Prediction failure() { return {}; }
  static Prediction of(std::string v) { return {true, std::move(v)}; }
  bool operator==(const Prediction&) const = default;
};

class AnswerExtractor {
 public:
  virtual ~AnswerExtractor() = default;
  virtual Prediction extract(std::string_view response, const EvalItem& item) = 0;
};

class RuleExtractor : public AnswerExtractor {
 public:
  Prediction extract(std::string_view response, const EvalItem& item) override;
};

// Asks a model for the final answer, then normalizes its reply with the rule
// extractor so both produce the same shapes.
class LlmExtractor : public AnswerExtractor {
 public:
  LlmExtractor(VlmClient& client, std::string model_id);
  Prediction extract(std::string_view response, const EvalItem& item) override;
  static std::string build_prompt(std::string_view response, const EvalItem& item);

 private:
  VlmClient& client_;
  std::string model_id_;
  RuleExtractor rules_;
};

Prediction extract_answer(std::string_view response, const EvalItem& item);

// Canonical form of an answer in the shape used by Prediction.
std::optional<std::string> normalize_gold(const EvalItem& item);

bool score_item(const Prediction& pred, const EvalItem& item);

struct Cell {
  std::size_t correct = 0;
  std::size_t total = 0;

  double accuracy() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
  bool operator==(const Cell&) const = default;
};

// Cells with no items are absent.
struct SubsetAccuracy {
  Cell overall;
  std::map<TaskType, Cell> by_task;
  std::map<Skill, Cell> by_skill;

  bool operator==(const SubsetAccuracy&) const = default;
};

struct ItemResult {
  const EvalItem* item = nullptr;
  Prediction prediction;
  bool correct = false;
};

SubsetAccuracy aggregate(const std::vector<ItemResult>& results);

// Predictions rows: {item_id, response_text}. Items without a prediction
// score as extraction failures.
std::vector<ItemResult> evaluate(const std::vector<EvalItem>& items, const std::map<std::string, std::string>& responses,
                                 AnswerExtractor& extractor);
std::map<std::string, std::string> read_predictions(const std::filesystem::path& path);

Json to_json(const SubsetAccuracy& acc);
std::string render_table(const SubsetAccuracy& acc);

}  // namespace forge
