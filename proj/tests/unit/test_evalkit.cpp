// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "forge/error.hpp"
#include "forge/evalkit.hpp"
#include "forge/text.hpp"
#include "support/fixtures.hpp"

using namespace forge;

namespace {

EvalItem item(AnswerKind kind, std::string gold, std::vector<std::string> choices = {},
              TaskType task = TaskType::kFQA, std::vector<Skill> skills = {Skill::kARI}) {
  EvalItem it;
  it.item_id = "i";
  it.task = task;
  it.answer_kind = kind;
  it.choices = std::move(choices);
  it.gold = std::move(gold);
  it.skills = std::move(skills);
  return it;
}

// Answers every extraction prompt by running the rule extractor on the
// embedded response, so the LLM path must agree with the rule path.
MockScript echo_script(const std::vector<EvalItem>& items, const std::map<std::string, std::string>& responses) {
  MockScript s;
  RuleExtractor rules;
  for (const auto& it : items) {
    auto r = responses.find(it.item_id);
    if (r == responses.end() || is_blank(r->second)) continue;
    Prediction p = rules.extract(r->second, it);
    MockRule rule;
    rule.key = cache_key([&] {
      VlmRequest q;
      q.model_id = "judge";
      q.prompt = LlmExtractor::build_prompt(r->second, it);
      q.media_type.clear();
      q.max_tokens = 256;
      return q;
    }());
    rule.response = p.extracted ? p.value : "none";
    s.rules.push_back(std::move(rule));
  }
  return s;
}

}  // namespace

TEST_CASE("extraction and scoring examples") {
  auto choice = item(AnswerKind::kChoice, "B", {"1", "2", "3", "4"});
  CHECK(extract_answer("The answer is (B).", choice) == Prediction::of("B"));
  CHECK(extract_answer("so the total is 7.5 meters", item(AnswerKind::kFloat, "7.5")) == Prediction::of("7.5"));
  CHECK_FALSE(extract_answer("I'm sorry, I can't answer that.", choice).extracted);
  CHECK(score_item(Prediction::of("b"), choice));
  CHECK_FALSE(score_item(Prediction::of("7.51"), item(AnswerKind::kFloat, "7.5")));
  CHECK(score_item(Prediction::of("7.5004"), item(AnswerKind::kFloat, "7.5")));
  CHECK_FALSE(score_item(Prediction::failure(), choice));
}

TEST_CASE("extraction fixture") {
  auto cases = fixtures::extraction_cases();
  REQUIRE(cases.size() == 30);
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    CAPTURE(c.response);
    Prediction p = extract_answer(c.response, fixtures::item_for(c, "x" + std::to_string(i)));
    if (c.expected.empty()) {
      CHECK_FALSE(p.extracted);
    } else {
      CHECK(p == Prediction::of(c.expected));
    }
  }
}

TEST_CASE("scoring by answer kind") {
  CHECK(score_item(Prediction::of("12"), item(AnswerKind::kInteger, "12")));
  CHECK_FALSE(score_item(Prediction::of("13"), item(AnswerKind::kInteger, "12")));
  CHECK(score_item(Prediction::of("1234"), item(AnswerKind::kInteger, "1,234")));
  CHECK(score_item(Prediction::of("[1, 2]"), item(AnswerKind::kList, "[1, 2]")));
  CHECK_FALSE(score_item(Prediction::of("[2, 1]"), item(AnswerKind::kList, "[1, 2]")));
  auto colour = item(AnswerKind::kChoice, "green", {"red", "green"});
  CHECK(normalize_gold(colour) == "B");
  CHECK(score_item(Prediction::of("B"), colour));
  CHECK(score_item(Prediction::of("paris"), item(AnswerKind::kFreeText, "Paris.")));
}

TEST_CASE("scoring ignores response whitespace") {
  auto cases = fixtures::extraction_cases();
  for (std::size_t i = 0; i < cases.size(); ++i) {
    auto it = fixtures::item_for(cases[i], "w");
    std::string padded = "  \n" + cases[i].response + "\t \n";
    CHECK(extract_answer(padded, it) == extract_answer(cases[i].response, it));
  }
}

TEST_CASE("aggregation cells") {
  std::vector<EvalItem> items = {item(AnswerKind::kInteger, "1", {}, TaskType::kGPS, {Skill::kALG, Skill::kGEO}),
                                 item(AnswerKind::kInteger, "2", {}, TaskType::kGPS, {Skill::kGEO}),
                                 item(AnswerKind::kInteger, "3", {}, TaskType::kMWP, {Skill::kARI})};
  std::vector<ItemResult> results = {{&items[0], {}, true}, {&items[1], {}, false}, {&items[2], {}, true}};
  SubsetAccuracy acc = aggregate(results);
  CHECK(acc.overall == Cell{2, 3});
  CHECK(acc.by_task.at(TaskType::kGPS).accuracy() == 0.5);
  CHECK(acc.by_skill.at(Skill::kGEO) == Cell{1, 2});
  CHECK(acc.by_skill.at(Skill::kALG) == Cell{1, 1});
  CHECK(acc.by_skill.count(Skill::kLOG) == 0);
  CHECK_FALSE(to_json(acc)["by_skill"].contains("LOG"));
  std::size_t task_total = 0;
  for (const auto& [_, c] : acc.by_task) task_total += c.total;
  CHECK(task_total == acc.overall.total);
  std::string table = render_table(acc);
  CHECK(table.find("GEO") != std::string::npos);
  CHECK(table.find("LOG") == std::string::npos);
}

TEST_CASE("1000-item fixture reproduces the constructed accuracy") {
  auto fx = fixtures::eval_fixture();
  RuleExtractor rules;
  auto results = evaluate(fx.items, fx.responses, rules);
  for (std::size_t i = 0; i < results.size(); ++i) CHECK(results[i].correct == fx.correct[i]);
  SubsetAccuracy acc = aggregate(results);
  CHECK(acc.overall == Cell{466, 1000});
}

TEST_CASE("mock LLM extractor gives the same accuracy as the rules") {
  auto fx = fixtures::eval_fixture(200, 91, 7);
  auto backend = std::make_shared<MockVlmBackend>(echo_script(fx.items, fx.responses));
  VlmClient client(backend);
  LlmExtractor llm(client, "judge");
  RuleExtractor rules;
  SubsetAccuracy a = aggregate(evaluate(fx.items, fx.responses, rules));
  SubsetAccuracy b = aggregate(evaluate(fx.items, fx.responses, llm));
  CHECK(a == b);
  CHECK(backend->call_count() > 0);
  CHECK_FALSE(llm.extract("   ", fx.items[0]).extracted);
}

TEST_CASE("missing responses score as failures") {
  auto fx = fixtures::eval_fixture(10, 10, 1);
  fx.responses.erase(fx.items[0].item_id);
  RuleExtractor rules;
  auto results = evaluate(fx.items, fx.responses, rules);
  CHECK_FALSE(results[0].correct);
  CHECK_FALSE(results[0].prediction.extracted);
  CHECK(aggregate(results).overall == Cell{9, 10});
}

TEST_CASE("eval item validation") {
  Json good = {{"item_id", "a"}, {"task", "GPS"}, {"answer", 3}, {"skills", {"GEO", "GEO", "ALG"}}};
  EvalItem it = eval_item_from_json(good);
  CHECK(it.answer_kind == AnswerKind::kInteger);
  CHECK(it.gold == "3");
  CHECK(it.skills == std::vector<Skill>{Skill::kGEO, Skill::kALG});
  CHECK(eval_item_from_json(to_json(it)).gold == "3");
  auto rejects = [](Json j) {
    try {
      eval_item_from_json(j);
    } catch (const RecordInvalid&) {
      return true;
    }
    return false;
  };
  Json j = good;
  j["skills"] = Json::array();
  CHECK(rejects(j));
  j = good;
  j["skills"] = {"XYZ"};
  CHECK(rejects(j));
  j = good;
  j["answer_kind"] = "choice";
  CHECK(rejects(j));
  j = good;
  j["answer_kind"] = "integer";
  j["answer"] = "three";
  CHECK(rejects(j));
  j = good;
  j.erase("task");
  CHECK(rejects(j));

  fixtures::TempDir dir("evalitems");
  write_jsonl(dir / "items.jsonl", {good, good});
  try {
    read_eval_items(dir / "items.jsonl");
    FAIL("expected duplicate rejection");
  } catch (const RecordInvalid& e) {
    CHECK(e.line() == 2);
  }
  write_jsonl(dir / "preds.jsonl", {{{"item_id", "a"}, {"response_text", "3"}}});
  CHECK(read_predictions(dir / "preds.jsonl").at("a") == "3");
  write_jsonl(dir / "preds.jsonl", {{{"item_id", "a"}}});
  CHECK_THROWS_AS(read_predictions(dir / "preds.jsonl"), RecordInvalid);
}
