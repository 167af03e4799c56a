// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "forge/error.hpp"
#include "forge/ingest.hpp"
#include "support/corpus_builder.hpp"
#include "support/fixtures.hpp"

using namespace forge;
using fixtures::row;

namespace {

RecordInvalid load_failure(const fs::path& manifest, const LoadOptions& opts = {}) {
  try {
    load_corpus(manifest, opts);
  } catch (const RecordInvalid& e) {
    return e;
  }
  FAIL("expected RecordInvalid");
  return RecordInvalid("", 0, "");
}

ErrorCode error_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kIoError;
}

}  // namespace

TEST_CASE("answer kind inference") {
  CHECK(infer_answer_kind("12", false) == AnswerKind::kInteger);
  CHECK(infer_answer_kind("-3.25", false) == AnswerKind::kFloat);
  CHECK(infer_answer_kind("blue", false) == AnswerKind::kFreeText);
  CHECK(infer_answer_kind("12", true) == AnswerKind::kChoice);
  CHECK(parse_task("MWP") == TaskType::kMWP);
  CHECK_FALSE(parse_task("OCR").has_value());
}

TEST_CASE("load a small corpus") {
  fixtures::TempDir dir("ingest");
  Json choice = row("c1", "c1.png", "Which colour?", "red");
  choice["choices"] = {"red", "green"};
  Json list = row("l1", "l1.png", "Which years?", "");
  list["answer"] = Json::array({2001, 2003});
  list["answer_kind"] = "list";
  Json multi = row("m1", "m1.png", "What is written?", "");
  multi["answer"] = Json::array({"", "STOP", "stop"});
  auto manifest = fixtures::write_mini(
      dir.path(), {{"charts", TaskType::kFQA, {choice, row("n1", "c1.png", "How many bars?", "4"), list}},
                   {"signs", TaskType::kVQA, {multi}}});
  Corpus corpus = load_corpus(manifest, {.strict_images = true});
  REQUIRE(corpus.size() == 4);
  const auto* c = corpus.find("c1");
  REQUIRE(c);
  CHECK(c->answer_kind == AnswerKind::kChoice);
  CHECK(c->choices == std::vector<std::string>{"red", "green"});
  CHECK(c->dataset_id == "charts");
  CHECK(c->task == TaskType::kFQA);
  CHECK(corpus.find("n1")->answer_kind == AnswerKind::kInteger);
  CHECK(corpus.find("l1")->answer == "[2001, 2003]");
  CHECK(corpus.find("m1")->answer == "STOP");
  CHECK(corpus.distinct_images() == std::vector<std::string>{"c1.png", "l1.png", "m1.png"});
  CHECK(corpus.task_of("signs") == TaskType::kVQA);

  auto stats = corpus_stats(corpus);
  CHECK(stats.total == 4);
  CHECK(stats.distinct_images == 3);
  CHECK(stats.per_dataset.at("charts") == 3);
  CHECK(stats.per_task.at(TaskType::kVQA) == 1);

  write_corpus(corpus, dir / "out");
  Corpus back = read_corpus(dir / "out");
  CHECK(back.records() == corpus.records());
  CHECK(serialize_records(back) == serialize_records(corpus));
}

TEST_CASE("record validation reports dataset and line") {
  fixtures::TempDir dir("ingest-bad");
  struct Case {
    Json bad;
    std::string reason;
  };
  Json bad_choice = row("x", "x.png", "Pick", "blue");
  bad_choice["choices"] = {"red", "green"};
  Json stray_choices = row("x", "x.png", "Pick", "3");
  stray_choices["choices"] = {"3", "4"};
  stray_choices["answer_kind"] = "integer";
  Json escape = row("x", "../x.png", "Pick", "3");
  std::vector<Case> cases = {
      {row("x", "x.png", "   ", "3"), "empty question"},
      {bad_choice, "answer is not one of the choices"},
      {stray_choices, "choices present on a non-choice answer"},
      {escape, "image_ref must be a relative path"},
      {row("a", "x.png", "Again?", "3"), "duplicate record_id"},
  };
  for (const auto& c : cases) {
    CAPTURE(c.reason);
    auto manifest = fixtures::write_mini(dir.path(), {{"d", TaskType::kGPS, {row("a", "a.png", "Ok?", "1"), c.bad}}});
    auto e = load_failure(manifest);
    CHECK(e.dataset_id() == "d");
    CHECK(e.line() == 2);
    CHECK(e.reason().find(c.reason) != std::string::npos);
    CHECK(e.code() == ErrorCode::kRecordInvalid);
  }
}

TEST_CASE("duplicate ids across datasets are rejected") {
  fixtures::TempDir dir("ingest-dup");
  auto manifest = fixtures::write_mini(dir.path(), {{"one", TaskType::kGPS, {row("same", "a.png", "q", "1")}},
                                                    {"two", TaskType::kMWP, {row("same", "b.png", "q", "1")}}});
  auto e = load_failure(manifest);
  CHECK(e.dataset_id() == "two");
  CHECK(e.line() == 1);
}

TEST_CASE("manifest problems") {
  fixtures::TempDir dir("manifest");
  CHECK(error_code([&] { read_manifest(dir / "absent.json"); }) == ErrorCode::kManifestInvalid);
  write_file_atomic(dir / "m.json", "{\"schema_version\": 2, \"image_root\": \".\", \"datasets\": []}");
  CHECK(error_code([&] { read_manifest(dir / "m.json"); }) == ErrorCode::kManifestInvalid);
  write_file_atomic(dir / "m.json",
                    R"({"schema_version": 1, "image_root": ".", "datasets": [{"dataset_id": "a", "task": "FQA", "records_file": "nope.jsonl"}]})");
  CHECK(error_code([&] { read_manifest(dir / "m.json"); }) == ErrorCode::kManifestInvalid);
  write_file_atomic(dir / "r.jsonl", "");
  write_file_atomic(dir / "m.json",
                    R"({"schema_version": 1, "image_root": ".", "datasets": [{"dataset_id": "a", "task": "OCR", "records_file": "r.jsonl"}]})");
  CHECK(error_code([&] { read_manifest(dir / "m.json"); }) == ErrorCode::kManifestInvalid);
  write_file_atomic(dir / "m.json", "{not json");
  CHECK(error_code([&] { read_manifest(dir / "m.json"); }) == ErrorCode::kManifestInvalid);
}

TEST_CASE("strict image checking") {
  fixtures::TempDir dir("strict");
  auto manifest = fixtures::write_mini(dir.path(), {{"d", TaskType::kTQA, {row("a", "a.png", "q", "x")}}}, {"a.png"});
  CHECK(load_corpus(manifest).size() == 1);
  CHECK(error_code([&] { load_corpus(manifest, {.strict_images = true}); }) == ErrorCode::kMissingImage);
}

TEST_CASE("invalid JSON line") {
  fixtures::TempDir dir("badjson");
  auto manifest = fixtures::write_mini(dir.path(), {{"d", TaskType::kTQA, {row("a", "a.png", "q", "x")}}});
  write_file_atomic(dir / "d.jsonl", "{\"record_id\": \"a\"}\n\n{oops\n");
  auto e = load_failure(manifest);
  CHECK(e.line() == 1);  // missing fields on line 1 come first
  write_file_atomic(dir / "d.jsonl", dump_json(row("a", "a.png", "q", "x")) + "\n\n{oops\n");
  CHECK(load_failure(manifest).line() == 3);
}
