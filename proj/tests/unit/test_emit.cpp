// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "forge/emit.hpp"
#include "forge/error.hpp"
#include "forge/hash.hpp"
#include "forge/text.hpp"
#include "support/corpus_builder.hpp"
#include "support/fixtures.hpp"

using namespace forge;
using fixtures::row;

namespace {

struct Setup {
  fixtures::TempDir dir{"emit"};
  Corpus corpus;
  ScoreTable scores;
};

void build(Setup& s) {
  Json choice = row("c1", "c1.png", "Which line is highest?", "green");
  choice["choices"] = {"red", "green", "blue"};
  s.corpus = load_corpus(fixtures::write_mini(
      s.dir.path(), {{"charts", TaskType::kFQA, {choice}}, {"shapes", TaskType::kGPS, {row("g1", "g1.png", "Find x.", "12")}}}));
  s.scores = ScoreTable({{"c1.png", "h", 1, 2, ScoreSource::kMock, {}}});
}

std::vector<GeneratedQA> pairs() {
  return {{"c1", AugmentationKind::kSeed, "Which line is highest?", "green", ""},
          {"c1", AugmentationKind::kAskImg, "What is the title?", "Sales", "req-a"},
          {"c1", AugmentationKind::kAskImg, "What is the unit?", "USD", "req-a"},
          {"c1", AugmentationKind::kCompQ, "By how much does green exceed red?", "4", "req-b"},
          {"c1", AugmentationKind::kRephQ, "Which line peaks?", "green", "req-c"},
          {"g1", AugmentationKind::kSeed, "Find x.", "12", ""},
          {"g1", AugmentationKind::kSimpQ, "x?", "12", "req-d"}};
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kIoError;
}

}  // namespace

TEST_CASE("choices render with letters") {
  CHECK(render_choices({"red", "green"}) == "(A) red\n(B) green");
  CHECK(render_choices({}).empty());
}

TEST_CASE("records are two-turn conversations anchored on the image") {
  Setup s;
  build(s);
  EmitContext ctx{&s.corpus, &s.scores};
  auto records = build_instruction_records(pairs(), ctx);
  REQUIRE(records.size() == 7);
  const auto& seed = records[0];
  CHECK(seed.id == "c1");
  CHECK(seed.image == "c1.png");
  REQUIRE(seed.conversations.size() == 2);
  CHECK(seed.conversations[0] == Turn{"human", "<image>\nWhich line is highest?\nChoices:\n(A) red\n(B) green\n(C) blue"});
  CHECK(seed.conversations[1] == Turn{"gpt", "green"});
  CHECK(seed.meta.dataset_id == "charts");
  CHECK(seed.meta.task == TaskType::kFQA);
  CHECK(seed.meta.complexity == 2);

  CHECK(records[1].id == "c1#askimg-1");
  CHECK(records[2].id == "c1#askimg-2");
  CHECK(records[1].conversations[0].value == "<image>\nWhat is the title?");
  CHECK(records[3].id == "c1#compq-1");
  CHECK(records[3].conversations[0].value.find("Choices:") == std::string::npos);
  CHECK(records[4].conversations[0].value.find("Choices:") != std::string::npos);
  CHECK(records[6].id == "g1#simpq-1");
  CHECK(records[6].meta.task == TaskType::kGPS);
  CHECK_FALSE(records[6].meta.complexity.has_value());
  for (const auto& r : records) CHECK_NOTHROW(check_conversation(r));
}

TEST_CASE("emit errors") {
  Setup s;
  build(s);
  EmitContext ctx{&s.corpus, nullptr};
  GeneratedQA orphan{"nope", AugmentationKind::kAskImg, "q", "a", "r"};
  CHECK(code_of([&] { to_instruction_record(orphan, "x", ctx); }) == ErrorCode::kDanglingParent);
  fs::remove(s.dir / "images/g1.png");
  GeneratedQA g{"g1", AugmentationKind::kSeed, "q", "a", ""};
  CHECK(code_of([&] { to_instruction_record(g, "x", ctx); }) == ErrorCode::kMissingImage);
  ctx.require_images = false;
  CHECK_NOTHROW(to_instruction_record(g, "x", ctx));
  CHECK(code_of([&] { to_instruction_record(g, "x", EmitContext{}); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("conversation invariants") {
  InstructionRecord r{"id", "a.png", {{"human", "<image>\nq"}, {"gpt", "a"}}, {}};
  CHECK_NOTHROW(check_conversation(r));
  auto broken = [&](auto mutate) {
    InstructionRecord b = r;
    mutate(b);
    try {
      check_conversation(b);
    } catch (const RecordInvalid&) {
      return true;
    }
    return false;
  };
  CHECK(broken([](auto& b) { b.conversations.pop_back(); }));
  CHECK(broken([](auto& b) { b.conversations[1].from = "assistant"; }));
  CHECK(broken([](auto& b) { b.conversations[0].value = "q"; }));
  CHECK(broken([](auto& b) { b.conversations[0].value = "<image><image>"; }));
  CHECK(broken([](auto& b) { b.conversations[1].value = "<image>"; }));
  CHECK(broken([](auto& b) { b.conversations.push_back({"human", "more"}); }));
}

TEST_CASE("dataset file and manifest round trip") {
  Setup s;
  build(s);
  auto records = build_instruction_records(pairs(), {&s.corpus, &s.scores});
  EmittedManifest m = write_dataset(records, s.dir / "out");
  CHECK(m.count == 7);
  CHECK(m.per_kind.at("Seed") == 2);
  CHECK(m.per_kind.at("AskImg") == 2);
  CHECK(m.per_kind.size() == 5);
  CHECK(m.sha256 == sha256_hex(read_file(s.dir / "out" / std::string(kDatasetFile))));
  auto back = read_dataset(s.dir / "out" / std::string(kDatasetFile));
  CHECK(back == records);
  EmittedManifest mb = read_dataset_manifest(s.dir / "out");
  CHECK(mb.sha256 == m.sha256);
  CHECK(mb.per_kind == m.per_kind);
  // The manifest counts agree with a recount of the file.
  std::map<std::string, std::size_t> recount;
  for (const auto& r : back) ++recount[std::string(to_string(r.meta.kind))];
  for (const auto& [kind, n] : mb.per_kind) CHECK(recount[kind] == n);
  Json first = parse_json(split(read_file(s.dir / "out" / std::string(kDatasetFile)), '\n')[6], "row");
  CHECK(first["meta"]["complexity"].is_null());
}

TEST_CASE("empty dataset is valid") {
  fixtures::TempDir dir("emit-empty");
  EmittedManifest m = write_dataset({}, dir.path());
  CHECK(m.count == 0);
  CHECK(read_file(dir / std::string(kDatasetFile)).empty());
  CHECK(m.sha256 == sha256_hex(""));
}

TEST_CASE("composition report") {
  Setup s;
  build(s);
  auto records = build_instruction_records(pairs(), {&s.corpus, &s.scores});
  CompositionTarget target{2, 2, {}};
  auto expected = target_composition(target);
  CHECK(expected.at("Seed") == 2);
  CHECK(expected.at("AskImg") == 4);
  CHECK(expected.at("SimpQ") == 2);
  CHECK(target_composition({2, 2, parse_ops("askimg")}).at("CompQ") == 0);
  DatasetReport rep = dataset_report(records, target);
  CHECK(rep.total == 7);
  CHECK(rep.by_task.at("FQA") == 5);
  CHECK(rep.by_dataset.at("shapes") == 2);
  CHECK(rep.by_complexity.at("2") == 5);
  CHECK(rep.by_complexity.at("unscored") == 2);
  CHECK(to_json(rep)["target_by_kind"]["AskImg"] == 4);
  std::string text = render_report(rep);
  CHECK(text.find("total 7") != std::string::npos);
  CHECK(text.find("AskImg") != std::string::npos);
  CHECK_FALSE(to_json(dataset_report(records)).contains("target_by_kind"));
}
