// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>

#include "forge/emit.hpp"
#include "forge/error.hpp"
#include "forge/fixture.hpp"
#include "forge/pipeline.hpp"
#include "support/fixtures.hpp"

using namespace forge;

namespace {

Json minimal_config() {
  return {{"paths", {{"manifest", "m.json"}, {"out_dir", "out"}}},
          {"selection", {{"seed", 1}}},
          {"clustering", {{"seed", 2}}}};
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

std::map<std::string, std::string> statuses(const RunManifest& m) {
  std::map<std::string, std::string> out;
  for (const auto& s : m.stages) out[s.name] = s.status;
  return out;
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(FORGE_BIN) + " " + args + " >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("config parsing resolves paths and applies defaults") {
  PipelineConfig c = pipeline_config_from_json(minimal_config(), "/base");
  CHECK(c.manifest == "/base/m.json");
  CHECK(c.out_dir == "/base/out");
  CHECK(c.cache_dir == "/base/out/cache");
  CHECK(c.selection.ratio == StratumCounts{2, 3, 4, 1});
  CHECK(c.selection.budget == 40000);
  CHECK(c.clusters == 5);
  CHECK(c.augment.n_per_image == 5);
  CHECK(c.scorer == "mock:hash");
  CHECK(resolve_backend_spec("mock:table:s.jsonl", "/b") == "mock:table:/b/s.jsonl");
  CHECK(resolve_backend_spec("mock:script.json", "/b") == "mock:/b/script.json");
  CHECK(resolve_backend_spec("mock:const:1,2", "/b") == "mock:const:1,2");
  CHECK(resolve_backend_spec("http://h:1", "/b") == "http://h:1");
  CHECK(config_hash(c) == config_hash(pipeline_config_from_json(minimal_config(), "/base")));
  Json other = minimal_config();
  other["selection"]["seed"] = 3;
  CHECK(config_hash(c) != config_hash(pipeline_config_from_json(other, "/base")));
}

TEST_CASE("config errors") {
  auto bad = [](auto mutate) {
    Json j = minimal_config();
    mutate(j);
    return code_of([&] { pipeline_config_from_json(j, "/b"); });
  };
  CHECK(bad([](Json& j) { j["selection"].erase("seed"); }) == ErrorCode::kConfigInvalid);
  CHECK(bad([](Json& j) { j["clustering"].erase("seed"); }) == ErrorCode::kConfigInvalid);
  CHECK(bad([](Json& j) { j["paths"].erase("out_dir"); }) == ErrorCode::kConfigInvalid);
  CHECK(bad([](Json& j) { j["paths"]["outdir"] = "x"; }) == ErrorCode::kConfigInvalid);
  CHECK(bad([](Json& j) { j["extra"] = 1; }) == ErrorCode::kConfigInvalid);
  CHECK(bad([](Json& j) { j["selection"]["ratio"] = "0:0:0:0"; }) == ErrorCode::kConfigInvalid);
  CHECK(bad([](Json& j) { j["selection"]["budget"] = "many"; }) == ErrorCode::kConfigInvalid);
  CHECK(bad([](Json& j) { j["clustering"]["k"] = 0; }) == ErrorCode::kConfigInvalid);
  CHECK(bad([](Json& j) { j["augmentation"] = {{"n_per_image", 0}}; }) == ErrorCode::kConfigInvalid);
  CHECK(bad([](Json& j) { j["augmentation"] = {{"ops", "askimg,magic"}}; }) == ErrorCode::kInvalidKind);
  CHECK(bad([](Json& j) { j["backend"] = {{"max_in_flight", 0}}; }) == ErrorCode::kConfigInvalid);
  fixtures::TempDir dir("cfg");
  CHECK(code_of([&] { load_pipeline_config(dir / "missing.json"); }) == ErrorCode::kConfigInvalid);
  write_file_atomic(dir / "c.json", "{oops");
  CHECK(code_of([&] { load_pipeline_config(dir / "c.json"); }) == ErrorCode::kConfigInvalid);
}

TEST_CASE("fixture run, skip on rerun, partial rerun on config change") {
  fixtures::TempDir dir("pipe");
  auto paths = write_fixture(dir.path(), {});
  PipelineConfig cfg = load_pipeline_config(paths.config);
  RunManifest first = run_all(cfg);
  for (const auto& [name, status] : statuses(first)) CHECK(status == "completed");
  EmittedManifest m = read_dataset_manifest(cfg.out_dir / "emit");
  CHECK(m.count == 900);
  CHECK(m.per_kind.at("Seed") == 100);
  CHECK(m.per_kind.at("AskImg") == 500);
  CHECK(first.final_dataset_sha256 == m.sha256);
  CHECK(fs::exists(cfg.out_dir / "run_manifest.json"));
  CHECK(fs::exists(cfg.out_dir / "cluster" / "clusters.jsonl"));

  RunManifest again = run_all(cfg);
  for (const auto& [name, status] : statuses(again)) CHECK(status == "skipped");
  CHECK(again.final_dataset_sha256 == first.final_dataset_sha256);

  RunManifest forced = run_all(cfg, {.force = true});
  for (const auto& [name, status] : statuses(forced)) CHECK(status == "completed");
  CHECK(forced.final_dataset_sha256 == first.final_dataset_sha256);

  // A tampered output invalidates its stage and everything downstream of it.
  write_file_atomic(cfg.out_dir / "cluster" / "clusters.jsonl", "tampered\n");
  auto repaired = statuses(run_all(cfg));
  CHECK(repaired["select"] == "skipped");
  CHECK(repaired["cluster"] == "completed");

  cfg.augment.ops = parse_ops("askimg");
  RunManifest narrowed = run_all(cfg);
  auto s = statuses(narrowed);
  CHECK(s["ingest"] == "skipped");
  CHECK(s["cluster"] == "skipped");
  CHECK(s["augment"] == "completed");
  EmittedManifest askimg_only = read_dataset_manifest(cfg.out_dir / "emit");
  CHECK(askimg_only.count == 600);
  CHECK(askimg_only.per_kind.at("CompQ") == 0);
}

TEST_CASE("a failing stage is recorded and reported") {
  fixtures::TempDir dir("pipe-fail");
  auto paths = write_fixture(dir.path(), {});
  PipelineConfig cfg = load_pipeline_config(paths.config);
  cfg.scorer = "http://127.0.0.1:1";
  try {
    run_all(cfg);
    FAIL("expected StageError");
  } catch (const StageError& e) {
    CHECK(e.stage() == "score");
    CHECK(e.cause_code() == ErrorCode::kBackendUnavailable);
  }
  Json manifest = parse_json(read_file(cfg.out_dir / "run_manifest.json"), "manifest");
  CHECK(manifest["stages"][0]["status"] == "completed");
  CHECK(manifest["stages"][1]["status"] == "failed");
  CHECK(manifest["stages"][2]["status"] == "not_run");
}

TEST_CASE("command-line exit codes") {
  fixtures::TempDir dir("cli");
  auto paths = write_fixture(dir.path(), {});
  const std::string cfg = paths.config.string();
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("") != 0);
  CHECK(run_cli("select --bogus") == 2);
  CHECK(run_cli("run-all --config " + (dir / "nope.json").string()) == 2);
  CHECK(run_cli("run-all --quiet --config " + cfg + " --scorer http://127.0.0.1:1") ==
        exit_status(ErrorCode::kBackendUnavailable));
  CHECK(run_cli("run-all --quiet --config " + cfg + " --ops askimg,teleport") == exit_status(ErrorCode::kInvalidKind));
  CHECK(run_cli("run-all --quiet --config " + cfg) == 0);
  CHECK(read_dataset_manifest(dir / "out" / "emit").count == 900);
  CHECK(run_cli("report --dataset " + (dir / "out" / "emit").string()) == 0);
  CHECK(run_cli("ingest --manifest " + (dir / "absent.json").string() + " --out " + (dir / "c").string()) ==
        exit_status(ErrorCode::kManifestInvalid));
}
