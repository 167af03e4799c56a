// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/pipeline.hpp"

#include <algorithm>
#include <set>

#include "forge/clustering.hpp"
#include "forge/emit.hpp"
#include "forge/error.hpp"
#include "forge/genclient.hpp"
#include "forge/hash.hpp"
#include "forge/scoring.hpp"
#include "forge/text.hpp"

#ifndef FORGE_VERSION
#define FORGE_VERSION "0.0.0"
#endif

namespace forge {

namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::kConfigInvalid, what); }

void check_keys(const Json& section, const std::string& name, std::initializer_list<std::string_view> allowed) {
  if (!section.is_object()) config_error("config section '" + name + "' must be an object");
  for (const auto& [key, value] : section.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      config_error("unknown config key '" + name + "." + key + "'");
    }
  }
}

fs::path resolve(const fs::path& p, const fs::path& base) {
  if (p.empty() || p.is_absolute()) return p;
  return (base / p).lexically_normal();
}

}  // namespace

std::string resolve_backend_spec(const std::string& spec, const fs::path& base_dir) {
  if (spec.rfind("mock:table:", 0) == 0) {
    return "mock:table:" + resolve(spec.substr(11), base_dir).string();
  }
  if (spec.rfind("mock:", 0) == 0) {
    std::string rest = spec.substr(5);
    if (rest == "hash" || rest.rfind("const:", 0) == 0) return spec;
    return "mock:" + resolve(rest, base_dir).string();
  }
  return spec;
}

PipelineConfig pipeline_config_from_json(const Json& j, const fs::path& base_dir) {
  PipelineConfig c;
  try {
    check_keys(j, "<root>", {"paths", "selection", "clustering", "augmentation", "backend"});
    for (const char* required : {"paths", "selection", "clustering"}) {
      if (!j.contains(required)) config_error(std::string("config needs a '") + required + "' section");
    }

    const Json& paths = j.at("paths");
    check_keys(paths, "paths", {"manifest", "image_root", "cache_dir", "out_dir", "strict_images"});
    if (!paths.contains("manifest") || !paths.contains("out_dir")) config_error("paths.manifest and paths.out_dir are required");
    c.manifest = resolve(paths.at("manifest").get<std::string>(), base_dir);
    c.out_dir = resolve(paths.at("out_dir").get<std::string>(), base_dir);
    if (paths.contains("image_root")) c.image_root = resolve(paths.at("image_root").get<std::string>(), base_dir);
    c.cache_dir = paths.contains("cache_dir") ? resolve(paths.at("cache_dir").get<std::string>(), base_dir)
                                              : c.out_dir / "cache";
    c.strict_images = paths.value("strict_images", false);

    const Json& sel = j.at("selection");
    check_keys(sel, "selection", {"enabled", "ratio", "budget", "take_all_top_stratum", "seed"});
    if (!sel.contains("seed")) config_error("selection.seed must be set explicitly");
    c.selection_enabled = sel.value("enabled", true);
    if (sel.contains("ratio")) c.selection.ratio = parse_ratio(sel.at("ratio").get<std::string>());
    if (sel.contains("budget")) c.selection.budget = sel.at("budget").get<std::uint64_t>();
    c.selection.take_all_top_stratum = sel.value("take_all_top_stratum", true);
    c.selection.seed = sel.at("seed").get<std::uint64_t>();
    validate(c.selection);

    const Json& cl = j.at("clustering");
    check_keys(cl, "clustering", {"k", "seed"});
    if (!cl.contains("seed")) config_error("clustering.seed must be set explicitly");
    c.clusters = cl.value("k", kDefaultClusters);
    if (c.clusters == 0) config_error("clustering.k must be >= 1");
    c.cluster_seed = cl.at("seed").get<std::uint64_t>();

    if (j.contains("augmentation")) {
      const Json& a = j.at("augmentation");
      check_keys(a, "augmentation",
                 {"ops", "n_per_image", "model_id", "max_failure_rate", "max_parse_retries", "dedup", "parallelism"});
      if (a.contains("ops")) c.augment.ops = parse_ops(a.at("ops").get<std::string>());
      c.augment.n_per_image = a.value("n_per_image", c.augment.n_per_image);
      c.augment.model_id = a.value("model_id", c.augment.model_id);
      c.augment.max_failure_rate = a.value("max_failure_rate", c.augment.max_failure_rate);
      c.augment.max_parse_retries = a.value("max_parse_retries", c.augment.max_parse_retries);
      c.augment.parallelism = a.value("parallelism", c.augment.parallelism);
      c.dedup = a.value("dedup", true);
    }
    if (c.augment.ops.askimg && c.augment.n_per_image == 0) config_error("augmentation.n_per_image must be >= 1");

    if (j.contains("backend")) {
      const Json& b = j.at("backend");
      check_keys(b, "backend", {"scorer", "vlm", "rpm", "max_in_flight", "api_key_env", "score_parallelism"});
      if (b.contains("scorer")) c.scorer = resolve_backend_spec(b.at("scorer").get<std::string>(), base_dir);
      if (b.contains("vlm")) c.vlm = resolve_backend_spec(b.at("vlm").get<std::string>(), base_dir);
      c.rpm = b.value("rpm", 0.0);
      c.max_in_flight = b.value("max_in_flight", c.max_in_flight);
      c.api_key_env = b.value("api_key_env", c.api_key_env);
      c.score_parallelism = b.value("score_parallelism", c.score_parallelism);
    }
    if (c.max_in_flight == 0) config_error("backend.max_in_flight must be >= 1");
  } catch (const Json::exception& e) {
    config_error(std::string("config: ") + e.what());
  }
  return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    config_error(e.what());
  }
  Json j;
  try {
    j = parse_json(text, path.string());
  } catch (const Error& e) {
    config_error(e.what());
  }
  return pipeline_config_from_json(j, fs::absolute(path).parent_path());
}

Json to_json(const PipelineConfig& c) {
  return {
      {"paths",
       {{"manifest", c.manifest.string()},
        {"image_root", c.image_root.string()},
        {"cache_dir", c.cache_dir.string()},
        {"out_dir", c.out_dir.string()},
        {"strict_images", c.strict_images}}},
      {"selection",
       {{"enabled", c.selection_enabled},
        {"ratio", format_ratio(c.selection.ratio)},
        {"budget", c.selection.budget},
        {"take_all_top_stratum", c.selection.take_all_top_stratum},
        {"seed", c.selection.seed}}},
      {"clustering", {{"k", c.clusters}, {"seed", c.cluster_seed}}},
      {"augmentation",
       {{"ops", format_ops(c.augment.ops)},
        {"n_per_image", c.augment.n_per_image},
        {"model_id", c.augment.model_id},
        {"max_failure_rate", c.augment.max_failure_rate},
        {"max_parse_retries", c.augment.max_parse_retries},
        {"dedup", c.dedup},
        {"parallelism", c.augment.parallelism}}},
      {"backend",
       {{"scorer", c.scorer},
        {"vlm", c.vlm},
        {"rpm", c.rpm},
        {"max_in_flight", c.max_in_flight},
        {"api_key_env", c.api_key_env},
        {"score_parallelism", c.score_parallelism}}},
  };
}

std::string config_hash(const PipelineConfig& config) { return sha256_hex(dump_json(to_json(config))); }

Json to_json(const RunManifest& m) {
  Json stages = Json::array();
  for (const auto& s : m.stages) {
    Json j = {{"name", s.name}, {"status", s.status}, {"inputs_sha256", s.inputs_sha256}, {"outputs", s.outputs}};
    if (s.error) j["error"] = *s.error;
    stages.push_back(j);
  }
  Json j = {{"tool", "forge"},
            {"tool_version", m.tool_version},
            {"config_sha256", m.config_sha256},
            {"demo_pool_policy", m.demo_pool_policy},
            {"stages", stages}};
  j["final_dataset_sha256"] = m.final_dataset_sha256 ? Json(*m.final_dataset_sha256) : Json(nullptr);
  return j;
}

namespace {

constexpr std::string_view kStageFile = "stage.json";

// Hash of a backend spec plus, for file-backed mocks, the file contents.
std::string backend_fingerprint(const std::string& spec) {
  Sha256 h;
  h.update_field(spec);
  std::string path;
  if (spec.rfind("mock:table:", 0) == 0) path = spec.substr(11);
  else if (spec.rfind("mock:", 0) == 0) path = spec.substr(5);
  if (!path.empty() && fs::is_regular_file(path)) h.update_field(read_file(path));
  return to_hex(h.finish());
}

std::map<std::string, std::string> hash_outputs(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().filename() != kStageFile) files.push_back(e.path());
  }
  std::map<std::string, std::string> out;
  for (const auto& f : files) out[fs::relative(f, dir).generic_string()] = sha256_hex(read_file(f));
  return out;
}

std::string outputs_digest(const std::map<std::string, std::string>& outputs) {
  Sha256 h;
  for (const auto& [name, sha] : outputs) h.update_field(name).update_field(sha);
  return to_hex(h.finish());
}

std::optional<StageStatus> load_valid_stage(const fs::path& dir, const std::string& name, const std::string& inputs) {
  fs::path file = dir / kStageFile;
  if (!fs::is_regular_file(file)) return std::nullopt;
  try {
    Json j = parse_json(read_file(file), file.string());
    if (j.at("inputs_sha256").get<std::string>() != inputs) return std::nullopt;
    StageStatus s;
    s.name = name;
    s.status = "skipped";
    s.inputs_sha256 = inputs;
    s.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
    if (hash_outputs(dir) != s.outputs) return std::nullopt;
    return s;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

class Runner {
 public:
  Runner(const PipelineConfig& config, const RunOptions& options) : config_(config), options_(options) {
    manifest_.tool_version = FORGE_VERSION;
    manifest_.config_sha256 = config_hash(config);
    manifest_.demo_pool_policy = std::string(kDemoPoolPolicy);
    for (auto name : kStages) manifest_.stages.push_back({std::string(name), "not_run", "", {}, std::nullopt});
  }

  RunManifest run() {
    fs::create_directories(config_.out_dir);
    std::string upstream;
    for (std::size_t i = 0; i < kStages.size(); ++i) {
      std::string name(kStages[i]);
      std::string inputs = stage_inputs(name, upstream);
      fs::path dir = config_.out_dir / name;
      StageStatus& status = manifest_.stages[i];
      if (!options_.force) {
        if (auto valid = load_valid_stage(dir, name, inputs)) {
          status = *valid;
          log(name + ": up to date, skipped");
          upstream = outputs_digest(status.outputs);
          continue;
        }
      }
      log(name + ": running");
      try {
        fs::remove_all(dir);
        fs::create_directories(dir);
        run_stage(name, dir);
        status.name = name;
        status.status = "completed";
        status.inputs_sha256 = inputs;
        status.outputs = hash_outputs(dir);
        Json stage = {{"stage", name}, {"inputs_sha256", inputs}, {"outputs", status.outputs}};
        write_file_atomic(dir / kStageFile, dump_json_pretty(stage));
      } catch (const Error& e) {
        fail(status, name, e);
      } catch (const std::exception& e) {
        fail(status, name, Error(ErrorCode::kStageFailed, e.what()));
      }
      upstream = outputs_digest(status.outputs);
    }
    auto emitted = read_dataset_manifest(config_.out_dir / "emit");
    manifest_.final_dataset_sha256 = emitted.sha256;
    write_manifest();
    return manifest_;
  }

 private:
  [[noreturn]] void fail(StageStatus& status, const std::string& name, const Error& e) {
    status.status = "failed";
    status.error = std::string(error_code_name(e.code())) + ": " + e.what();
    log(name + ": failed: " + e.what());
    write_manifest();
    throw StageError(name, e);
  }

  void log(const std::string& line) const {
    if (options_.log) options_.log(line);
  }

  void write_manifest() { write_file_atomic(config_.out_dir / "run_manifest.json", dump_json_pretty(to_json(manifest_))); }

  std::string stage_inputs(const std::string& name, const std::string& upstream) const {
    Json cfg = to_json(config_);
    Sha256 h;
    h.update_field(name).update_field(upstream).update_field(FORGE_VERSION);
    if (name == "ingest") {
      h.update_field(dump_json(cfg["paths"]));
      // Source data by content.
      if (fs::is_regular_file(config_.manifest)) {
        h.update_field(read_file(config_.manifest));
        try {
          for (const auto& d : read_manifest(config_.manifest).datasets) {
            if (fs::is_regular_file(d.records_file)) h.update_field(read_file(d.records_file));
          }
        } catch (const Error&) {
          // The stage itself reports the invalid manifest.
        }
      }
    } else if (name == "score") {
      h.update_field(backend_fingerprint(config_.scorer));
    } else if (name == "select") {
      h.update_field(dump_json(cfg["selection"]));
    } else if (name == "cluster") {
      h.update_field(dump_json(cfg["clustering"]));
    } else if (name == "augment") {
      Json a = cfg["augmentation"];
      a.erase("parallelism");
      h.update_field(dump_json(a)).update_field(backend_fingerprint(config_.vlm));
    }
    return to_hex(h.finish());
  }

  fs::path stage_dir(std::string_view name) const { return config_.out_dir / std::string(name); }

  void run_stage(const std::string& name, const fs::path& dir) {
    if (name == "ingest") return ingest(dir);
    if (name == "score") return score(dir);
    if (name == "select") return select(dir);
    if (name == "cluster") return cluster(dir);
    if (name == "augment") return augment(dir);
    return emit(dir);
  }

  void ingest(const fs::path& dir) {
    Corpus corpus = load_corpus(config_.manifest, {config_.strict_images});
    if (!config_.image_root.empty()) {
      corpus = Corpus(config_.image_root, corpus.datasets(), corpus.records());
    }
    write_corpus(corpus, dir / "corpus");
    write_file_atomic(dir / "stats.json", dump_json_pretty(to_json(corpus_stats(corpus))));
    log("ingest: " + std::to_string(corpus.size()) + " records");
  }

  void score(const fs::path& dir) {
    Corpus corpus = read_corpus(stage_dir("ingest") / "corpus");
    auto backend = make_scorer_backend(config_.scorer);
    ScoreOptions opts;
    opts.parallelism = config_.score_parallelism;
    ScoreTable table = score_corpus(corpus, *backend, opts);
    write_score_table(table, dir / "scores.jsonl");
    std::size_t failed = std::count_if(table.rows().begin(), table.rows().end(), [](const auto& r) { return !r.ok(); });
    log("score: " + std::to_string(table.size()) + " images, " + std::to_string(failed) + " failed");
  }

  void select(const fs::path& dir) {
    Corpus corpus = read_corpus(stage_dir("ingest") / "corpus");
    Corpus selected;
    if (config_.selection_enabled) {
      ScoreTable scores = read_score_table(stage_dir("score") / "scores.jsonl");
      SelectionPlan plan = compute_quotas(availability_of(corpus, scores), config_.selection);
      selected = stratified_sample(corpus, scores, plan, config_.selection.seed);
      write_file_atomic(dir / "plan.json", dump_json_pretty(plan_summary_json(plan)));
      write_jsonl(dir / "plan_rows.jsonl", plan_rows(plan));
    } else {
      selected = random_sample(corpus, config_.selection.budget, config_.selection.seed);
    }
    write_corpus(selected, dir / "selected");
    log("select: " + std::to_string(selected.size()) + " seed records");
  }

  void cluster(const fs::path& dir) {
    Corpus selected = read_corpus(stage_dir("select") / "selected");
    ClusteringResult result = cluster_selected(selected, config_.cluster_seed, config_.clusters);
    std::vector<Json> rows;
    for (const auto& a : result.assignments) rows.push_back(to_json(a));
    write_jsonl(dir / "clusters.jsonl", rows);
    for (const auto& [task, pool] : result.pools) {
      write_file_atomic(dir / "pools" / (std::string(to_string(task)) + ".json"), dump_json_pretty(to_json(pool)));
    }
    log("cluster: " + std::to_string(result.pools.size()) + " demo pools");
  }

  void augment(const fs::path& dir) {
    Corpus selected = read_corpus(stage_dir("select") / "selected");
    std::map<TaskType, DemoPool> pools;
    fs::path pool_dir = stage_dir("cluster") / "pools";
    if (fs::is_directory(pool_dir)) {
      for (const auto& e : fs::directory_iterator(pool_dir)) {
        DemoPool pool = demo_pool_from_json(parse_json(read_file(e.path()), e.path().string()));
        pools[pool.task] = std::move(pool);
      }
    }
    bool any_op = config_.augment.ops.askimg || config_.augment.ops.compq || config_.augment.ops.rephq ||
                  config_.augment.ops.simpq;
    std::shared_ptr<VlmBackend> backend;
    if (any_op) {
      if (config_.vlm.empty()) config_error("backend.vlm is required when augmentation operators are enabled");
      backend = make_vlm_backend(config_.vlm, config_.api_key_env);
    } else {
      // Seed pairs only; the client is never called.
      backend = std::make_shared<MockVlmBackend>(MockScript{});
    }
    ClientOptions copts;
    copts.cache_dir = config_.cache_dir;
    copts.rpm = config_.rpm;
    copts.max_in_flight = config_.max_in_flight;
    VlmClient client(backend, copts);
    AugmentedCorpus out = synthesize(selected, client, pools, config_.augment);
    std::size_t removed = 0;
    if (config_.dedup) {
      std::size_t before = out.pairs.size();
      out = dedup(out, image_hashes(selected));
      removed = before - out.pairs.size();
    }
    write_augmented(dir / "augmented.jsonl", out.pairs);
    std::vector<Json> log_rows;
    for (const auto& e : out.log) log_rows.push_back(to_json(e));
    write_jsonl(dir / "augment_log.jsonl", log_rows);
    Json summary = {{"pairs", out.pairs.size()},
                    {"operator_calls", out.operator_calls},
                    {"failed_calls", out.failed_calls},
                    {"removed_by_dedup", removed}};
    write_file_atomic(dir / "summary.json", dump_json_pretty(summary));
    log("augment: " + std::to_string(out.pairs.size()) + " pairs");
  }

  void emit(const fs::path& dir) {
    Corpus selected = read_corpus(stage_dir("select") / "selected");
    auto pairs = read_augmented(stage_dir("augment") / "augmented.jsonl");
    std::optional<ScoreTable> scores;
    fs::path score_file = stage_dir("score") / "scores.jsonl";
    if (fs::is_regular_file(score_file)) scores = read_score_table(score_file);
    EmitContext ctx;
    ctx.selected = &selected;
    ctx.scores = scores ? &*scores : nullptr;
    auto records = build_instruction_records(pairs, ctx);
    EmittedManifest m = write_dataset(records, dir);
    CompositionTarget target{selected.size(), config_.augment.n_per_image, config_.augment.ops};
    DatasetReport report = dataset_report(records, target);
    write_file_atomic(dir / "report.json", dump_json_pretty(to_json(report)));
    write_file_atomic(dir / "report.txt", render_report(report));
    log("emit: " + std::to_string(m.count) + " records, sha256 " + m.sha256);
  }

  const PipelineConfig& config_;
  const RunOptions& options_;
  RunManifest manifest_;
};

}  // namespace

RunManifest run_all(const PipelineConfig& config, const RunOptions& options) { return Runner(config, options).run(); }

}  // namespace forge
