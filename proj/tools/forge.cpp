// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>
#include <iostream>

#include "forge/augment.hpp"
#include "forge/clustering.hpp"
#include "forge/emit.hpp"
#include "forge/error.hpp"
#include "forge/evalkit.hpp"
#include "forge/genclient.hpp"
#include "forge/ingest.hpp"
#include "forge/pipeline.hpp"
#include "forge/scoring.hpp"
#include "forge/selection.hpp"

#ifndef FORGE_VERSION
#define FORGE_VERSION "0.0.0"
#endif

namespace {

using namespace forge;

struct ClientFlags {
  std::string backend;
  double rpm = 0;
  std::string cache_dir;
  std::size_t max_in_flight = 4;
  std::string model = "gpt-4-vision-preview";
  std::string api_key_env = "FORGE_API_KEY";

  void add(CLI::App* cmd, bool backend_required) {
    auto* b = cmd->add_option("--backend", backend, "VLM backend: mock:<script.json> or an http(s) chat-completions URL");
    if (backend_required) b->required();
    cmd->add_option("--rpm", rpm, "Requests per minute limit (0 = unlimited)")->capture_default_str();
    cmd->add_option("--cache-dir", cache_dir, "Response cache directory (empty = in-memory only)");
    cmd->add_option("--max-in-flight", max_in_flight, "Concurrent upstream requests")->capture_default_str();
    cmd->add_option("--model", model, "Model id sent to the backend")->capture_default_str();
    cmd->add_option("--api-key-env", api_key_env, "Environment variable holding the API key")->capture_default_str();
  }

  VlmClient make() const {
    ClientOptions o;
    o.cache_dir = cache_dir;
    o.rpm = rpm;
    o.max_in_flight = max_in_flight;
    return VlmClient(make_vlm_backend(backend, api_key_env), o);
  }
};

void print_json(const Json& j) { std::cout << dump_json_pretty(j); }

int run(int argc, char** argv) {
  CLI::App app{"forge: multimodal math QA data selection and augmentation pipeline"};
  app.set_version_flag("--version", FORGE_VERSION);
  app.require_subcommand(1);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Load and validate source datasets into a corpus directory");
  std::string ingest_manifest, ingest_out;
  bool strict_images = false;
  ingest->add_option("--manifest", ingest_manifest, "Dataset manifest JSON")->required();
  ingest->add_option("--out", ingest_out, "Output corpus directory")->required();
  ingest->add_flag("--strict-images", strict_images, "Fail when a referenced image file is missing");
  ingest->callback([&] {
    Corpus corpus = load_corpus(ingest_manifest, {strict_images});
    write_corpus(corpus, ingest_out);
    print_json(to_json(corpus_stats(corpus)));
  });

  // annotate
  auto* annotate = app.add_subcommand("annotate", "Label a random image sample with clarity/complexity via the VLM");
  std::string ann_corpus, ann_out;
  std::size_t ann_n = 0;
  std::uint64_t ann_seed = 0;
  ClientFlags ann_client;
  annotate->add_option("--corpus", ann_corpus, "Corpus directory from `forge ingest`")->required();
  annotate->add_option("--n", ann_n, "Number of images to annotate")->required();
  annotate->add_option("--seed", ann_seed, "Sampling seed")->required();
  annotate->add_option("--out", ann_out, "Output JSONL of labelled images")->required();
  ann_client.add(annotate, true);
  annotate->callback([&] {
    Corpus corpus = read_corpus(ann_corpus);
    auto refs = sample_annotation_set(corpus, ann_n, ann_seed);
    VlmClient client = ann_client.make();
    AnnotateOptions opts;
    opts.model_id = ann_client.model;
    AnnotationResult result = annotate_images(corpus, refs, client, opts);
    std::vector<Json> rows;
    for (const auto& img : result.labeled) rows.push_back(to_json(img));
    write_jsonl(ann_out, rows);
    print_json({{"labeled", result.labeled.size()}, {"dropped", result.dropped.size()}});
  });

  // score
  auto* score = app.add_subcommand("score", "Score every distinct image for clarity and complexity");
  std::string score_corpus_dir, score_backend, score_out, score_cache;
  std::size_t score_par = 4;
  score->add_option("--corpus", score_corpus_dir, "Corpus directory")->required();
  score->add_option("--backend", score_backend, "mock:hash | mock:const:C,X | mock:table:<jsonl> | http(s)://host:port")
      ->required();
  score->add_option("--out", score_out, "Output score table JSONL")->required();
  score->add_option("--cache", score_cache, "Earlier score table reused by image hash");
  score->add_option("--parallelism", score_par, "Concurrent scoring requests")->capture_default_str();
  score->callback([&] {
    Corpus corpus = read_corpus(score_corpus_dir);
    auto backend = make_scorer_backend(score_backend);
    std::optional<ScoreTable> cache;
    if (!score_cache.empty()) cache = read_score_table(score_cache);
    ScoreOptions opts;
    opts.parallelism = score_par;
    opts.cache = cache ? &*cache : nullptr;
    ScoreTable table = score_corpus(corpus, *backend, opts);
    write_score_table(table, score_out);
    std::size_t failed = 0;
    for (const auto& r : table.rows()) failed += r.ok() ? 0 : 1;
    print_json({{"images", table.size()}, {"failed", failed}});
  });

  // select
  auto* select = app.add_subcommand("select", "Filter blurred images and draw a complexity-stratified seed set");
  std::string sel_corpus, sel_scores, sel_out, sel_ratio = "2:3:4:1";
  std::uint64_t sel_budget = 40000, sel_seed = 0;
  bool no_take_all = false, sel_random = false;
  select->add_option("--corpus", sel_corpus, "Corpus directory")->required();
  select->add_option("--scores", sel_scores, "Score table JSONL");
  select->add_option("--ratio", sel_ratio, "Stratum ratio for complexity 0:1:2:3")->capture_default_str();
  select->add_option("--budget", sel_budget, "Total records to select")->capture_default_str();
  select->add_option("--seed", sel_seed, "Sampling seed")->required();
  select->add_option("--out", sel_out, "Output directory (selected corpus + plan)")->required();
  select->add_flag("--no-take-all", no_take_all, "Apportion the top stratum by ratio instead of taking all of it");
  select->add_flag("--random", sel_random, "Ablation: uniform random sample, no clarity filter or strata");
  select->callback([&] {
    Corpus corpus = read_corpus(sel_corpus);
    Corpus selected;
    fs::path out(sel_out);
    if (sel_random) {
      selected = random_sample(corpus, sel_budget, sel_seed);
    } else {
      if (sel_scores.empty()) throw Error(ErrorCode::kInvalidArgument, "--scores is required unless --random");
      ScoreTable scores = read_score_table(sel_scores);
      SelectionConfig cfg;
      cfg.ratio = parse_ratio(sel_ratio);
      cfg.budget = sel_budget;
      cfg.take_all_top_stratum = !no_take_all;
      cfg.seed = sel_seed;
      validate(cfg);
      SelectionPlan plan = compute_quotas(availability_of(corpus, scores), cfg);
      selected = stratified_sample(corpus, scores, plan, sel_seed);
      write_file_atomic(out / "plan.json", dump_json_pretty(plan_summary_json(plan)));
      write_jsonl(out / "plan_rows.jsonl", plan_rows(plan));
    }
    write_corpus(selected, out / "selected");
    print_json({{"selected", selected.size()}});
  });

  // cluster
  auto* cluster = app.add_subcommand("cluster", "TF-IDF + K-Means per dataset and per-task demonstration pools");
  std::string cl_selected, cl_out;
  std::size_t cl_k = kDefaultClusters;
  std::uint64_t cl_seed = 0;
  cluster->add_option("--selected", cl_selected, "Selected corpus directory")->required();
  cluster->add_option("--k", cl_k, "Clusters per source dataset")->capture_default_str();
  cluster->add_option("--seed", cl_seed, "Clustering and demo sampling seed")->required();
  cluster->add_option("--out", cl_out, "Output directory (clusters.jsonl, pools/<TASK>.json)")->required();
  cluster->callback([&] {
    Corpus selected = read_corpus(cl_selected);
    ClusteringResult result = cluster_selected(selected, cl_seed, cl_k);
    std::vector<Json> rows;
    for (const auto& a : result.assignments) rows.push_back(to_json(a));
    write_jsonl(fs::path(cl_out) / "clusters.jsonl", rows);
    Json summary = Json::object();
    for (const auto& [task, pool] : result.pools) {
      write_file_atomic(fs::path(cl_out) / "pools" / (std::string(to_string(task)) + ".json"),
                        dump_json_pretty(to_json(pool)));
      summary[std::string(to_string(task))] = pool.demos.size();
    }
    print_json({{"demos_per_task", summary}});
  });

  // augment
  auto* aug = app.add_subcommand("augment", "Generate AskImg/CompQ/RephQ/SimpQ pairs for the seed set");
  std::string aug_selected, aug_pools, aug_out, aug_ops = "askimg,compq,rephq,simpq";
  std::size_t aug_n = 5, aug_par = 8;
  double aug_fail = 0.5;
  bool aug_no_dedup = false;
  ClientFlags aug_client;
  aug->add_option("--selected", aug_selected, "Selected corpus directory")->required();
  aug->add_option("--pools", aug_pools, "Directory of demo pools (pools/<TASK>.json)");
  aug->add_option("--ops", aug_ops, "Comma-separated operators, or none")->capture_default_str();
  aug->add_option("--n-per-image", aug_n, "AskImg pairs requested per image")->capture_default_str();
  aug->add_option("--max-failure-rate", aug_fail, "Abort when more operator calls fail")->capture_default_str();
  aug->add_option("--parallelism", aug_par, "Seed records processed concurrently")->capture_default_str();
  aug->add_flag("--no-dedup", aug_no_dedup, "Keep duplicate (image, question) pairs");
  aug->add_option("--out", aug_out, "Output JSONL of generated pairs")->required();
  aug_client.add(aug, false);
  aug->callback([&] {
    Corpus selected = read_corpus(aug_selected);
    AugmentConfig cfg;
    cfg.ops = parse_ops(aug_ops);
    cfg.n_per_image = aug_n;
    cfg.max_failure_rate = aug_fail;
    cfg.parallelism = aug_par;
    cfg.model_id = aug_client.model;
    std::map<TaskType, DemoPool> pools;
    if (!aug_pools.empty()) {
      for (const auto& e : fs::directory_iterator(aug_pools)) {
        DemoPool p = demo_pool_from_json(parse_json(read_file(e.path()), e.path().string()));
        pools[p.task] = std::move(p);
      }
    }
    bool any = cfg.ops.askimg || cfg.ops.compq || cfg.ops.rephq || cfg.ops.simpq;
    if (any && aug_client.backend.empty()) throw Error(ErrorCode::kInvalidArgument, "--backend is required");
    std::shared_ptr<VlmBackend> backend =
        any ? make_vlm_backend(aug_client.backend, aug_client.api_key_env) : std::make_shared<MockVlmBackend>(MockScript{});
    ClientOptions copts;
    copts.cache_dir = aug_client.cache_dir;
    copts.rpm = aug_client.rpm;
    copts.max_in_flight = aug_client.max_in_flight;
    VlmClient client(backend, copts);
    AugmentedCorpus out = synthesize(selected, client, pools, cfg);
    std::size_t before = out.pairs.size();
    if (!aug_no_dedup) out = dedup(out, image_hashes(selected));
    write_augmented(aug_out, out.pairs);
    print_json({{"pairs", out.pairs.size()},
                {"removed_by_dedup", before - out.pairs.size()},
                {"operator_calls", out.operator_calls},
                {"failed_calls", out.failed_calls}});
  });

  // emit
  auto* emit = app.add_subcommand("emit", "Write conversation-format instruction JSONL and its manifest");
  std::string em_selected, em_aug, em_scores, em_out;
  emit->add_option("--selected", em_selected, "Selected corpus directory")->required();
  emit->add_option("--augmented", em_aug, "Generated pairs JSONL")->required();
  emit->add_option("--scores", em_scores, "Score table JSONL (fills meta.complexity)");
  emit->add_option("--out", em_out, "Output directory")->required();
  emit->callback([&] {
    Corpus selected = read_corpus(em_selected);
    auto pairs = read_augmented(em_aug);
    std::optional<ScoreTable> scores;
    if (!em_scores.empty()) scores = read_score_table(em_scores);
    EmitContext ctx;
    ctx.selected = &selected;
    ctx.scores = scores ? &*scores : nullptr;
    EmittedManifest m = write_dataset(build_instruction_records(pairs, ctx), em_out);
    print_json(to_json(m));
  });

  // report
  auto* report = app.add_subcommand("report", "Tabulate an emitted dataset by kind, task, dataset and complexity");
  std::string rep_dataset;
  bool rep_json = false;
  std::size_t rep_seeds = 0, rep_n = 5;
  std::string rep_ops = "askimg,compq,rephq,simpq";
  report->add_option("--dataset", rep_dataset, "dataset.jsonl or the directory holding it")->required();
  report->add_option("--seeds", rep_seeds, "Seed count for the target composition (0 = no target)");
  report->add_option("--n-per-image", rep_n, "AskImg pairs per image in the target")->capture_default_str();
  report->add_option("--ops", rep_ops, "Operators in the target")->capture_default_str();
  report->add_flag("--json", rep_json, "Print JSON instead of a table");
  report->callback([&] {
    fs::path p(rep_dataset);
    if (fs::is_directory(p)) p /= std::string(kDatasetFile);
    auto records = read_dataset(p);
    std::optional<CompositionTarget> target;
    if (rep_seeds > 0) target = CompositionTarget{rep_seeds, rep_n, parse_ops(rep_ops)};
    DatasetReport r = dataset_report(records, target);
    if (rep_json) print_json(to_json(r));
    else std::cout << render_report(r);
  });

  // eval
  auto* eval = app.add_subcommand("eval", "Score model responses against benchmark items");
  std::string ev_items, ev_preds, ev_extractor = "rule";
  bool ev_json = false;
  ClientFlags ev_client;
  eval->add_option("--items", ev_items, "Items JSONL")->required();
  eval->add_option("--predictions", ev_preds, "Predictions JSONL {item_id, response_text}")->required();
  eval->add_option("--extractor", ev_extractor, "rule | llm")->check(CLI::IsMember({"rule", "llm"}))->capture_default_str();
  eval->add_flag("--json", ev_json, "Print JSON instead of a table");
  ev_client.add(eval, false);
  eval->callback([&] {
    auto items = read_eval_items(ev_items);
    auto responses = read_predictions(ev_preds);
    std::vector<ItemResult> results;
    if (ev_extractor == "llm") {
      if (ev_client.backend.empty()) throw Error(ErrorCode::kInvalidArgument, "--backend is required for --extractor llm");
      VlmClient client = ev_client.make();
      LlmExtractor ex(client, ev_client.model);
      results = evaluate(items, responses, ex);
    } else {
      RuleExtractor ex;
      results = evaluate(items, responses, ex);
    }
    SubsetAccuracy acc = aggregate(results);
    if (ev_json) print_json(to_json(acc));
    else std::cout << render_table(acc);
  });

  // run-all
  auto* all = app.add_subcommand("run-all", "Run ingest -> score -> select -> cluster -> augment -> emit from a config");
  std::string ra_config, ra_out, ra_ops, ra_backend, ra_scorer, ra_cache;
  std::optional<std::size_t> ra_n;
  std::optional<double> ra_rpm;
  bool ra_force = false, ra_quiet = false;
  all->add_option("--config", ra_config, "Pipeline config JSON")->required();
  all->add_flag("--force", ra_force, "Re-run every stage even when its checksum is valid");
  all->add_option("--out-dir", ra_out, "Override paths.out_dir");
  all->add_option("--ops", ra_ops, "Override augmentation.ops");
  all->add_option("--n-per-image", ra_n, "Override augmentation.n_per_image");
  all->add_option("--backend", ra_backend, "Override backend.vlm");
  all->add_option("--scorer", ra_scorer, "Override backend.scorer");
  all->add_option("--rpm", ra_rpm, "Override backend.rpm");
  all->add_option("--cache-dir", ra_cache, "Override paths.cache_dir");
  all->add_flag("--quiet", ra_quiet, "No progress lines on stderr");
  all->callback([&] {
    PipelineConfig cfg = load_pipeline_config(ra_config);
    if (!ra_out.empty()) {
      bool default_cache = cfg.cache_dir == cfg.out_dir / "cache";
      cfg.out_dir = fs::absolute(ra_out);
      if (default_cache) cfg.cache_dir = cfg.out_dir / "cache";
    }
    if (!ra_ops.empty()) cfg.augment.ops = parse_ops(ra_ops);
    if (ra_n) cfg.augment.n_per_image = *ra_n;
    if (!ra_backend.empty()) cfg.vlm = resolve_backend_spec(ra_backend, fs::current_path());
    if (!ra_scorer.empty()) cfg.scorer = resolve_backend_spec(ra_scorer, fs::current_path());
    if (ra_rpm) cfg.rpm = *ra_rpm;
    if (!ra_cache.empty()) cfg.cache_dir = fs::absolute(ra_cache);
    RunOptions opts;
    opts.force = ra_force;
    if (!ra_quiet) opts.log = [](const std::string& line) { std::cerr << "[forge] " << line << '\n'; };
    RunManifest m = run_all(cfg, opts);
    print_json(to_json(m));
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : exit_status(ErrorCode::kInvalidArgument);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const forge::StageError& e) {
    std::cerr << "forge: stage " << e.stage() << " failed: " << e.what() << '\n';
    return forge::exit_status(e.cause_code());
  } catch (const forge::Error& e) {
    std::cerr << "forge: " << forge::error_code_name(e.code()) << ": " << e.what() << '\n';
    return forge::exit_status(e.code());
  } catch (const std::exception& e) {
    std::cerr << "forge: " << e.what() << '\n';
    return 1;
  }
}
