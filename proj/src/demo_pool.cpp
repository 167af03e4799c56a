// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <thread>

#include "forge/clustering.hpp"
#include "forge/error.hpp"
#include "forge/parallel.hpp"
#include "forge/random.hpp"
#include "forge/text.hpp"

namespace forge {

namespace {

struct DatasetJob {
  std::string dataset_id;
  std::vector<const SourceRecord*> records;
  // Filled by the job.
  std::vector<Demo> demos;
  std::vector<ClusterAssignment> assignments;
  std::vector<std::string> notes;
};

void run_job(DatasetJob& job, std::uint64_t seed, std::size_t k) {
  std::vector<const SourceRecord*> usable;
  std::vector<std::string> questions;
  for (const auto* r : job.records) {
    if (tokenize(r->question).empty()) {
      job.notes.push_back(job.dataset_id + ": skipped " + r->record_id + " (no tokens)");
      continue;
    }
    usable.push_back(r);
    questions.push_back(r->question);
  }
  if (usable.empty()) return;

  TfidfModel tfidf = tfidf_fit(questions);
  ClusterModel model = kmeans(tfidf.doc_vectors, tfidf.dimension(), k,
                              Rng(seed, "cluster/" + job.dataset_id).next());
  for (const auto& note : model.notes) job.notes.push_back(job.dataset_id + ": " + note);

  std::vector<std::vector<std::size_t>> members(model.k);
  for (std::size_t i = 0; i < usable.size(); ++i) {
    members[model.assignment[i]].push_back(i);
    job.assignments.push_back({job.dataset_id, usable[i]->record_id, model.assignment[i]});
  }
  for (std::size_t c = 0; c < model.k; ++c) {
    if (members[c].empty()) continue;
    Rng rng(seed, "demo/" + job.dataset_id + "/" + std::to_string(c));
    const SourceRecord* pick = usable[members[c][rng.below(members[c].size())]];
    job.demos.push_back({job.dataset_id, c, pick->record_id, pick->question});
  }
}

std::vector<DatasetJob> jobs_for(const Corpus& selected, TaskType task) {
  std::map<std::string, DatasetJob> by_id;
  for (const auto& r : selected) {
    if (r.task != task) continue;
    auto& job = by_id[r.dataset_id];
    job.dataset_id = r.dataset_id;
    job.records.push_back(&r);
  }
  std::vector<DatasetJob> jobs;
  for (auto& [id, job] : by_id) {
    // Member order must not depend on load order.
    std::sort(job.records.begin(), job.records.end(),
              [](const SourceRecord* a, const SourceRecord* b) { return a->record_id < b->record_id; });
    jobs.push_back(std::move(job));
  }
  return jobs;
}

std::size_t worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

}  // namespace

DemoPool build_demo_pool(const Corpus& selected, TaskType task, std::uint64_t seed, std::size_t k,
                         std::vector<ClusterAssignment>* assignments) {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "cluster count must be >= 1");
  auto jobs = jobs_for(selected, task);
  parallel_for(jobs.size(), worker_count(), [&](std::size_t i) { run_job(jobs[i], seed, k); });

  DemoPool pool;
  pool.task = task;
  for (auto& job : jobs) {
    pool.demos.insert(pool.demos.end(), job.demos.begin(), job.demos.end());
    pool.notes.insert(pool.notes.end(), job.notes.begin(), job.notes.end());
    if (assignments) assignments->insert(assignments->end(), job.assignments.begin(), job.assignments.end());
  }
  if (pool.demos.empty()) {
    throw Error(ErrorCode::kEmptyTask,
                "no usable " + std::string(to_string(task)) + " question in the selected set");
  }
  return pool;
}

ClusteringResult cluster_selected(const Corpus& selected, std::uint64_t seed, std::size_t k) {
  ClusteringResult result;
  for (TaskType task : kAllTasks) {
    bool present = std::any_of(selected.begin(), selected.end(),
                               [&](const SourceRecord& r) { return r.task == task; });
    if (!present) continue;
    result.pools[task] = build_demo_pool(selected, task, seed, k, &result.assignments);
  }
  return result;
}

Json to_json(const DemoPool& pool) {
  Json demos = Json::array();
  for (const auto& d : pool.demos) {
    demos.push_back({{"dataset_id", d.dataset_id},
                     {"cluster", d.cluster},
                     {"record_id", d.record_id},
                     {"question", d.question}});
  }
  return {{"task", std::string(to_string(pool.task))}, {"demos", demos}, {"notes", pool.notes}};
}

DemoPool demo_pool_from_json(const Json& j) {
  try {
    DemoPool pool;
    auto task = parse_task(j.at("task").get<std::string>());
    if (!task) throw Error(ErrorCode::kParseFailure, "demo pool has an unknown task");
    pool.task = *task;
    for (const auto& d : j.at("demos")) {
      pool.demos.push_back({d.at("dataset_id").get<std::string>(), d.at("cluster").get<std::size_t>(),
                            d.at("record_id").get<std::string>(), d.at("question").get<std::string>()});
    }
    if (j.contains("notes")) pool.notes = j.at("notes").get<std::vector<std::string>>();
    return pool;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParseFailure, std::string("demo pool: ") + e.what());
  }
}

Json to_json(const ClusterAssignment& a) {
  return {{"dataset_id", a.dataset_id}, {"question_id", a.question_id}, {"cluster", a.cluster}};
}

}  // namespace forge
