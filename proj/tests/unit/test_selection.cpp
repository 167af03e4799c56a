// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "forge/error.hpp"
#include "forge/fixture.hpp"
#include "forge/random.hpp"
#include "forge/selection.hpp"
#include "support/corpus_builder.hpp"
#include "support/oracles.hpp"

using namespace forge;

namespace {

// Dataset "dN" holds `per_cell` clear records in every stratum plus one
// blurred record; record ids are unique across datasets.
struct Scored {
  Corpus corpus;
  ScoreTable scores;
};

Scored scored_corpus(const std::map<std::string, StratumCounts>& cells) {
  std::vector<DatasetEntry> datasets;
  std::vector<SourceRecord> records;
  std::vector<ImageScores> rows;
  for (const auto& [ds, counts] : cells) {
    datasets.push_back({ds, TaskType::kFQA, ds + ".jsonl"});
    for (std::size_t s = 0; s < kStrata; ++s) {
      for (std::uint64_t i = 0; i < counts[s]; ++i) {
        std::string id = ds + "-" + std::to_string(s) + "-" + std::to_string(i);
        records.push_back(fixtures::record(id, ds, TaskType::kFQA, "q " + id));
        rows.push_back({id + ".png", "h" + id, 1, int(s), ScoreSource::kMock, {}});
      }
    }
    std::string blurred = ds + "-blur";
    records.push_back(fixtures::record(blurred, ds, TaskType::kFQA, "q"));
    rows.push_back({blurred + ".png", "h" + blurred, 0, 3, ScoreSource::kMock, {}});
  }
  return {Corpus("images", datasets, records), ScoreTable(rows)};
}

}  // namespace

TEST_CASE("largest_remainder matches exact Hamilton apportionment") {
  Rng rng(11);
  for (int trial = 0; trial < 2000; ++trial) {
    std::size_t n = 1 + rng.below(6);
    std::vector<std::uint64_t> w(n);
    for (auto& x : w) x = rng.below(4) == 0 ? 0 : rng.below(trial % 2 ? 10 : 1'000'000'000);
    std::uint64_t total = rng.below(100000);
    auto got = largest_remainder(total, w);
    CHECK(got == oracle::hamilton(total, w));
    if (std::accumulate(w.begin(), w.end(), std::uint64_t{0}) > 0) {
      CHECK(std::accumulate(got.begin(), got.end(), std::uint64_t{0}) == total);
    }
  }
  CHECK(largest_remainder(10, std::vector<std::uint64_t>{1, 1, 1}) == std::vector<std::uint64_t>{4, 3, 3});
  CHECK(largest_remainder(5, std::vector<std::uint64_t>{0, 0}) == std::vector<std::uint64_t>{0, 0});
}

TEST_CASE("ratio parsing and config validation") {
  CHECK(parse_ratio("2:3:4:1") == StratumCounts{2, 3, 4, 1});
  CHECK(format_ratio({0, 1, 0, 2}) == "0:1:0:2");
  CHECK_THROWS_AS(parse_ratio("2:3:4"), Error);
  CHECK_THROWS_AS(parse_ratio("2:3:x:1"), Error);
  CHECK_THROWS_AS(parse_ratio("2:-3:4:1"), Error);
  CHECK_THROWS_AS(validate(SelectionConfig{{0, 0, 0, 0}, 10, true, 0}), Error);
  CHECK_THROWS_AS(validate(SelectionConfig{{1, 1, 1, 1}, 0, true, 0}), Error);
}

TEST_CASE("capped quota example redistributes over remaining strata") {
  Availability avail = {{"x", {0, 100, 100, 100}}};
  SelectionPlan plan = compute_quotas(avail, {{2, 3, 4, 1}, 9, false, 0});
  CHECK(plan.stratum_totals == StratumCounts{0, 3, 5, 1});
  REQUIRE(plan.shortfall_log.size() == 1);
  CHECK(plan.shortfall_log[0] == ShortfallEntry{"stratum 0", 2, 0});
}

TEST_CASE("take-all keeps every top-stratum image") {
  Availability avail = {{"a", {50, 50, 50, 7}}, {"b", {50, 50, 50, 3}}};
  SelectionPlan plan = compute_quotas(avail, {{2, 3, 4, 1}, 100, true, 0});
  CHECK(plan.stratum_totals[3] == 10);
  CHECK(plan.stratum_totals == StratumCounts{20, 30, 40, 10});
  CHECK(plan.quota.at("a")[3] == 7);
  CHECK(plan.quota.at("b")[3] == 3);
  // The top stratum alone can exhaust a small budget.
  CHECK(compute_quotas(avail, {{2, 3, 4, 1}, 4, true, 0}).stratum_totals == StratumCounts{0, 0, 0, 4});
}

TEST_CASE("total shortfall takes everything available") {
  Availability avail = {{"a", {1, 2, 3, 4}}};
  SelectionPlan plan = compute_quotas(avail, {{2, 3, 4, 1}, 1000, true, 0});
  CHECK(plan.stratum_totals == StratumCounts{1, 2, 3, 4});
  CHECK(plan.shortfall_log.front() == ShortfallEntry{"total", 1000, 10});
}

TEST_CASE("zero-weight strata fill only after weighted ones run dry") {
  Availability avail = {{"a", {10, 5, 0, 40}}};
  CHECK(compute_quotas(avail, {{0, 1, 0, 0}, 3, false, 0}).stratum_totals == StratumCounts{0, 3, 0, 0});
  // 5 from the weighted stratum, remaining 15 split 10:40 by availability.
  CHECK(compute_quotas(avail, {{0, 1, 0, 0}, 20, false, 0}).stratum_totals == StratumCounts{3, 5, 0, 12});
}

TEST_CASE("quota properties against the continuous water-fill") {
  Rng rng(2024);
  for (int trial = 0; trial < 3000; ++trial) {
    Availability avail;
    std::size_t datasets = 1 + rng.below(4);
    for (std::size_t d = 0; d < datasets; ++d) {
      StratumCounts c{};
      for (auto& x : c) x = rng.below(3) == 0 ? 0 : rng.below(500);
      avail["d" + std::to_string(d)] = c;
    }
    SelectionConfig cfg;
    for (auto& r : cfg.ratio) r = rng.below(6);
    if (cfg.ratio == StratumCounts{}) cfg.ratio[1] = 1;
    cfg.budget = 1 + rng.below(2500);
    cfg.take_all_top_stratum = rng.below(2) == 0;
    SelectionPlan plan = compute_quotas(avail, cfg);

    StratumCounts total{};
    for (const auto& [_, c] : avail) {
      for (std::size_t s = 0; s < kStrata; ++s) total[s] += c[s];
    }
    std::uint64_t all = std::accumulate(total.begin(), total.end(), std::uint64_t{0});
    std::uint64_t target = std::min(cfg.budget, all);
    CAPTURE(trial);
    CHECK(plan.total() == target);
    for (const auto& [id, q] : plan.quota) {
      for (std::size_t s = 0; s < kStrata; ++s) CHECK(q[s] <= avail.at(id)[s]);
    }
    for (std::size_t s = 0; s < kStrata; ++s) {
      std::uint64_t sum = 0;
      for (const auto& [_, q] : plan.quota) sum += q[s];
      CHECK(sum == plan.stratum_totals[s]);
      CHECK(plan.stratum_totals[s] <= total[s]);
    }
    if (cfg.take_all_top_stratum) CHECK(plan.stratum_totals[3] == std::min(total[3], target));

    // Compare with the continuous optimum when the weighted strata can absorb the target.
    std::vector<std::size_t> strata = cfg.take_all_top_stratum ? std::vector<std::size_t>{0, 1, 2}
                                                               : std::vector<std::size_t>{0, 1, 2, 3};
    std::uint64_t rest = target - (cfg.take_all_top_stratum ? plan.stratum_totals[3] : 0);
    std::vector<double> w, a;
    std::uint64_t weighted_avail = 0;
    for (auto s : strata) {
      w.push_back(double(cfg.ratio[s]));
      a.push_back(double(total[s]));
      if (cfg.ratio[s] > 0) weighted_avail += total[s];
    }
    if (rest == 0 || weighted_avail < rest) continue;
    auto x = oracle::water_fill(double(rest), w, a);
    for (std::size_t i = 0; i < strata.size(); ++i) {
      CAPTURE(strata[i]);
      CHECK(std::fabs(double(plan.stratum_totals[strata[i]]) - x[i]) < 1.0);
    }
  }
}

TEST_CASE("stratified sampling draws exactly the quota, deterministically") {
  auto sc = scored_corpus({{"d1", {5, 6, 7, 2}}, {"d2", {4, 0, 9, 1}}});
  CHECK(filter_clear(sc.corpus, sc.scores).size() == 34);
  Availability avail = availability_of(sc.corpus, sc.scores);
  CHECK(avail.at("d1") == StratumCounts{5, 6, 7, 2});
  SelectionPlan plan = compute_quotas(avail, {{2, 3, 4, 1}, 20, true, 5});
  Corpus picked = stratified_sample(sc.corpus, sc.scores, plan, 5);
  CHECK(picked.size() == 20);
  std::map<std::string, StratumCounts> got;
  for (const auto& r : picked) {
    const auto* s = sc.scores.find(r.image_ref);
    CHECK(s->clarity == 1);
    ++got[r.dataset_id][s->complexity];
  }
  for (const auto& [id, q] : plan.quota) CHECK(got[id] == q);
  CHECK(stratified_sample(sc.corpus, sc.scores, plan, 5).records() == picked.records());
  CHECK(stratified_sample(sc.corpus, sc.scores, plan, 6).records() != picked.records());
  // Ids come back sorted.
  CHECK(std::is_sorted(picked.begin(), picked.end(),
                       [](const auto& x, const auto& y) { return x.record_id < y.record_id; }));
}

TEST_CASE("sampling against a stale plan is rejected") {
  auto sc = scored_corpus({{"d1", {5, 6, 7, 2}}});
  SelectionPlan plan = compute_quotas(availability_of(sc.corpus, sc.scores), {{2, 3, 4, 1}, 10, true, 1});
  auto other = scored_corpus({{"d1", {5, 6, 7, 3}}});
  try {
    stratified_sample(other.corpus, other.scores, plan, 1);
    FAIL("expected PlanMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kPlanMismatch);
  }
  ScoreTable partial({sc.scores.rows().begin(), sc.scores.rows().begin() + 3});
  try {
    availability_of(sc.corpus, partial);
    FAIL("expected MissingScore");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMissingScore);
  }
}

TEST_CASE("unfiltered random baseline") {
  auto sc = scored_corpus({{"d1", {5, 6, 7, 2}}});
  Corpus r = random_sample(sc.corpus, 8, 3);
  CHECK(r.size() == 8);
  CHECK(random_sample(sc.corpus, 8, 3).records() == r.records());
  CHECK(random_sample(sc.corpus, 1000, 3).size() == sc.corpus.size());
}

TEST_CASE("plan JSON round trip") {
  SelectionPlan plan = compute_quotas({{"a", {0, 9, 9, 9}}, {"b", {3, 0, 9, 1}}}, {{2, 3, 4, 1}, 50, true, 77});
  Json j = plan_summary_json(plan);
  SelectionPlan back = plan_from_summary_json(j);
  CHECK(back.stratum_totals == plan.stratum_totals);
  CHECK(back.quota == plan.quota);
  CHECK(back.availability == plan.availability);
  CHECK(back.shortfall_log == plan.shortfall_log);
  CHECK(plan_summary_json(back) == j);
  CHECK(plan_rows(plan).size() == 8);
  CHECK_THROWS_AS(plan_from_summary_json(Json{{"ratio", 1}}), Error);
}

TEST_CASE("source table availability yields the full-budget plan") {
  SelectionPlan plan = compute_quotas(source_table_availability(), {});
  CHECK(plan.total() == 40000);
  CHECK(plan.stratum_totals[3] == 3653);
}
