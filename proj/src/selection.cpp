// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/selection.hpp"

#include <algorithm>
#include <numeric>

#include "forge/error.hpp"
#include "forge/random.hpp"
#include "forge/text.hpp"

namespace forge {

void validate(const SelectionConfig& config) {
  if (std::all_of(config.ratio.begin(), config.ratio.end(), [](auto r) { return r == 0; })) {
    throw Error(ErrorCode::kConfigInvalid, "selection ratio must not be all zero");
  }
  if (config.budget == 0) throw Error(ErrorCode::kConfigInvalid, "selection budget must be >= 1");
}

StratumCounts parse_ratio(std::string_view text) {
  auto parts = split(text, ':');
  if (parts.size() != kStrata) {
    throw Error(ErrorCode::kConfigInvalid, "ratio must have four parts, e.g. 2:3:4:1");
  }
  StratumCounts out{};
  for (std::size_t i = 0; i < kStrata; ++i) {
    auto v = parse_integer(parts[i]);
    if (!v || *v < 0) throw Error(ErrorCode::kConfigInvalid, "ratio parts must be non-negative integers");
    out[i] = static_cast<std::uint64_t>(*v);
  }
  return out;
}

std::string format_ratio(const StratumCounts& ratio) {
  std::string out;
  for (std::size_t i = 0; i < kStrata; ++i) {
    if (i) out += ':';
    out += std::to_string(ratio[i]);
  }
  return out;
}

std::uint64_t SelectionPlan::total() const {
  return std::accumulate(stratum_totals.begin(), stratum_totals.end(), std::uint64_t{0});
}

std::vector<std::uint64_t> largest_remainder(std::uint64_t total, std::span<const std::uint64_t> weights) {
  using u128 = unsigned __int128;
  std::vector<std::uint64_t> out(weights.size(), 0);
  u128 sum = 0;
  for (auto w : weights) sum += w;
  if (sum == 0 || total == 0) return out;

  std::vector<u128> remainder(weights.size());
  std::uint64_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    u128 scaled = u128(total) * weights[i];
    out[i] = static_cast<std::uint64_t>(scaled / sum);
    remainder[i] = scaled % sum;
    assigned += out[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::uint64_t k = 0; k < total - assigned; ++k) ++out[order[k]];
  return out;
}

Corpus filter_clear(const Corpus& corpus, const ScoreTable& scores) {
  for (const auto& r : corpus) {
    if (scores.find(r.image_ref) == nullptr) {
      throw Error(ErrorCode::kMissingScore, "no score row for image " + r.image_ref);
    }
  }
  return corpus.filter([&](const SourceRecord& r) {
    const auto* s = scores.find(r.image_ref);
    return s->ok() && s->clarity == 1;
  });
}

Availability availability_of(const Corpus& corpus, const ScoreTable& scores) {
  Availability out;
  for (const auto& d : corpus.datasets()) out[d.dataset_id] = {};
  for (const auto& r : corpus) {
    const auto* s = scores.find(r.image_ref);
    if (s == nullptr) throw Error(ErrorCode::kMissingScore, "no score row for image " + r.image_ref);
    if (!s->ok() || s->clarity != 1) continue;
    ++out[r.dataset_id][static_cast<std::size_t>(s->complexity)];
  }
  return out;
}

namespace {

// Splits `remaining` across `strata` in proportion to their ratio weights.
// Any stratum whose share exceeds its availability is capped at its
// availability and the rest is re-split over the others, until nothing is
// over. Strata with weight 0 only receive units once every weighted stratum
// is exhausted, and then in proportion to availability.
void fill_strata(std::vector<std::size_t> active, std::uint64_t remaining, const StratumCounts& ratio,
                 const StratumCounts& avail, SelectionPlan& plan) {
  while (!active.empty() && remaining > 0) {
    std::vector<std::uint64_t> weights;
    for (auto s : active) weights.push_back(ratio[s]);
    if (std::all_of(weights.begin(), weights.end(), [](auto w) { return w == 0; })) {
      weights.clear();
      for (auto s : active) weights.push_back(avail[s]);
    }
    auto shares = largest_remainder(remaining, weights);

    std::vector<std::size_t> keep;
    bool capped = false;
    for (std::size_t i = 0; i < active.size(); ++i) {
      auto s = active[i];
      if (shares[i] > avail[s]) {
        plan.stratum_totals[s] = avail[s];
        remaining -= avail[s];
        plan.shortfall_log.push_back({"stratum " + std::to_string(s), shares[i], avail[s]});
        capped = true;
      } else {
        keep.push_back(s);
      }
    }
    if (!capped) {
      for (std::size_t i = 0; i < active.size(); ++i) plan.stratum_totals[active[i]] = shares[i];
      return;
    }
    active = std::move(keep);
  }
}

}  // namespace

SelectionPlan compute_quotas(const Availability& availability, const SelectionConfig& config) {
  validate(config);
  SelectionPlan plan;
  plan.config = config;
  plan.availability = availability;

  StratumCounts avail{};
  for (const auto& [_, counts] : availability) {
    for (std::size_t s = 0; s < kStrata; ++s) avail[s] += counts[s];
  }
  const std::uint64_t total_avail = std::accumulate(avail.begin(), avail.end(), std::uint64_t{0});
  const std::uint64_t target = std::min(config.budget, total_avail);
  if (total_avail < config.budget) plan.shortfall_log.push_back({"total", config.budget, total_avail});

  if (config.take_all_top_stratum) {
    plan.stratum_totals[3] = std::min(avail[3], target);
    fill_strata({0, 1, 2}, target - plan.stratum_totals[3], config.ratio, avail, plan);
  } else {
    fill_strata({0, 1, 2, 3}, target, config.ratio, avail, plan);
  }

  // Within a stratum, datasets share its quota in proportion to availability.
  for (const auto& [id, _] : availability) plan.quota[id] = {};
  for (std::size_t s = 0; s < kStrata; ++s) {
    std::vector<std::uint64_t> weights;
    for (const auto& [_, counts] : availability) weights.push_back(counts[s]);
    auto split_counts = largest_remainder(plan.stratum_totals[s], weights);
    std::size_t i = 0;
    for (const auto& [id, _] : availability) plan.quota[id][s] = split_counts[i++];
  }
  return plan;
}

Corpus stratified_sample(const Corpus& corpus, const ScoreTable& scores, const SelectionPlan& plan,
                         std::uint64_t seed) {
  // Datasets absent from either side count as all-zero rows.
  auto current = availability_of(corpus, scores);
  auto nonzero = [](const Availability& a) {
    Availability out;
    for (const auto& [k, v] : a) {
      if (std::any_of(v.begin(), v.end(), [](auto c) { return c != 0; })) out[k] = v;
    }
    return out;
  };
  if (nonzero(current) != nonzero(plan.availability)) {
    throw Error(ErrorCode::kPlanMismatch, "corpus availability differs from the plan's");
  }

  std::map<std::pair<std::string, std::size_t>, std::vector<std::string>> cells;
  for (const auto& r : corpus) {
    const auto* s = scores.find(r.image_ref);
    if (!s->ok() || s->clarity != 1) continue;
    cells[{r.dataset_id, static_cast<std::size_t>(s->complexity)}].push_back(r.record_id);
  }

  std::vector<std::string> chosen;
  for (const auto& [dataset, quotas] : plan.quota) {
    for (std::size_t s = 0; s < kStrata; ++s) {
      if (quotas[s] == 0) continue;
      auto& pool = cells[{dataset, s}];
      if (pool.size() < quotas[s]) {
        throw Error(ErrorCode::kPlanMismatch, "quota exceeds availability for " + dataset + "/" + std::to_string(s));
      }
      std::sort(pool.begin(), pool.end());
      Rng rng(seed, "select/" + dataset + "/" + std::to_string(s));
      auto drawn = rng.sample(pool, quotas[s]);
      chosen.insert(chosen.end(), drawn.begin(), drawn.end());
    }
  }
  std::sort(chosen.begin(), chosen.end());

  std::vector<SourceRecord> records;
  records.reserve(chosen.size());
  for (const auto& id : chosen) records.push_back(*corpus.find(id));
  return Corpus(corpus.image_root(), corpus.datasets(), std::move(records));
}

Corpus random_sample(const Corpus& corpus, std::uint64_t budget, std::uint64_t seed) {
  std::vector<std::string> ids;
  ids.reserve(corpus.size());
  for (const auto& r : corpus) ids.push_back(r.record_id);
  std::sort(ids.begin(), ids.end());
  Rng rng(seed, "select/unfiltered");
  auto drawn = rng.sample(std::move(ids), static_cast<std::size_t>(std::min<std::uint64_t>(budget, corpus.size())));
  std::sort(drawn.begin(), drawn.end());
  std::vector<SourceRecord> records;
  for (const auto& id : drawn) records.push_back(*corpus.find(id));
  return Corpus(corpus.image_root(), corpus.datasets(), std::move(records));
}

namespace {

Json counts_json(const StratumCounts& c) { return Json::array({c[0], c[1], c[2], c[3]}); }

StratumCounts counts_from(const Json& j) {
  StratumCounts c{};
  for (std::size_t i = 0; i < kStrata; ++i) c[i] = j.at(i).get<std::uint64_t>();
  return c;
}

}  // namespace

Json plan_summary_json(const SelectionPlan& plan) {
  Json j;
  j["ratio"] = counts_json(plan.config.ratio);
  j["budget"] = plan.config.budget;
  j["take_all_top_stratum"] = plan.config.take_all_top_stratum;
  j["seed"] = plan.config.seed;
  j["total"] = plan.total();
  j["stratum_totals"] = counts_json(plan.stratum_totals);
  Json quota = Json::object();
  for (const auto& [id, c] : plan.quota) quota[id] = counts_json(c);
  Json avail = Json::object();
  for (const auto& [id, c] : plan.availability) avail[id] = counts_json(c);
  j["quota"] = std::move(quota);
  j["availability"] = std::move(avail);
  Json log = Json::array();
  for (const auto& e : plan.shortfall_log) {
    log.push_back({{"scope", e.scope}, {"requested", e.requested}, {"available", e.available}});
  }
  j["shortfall_log"] = std::move(log);
  return j;
}

std::vector<Json> plan_rows(const SelectionPlan& plan) {
  std::vector<Json> rows;
  for (const auto& [id, q] : plan.quota) {
    const auto& a = plan.availability.at(id);
    for (std::size_t s = 0; s < kStrata; ++s) {
      rows.push_back({{"dataset_id", id}, {"stratum", s}, {"availability", a[s]}, {"quota", q[s]}});
    }
  }
  return rows;
}

SelectionPlan plan_from_summary_json(const Json& j) {
  try {
    SelectionPlan plan;
    plan.config.ratio = counts_from(j.at("ratio"));
    plan.config.budget = j.at("budget").get<std::uint64_t>();
    plan.config.take_all_top_stratum = j.at("take_all_top_stratum").get<bool>();
    plan.config.seed = j.at("seed").get<std::uint64_t>();
    plan.stratum_totals = counts_from(j.at("stratum_totals"));
    for (const auto& [id, c] : j.at("quota").items()) plan.quota[id] = counts_from(c);
    for (const auto& [id, c] : j.at("availability").items()) plan.availability[id] = counts_from(c);
    for (const auto& e : j.at("shortfall_log")) {
      plan.shortfall_log.push_back({e.at("scope").get<std::string>(), e.at("requested").get<std::uint64_t>(),
                                    e.at("available").get<std::uint64_t>()});
    }
    return plan;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParseFailure, std::string("malformed plan summary: ") + e.what());
  }
}

}  // namespace forge
