// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "forge/ingest.hpp"
#include "forge/io.hpp"
#include "forge/scoring.hpp"

namespace forge {

inline constexpr std::size_t kStrata = 4;
using StratumCounts = std::array<std::uint64_t, kStrata>;

struct SelectionConfig {
  StratumCounts ratio = {2, 3, 4, 1};
  std::uint64_t budget = 40000;
  bool take_all_top_stratum = true;
  std::uint64_t seed = 0;
};

// Throws ConfigInvalid when the ratio is all zero or the budget is 0.
void validate(const SelectionConfig& config);
// "2:3:4:1" -> {2, 3, 4, 1}
StratumCounts parse_ratio(std::string_view text);
std::string format_ratio(const StratumCounts& ratio);

// Clear-image record counts per dataset and complexity stratum.
using Availability = std::map<std::string, StratumCounts>;

struct ShortfallEntry {
  std::string scope;  // "total" or "stratum N"
  std::uint64_t requested = 0;
  std::uint64_t available = 0;

  bool operator==(const ShortfallEntry&) const = default;
};

struct SelectionPlan {
  SelectionConfig config;
  Availability availability;
  std::map<std::string, StratumCounts> quota;
  StratumCounts stratum_totals{};
  std::vector<ShortfallEntry> shortfall_log;

  std::uint64_t total() const;
};

// Hamilton apportionment of `total` over `weights`: floors first, leftover
// units to the largest remainders, ties to the lower index. Sums exactly to
// `total` when any weight is positive; all zeros otherwise.
std::vector<std::uint64_t> largest_remainder(std::uint64_t total, std::span<const std::uint64_t> weights);

// Keeps records whose image scored clarity 1. MissingScore when a record's
// image has no row.
Corpus filter_clear(const Corpus& corpus, const ScoreTable& scores);

Availability availability_of(const Corpus& corpus, const ScoreTable& scores);

SelectionPlan compute_quotas(const Availability& availability, const SelectionConfig& config);

// Uniform draw of exactly quota records per (dataset, stratum) cell; result
// sorted by record_id. PlanMismatch when availability changed since planning.
Corpus stratified_sample(const Corpus& corpus, const ScoreTable& scores, const SelectionPlan& plan,
                         std::uint64_t seed);

// Selection switched off: a uniform draw of `budget` records, no filtering.
Corpus random_sample(const Corpus& corpus, std::uint64_t budget, std::uint64_t seed);

Json plan_summary_json(const SelectionPlan& plan);
std::vector<Json> plan_rows(const SelectionPlan& plan);
SelectionPlan plan_from_summary_json(const Json& summary);

}  // namespace forge
