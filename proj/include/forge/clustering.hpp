// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "forge/ingest.hpp"
#include "forge/io.hpp"

namespace forge {

// Sorted (index, value) pairs.
struct SparseVector {
  std::vector<std::uint32_t> index;
  std::vector<double> value;

  double squared_norm() const;
  bool operator==(const SparseVector&) const = default;
};

// ---- TF-IDF -------------------------------------------------------------------

// Lowercases ASCII and splits on runs of characters that are not ASCII
// letters or digits. Bytes >= 0x80 count as token characters so UTF-8 text
// is kept intact.
std::vector<std::string> tokenize(std::string_view text);

struct TfidfModel {
  std::vector<std::string> terms;  // sorted; position is the term index
  std::map<std::string, std::uint32_t, std::less<>> vocabulary;
  std::vector<double> idf;
  std::vector<SparseVector> doc_vectors;  // L2-normalised

  std::size_t dimension() const { return terms.size(); }
};

// tf = raw count, idf(t) = ln((1 + N) / (1 + df(t))) + 1, rows L2-normalised.
// Throws EmptyDocument for a question without tokens.
TfidfModel tfidf_fit(const std::vector<std::string>& questions);

// ---- K-Means ------------------------------------------------------------------

struct KMeansOptions {
  std::size_t max_iterations = 300;
  double tolerance = 1e-6;  // max centroid shift
};

struct ClusterModel {
  std::size_t k = 0;
  std::size_t requested_k = 0;
  std::vector<std::vector<double>> centroids;
  std::vector<std::size_t> assignment;
  double inertia = 0;
  // Total within-cluster squared distance after each assignment step.
  std::vector<double> inertia_history;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<std::string> notes;
};

// Lloyd's algorithm with k-means++ seeding and Euclidean distance. k is
// reduced to the number of distinct points when there are fewer; an emptied
// cluster takes the point farthest from its centroid. Throws NoVectors for
// empty input and InvalidArgument for k == 0.
ClusterModel kmeans(std::span<const SparseVector> points, std::size_t dimension, std::size_t k,
                    std::uint64_t seed, const KMeansOptions& options = {});
ClusterModel kmeans(const std::vector<std::vector<double>>& points, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options = {});

// Lowest-inertia model over seeds (first seed wins ties).
ClusterModel kmeans_best_of(const std::vector<std::vector<double>>& points, std::size_t k,
                            std::span<const std::uint64_t> seeds, const KMeansOptions& options = {});

double squared_distance(const SparseVector& point, std::span<const double> centroid, double centroid_norm2,
                        std::size_t dimension);

// ---- demonstration pools -----------------------------------------------------

struct Demo {
  std::string dataset_id;
  std::size_t cluster = 0;
  std::string record_id;
  std::string question;

  bool operator==(const Demo&) const = default;
};

struct DemoPool {
  TaskType task = TaskType::kFQA;
  std::vector<Demo> demos;  // ordered by dataset_id, then cluster
  std::vector<std::string> notes;
};

struct ClusterAssignment {
  std::string dataset_id;
  std::string question_id;  // record_id of the question
  std::size_t cluster = 0;

  bool operator==(const ClusterAssignment&) const = default;
};

inline constexpr std::size_t kDefaultClusters = 5;

// For every source dataset of `task` in `selected`: TF-IDF over its
// questions, K-Means with k clusters, then one uniformly drawn question per
// cluster. Throws EmptyTask when no record of the task has a usable question.
DemoPool build_demo_pool(const Corpus& selected, TaskType task, std::uint64_t seed,
                         std::size_t k = kDefaultClusters,
                         std::vector<ClusterAssignment>* assignments = nullptr);

struct ClusteringResult {
  std::map<TaskType, DemoPool> pools;
  std::vector<ClusterAssignment> assignments;
};

// One pool per task present in `selected`.
ClusteringResult cluster_selected(const Corpus& selected, std::uint64_t seed, std::size_t k = kDefaultClusters);

Json to_json(const DemoPool& pool);
DemoPool demo_pool_from_json(const Json& j);
Json to_json(const ClusterAssignment& a);

}  // namespace forge
