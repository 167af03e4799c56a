// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>

#include "forge/clustering.hpp"
#include "forge/error.hpp"
#include "forge/random.hpp"

namespace forge {

double squared_distance(const SparseVector& x, std::span<const double> c, double c_norm2,
                        std::size_t dimension) {
  double d = 0;
  double covered = 0;
  for (std::size_t i = 0; i < x.index.size(); ++i) {
    double ci = c[x.index[i]];
    double diff = x.value[i] - ci;
    d += diff * diff;
    covered += ci * ci;
  }
  // Coordinates absent from x contribute c_j^2 each.
  if (x.index.size() < dimension) d += std::max(0.0, c_norm2 - covered);
  return d;
}

namespace {

double norm2(const std::vector<double>& c) {
  double s = 0;
  for (double v : c) s += v * v;
  return s;
}

std::vector<double> densify(const SparseVector& x, std::size_t dimension) {
  std::vector<double> out(dimension, 0.0);
  for (std::size_t i = 0; i < x.index.size(); ++i) out[x.index[i]] = x.value[i];
  return out;
}

std::size_t count_distinct(std::span<const SparseVector> points) {
  std::vector<const SparseVector*> ptrs;
  for (const auto& p : points) ptrs.push_back(&p);
  auto less = [](const SparseVector* a, const SparseVector* b) {
    if (a->index != b->index) return a->index < b->index;
    return a->value < b->value;
  };
  std::sort(ptrs.begin(), ptrs.end(), less);
  std::size_t distinct = 0;
  for (std::size_t i = 0; i < ptrs.size(); ++i) {
    if (i == 0 || !(*ptrs[i] == *ptrs[i - 1])) ++distinct;
  }
  return distinct;
}

// k-means++: first centre uniform, the rest drawn with probability
// proportional to squared distance from the nearest chosen centre.
std::vector<std::vector<double>> seed_centroids(std::span<const SparseVector> points, std::size_t dimension,
                                                std::size_t k, Rng& rng) {
  std::vector<std::vector<double>> centroids;
  centroids.push_back(densify(points[rng.below(points.size())], dimension));
  std::vector<double> best(points.size(), std::numeric_limits<double>::infinity());
  while (centroids.size() < k) {
    const auto& last = centroids.back();
    double last_norm = norm2(last);
    double total = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      best[i] = std::min(best[i], squared_distance(points[i], last, last_norm, dimension));
      total += best[i];
    }
    std::size_t pick = points.size() - 1;
    double r = rng.unit() * total;
    double acc = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      acc += best[i];
      if (best[i] > 0 && r < acc) {
        pick = i;
        break;
      }
    }
    // Guard against rounding at the tail: never pick a point already chosen.
    while (best[pick] == 0 && pick > 0) --pick;
    centroids.push_back(densify(points[pick], dimension));
  }
  return centroids;
}

}  // namespace

ClusterModel kmeans(std::span<const SparseVector> points, std::size_t dimension, std::size_t k,
                    std::uint64_t seed, const KMeansOptions& options) {
  if (points.empty()) throw Error(ErrorCode::kNoVectors, "kmeans needs at least one vector");
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "kmeans needs k >= 1");

  ClusterModel model;
  model.requested_k = k;
  std::size_t distinct = count_distinct(points);
  if (distinct < k) {
    model.notes.push_back("k reduced from " + std::to_string(k) + " to " + std::to_string(distinct) +
                          " (distinct vectors)");
    k = distinct;
  }
  model.k = k;

  Rng rng(seed, "kmeans++");
  auto centroids = seed_centroids(points, dimension, k, rng);
  const std::size_t n = points.size();
  std::vector<std::size_t> assignment(n, 0), previous;
  std::vector<double> dist(n, 0);

  for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
    std::vector<double> norms(k);
    for (std::size_t c = 0; c < k; ++c) norms[c] = norm2(centroids[c]);
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t c = 0; c < k; ++c) {
        double d = squared_distance(points[i], centroids[c], norms[c], dimension);
        if (d < best) {
          best = d;
          arg = c;
        }
      }
      assignment[i] = arg;
      dist[i] = best;
    }

    // Empty clusters take the farthest point from a cluster that can spare one.
    bool repaired = false;
    std::vector<std::size_t> sizes(k, 0);
    for (auto a : assignment) ++sizes[a];
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] != 0) continue;
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (sizes[assignment[i]] > 1 && (far == n || dist[i] > dist[far])) far = i;
      }
      if (far == n) break;
      --sizes[assignment[far]];
      assignment[far] = c;
      ++sizes[c];
      dist[far] = 0;
      centroids[c] = densify(points[far], dimension);
      repaired = true;
    }

    double inertia = 0;
    for (double d : dist) inertia += d;
    model.inertia_history.push_back(inertia);
    model.iterations = iter + 1;

    if (!repaired && assignment == previous) {
      model.converged = true;
      break;
    }
    if (iter + 1 == options.max_iterations) break;

    std::vector<std::vector<double>> next(k, std::vector<double>(dimension, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      auto& c = next[assignment[i]];
      const auto& p = points[i];
      for (std::size_t j = 0; j < p.index.size(); ++j) c[p.index[j]] += p.value[j];
    }
    double shift = 0;
    for (std::size_t c = 0; c < k; ++c) {
      double d2 = 0;
      for (std::size_t j = 0; j < dimension; ++j) {
        next[c][j] /= static_cast<double>(sizes[c]);
        double diff = next[c][j] - centroids[c][j];
        d2 += diff * diff;
      }
      shift = std::max(shift, std::sqrt(d2));
    }
    // A sub-tolerance shift keeps the old centroids so the returned model
    // stays consistent with the assignment computed from them.
    if (shift < options.tolerance && !repaired) {
      model.converged = true;
      break;
    }
    centroids = std::move(next);
    previous = assignment;
  }

  model.centroids = std::move(centroids);
  model.assignment = std::move(assignment);
  model.inertia = model.inertia_history.back();
  return model;
}

ClusterModel kmeans(const std::vector<std::vector<double>>& points, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options) {
  if (points.empty()) throw Error(ErrorCode::kNoVectors, "kmeans needs at least one vector");
  const std::size_t dimension = points.front().size();
  std::vector<SparseVector> sparse;
  sparse.reserve(points.size());
  for (const auto& p : points) {
    if (p.size() != dimension) throw Error(ErrorCode::kInvalidArgument, "kmeans vectors differ in length");
    SparseVector v;
    for (std::uint32_t j = 0; j < dimension; ++j) {
      v.index.push_back(j);
      v.value.push_back(p[j]);
    }
    sparse.push_back(std::move(v));
  }
  return kmeans(sparse, dimension, k, seed, options);
}

ClusterModel kmeans_best_of(const std::vector<std::vector<double>>& points, std::size_t k,
                            std::span<const std::uint64_t> seeds, const KMeansOptions& options) {
  if (seeds.empty()) throw Error(ErrorCode::kInvalidArgument, "kmeans_best_of needs at least one seed");
  ClusterModel best;
  bool have = false;
  for (auto s : seeds) {
    auto m = kmeans(points, k, s, options);
    if (!have || m.inertia < best.inertia) {
      best = std::move(m);
      have = true;
    }
  }
  return best;
}

}  // namespace forge
