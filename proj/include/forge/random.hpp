// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "forge/hash.hpp"

namespace forge {

// Seeded generator whose outputs are identical on every platform.
// std::mt19937_64 is fully specified by the standard; the distributions in
// <random> are not, so bounded draws are done here by rejection.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent stream for a named sub-task, e.g. Rng(seed, "select/DocVQA/2").
  Rng(std::uint64_t seed, std::string_view label) : engine_(derive(seed, label)) {}

  std::uint64_t next() { return engine_(); }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      std::uint64_t x = engine_();
      if (x >= threshold) return x % n;
    }
  }

  // Uniform double in [0, 1) with 53 random bits.
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

  // First `k` entries of a Fisher-Yates pass: a uniform draw without replacement.
  template <typename T>
  std::vector<T> sample(std::vector<T> items, std::size_t k) {
    for (std::size_t i = 0; i < k && i < items.size(); ++i) {
      std::size_t j = i + below(items.size() - i);
      std::swap(items[i], items[j]);
    }
    if (k < items.size()) items.resize(k);
    return items;
  }

 private:
  static std::uint64_t derive(std::uint64_t seed, std::string_view label) {
    Sha256 h;
    h.update_field(std::to_string(seed)).update_field(label);
    Digest d = h.finish();
    std::uint64_t out = 0;
    for (int i = 0; i < 8; ++i) out = (out << 8) | d[i];
    return out;
  }

  std::mt19937_64 engine_;
};

}  // namespace forge
