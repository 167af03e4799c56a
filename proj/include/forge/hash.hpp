// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace forge {

using Digest = std::array<std::uint8_t, 32>;

// Incremental SHA-256 (OpenSSL EVP underneath).
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(std::string_view bytes);
  // Appends an 8-byte little-endian length followed by the bytes, so that
  // concatenated fields cannot collide by shifting boundaries.
  Sha256& update_field(std::string_view bytes);
  Digest finish();

 private:
  void* ctx_;
};

Digest sha256(std::string_view bytes);
std::string sha256_hex(std::string_view bytes);
std::string to_hex(const Digest& digest);

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);

}  // namespace forge
