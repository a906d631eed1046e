/*
 * Copyright 2025 The FedLedger Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

namespace fedledger {

/// Opaque byte sequence. Blobs, CSV samples and serialized records all move
/// around as plain byte strings.
using Bytes = std::string;

/// 32-byte digest identifying every asset, tuple and block. Rendered as 64
/// lowercase hex characters; the default-constructed value is the all-zero
/// digest used as the genesis back-link.
class ContentHash {
 public:
  static constexpr std::size_t kSize = 32;
  static constexpr std::size_t kHexSize = 2 * kSize;

  ContentHash() = default;
  explicit ContentHash(const std::array<std::uint8_t, kSize>& bytes) : bytes_(bytes) {}

  /// Parses exactly 64 lowercase hex characters. Throws std::invalid_argument
  /// on any other input (uppercase included; the canonical form is lowercase).
  static ContentHash from_hex(std::string_view hex);

  std::string hex() const;

  const std::array<std::uint8_t, kSize>& bytes() const { return bytes_; }
  bool is_zero() const;

  auto operator<=>(const ContentHash&) const = default;

 private:
  std::array<std::uint8_t, kSize> bytes_{};
};

/// SHA-256 of the given bytes.
ContentHash sha256(std::string_view data);

}  // namespace fedledger

template <>
struct std::hash<fedledger::ContentHash> {
  std::size_t operator()(const fedledger::ContentHash& h) const noexcept {
    // First 8 bytes of a cryptographic digest are already well mixed.
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | h.bytes()[i];
    return static_cast<std::size_t>(v);
  }
};
