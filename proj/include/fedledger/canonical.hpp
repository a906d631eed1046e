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

#include <json.hpp>

#include <optional>
#include <string>

#include "fedledger/hash.hpp"

namespace fedledger {

/// nlohmann::json keeps object members in a std::map, so members serialize in
/// sorted key order. Together with its shortest round-trip float rendering
/// this makes dump() a canonical byte encoding: identical values always
/// produce identical bytes, which is what asset keys and state digests hash.
using Json = nlohmann::json;

inline std::string canonical_dump(const Json& j) { return j.dump(); }

inline ContentHash hash_of(const Json& j) { return sha256(canonical_dump(j)); }

// ContentHash <-> canonical lowercase hex string.
inline void to_json(Json& j, const ContentHash& h) { j = h.hex(); }
inline void from_json(const Json& j, ContentHash& h) {
  h = ContentHash::from_hex(j.get<std::string>());
}

/// Reads an optional member: absent means nullopt (canonical encodings omit
/// absent members rather than writing null).
template <typename T>
std::optional<T> get_optional(const Json& j, const char* key) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) {
    return it->get<T>();
  }
  return std::nullopt;
}

template <typename T>
void set_optional(Json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

}  // namespace fedledger
