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

#include <filesystem>
#include <mutex>
#include <vector>

#include "fedledger/hash.hpp"

namespace fedledger {

/// Content-addressed blob storage: one file per blob, named by the hex digest
/// of its bytes, under a single root directory. Values are immutable once
/// written; every read re-verifies the digest.
///
/// Reads are safe from multiple threads; writes are serialized internally.
class BlobStore {
 public:
  explicit BlobStore(std::filesystem::path root);

  /// Stores the bytes and returns their digest. Idempotent: storing the same
  /// bytes again changes nothing. A pre-existing file with the same name but
  /// different bytes is a corruption and raises IntegrityError.
  ContentHash put(const Bytes& bytes);

  /// Throws NotFoundError for unknown hashes and IntegrityError when the
  /// on-disk bytes no longer digest to the requested hash.
  Bytes get(const ContentHash& hash) const;

  bool contains(const ContentHash& hash) const;

  /// Number of blobs currently stored.
  std::size_t size() const;

  /// All stored hashes, sorted.
  std::vector<ContentHash> list() const;

  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path path_for(const ContentHash& hash) const;

  std::filesystem::path root_;
  mutable std::mutex write_mutex_;
};

}  // namespace fedledger
