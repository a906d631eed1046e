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
#include "fedledger/store.hpp"

#include <algorithm>
#include <fstream>
#include <system_error>

#include "fedledger/errors.hpp"

namespace fedledger {

namespace fs = std::filesystem;

namespace {

Bytes read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StoreError("cannot open " + path.string());
  Bytes out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw StoreError("read failed for " + path.string());
  return out;
}

void write_file(const fs::path& path, const Bytes& bytes) {
  // Write to a sibling temp file then rename, so a crash never leaves a
  // half-written blob under a valid name.
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StoreError("cannot create " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw StoreError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw StoreError("rename failed for " + path.string() + ": " + ec.message());
}

}  // namespace

BlobStore::BlobStore(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) throw StoreError("cannot create store root " + root_.string() + ": " + ec.message());
}

fs::path BlobStore::path_for(const ContentHash& hash) const { return root_ / hash.hex(); }

ContentHash BlobStore::put(const Bytes& bytes) {
  const ContentHash hash = sha256(bytes);
  const fs::path path = path_for(hash);
  std::lock_guard lock(write_mutex_);
  if (fs::exists(path)) {
    if (read_file(path) != bytes) {
      throw IntegrityError("store collision: existing bytes under " + hash.hex() + " differ");
    }
    return hash;
  }
  write_file(path, bytes);
  return hash;
}

Bytes BlobStore::get(const ContentHash& hash) const {
  const fs::path path = path_for(hash);
  if (!fs::exists(path)) throw NotFoundError("no blob " + hash.hex());
  Bytes bytes = read_file(path);
  if (sha256(bytes) != hash) {
    throw IntegrityError("blob " + hash.hex() + " fails digest verification");
  }
  return bytes;
}

bool BlobStore::contains(const ContentHash& hash) const { return fs::exists(path_for(hash)); }

std::size_t BlobStore::size() const { return list().size(); }

std::vector<ContentHash> BlobStore::list() const {
  std::vector<ContentHash> out;
  for (const auto& entry : fs::directory_iterator(root_)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() != ContentHash::kHexSize) continue;  // skip temp files
    try {
      out.push_back(ContentHash::from_hex(name));
    } catch (const std::invalid_argument&) {
      // Not a blob file.
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace fedledger
