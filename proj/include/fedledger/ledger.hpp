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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "fedledger/assets.hpp"
#include "fedledger/canonical.hpp"
#include "fedledger/hash.hpp"

namespace fedledger {

// -- tuple status -------------------------------------------------------------

/// Lifecycle of a compute tuple. Legal moves: waiting -> todo -> doing ->
/// {done, failed}, plus waiting -> failed when a dependency fails.
enum class TupleStatus { waiting, todo, doing, done, failed };

std::string to_string(TupleStatus s);
TupleStatus tuple_status_from_string(const std::string& s);

// -- transaction payloads -----------------------------------------------------
//
// Every payload carries Table-style metadata only: keys, hashes, names and
// regimes. Raw sample bytes and model weights never enter the ledger; they
// live in node-local stores and are referenced by hash.

struct RegisterObjective {
  std::string name;
  std::optional<ContentHash> description_hash;
  ml::MetricSpec metric;
  /// Certified test split as (sample key, dataset key) pairs.
  std::vector<std::pair<ContentHash, ContentHash>> test_samples;
  PermissionRegime permissions;

  bool operator==(const RegisterObjective&) const = default;
};

struct RegisterDataset {
  std::string name;
  ml::OpenerDescriptor opener;
  std::string data_type;
  std::optional<ContentHash> description_hash;
  std::optional<ContentHash> objective_key;
  PermissionRegime permissions;

  bool operator==(const RegisterDataset&) const = default;
};

struct RegisterDataSamples {
  ContentHash dataset_key;
  /// (sample key, test_only) pairs; the key is the hash of the sample bytes.
  std::vector<std::pair<ContentHash, bool>> samples;

  bool operator==(const RegisterDataSamples&) const = default;
};

struct RegisterAlgorithm {
  std::string name;
  ml::AlgorithmKind kind = ml::AlgorithmKind::trainer;
  ContentHash spec_hash;
  std::optional<ContentHash> description_hash;
  std::optional<ContentHash> objective_key;
  PermissionRegime permissions;

  bool operator==(const RegisterAlgorithm&) const = default;
};

struct CreateTraintuple {
  ContentHash objective_key;
  ContentHash algorithm_key;
  std::optional<ContentHash> dataset_key;
  std::vector<ContentHash> train_sample_keys;
  /// Keys of the traintuples whose output models feed this one.
  std::vector<ContentHash> input_model_keys;
  std::optional<PermissionRegime> requested_permissions;
  std::optional<std::string> tag;

  bool operator==(const CreateTraintuple&) const = default;
};

struct CreateTesttuple {
  ContentHash traintuple_key;
  ContentHash objective_key;
  /// Present together with sample keys for a custom (non-certified)
  /// evaluation; absent for a certified run on the objective's test split.
  std::optional<ContentHash> dataset_key;
  std::vector<ContentHash> test_sample_keys;
  std::optional<std::string> tag;

  bool operator==(const CreateTesttuple&) const = default;
};

struct UpdateStatus {
  ContentHash tuple_key;
  /// Only doing and failed arrive by explicit transition; done comes through
  /// the result transactions.
  TupleStatus new_status = TupleStatus::doing;
  std::string log;

  bool operator==(const UpdateStatus&) const = default;
};

struct LogTrainResult {
  ContentHash tuple_key;
  ContentHash model_hash;
  std::optional<ContentHash> head_model_hash;
  std::optional<double> performance;
  std::string log;

  bool operator==(const LogTrainResult&) const = default;
};

struct LogTestResult {
  ContentHash tuple_key;
  double performance = 0.0;
  std::string log;

  bool operator==(const LogTestResult&) const = default;
};

struct UpdatePermissions {
  ContentHash asset_key;
  PermissionRegime permissions;

  bool operator==(const UpdatePermissions&) const = default;
};

using TxPayload =
    std::variant<RegisterObjective, RegisterDataset, RegisterDataSamples, RegisterAlgorithm,
                 CreateTraintuple, CreateTesttuple, UpdateStatus, LogTrainResult, LogTestResult,
                 UpdatePermissions>;

/// Stable wire name of the payload alternative ("register_objective", ...).
std::string payload_type(const TxPayload& payload);

void to_json(Json& j, const TxPayload& payload);
void from_json(const Json& j, TxPayload& payload);

// -- transactions and blocks --------------------------------------------------

/// One signed-by-convention operation. The id is the digest of the canonical
/// {creator, payload} object, which also serves as the key of whatever asset
/// or tuple the transaction creates.
struct Transaction {
  ContentHash tx_id;
  NodeId creator;
  TxPayload payload;

  static Transaction make(NodeId creator, TxPayload payload);
  ContentHash compute_id() const;

  bool operator==(const Transaction&) const = default;
};

void to_json(Json& j, const Transaction& tx);
void from_json(const Json& j, Transaction& tx);

struct Block {
  std::uint64_t height = 0;
  ContentHash prev_hash;
  std::vector<Transaction> txs;
  ContentHash block_hash;

  /// Digest of the canonical {height, prev_hash, tx ids} object.
  ContentHash compute_hash() const;

  bool operator==(const Block&) const = default;
};

void to_json(Json& j, const Block& b);
void from_json(const Json& j, Block& b);

/// Append-only hash-linked block list. The genesis block links to the
/// all-zero digest. Persists as one canonical-JSON block per line, which is
/// byte-identical across replicas of the same chain.
class Chain {
 public:
  const std::vector<Block>& blocks() const { return blocks_; }
  std::uint64_t height() const { return blocks_.size(); }
  ContentHash tip_hash() const;

  /// Links a new block to the tip. Transactions must already be validated;
  /// empty lists raise EmptyBlockError.
  const Block& append(std::vector<Transaction> txs);

  /// Receive path: verifies linking, the block hash and every tx id before
  /// accepting, raising IntegrityError on any mismatch.
  void append_block(Block block);

  /// True iff every hash link, block hash and tx id recomputes.
  bool validate() const;

  Bytes serialize() const;
  void save(const std::filesystem::path& file) const;

  /// Parses a serialized chain; malformed lines raise IntegrityError. The
  /// result still needs validate() for hash checking.
  static Chain parse(const Bytes& bytes);
  static Chain load(const std::filesystem::path& file);

  bool operator==(const Chain&) const = default;

 private:
  std::vector<Block> blocks_;
};

}  // namespace fedledger
