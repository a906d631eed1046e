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

#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fedledger/canonical.hpp"
#include "fedledger/hash.hpp"
#include "fedledger/ml/types.hpp"

namespace fedledger {

/// Institutions are identified by the short name of the node they run.
using NodeId = std::string;

/// Who may process an asset (use it in a computation) and who may download it
/// (obtain the raw bytes). Downloading implies processing, so download stays
/// a subset of process. An absent objective whitelist means the asset can
/// serve any objective.
struct PermissionRegime {
  NodeId owner;
  std::set<NodeId> process;
  std::set<NodeId> download;
  std::optional<std::set<ContentHash>> objective_whitelist;

  bool operator==(const PermissionRegime&) const = default;

  /// Owner-only regime.
  static PermissionRegime private_to(const NodeId& owner);

  /// Everyone listed may both process and download.
  static PermissionRegime open_to(const NodeId& owner, std::set<NodeId> nodes);

  /// Invariants hold: owner in both sets and download within process.
  bool valid() const;

  /// Re-establishes the invariants: the owner joins both sets and every
  /// download grant implies a process grant.
  PermissionRegime normalized() const;

  /// True when this regime grants no more than the wider one: subset node
  /// sets and a whitelist no looser (absent counts as universal).
  bool narrower_or_equal(const PermissionRegime& wider) const;
};

void to_json(Json& j, const PermissionRegime& r);
void from_json(const Json& j, PermissionRegime& r);

/// Permission regime of a model derived from several parent assets: the
/// intersection of all parents, with the holder granted download so that at
/// least one organization can retrieve the result.
PermissionRegime intersect_permissions(const std::vector<PermissionRegime>& regimes,
                                       const NodeId& holder);

/// True iff the requester may use the asset in a computation, optionally for
/// a specific objective. With no objective given the whitelist is not
/// consulted, so a download grant always implies a bare process grant.
bool check_process_right(const PermissionRegime& regime, const NodeId& requester,
                         const std::optional<ContentHash>& objective);

/// True iff the requester may obtain the asset bytes.
bool check_download_right(const PermissionRegime& regime, const NodeId& requester);

// -- asset records ------------------------------------------------------------

/// A registered learning objective: the metric plus the certified test set,
/// given as (sample key, dataset key) pairs.
struct Objective {
  ContentHash key;
  std::string name;
  std::optional<ContentHash> description_hash;
  ml::MetricSpec metric;
  NodeId owner;
  std::vector<std::pair<ContentHash, ContentHash>> test_samples;
  PermissionRegime permissions;

  bool operator==(const Objective&) const = default;
};

/// A registered dataset: the opener needed to parse its samples plus its
/// regime. The sample bytes themselves never appear on the ledger.
struct Dataset {
  ContentHash key;
  std::string name;
  ml::OpenerDescriptor opener;
  std::string data_type;
  std::optional<ContentHash> description_hash;
  NodeId owner;
  std::optional<ContentHash> objective_key;
  PermissionRegime permissions;

  bool operator==(const Dataset&) const = default;
};

/// Ledger-side view of one data sample: only its key (the hash of the bytes),
/// the datasets it belongs to, and whether it is reserved for testing.
struct DataSample {
  ContentHash key;
  std::set<ContentHash> dataset_keys;
  bool test_only = false;

  bool operator==(const DataSample&) const = default;
};

/// A registered algorithm. The full spec is a content-addressed blob served
/// over the asset network; the record pins its kind and hash.
struct Algorithm {
  ContentHash key;
  std::string name;
  ml::AlgorithmKind kind = ml::AlgorithmKind::trainer;
  ContentHash spec_hash;
  std::optional<ContentHash> description_hash;
  NodeId owner;
  std::optional<ContentHash> objective_key;
  PermissionRegime permissions;

  bool operator==(const Algorithm&) const = default;
};

/// A model produced by a traintuple. The key is the hash of the serialized
/// weights; the holder is the worker whose store has them.
struct ModelRecord {
  ContentHash key;
  ContentHash producing_tuple;
  NodeId holder;
  PermissionRegime permissions;

  bool operator==(const ModelRecord&) const = default;
};

void to_json(Json& j, const Objective& v);
void from_json(const Json& j, Objective& v);
void to_json(Json& j, const Dataset& v);
void from_json(const Json& j, Dataset& v);
void to_json(Json& j, const DataSample& v);
void from_json(const Json& j, DataSample& v);
void to_json(Json& j, const Algorithm& v);
void from_json(const Json& j, Algorithm& v);
void to_json(Json& j, const ModelRecord& v);
void from_json(const Json& j, ModelRecord& v);

}  // namespace fedledger
