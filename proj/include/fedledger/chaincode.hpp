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
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "fedledger/assets.hpp"
#include "fedledger/ledger.hpp"

namespace fedledger {

// -- tuples -------------------------------------------------------------------

/// A scheduled training task: which algorithm runs on which samples, fed by
/// which earlier outputs, on which node. The permissions regime governs the
/// output model (for composites, the trunk; the head stays private to the
/// worker).
struct Traintuple {
  ContentHash key;
  NodeId creator;
  ContentHash objective_key;
  ContentHash algorithm_key;
  std::optional<ContentHash> dataset_key;
  std::vector<ContentHash> train_sample_keys;
  std::vector<ContentHash> input_model_keys;
  NodeId worker;
  TupleStatus status = TupleStatus::todo;
  std::uint32_t rank = 0;
  std::optional<std::string> tag;
  PermissionRegime permissions;
  std::optional<ContentHash> output_model_key;
  std::optional<ContentHash> head_model_key;
  std::optional<double> performance;
  std::string log;

  bool operator==(const Traintuple&) const = default;
};

/// A scheduled evaluation of one traintuple's output model. Certified runs
/// use exactly the objective's registered test split.
struct Testtuple {
  ContentHash key;
  NodeId creator;
  ContentHash traintuple_key;
  ContentHash objective_key;
  ContentHash algorithm_key;
  std::optional<ContentHash> dataset_key;
  std::vector<ContentHash> test_sample_keys;
  NodeId worker;
  bool certified = true;
  TupleStatus status = TupleStatus::todo;
  std::optional<double> performance;
  std::optional<std::string> tag;
  std::string log;

  bool operator==(const Testtuple&) const = default;
};

void to_json(Json& j, const Traintuple& v);
void from_json(const Json& j, Traintuple& v);
void to_json(Json& j, const Testtuple& v);
void from_json(const Json& j, Testtuple& v);

// -- rejection ----------------------------------------------------------------

/// Stable machine-readable reasons for refusing a transaction; part of the
/// CLI/JSON contract.
enum class RejectionCode {
  PermissionDenied,
  TestDataSanctuary,
  UnknownAsset,
  PermissionWiden,
  IllegalTransition,
  NotWorker,
  MissingResult,
  KindMismatch,
};

std::string to_string(RejectionCode code);

struct Rejection {
  RejectionCode code = RejectionCode::UnknownAsset;
  std::string detail;
};

// -- world state --------------------------------------------------------------

/// Everything derivable from the chain: asset records and tuples keyed by
/// content hash. Never persisted; always rebuilt by replay. The status
/// journal records every status a tuple ever took, in order, and stays out of
/// the digest (it is derived bookkeeping for audits and tests).
struct WorldState {
  std::map<ContentHash, Objective> objectives;
  std::map<ContentHash, Dataset> datasets;
  std::map<ContentHash, DataSample> samples;
  std::map<ContentHash, Algorithm> algorithms;
  std::map<ContentHash, ModelRecord> models;
  std::map<ContentHash, Traintuple> traintuples;
  std::map<ContentHash, Testtuple> testtuples;
  std::vector<std::pair<ContentHash, TupleStatus>> status_journal;

  Json to_json() const;
  ContentHash digest() const;

  /// The regime currently in force for an input model: the model record once
  /// the output exists (it may have been retuned), the producing tuple's
  /// regime before that.
  const PermissionRegime& model_regime(const Traintuple& producer) const;
};

/// Validates the transaction against the state and applies its effects.
/// Returns a Rejection (state untouched) or nullopt on success. Pure in the
/// sense that identical (state, tx) pairs always produce identical outcomes.
std::optional<Rejection> apply_transaction(WorldState& state, const Transaction& tx);

/// Atomic block append: every transaction must validate in sequence or
/// nothing is committed. Empty groups raise EmptyBlockError; forged tx ids
/// raise IntegrityError.
std::variant<Block, Rejection> try_append(Chain& chain, WorldState& state,
                                          std::vector<Transaction> txs);

/// Rebuilds the state from scratch. The chain must validate and every
/// recorded transaction must apply cleanly; anything else raises
/// IntegrityError.
WorldState replay(const Chain& chain);

/// Certified, done evaluations of the objective as (traintuple key,
/// performance), best first; ties resolve by traintuple key order.
std::vector<std::pair<ContentHash, double>> leaderboard(const WorldState& state,
                                                        const ContentHash& objective_key);

/// Length cap applied to every stored tuple log.
inline constexpr std::size_t kMaxLogBytes = 4096;
std::string clip_log(const std::string& log);

}  // namespace fedledger
