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
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "fedledger/chaincode.hpp"
#include "fedledger/ml/kernels.hpp"
#include "fedledger/network.hpp"
#include "fedledger/store.hpp"

namespace fedledger {

/// One institution's daemon: a ledger replica, a content-addressed asset
/// store, a private sample vault that never leaves the node, and the polling
/// loop that claims and executes the tuples assigned to it.
///
/// Directory layout: `private/` holds raw sample files named by digest,
/// `assets/` is the blob store, `ledger.jsonl` the replica. Reopening an
/// existing directory restores all three.
class Node : public NetworkPeer {
 public:
  Node(NodeId id, std::filesystem::path dir, std::uint32_t fetch_timeout_ticks = 5);

  const NodeId& id() const { return id_; }
  const std::filesystem::path& dir() const { return dir_; }
  const Chain& chain() const { return chain_; }
  const WorldState& state() const { return state_; }
  BlobStore& assets() { return assets_; }
  const BlobStore& assets() const { return assets_; }
  bool holds_private_sample(const ContentHash& key) const {
    return private_samples_.contains(key);
  }

  // -- NetworkPeer ------------------------------------------------------------

  /// Verifies and appends a broadcast block, then applies its transactions to
  /// the replica state. A block that fails verification or contains a
  /// rejected transaction raises IntegrityError.
  void receive_block(const Block& block) override;

  /// Holder-side authorization against this node's replica. Private sample
  /// bytes are denied unconditionally; algorithm and model blobs are served
  /// to download grantees and to the designated workers of active tuples
  /// that reference them.
  std::variant<Bytes, AssetDenial> handle_asset_request(const NodeId& requester,
                                                        const ContentHash& key) override;

  // -- local operations -------------------------------------------------------

  /// Stores sample bytes in the private vault and queues the metadata
  /// transaction: only hashes and test flags leave the node. Pairs already
  /// registered identically are dropped from the submission; if nothing new
  /// remains, no transaction is queued. Registering under a dataset the
  /// replica shows as foreign-owned is rejected locally, before submission.
  std::vector<ContentHash> register_local_data(const ContentHash& dataset_key,
                                               const std::vector<Bytes>& sample_blobs,
                                               const std::vector<bool>& test_only);

  /// Puts the serialized spec into the local asset store, returning its hash.
  ContentHash store_algorithm_blob(const ml::AlgorithmSpec& spec);

  /// Queues one transaction (or an atomic group) for the orderer; returns the
  /// would-be asset keys.
  ContentHash enqueue(TxPayload payload);
  std::vector<ContentHash> enqueue_group(std::vector<TxPayload> payloads);

  /// Queues pre-built transactions (a resolved plan) as one atomic group.
  /// Every transaction must carry this node as creator.
  void enqueue_transactions(std::vector<Transaction> group);

  /// Orderer role: validates the group against the local replica and commits
  /// it as one block, or reports the first rejection with nothing applied.
  std::variant<Block, Rejection> order_block(std::vector<Transaction> txs);

  std::vector<std::vector<Transaction>> take_outbox();
  bool outbox_empty() const { return outbox_.empty(); }

  /// One scheduler turn: claim every fresh assignment, then execute at most
  /// one running tuple. Missing remote assets are retried once per tick until
  /// the fetch timeout, after which the tuple fails with a log entry.
  void poll_and_execute(Network& network, std::uint64_t tick);

  /// True while some tuple assigned here can still make local progress.
  bool has_runnable_work() const;

  /// Local model serving: no ledger write, but the process right on the model
  /// is enforced and every referenced blob must be held locally.
  double serve_prediction(const ContentHash& model_key, const ml::Vector& features) const;

  void save_ledger() const;

 private:
  Bytes local_or_fetch(Network& network, const ContentHash& key, const NodeId& holder);
  ml::AlgorithmSpec fetch_algorithm_spec(Network& network, const ContentHash& algorithm_key);
  ml::SampleBatch open_local_samples(const ml::OpenerDescriptor& opener,
                                     const std::vector<ContentHash>& keys) const;
  void execute_traintuple(Network& network, const Traintuple& tuple);
  void execute_testtuple(Network& network, const Testtuple& tuple);
  bool worker_references_asset(const NodeId& requester, const ContentHash& key) const;

  NodeId id_;
  std::filesystem::path dir_;
  std::uint32_t fetch_timeout_;
  Chain chain_;
  WorldState state_;
  BlobStore assets_;
  std::map<ContentHash, Bytes> private_samples_;
  std::vector<std::vector<Transaction>> outbox_;
  std::set<ContentHash> claimed_;
  std::set<ContentHash> finished_;
  std::map<ContentHash, std::uint64_t> first_attempt_;
};

}  // namespace fedledger
