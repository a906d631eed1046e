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
#include <deque>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fedledger/canonical.hpp"
#include "fedledger/hash.hpp"
#include "fedledger/ledger.hpp"

namespace fedledger {

// -- messages and trace -------------------------------------------------------

enum class MessageKind { BlockBroadcast, AssetRequest, AssetResponse, AssetDenied };

std::string to_string(MessageKind k);
MessageKind message_kind_from_string(const std::string& s);

/// One delivered message on either overlay. Block broadcasts and asset
/// requests carry canonical-JSON metadata; asset responses carry the raw
/// blob bytes of an algorithm or model. Private sample bytes never ride in
/// any message.
struct Message {
  std::uint64_t seq = 0;
  NodeId from;
  NodeId to;
  MessageKind kind = MessageKind::BlockBroadcast;
  Bytes payload;

  bool operator==(const Message&) const = default;
};

void to_json(Json& j, const Message& m);
void from_json(const Json& j, Message& m);

/// Append-only record of every delivered message, in delivery order. This is
/// the evidence base for the no-data-leak audit: a payload that never appears
/// here never crossed a node boundary.
class NetworkTrace {
 public:
  const std::vector<Message>& messages() const { return messages_; }

  /// Records a delivery; the sequence number must continue the trace.
  void record(Message m);

  /// Next sequence number to assign.
  std::uint64_t next_seq() const { return next_seq_; }
  void start_at(std::uint64_t seq) { next_seq_ = seq; }

  /// True iff the byte pattern occurs in at least one payload.
  bool contains(std::string_view bytes) const;

  /// JSON-lines export, one message per line in canonical form.
  Bytes serialize() const;
  void save(const std::filesystem::path& file) const;

  /// Restores a saved trace; malformed lines raise IntegrityError. A missing
  /// file loads as an empty trace.
  static NetworkTrace parse(const Bytes& bytes);
  static NetworkTrace load(const std::filesystem::path& file);

 private:
  std::vector<Message> messages_;
  std::uint64_t next_seq_ = 0;
};

// -- peers --------------------------------------------------------------------

/// Refusal to serve an asset, with the reason that goes on the wire
/// ("PrivateAsset", "UnknownAsset", "PermissionDenied").
struct AssetDenial {
  std::string reason;
};

/// Node-side half of the overlay protocols: accepting validated blocks and
/// authorizing asset requests against the local ledger replica.
class NetworkPeer {
 public:
  virtual ~NetworkPeer() = default;

  virtual void receive_block(const Block& block) = 0;

  /// Holder-side authorization and lookup: the blob bytes or a denial.
  virtual std::variant<Bytes, AssetDenial> handle_asset_request(const NodeId& requester,
                                                                const ContentHash& key) = 0;
};

/// Outcome of a synchronous asset fetch.
struct FetchResult {
  enum class Status { delivered, denied, unreachable };
  Status status = Status::unreachable;
  Bytes blob;          // set when delivered
  std::string reason;  // set when denied
};

// -- network ------------------------------------------------------------------

/// Deterministic in-process transport for both overlays. Blocks travel with
/// at least one tick of latency (plus optional seeded jitter) through
/// per-destination FIFO queues; asset fetches resolve synchronously within a
/// tick. Partitioned nodes exchange nothing; their block queues buffer and
/// flush in order once healed.
class Network {
 public:
  /// jitter_max adds 0..jitter_max extra ticks of seeded latency per block
  /// delivery while preserving per-destination order.
  Network(std::uint64_t seed = 0, std::uint32_t jitter_max = 0);

  void attach(const NodeId& id, NetworkPeer* peer);

  /// Removes the node permanently; queued deliveries to it are dropped.
  void detach(const NodeId& id);
  bool attached(const NodeId& id) const;

  void partition(const NodeId& id);
  void heal(const NodeId& id);

  /// Both endpoints attached and neither partitioned.
  bool reachable(const NodeId& a, const NodeId& b) const;

  /// Queues one delivery of the block to every other attached node.
  void broadcast_block(const NodeId& from, const Block& block, std::uint64_t now);

  /// Delivers every queued block that is due and whose link is up, in
  /// per-destination FIFO order, recording each delivery in the trace.
  void deliver_due(std::uint64_t now);

  /// Synchronous permissioned fetch. Request, response and denial messages
  /// are traced only when the link is up; an unreachable holder produces no
  /// traffic at all.
  FetchResult request_asset(const NodeId& requester, const NodeId& holder,
                            const ContentHash& key);

  /// True when no queued block delivery remains.
  bool idle() const;

  const NetworkTrace& trace() const { return trace_; }
  NetworkTrace& trace() { return trace_; }

 private:
  struct Pending {
    NodeId from;
    Bytes payload;  // serialized block
    Block block;
    std::uint64_t due = 0;
  };

  std::map<NodeId, NetworkPeer*> peers_;
  std::set<NodeId> partitioned_;
  std::map<NodeId, std::deque<Pending>> queues_;
  NetworkTrace trace_;
  std::mt19937_64 jitter_rng_;
  std::uint32_t jitter_max_ = 0;
};

}  // namespace fedledger
