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
#include "fedledger/network.hpp"

#include <fstream>
#include <iterator>
#include <utility>

#include "fedledger/errors.hpp"

namespace fedledger {

std::string to_string(MessageKind k) {
  switch (k) {
    case MessageKind::BlockBroadcast: return "block_broadcast";
    case MessageKind::AssetRequest: return "asset_request";
    case MessageKind::AssetResponse: return "asset_response";
    case MessageKind::AssetDenied: return "asset_denied";
  }
  throw SchemaError("unknown message kind");
}

MessageKind message_kind_from_string(const std::string& s) {
  if (s == "block_broadcast") return MessageKind::BlockBroadcast;
  if (s == "asset_request") return MessageKind::AssetRequest;
  if (s == "asset_response") return MessageKind::AssetResponse;
  if (s == "asset_denied") return MessageKind::AssetDenied;
  throw SchemaError("unknown message kind: " + s);
}

void to_json(Json& j, const Message& m) {
  j = Json{{"seq", m.seq},
           {"from", m.from},
           {"to", m.to},
           {"kind", to_string(m.kind)},
           {"payload", m.payload}};
}

void from_json(const Json& j, Message& m) {
  j.at("seq").get_to(m.seq);
  j.at("from").get_to(m.from);
  j.at("to").get_to(m.to);
  m.kind = message_kind_from_string(j.at("kind").get<std::string>());
  j.at("payload").get_to(m.payload);
}

void NetworkTrace::record(Message m) {
  m.seq = next_seq_++;
  messages_.push_back(std::move(m));
}

bool NetworkTrace::contains(std::string_view bytes) const {
  for (const auto& m : messages_) {
    if (m.payload.find(bytes) != Bytes::npos) return true;
  }
  return false;
}

Bytes NetworkTrace::serialize() const {
  Bytes out;
  for (const auto& m : messages_) {
    out += canonical_dump(Json(m));
    out += '\n';
  }
  return out;
}

void NetworkTrace::save(const std::filesystem::path& file) const {
  std::ofstream f(file, std::ios::binary | std::ios::trunc);
  if (!f) throw StoreError("cannot write trace file " + file.string());
  const Bytes bytes = serialize();
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

NetworkTrace NetworkTrace::parse(const Bytes& bytes) {
  NetworkTrace trace;
  std::size_t start = 0, line = 1;
  while (start < bytes.size()) {
    std::size_t end = bytes.find('\n', start);
    if (end == Bytes::npos) end = bytes.size();
    if (end > start) {
      try {
        trace.messages_.push_back(Json::parse(bytes.substr(start, end - start)).get<Message>());
      } catch (const Json::exception& e) {
        throw IntegrityError("bad trace line " + std::to_string(line) + ": " + e.what());
      }
      trace.next_seq_ = trace.messages_.back().seq + 1;
    }
    start = end + 1;
    ++line;
  }
  return trace;
}

NetworkTrace NetworkTrace::load(const std::filesystem::path& file) {
  if (!std::filesystem::exists(file)) return {};
  std::ifstream f(file, std::ios::binary);
  if (!f) throw StoreError("cannot read trace file " + file.string());
  Bytes bytes{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
  return parse(bytes);
}

Network::Network(std::uint64_t seed, std::uint32_t jitter_max)
    : jitter_rng_(seed), jitter_max_(jitter_max) {}

void Network::attach(const NodeId& id, NetworkPeer* peer) { peers_[id] = peer; }

void Network::detach(const NodeId& id) {
  peers_.erase(id);
  partitioned_.erase(id);
  queues_.erase(id);
}

bool Network::attached(const NodeId& id) const { return peers_.contains(id); }

void Network::partition(const NodeId& id) {
  if (!attached(id)) throw ScenarioError("cannot partition unknown node " + id);
  partitioned_.insert(id);
}

void Network::heal(const NodeId& id) {
  if (!attached(id)) throw ScenarioError("cannot heal unknown node " + id);
  partitioned_.erase(id);
}

bool Network::reachable(const NodeId& a, const NodeId& b) const {
  if (a == b) return attached(a);
  return attached(a) && attached(b) && !partitioned_.contains(a) && !partitioned_.contains(b);
}

void Network::broadcast_block(const NodeId& from, const Block& block, std::uint64_t now) {
  const Bytes payload = canonical_dump(Json(block));
  for (const auto& [id, peer] : peers_) {
    if (id == from) continue;
    std::uint64_t due = now + 1;
    if (jitter_max_ > 0) due += jitter_rng_() % (jitter_max_ + 1);
    auto& queue = queues_[id];
    // FIFO per destination: a later block never overtakes an earlier one.
    if (!queue.empty() && queue.back().due > due) due = queue.back().due;
    queue.push_back(Pending{from, payload, block, due});
  }
}

void Network::deliver_due(std::uint64_t now) {
  for (auto& [id, queue] : queues_) {
    while (!queue.empty() && queue.front().due <= now) {
      const Pending& head = queue.front();
      if (!reachable(head.from, id)) break;  // buffered until the link heals
      trace_.record(Message{0, head.from, id, MessageKind::BlockBroadcast, head.payload});
      peers_.at(id)->receive_block(head.block);
      queue.pop_front();
    }
  }
}

FetchResult Network::request_asset(const NodeId& requester, const NodeId& holder,
                                   const ContentHash& key) {
  FetchResult result;
  if (requester == holder || !reachable(requester, holder)) {
    result.status = FetchResult::Status::unreachable;
    return result;
  }
  trace_.record(Message{0, requester, holder, MessageKind::AssetRequest,
                        canonical_dump(Json{{"key", key}})});
  const auto answer = peers_.at(holder)->handle_asset_request(requester, key);
  if (const auto* blob = std::get_if<Bytes>(&answer)) {
    if (sha256(*blob) != key) {
      throw IntegrityError("asset " + key.hex() + " served with mismatching digest");
    }
    trace_.record(Message{0, holder, requester, MessageKind::AssetResponse, *blob});
    result.status = FetchResult::Status::delivered;
    result.blob = *blob;
    return result;
  }
  const auto& reason = std::get<AssetDenial>(answer).reason;
  trace_.record(Message{0, holder, requester, MessageKind::AssetDenied,
                        canonical_dump(Json{{"key", key}, {"reason", reason}})});
  result.status = FetchResult::Status::denied;
  result.reason = reason;
  return result;
}

bool Network::idle() const {
  for (const auto& [id, queue] : queues_) {
    if (!queue.empty()) return false;
  }
  return true;
}

}  // namespace fedledger
