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
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fedledger/network.hpp"
#include "fedledger/node.hpp"
#include "fedledger/plan.hpp"

namespace fedledger {

/// One scripted action at a given tick. The spec object keeps the raw JSON
/// form: {"tick": T, "action": "...", ...}.
struct ScenarioEvent {
  std::uint64_t tick = 0;
  Json spec;
};

/// A complete scripted run: the cohort, the orderer, determinism knobs and
/// the event list. Parsing validates the orderer and sorts events by tick,
/// preserving file order within a tick.
struct Scenario {
  std::string name = "scenario";
  std::vector<NodeId> nodes;
  NodeId orderer;
  std::uint64_t seed = 0;
  std::uint32_t jitter = 0;
  std::uint32_t fetch_timeout = 5;
  std::uint64_t max_ticks = 500;
  std::vector<ScenarioEvent> events;

  static Scenario parse(const Json& j);
  static Scenario load(const std::filesystem::path& file);
  Json to_json() const;
};

/// Drives every node of a scenario in one process: scripted events feed
/// transactions into node outboxes, the orderer commits one block per atomic
/// group per tick, the network carries blocks and asset fetches, and each
/// node executes its assigned tuples. Everything is deterministic in the
/// scenario plus its seed.
///
/// Workspace layout: `nodes/<id>/` per-node state, `trace.jsonl` the message
/// trace, `network.json` the scenario echo plus the current tick.
class Simulation {
 public:
  Simulation(Scenario scenario, std::filesystem::path workdir);

  /// Reopens a saved workspace to run further ticks; scripted events are not
  /// re-applied, the trace continues where it stopped.
  static Simulation reopen(const std::filesystem::path& workdir);

  /// Ticks until quiescent or the limit; returns the tick reached. The
  /// optional override replaces the scenario's max_ticks bound.
  std::uint64_t run(std::optional<std::uint64_t> until_tick = std::nullopt);
  void step();
  bool quiescent() const;
  std::uint64_t now() const { return tick_; }

  Node& node(const NodeId& id);
  const Node& node(const NodeId& id) const;
  Network& network() { return network_; }
  const NetworkTrace& trace() const { return network_.trace(); }
  const Scenario& scenario() const { return scenario_; }

  /// The orderer's replica, which is never behind any other node's.
  const WorldState& state() const;
  const Chain& chain() const;

  /// Groups the orderer refused, in refusal order.
  const std::vector<Rejection>& rejections() const { return rejections_; }

  /// Scenario symbol table: event/plan id -> transaction key.
  ContentHash resolve(const std::string& symbol) const;
  bool has_symbol(const std::string& symbol) const { return symbols_.contains(symbol); }

  /// Sample keys of a dataset symbol, filtered to "train", "test" or "all".
  std::vector<ContentHash> dataset_samples(const std::string& symbol,
                                           const std::string& which) const;

  /// Unique marker bytes embedded in every generated sample blob, the
  /// evidence for the no-leak audit: none of these may appear in any traced
  /// message payload.
  const std::vector<std::pair<ContentHash, Bytes>>& sample_markers() const { return markers_; }

  /// Markers found in the trace; an empty result is a clean audit.
  std::vector<ContentHash> audit_leaks() const;

  void save();

 private:
  void apply_event(const Json& spec);
  PermissionRegime regime_from_event(const Json& spec, const NodeId& owner) const;
  std::vector<ContentHash> sample_refs_from_event(const Json& spec) const;
  void register_symbol(const std::string& id, const ContentHash& key);
  Bytes next_marker_line();

  Scenario scenario_;
  std::filesystem::path workdir_;
  Network network_;
  std::map<NodeId, std::unique_ptr<Node>> nodes_;
  std::vector<NodeId> poll_order_;
  std::uint64_t tick_ = 0;
  std::size_t next_event_ = 0;
  std::vector<std::vector<Transaction>> mempool_;
  std::vector<Rejection> rejections_;
  std::map<std::string, ContentHash> symbols_;
  std::map<std::string, std::vector<std::pair<ContentHash, bool>>> dataset_samples_;
  std::map<std::string, ml::OpenerDescriptor> openers_;
  std::vector<std::pair<ContentHash, Bytes>> markers_;
  std::mt19937_64 marker_rng_;
};

}  // namespace fedledger
