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
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fedledger/chaincode.hpp"
#include "fedledger/ledger.hpp"

namespace fedledger {

/// A reference inside a plan: either "@id" naming another plan step or an
/// external symbol, or a literal 64-hex asset key.
using PlanRef = std::string;

inline bool is_symbolic(const PlanRef& ref) { return !ref.empty() && ref.front() == '@'; }
inline PlanRef ref_to(const std::string& symbol) { return "@" + symbol; }
inline PlanRef ref_key(const ContentHash& key) { return key.hex(); }

/// Resolves symbols that are not plan-local (scenario registry entries,
/// pre-existing world-state keys). Must throw UnknownRefError for symbols it
/// does not know.
using RefResolver = std::function<ContentHash(const std::string& symbol)>;

struct PlanTraintuple {
  std::string id;
  PlanRef objective;
  PlanRef algorithm;
  std::optional<PlanRef> dataset;
  std::vector<PlanRef> train_samples;
  std::vector<PlanRef> inputs;
  std::optional<PermissionRegime> requested_permissions;

  bool operator==(const PlanTraintuple&) const = default;
};

struct PlanTesttuple {
  std::string id;
  PlanRef traintuple;
  PlanRef objective;
  std::optional<PlanRef> dataset;
  std::vector<PlanRef> test_samples;

  bool operator==(const PlanTesttuple&) const = default;
};

using PlanStep = std::variant<PlanTraintuple, PlanTesttuple>;

/// A tagged DAG of tuple payloads with symbolic dependencies. Plans submit
/// as one atomic transaction group: either every step commits or none does.
struct ComputePlan {
  std::string tag;
  std::vector<PlanStep> steps;

  bool operator==(const ComputePlan&) const = default;

  /// Checks id uniqueness and shape; raises SchemaError on bad ids,
  /// EmptyPlanError on an empty plan, CycleError on a cyclic dependency
  /// graph (via topological_order).
  void validate() const;

  /// Step ids in dependency order, stable with respect to the listed order.
  std::vector<std::string> topological_order() const;

  /// Internal dependency edges, id -> ids it consumes. Only plan-local
  /// symbolic references produce edges.
  std::map<std::string, std::vector<std::string>> dependencies() const;

  /// Turns the plan into concrete transactions in dependency order. Plan
  /// symbols resolve to the keys of the generated transactions; everything
  /// else goes through the external resolver. Every payload carries the plan
  /// tag. The mapping from step id to transaction key is returned through
  /// keys_out when given.
  std::vector<Transaction> resolve(const NodeId& creator, const RefResolver& external = {},
                                   std::map<std::string, ContentHash>* keys_out = nullptr) const;

  Json to_json() const;
  static ComputePlan parse(const Json& j);
};

// -- builders -----------------------------------------------------------------

/// One partner's data in a plan: the dataset and the training samples to use.
struct PlanDataset {
  PlanRef dataset;
  std::vector<PlanRef> samples;
};

/// Chain of traintuples, each consuming the previous output; ranks 0..n-1.
ComputePlan build_sequential(const std::vector<PlanDataset>& datasets, const PlanRef& algorithm,
                             const PlanRef& objective, std::string tag);

/// rounds x (one trainer per partition + one aggregation) tuples. Round-0
/// trainers start from the spec's deterministic init; later rounds consume
/// the previous round's aggregate.
ComputePlan build_fedavg(const std::vector<PlanDataset>& partitions, const PlanRef& trainer,
                         const PlanRef& aggregator, const PlanRef& objective,
                         std::uint32_t rounds, std::string tag);

/// Composite variant: each partner's tuple consumes the shared trunk
/// aggregate plus its own previous head; only trunk outputs are aggregated,
/// heads stay private to their worker.
ComputePlan build_composite_fedavg(const std::vector<PlanDataset>& partners,
                                   const PlanRef& composite, const PlanRef& trunk_aggregator,
                                   const PlanRef& objective, std::uint32_t rounds,
                                   std::string tag);

/// Appends one certified testtuple after each named step ("<id>-eval").
/// Unknown ids raise UnknownRefError.
ComputePlan& attach_evaluation(ComputePlan& plan, const PlanRef& objective,
                               const std::vector<std::string>& after_ids);

/// k disjoint folds over the given samples: per fold one traintuple on the
/// other folds plus one custom testtuple on the held-out fold.
ComputePlan build_kfold(const PlanRef& dataset, const std::vector<ContentHash>& sample_keys,
                        const PlanRef& algorithm, const PlanRef& objective, std::size_t k,
                        std::string tag);

/// Mean performance over the done evaluations tagged with the plan tag; the
/// client-side summary of a k-fold plan. Raises NotFoundError when the tag
/// has no evaluations and Error when some are still unsettled.
double kfold_mean_performance(const WorldState& state, const std::string& tag);

}  // namespace fedledger
