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
#include "fedledger/plan.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <stdexcept>
#include <utility>

#include "fedledger/errors.hpp"
#include "fedledger/ml/kernels.hpp"

namespace fedledger {

namespace {

const std::string& step_id(const PlanStep& step) {
  return std::visit([](const auto& s) -> const std::string& { return s.id; }, step);
}

std::vector<PlanRef> step_refs(const PlanStep& step) {
  std::vector<PlanRef> refs;
  if (const auto* train = std::get_if<PlanTraintuple>(&step)) {
    refs.push_back(train->objective);
    refs.push_back(train->algorithm);
    if (train->dataset) refs.push_back(*train->dataset);
    refs.insert(refs.end(), train->train_samples.begin(), train->train_samples.end());
    refs.insert(refs.end(), train->inputs.begin(), train->inputs.end());
  } else {
    const auto& test = std::get<PlanTesttuple>(step);
    refs.push_back(test.traintuple);
    refs.push_back(test.objective);
    if (test.dataset) refs.push_back(*test.dataset);
    refs.insert(refs.end(), test.test_samples.begin(), test.test_samples.end());
  }
  return refs;
}

}  // namespace

void ComputePlan::validate() const {
  if (steps.empty()) throw EmptyPlanError("a plan needs at least one tuple");
  std::set<std::string> ids;
  for (const auto& step : steps) {
    const std::string& id = step_id(step);
    if (id.empty() || id.front() == '@') {
      throw SchemaError("plan step id '" + id + "' is invalid");
    }
    if (!ids.insert(id).second) throw SchemaError("duplicate plan step id '" + id + "'");
  }
  topological_order();  // raises CycleError on a cyclic graph
}

std::map<std::string, std::vector<std::string>> ComputePlan::dependencies() const {
  std::set<std::string> ids;
  for (const auto& step : steps) ids.insert(step_id(step));
  std::map<std::string, std::vector<std::string>> edges;
  for (const auto& step : steps) {
    auto& deps = edges[step_id(step)];
    for (const auto& ref : step_refs(step)) {
      if (!is_symbolic(ref)) continue;
      const std::string symbol = ref.substr(1);
      if (ids.contains(symbol)) deps.push_back(symbol);
    }
  }
  return edges;
}

std::vector<std::string> ComputePlan::topological_order() const {
  const auto edges = dependencies();
  std::map<std::string, std::size_t> pending;
  std::map<std::string, std::vector<std::string>> dependents;
  for (const auto& [id, deps] : edges) {
    pending[id] = deps.size();
    for (const auto& dep : deps) dependents[dep].push_back(id);
  }
  // Kahn's algorithm, seeded in listed order for a stable result.
  std::deque<std::string> ready;
  for (const auto& step : steps) {
    if (pending.at(step_id(step)) == 0) ready.push_back(step_id(step));
  }
  std::vector<std::string> order;
  while (!ready.empty()) {
    const std::string id = ready.front();
    ready.pop_front();
    order.push_back(id);
    const auto it = dependents.find(id);
    if (it == dependents.end()) continue;
    for (const auto& next : it->second) {
      if (--pending.at(next) == 0) ready.push_back(next);
    }
  }
  if (order.size() != steps.size()) {
    throw CycleError("plan dependency graph contains a cycle");
  }
  return order;
}

std::vector<Transaction> ComputePlan::resolve(const NodeId& creator, const RefResolver& external,
                                              std::map<std::string, ContentHash>* keys_out) const {
  validate();
  std::map<std::string, ContentHash> keys;
  const auto resolve_ref = [&](const PlanRef& ref) -> ContentHash {
    if (is_symbolic(ref)) {
      const std::string symbol = ref.substr(1);
      if (const auto it = keys.find(symbol); it != keys.end()) return it->second;
      if (external) return external(symbol);
      throw UnknownRefError("unresolved plan symbol '" + ref + "'");
    }
    try {
      return ContentHash::from_hex(ref);
    } catch (const std::invalid_argument&) {
      throw UnknownRefError("'" + ref + "' is neither a key nor a known symbol");
    }
  };

  std::map<std::string, const PlanStep*> by_id;
  for (const auto& step : steps) by_id[step_id(step)] = &step;

  std::vector<Transaction> txs;
  for (const std::string& id : topological_order()) {
    const PlanStep& step = *by_id.at(id);
    TxPayload payload;
    if (const auto* train = std::get_if<PlanTraintuple>(&step)) {
      CreateTraintuple p;
      p.objective_key = resolve_ref(train->objective);
      p.algorithm_key = resolve_ref(train->algorithm);
      if (train->dataset) p.dataset_key = resolve_ref(*train->dataset);
      for (const auto& ref : train->train_samples) p.train_sample_keys.push_back(resolve_ref(ref));
      for (const auto& ref : train->inputs) p.input_model_keys.push_back(resolve_ref(ref));
      p.requested_permissions = train->requested_permissions;
      if (!tag.empty()) p.tag = tag;
      payload = std::move(p);
    } else {
      const auto& test = std::get<PlanTesttuple>(step);
      CreateTesttuple p;
      p.traintuple_key = resolve_ref(test.traintuple);
      p.objective_key = resolve_ref(test.objective);
      if (test.dataset) p.dataset_key = resolve_ref(*test.dataset);
      for (const auto& ref : test.test_samples) p.test_sample_keys.push_back(resolve_ref(ref));
      if (!tag.empty()) p.tag = tag;
      payload = std::move(p);
    }
    Transaction tx = Transaction::make(creator, std::move(payload));
    keys[id] = tx.tx_id;
    txs.push_back(std::move(tx));
  }
  if (keys_out) *keys_out = std::move(keys);
  return txs;
}

// -- JSON ---------------------------------------------------------------------

Json ComputePlan::to_json() const {
  Json tuples = Json::array();
  for (const auto& step : steps) {
    Json j;
    if (const auto* train = std::get_if<PlanTraintuple>(&step)) {
      j["type"] = "traintuple";
      j["id"] = train->id;
      j["objective"] = train->objective;
      j["algorithm"] = train->algorithm;
      set_optional(j, "dataset", train->dataset);
      j["train_samples"] = train->train_samples;
      j["inputs"] = train->inputs;
      set_optional(j, "requested_permissions", train->requested_permissions);
    } else {
      const auto& test = std::get<PlanTesttuple>(step);
      j["type"] = "testtuple";
      j["id"] = test.id;
      j["traintuple"] = test.traintuple;
      j["objective"] = test.objective;
      set_optional(j, "dataset", test.dataset);
      j["test_samples"] = test.test_samples;
    }
    tuples.push_back(std::move(j));
  }
  return Json{{"tag", tag}, {"tuples", std::move(tuples)}};
}

ComputePlan ComputePlan::parse(const Json& j) {
  ComputePlan plan;
  plan.tag = j.at("tag").get<std::string>();
  for (const Json& t : j.at("tuples")) {
    const std::string type = t.at("type").get<std::string>();
    if (type == "traintuple") {
      PlanTraintuple step;
      t.at("id").get_to(step.id);
      t.at("objective").get_to(step.objective);
      t.at("algorithm").get_to(step.algorithm);
      step.dataset = get_optional<PlanRef>(t, "dataset");
      t.at("train_samples").get_to(step.train_samples);
      t.at("inputs").get_to(step.inputs);
      step.requested_permissions = get_optional<PermissionRegime>(t, "requested_permissions");
      plan.steps.emplace_back(std::move(step));
    } else if (type == "testtuple") {
      PlanTesttuple step;
      t.at("id").get_to(step.id);
      t.at("traintuple").get_to(step.traintuple);
      t.at("objective").get_to(step.objective);
      step.dataset = get_optional<PlanRef>(t, "dataset");
      t.at("test_samples").get_to(step.test_samples);
      plan.steps.emplace_back(std::move(step));
    } else {
      throw SchemaError("unknown plan tuple type: " + type);
    }
  }
  return plan;
}

// -- builders -----------------------------------------------------------------

ComputePlan build_sequential(const std::vector<PlanDataset>& datasets, const PlanRef& algorithm,
                             const PlanRef& objective, std::string tag) {
  if (datasets.empty()) throw EmptyPlanError("sequential plan needs at least one dataset");
  ComputePlan plan;
  plan.tag = std::move(tag);
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    PlanTraintuple step;
    step.id = "train-" + std::to_string(i);
    step.objective = objective;
    step.algorithm = algorithm;
    step.dataset = datasets[i].dataset;
    step.train_samples = datasets[i].samples;
    if (i > 0) step.inputs = {ref_to("train-" + std::to_string(i - 1))};
    plan.steps.emplace_back(std::move(step));
  }
  plan.validate();
  return plan;
}

ComputePlan build_fedavg(const std::vector<PlanDataset>& partitions, const PlanRef& trainer,
                         const PlanRef& aggregator, const PlanRef& objective,
                         std::uint32_t rounds, std::string tag) {
  if (partitions.size() < 2) throw EmptyPlanError("federated averaging needs >= 2 partitions");
  if (rounds < 1) throw BadRoundsError("federated averaging needs >= 1 round");
  ComputePlan plan;
  plan.tag = std::move(tag);
  for (std::uint32_t r = 0; r < rounds; ++r) {
    const std::string round = "round-" + std::to_string(r);
    std::vector<PlanRef> outputs;
    for (std::size_t i = 0; i < partitions.size(); ++i) {
      PlanTraintuple step;
      step.id = round + "-train-" + std::to_string(i);
      step.objective = objective;
      step.algorithm = trainer;
      step.dataset = partitions[i].dataset;
      step.train_samples = partitions[i].samples;
      if (r > 0) step.inputs = {ref_to("round-" + std::to_string(r - 1) + "-agg")};
      outputs.push_back(ref_to(step.id));
      plan.steps.emplace_back(std::move(step));
    }
    PlanTraintuple agg;
    agg.id = round + "-agg";
    agg.objective = objective;
    agg.algorithm = aggregator;
    agg.inputs = std::move(outputs);
    plan.steps.emplace_back(std::move(agg));
  }
  plan.validate();
  return plan;
}

ComputePlan build_composite_fedavg(const std::vector<PlanDataset>& partners,
                                   const PlanRef& composite, const PlanRef& trunk_aggregator,
                                   const PlanRef& objective, std::uint32_t rounds,
                                   std::string tag) {
  if (partners.size() < 2) throw EmptyPlanError("composite averaging needs >= 2 partners");
  if (rounds < 1) throw BadRoundsError("composite averaging needs >= 1 round");
  ComputePlan plan;
  plan.tag = std::move(tag);
  for (std::uint32_t r = 0; r < rounds; ++r) {
    const std::string round = "round-" + std::to_string(r);
    std::vector<PlanRef> trunk_outputs;
    for (std::size_t i = 0; i < partners.size(); ++i) {
      PlanTraintuple step;
      step.id = round + "-partner-" + std::to_string(i);
      step.objective = objective;
      step.algorithm = composite;
      step.dataset = partners[i].dataset;
      step.train_samples = partners[i].samples;
      if (r > 0) {
        // Shared trunk aggregate first, own previous head second.
        step.inputs = {ref_to("round-" + std::to_string(r - 1) + "-agg"),
                       ref_to("round-" + std::to_string(r - 1) + "-partner-" +
                              std::to_string(i))};
      }
      trunk_outputs.push_back(ref_to(step.id));
      plan.steps.emplace_back(std::move(step));
    }
    PlanTraintuple agg;
    agg.id = round + "-agg";
    agg.objective = objective;
    agg.algorithm = trunk_aggregator;
    agg.inputs = std::move(trunk_outputs);
    plan.steps.emplace_back(std::move(agg));
  }
  plan.validate();
  return plan;
}

ComputePlan& attach_evaluation(ComputePlan& plan, const PlanRef& objective,
                               const std::vector<std::string>& after_ids) {
  std::set<std::string> ids;
  for (const auto& step : plan.steps) ids.insert(step_id(step));
  for (const auto& id : after_ids) {
    if (!ids.contains(id)) throw UnknownRefError("plan has no step '" + id + "'");
    PlanTesttuple eval;
    eval.id = id + "-eval";
    eval.traintuple = ref_to(id);
    eval.objective = objective;
    plan.steps.emplace_back(std::move(eval));
  }
  plan.validate();
  return plan;
}

ComputePlan build_kfold(const PlanRef& dataset, const std::vector<ContentHash>& sample_keys,
                        const PlanRef& algorithm, const PlanRef& objective, std::size_t k,
                        std::string tag) {
  const auto folds = ml::kfold_split(sample_keys, k);
  ComputePlan plan;
  plan.tag = std::move(tag);
  for (std::size_t i = 0; i < folds.size(); ++i) {
    const std::string fold = "fold-" + std::to_string(i);
    PlanTraintuple train;
    train.id = fold + "-train";
    train.objective = objective;
    train.algorithm = algorithm;
    train.dataset = dataset;
    for (const auto& key : folds[i].first) train.train_samples.push_back(ref_key(key));
    plan.steps.emplace_back(std::move(train));

    PlanTesttuple test;
    test.id = fold + "-test";
    test.traintuple = ref_to(fold + "-train");
    test.objective = objective;
    test.dataset = dataset;
    for (const auto& key : folds[i].second) test.test_samples.push_back(ref_key(key));
    plan.steps.emplace_back(std::move(test));
  }
  plan.validate();
  return plan;
}

double kfold_mean_performance(const WorldState& state, const std::string& tag) {
  double sum = 0.0;
  std::size_t done = 0, total = 0;
  for (const auto& [key, tuple] : state.testtuples) {
    if (tuple.tag != tag) continue;
    ++total;
    if (tuple.status == TupleStatus::done && tuple.performance) {
      sum += *tuple.performance;
      ++done;
    }
  }
  if (total == 0) throw NotFoundError("no evaluations tagged '" + tag + "'");
  if (done != total) {
    throw Error("evaluations tagged '" + tag + "' are not all settled (" +
                std::to_string(done) + "/" + std::to_string(total) + " done)");
  }
  return sum / static_cast<double>(done);
}

}  // namespace fedledger
