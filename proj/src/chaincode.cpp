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
#include "fedledger/chaincode.hpp"

#include <algorithm>
#include <deque>

#include "fedledger/errors.hpp"

namespace fedledger {

// -- tuple JSON ---------------------------------------------------------------

void to_json(Json& j, const Traintuple& v) {
  j = Json::object();
  j["algorithm_key"] = v.algorithm_key;
  j["creator"] = v.creator;
  j["input_model_keys"] = v.input_model_keys;
  j["key"] = v.key;
  j["log"] = v.log;
  j["objective_key"] = v.objective_key;
  j["permissions"] = v.permissions;
  j["rank"] = v.rank;
  j["status"] = to_string(v.status);
  j["train_sample_keys"] = v.train_sample_keys;
  j["worker"] = v.worker;
  set_optional(j, "dataset_key", v.dataset_key);
  set_optional(j, "head_model_key", v.head_model_key);
  set_optional(j, "output_model_key", v.output_model_key);
  set_optional(j, "performance", v.performance);
  set_optional(j, "tag", v.tag);
}

void from_json(const Json& j, Traintuple& v) {
  v = Traintuple{};
  v.algorithm_key = j.at("algorithm_key").get<ContentHash>();
  v.creator = j.at("creator").get<NodeId>();
  v.input_model_keys = j.at("input_model_keys").get<std::vector<ContentHash>>();
  v.key = j.at("key").get<ContentHash>();
  v.log = j.at("log").get<std::string>();
  v.objective_key = j.at("objective_key").get<ContentHash>();
  v.permissions = j.at("permissions").get<PermissionRegime>();
  v.rank = j.at("rank").get<std::uint32_t>();
  v.status = tuple_status_from_string(j.at("status").get<std::string>());
  v.train_sample_keys = j.at("train_sample_keys").get<std::vector<ContentHash>>();
  v.worker = j.at("worker").get<NodeId>();
  v.dataset_key = get_optional<ContentHash>(j, "dataset_key");
  v.head_model_key = get_optional<ContentHash>(j, "head_model_key");
  v.output_model_key = get_optional<ContentHash>(j, "output_model_key");
  v.performance = get_optional<double>(j, "performance");
  v.tag = get_optional<std::string>(j, "tag");
}

void to_json(Json& j, const Testtuple& v) {
  j = Json::object();
  j["algorithm_key"] = v.algorithm_key;
  j["certified"] = v.certified;
  j["creator"] = v.creator;
  j["key"] = v.key;
  j["log"] = v.log;
  j["objective_key"] = v.objective_key;
  j["status"] = to_string(v.status);
  j["test_sample_keys"] = v.test_sample_keys;
  j["traintuple_key"] = v.traintuple_key;
  j["worker"] = v.worker;
  set_optional(j, "dataset_key", v.dataset_key);
  set_optional(j, "performance", v.performance);
  set_optional(j, "tag", v.tag);
}

void from_json(const Json& j, Testtuple& v) {
  v = Testtuple{};
  v.algorithm_key = j.at("algorithm_key").get<ContentHash>();
  v.certified = j.at("certified").get<bool>();
  v.creator = j.at("creator").get<NodeId>();
  v.key = j.at("key").get<ContentHash>();
  v.log = j.at("log").get<std::string>();
  v.objective_key = j.at("objective_key").get<ContentHash>();
  v.status = tuple_status_from_string(j.at("status").get<std::string>());
  v.test_sample_keys = j.at("test_sample_keys").get<std::vector<ContentHash>>();
  v.traintuple_key = j.at("traintuple_key").get<ContentHash>();
  v.worker = j.at("worker").get<NodeId>();
  v.dataset_key = get_optional<ContentHash>(j, "dataset_key");
  v.performance = get_optional<double>(j, "performance");
  v.tag = get_optional<std::string>(j, "tag");
}

// -- rejection ----------------------------------------------------------------

std::string to_string(RejectionCode code) {
  switch (code) {
    case RejectionCode::PermissionDenied: return "PermissionDenied";
    case RejectionCode::TestDataSanctuary: return "TestDataSanctuary";
    case RejectionCode::UnknownAsset: return "UnknownAsset";
    case RejectionCode::PermissionWiden: return "PermissionWiden";
    case RejectionCode::IllegalTransition: return "IllegalTransition";
    case RejectionCode::NotWorker: return "NotWorker";
    case RejectionCode::MissingResult: return "MissingResult";
    case RejectionCode::KindMismatch: return "KindMismatch";
  }
  throw SchemaError("bad rejection code");
}

std::string clip_log(const std::string& log) {
  static const std::string marker = "...[truncated]";
  if (log.size() <= kMaxLogBytes) return log;
  return log.substr(0, kMaxLogBytes - marker.size()) + marker;
}

// -- world state --------------------------------------------------------------

Json WorldState::to_json() const {
  auto dump_map = [](const auto& map) {
    Json out = Json::object();
    for (const auto& [key, value] : map) out[key.hex()] = value;
    return out;
  };
  Json j = Json::object();
  j["algorithms"] = dump_map(algorithms);
  j["datasets"] = dump_map(datasets);
  j["models"] = dump_map(models);
  j["objectives"] = dump_map(objectives);
  j["samples"] = dump_map(samples);
  j["testtuples"] = dump_map(testtuples);
  j["traintuples"] = dump_map(traintuples);
  return j;
}

ContentHash WorldState::digest() const { return hash_of(to_json()); }

const PermissionRegime& WorldState::model_regime(const Traintuple& producer) const {
  if (producer.output_model_key) {
    if (auto it = models.find(*producer.output_model_key); it != models.end()) {
      return it->second.permissions;
    }
  }
  return producer.permissions;
}

// -- transaction application --------------------------------------------------

namespace {

std::optional<Rejection> reject(RejectionCode code, std::string detail) {
  return Rejection{code, std::move(detail)};
}

void set_status(WorldState& state, Traintuple& tuple, TupleStatus status) {
  tuple.status = status;
  state.status_journal.emplace_back(tuple.key, status);
}

void set_status(WorldState& state, Testtuple& tuple, TupleStatus status) {
  tuple.status = status;
  state.status_journal.emplace_back(tuple.key, status);
}

bool inputs_all_done(const WorldState& state, const Traintuple& tuple) {
  return std::all_of(tuple.input_model_keys.begin(), tuple.input_model_keys.end(),
                     [&](const ContentHash& k) {
                       return state.traintuples.at(k).status == TupleStatus::done;
                     });
}

/// Marks every transitive dependent of the failed tuple as failed. Only
/// waiting tuples can depend on an unfinished one, so the sweep never touches
/// running or finished work.
void cascade_failure(WorldState& state, const ContentHash& failed_key) {
  std::deque<ContentHash> frontier{failed_key};
  while (!frontier.empty()) {
    const ContentHash parent = frontier.front();
    frontier.pop_front();
    for (auto& [key, tuple] : state.traintuples) {
      if (tuple.status != TupleStatus::waiting) continue;
      if (std::find(tuple.input_model_keys.begin(), tuple.input_model_keys.end(), parent) ==
          tuple.input_model_keys.end()) {
        continue;
      }
      tuple.log = clip_log("dependency failed: " + parent.hex());
      set_status(state, tuple, TupleStatus::failed);
      frontier.push_back(key);
    }
    for (auto& [key, tuple] : state.testtuples) {
      if (tuple.status != TupleStatus::waiting || tuple.traintuple_key != parent) continue;
      tuple.log = clip_log("dependency failed: " + parent.hex());
      set_status(state, tuple, TupleStatus::failed);
    }
  }
}

/// Flips dependents of a freshly completed traintuple from waiting to todo
/// once all of their inputs are done.
void release_dependents(WorldState& state, const ContentHash& done_key) {
  for (auto& [key, tuple] : state.traintuples) {
    if (tuple.status != TupleStatus::waiting) continue;
    if (std::find(tuple.input_model_keys.begin(), tuple.input_model_keys.end(), done_key) ==
        tuple.input_model_keys.end()) {
      continue;
    }
    if (inputs_all_done(state, tuple)) set_status(state, tuple, TupleStatus::todo);
  }
  for (auto& [key, tuple] : state.testtuples) {
    if (tuple.status == TupleStatus::waiting && tuple.traintuple_key == done_key) {
      set_status(state, tuple, TupleStatus::todo);
    }
  }
}

struct Applier {
  WorldState& state;
  const NodeId& creator;
  const ContentHash& key;  // tx id, doubling as the created asset's key

  std::optional<Rejection> operator()(const RegisterObjective& p) {
    if (state.objectives.contains(key)) return std::nullopt;  // idempotent
    if (p.permissions.owner != creator) {
      return reject(RejectionCode::PermissionDenied, "regime owner must be the creator");
    }
    std::optional<NodeId> test_owner;
    for (const auto& [sample_key, dataset_key] : p.test_samples) {
      const auto dataset = state.datasets.find(dataset_key);
      if (dataset == state.datasets.end()) {
        return reject(RejectionCode::UnknownAsset, "unknown dataset " + dataset_key.hex());
      }
      const auto sample = state.samples.find(sample_key);
      if (sample == state.samples.end()) {
        return reject(RejectionCode::UnknownAsset, "unknown sample " + sample_key.hex());
      }
      if (!sample->second.dataset_keys.contains(dataset_key)) {
        return reject(RejectionCode::UnknownAsset,
                      "sample " + sample_key.hex() + " is not in the named dataset");
      }
      if (!sample->second.test_only) {
        return reject(RejectionCode::TestDataSanctuary,
                      "certified test sets may only use test-only samples");
      }
      if (test_owner && *test_owner != dataset->second.owner) {
        return reject(RejectionCode::KindMismatch,
                      "certified test set must live on a single node");
      }
      test_owner = dataset->second.owner;
    }
    Objective obj;
    obj.key = key;
    obj.name = p.name;
    obj.description_hash = p.description_hash;
    obj.metric = p.metric;
    obj.owner = creator;
    obj.test_samples = p.test_samples;
    obj.permissions = p.permissions.normalized();
    state.objectives.emplace(key, std::move(obj));
    return std::nullopt;
  }

  std::optional<Rejection> operator()(const RegisterDataset& p) {
    if (state.datasets.contains(key)) return std::nullopt;
    if (p.permissions.owner != creator) {
      return reject(RejectionCode::PermissionDenied, "regime owner must be the creator");
    }
    for (const auto& node : p.permissions.download) {
      if (node != creator) {
        return reject(RejectionCode::PermissionDenied,
                      "datasets never grant download to other nodes");
      }
    }
    if (!p.opener.well_formed()) {
      return reject(RejectionCode::KindMismatch, "malformed opener descriptor");
    }
    if (p.objective_key && !state.objectives.contains(*p.objective_key)) {
      return reject(RejectionCode::UnknownAsset, "unknown objective " + p.objective_key->hex());
    }
    Dataset ds;
    ds.key = key;
    ds.name = p.name;
    ds.opener = p.opener;
    ds.data_type = p.data_type;
    ds.description_hash = p.description_hash;
    ds.owner = creator;
    ds.objective_key = p.objective_key;
    ds.permissions = p.permissions.normalized();
    state.datasets.emplace(key, std::move(ds));
    return std::nullopt;
  }

  std::optional<Rejection> operator()(const RegisterDataSamples& p) {
    const auto dataset = state.datasets.find(p.dataset_key);
    if (dataset == state.datasets.end()) {
      return reject(RejectionCode::UnknownAsset, "unknown dataset " + p.dataset_key.hex());
    }
    if (dataset->second.owner != creator) {
      return reject(RejectionCode::PermissionDenied,
                    "only the dataset owner may register its samples");
    }
    // First pass rejects conflicts so the whole registration stays atomic.
    for (const auto& [sample_key, test_only] : p.samples) {
      const auto existing = state.samples.find(sample_key);
      if (existing != state.samples.end() && existing->second.test_only != test_only) {
        return reject(RejectionCode::IllegalTransition,
                      "the test-only flag of a sample is immutable");
      }
    }
    for (const auto& [sample_key, test_only] : p.samples) {
      auto [it, inserted] = state.samples.try_emplace(sample_key);
      if (inserted) {
        it->second.key = sample_key;
        it->second.test_only = test_only;
      }
      it->second.dataset_keys.insert(p.dataset_key);
    }
    return std::nullopt;
  }

  std::optional<Rejection> operator()(const RegisterAlgorithm& p) {
    if (state.algorithms.contains(key)) return std::nullopt;
    if (p.permissions.owner != creator) {
      return reject(RejectionCode::PermissionDenied, "regime owner must be the creator");
    }
    if (p.objective_key && !state.objectives.contains(*p.objective_key)) {
      return reject(RejectionCode::UnknownAsset, "unknown objective " + p.objective_key->hex());
    }
    Algorithm algo;
    algo.key = key;
    algo.name = p.name;
    algo.kind = p.kind;
    algo.spec_hash = p.spec_hash;
    algo.description_hash = p.description_hash;
    algo.owner = creator;
    algo.objective_key = p.objective_key;
    algo.permissions = p.permissions.normalized();
    state.algorithms.emplace(key, std::move(algo));
    return std::nullopt;
  }

  std::optional<Rejection> operator()(const CreateTraintuple& p) {
    if (state.traintuples.contains(key)) return std::nullopt;

    const auto objective = state.objectives.find(p.objective_key);
    if (objective == state.objectives.end()) {
      return reject(RejectionCode::UnknownAsset, "unknown objective " + p.objective_key.hex());
    }
    const auto algorithm = state.algorithms.find(p.algorithm_key);
    if (algorithm == state.algorithms.end()) {
      return reject(RejectionCode::UnknownAsset, "unknown algorithm " + p.algorithm_key.hex());
    }
    const Dataset* dataset = nullptr;
    if (p.dataset_key) {
      const auto it = state.datasets.find(*p.dataset_key);
      if (it == state.datasets.end()) {
        return reject(RejectionCode::UnknownAsset, "unknown dataset " + p.dataset_key->hex());
      }
      dataset = &it->second;
    }
    std::vector<const DataSample*> tuple_samples;
    for (const auto& sample_key : p.train_sample_keys) {
      const auto it = state.samples.find(sample_key);
      if (it == state.samples.end()) {
        return reject(RejectionCode::UnknownAsset, "unknown sample " + sample_key.hex());
      }
      if (dataset && !it->second.dataset_keys.contains(dataset->key)) {
        return reject(RejectionCode::UnknownAsset,
                      "sample " + sample_key.hex() + " is not in the named dataset");
      }
      tuple_samples.push_back(&it->second);
    }
    std::vector<const Traintuple*> inputs;
    for (const auto& input_key : p.input_model_keys) {
      const auto it = state.traintuples.find(input_key);
      if (it == state.traintuples.end()) {
        return reject(RejectionCode::UnknownAsset, "unknown input tuple " + input_key.hex());
      }
      inputs.push_back(&it->second);
    }

    switch (algorithm->second.kind) {
      case ml::AlgorithmKind::trainer:
        if (inputs.size() > 1) {
          return reject(RejectionCode::KindMismatch, "a trainer takes at most one input model");
        }
        if (!dataset || tuple_samples.empty()) {
          return reject(RejectionCode::KindMismatch, "a trainer needs a dataset and samples");
        }
        break;
      case ml::AlgorithmKind::aggregator:
        if (inputs.size() < 2) {
          return reject(RejectionCode::KindMismatch,
                        "an aggregator needs at least two input models");
        }
        if (dataset || !tuple_samples.empty()) {
          return reject(RejectionCode::KindMismatch, "an aggregator does not touch data");
        }
        break;
      case ml::AlgorithmKind::composite:
        if (!dataset || tuple_samples.empty()) {
          return reject(RejectionCode::KindMismatch, "a composite needs a dataset and samples");
        }
        if (inputs.size() != 0 && inputs.size() != 2) {
          return reject(RejectionCode::KindMismatch,
                        "a composite starts fresh or takes (trunk, previous composite)");
        }
        if (inputs.size() == 2) {
          const auto& head_algo = state.algorithms.at(inputs[1]->algorithm_key);
          if (head_algo.kind != ml::AlgorithmKind::composite) {
            return reject(RejectionCode::KindMismatch,
                          "the second composite input must supply a head");
          }
        }
        break;
    }

    for (const DataSample* sample : tuple_samples) {
      if (sample->test_only) {
        return reject(RejectionCode::TestDataSanctuary,
                      "test-only sample " + sample->key.hex() + " can never be trained on");
      }
    }

    const std::optional<ContentHash> obj{p.objective_key};
    if (dataset && !check_process_right(dataset->permissions, creator, obj)) {
      return reject(RejectionCode::PermissionDenied, "no process right on the dataset");
    }
    if (!check_process_right(algorithm->second.permissions, creator, obj)) {
      return reject(RejectionCode::PermissionDenied, "no process right on the algorithm");
    }
    if (!check_process_right(objective->second.permissions, creator, obj)) {
      return reject(RejectionCode::PermissionDenied, "no process right on the objective");
    }
    for (const Traintuple* input : inputs) {
      if (!check_process_right(state.model_regime(*input), creator, obj)) {
        return reject(RejectionCode::PermissionDenied,
                      "no process right on input model of " + input->key.hex());
      }
    }

    const NodeId worker = algorithm->second.kind == ml::AlgorithmKind::aggregator
                              ? objective->second.owner
                              : dataset->owner;

    std::vector<PermissionRegime> parents;
    if (dataset) parents.push_back(dataset->permissions);
    parents.push_back(algorithm->second.permissions);
    for (const Traintuple* input : inputs) parents.push_back(state.model_regime(*input));
    const PermissionRegime inherited = intersect_permissions(parents, worker);

    PermissionRegime final_regime = inherited;
    if (p.requested_permissions) {
      if (!p.requested_permissions->narrower_or_equal(inherited)) {
        return reject(RejectionCode::PermissionWiden,
                      "requested permissions exceed the inherited intersection");
      }
      final_regime = *p.requested_permissions;
      final_regime.owner = worker;
      final_regime.download.insert(worker);
      final_regime = final_regime.normalized();
    }

    Traintuple tuple;
    tuple.key = key;
    tuple.creator = creator;
    tuple.objective_key = p.objective_key;
    tuple.algorithm_key = p.algorithm_key;
    tuple.dataset_key = p.dataset_key;
    tuple.train_sample_keys = p.train_sample_keys;
    tuple.input_model_keys = p.input_model_keys;
    tuple.worker = worker;
    tuple.tag = p.tag;
    tuple.permissions = final_regime;
    tuple.rank = 0;
    for (const Traintuple* input : inputs) {
      tuple.rank = std::max(tuple.rank, input->rank + 1);
    }

    TupleStatus initial = TupleStatus::todo;
    for (const Traintuple* input : inputs) {
      if (input->status == TupleStatus::failed) {
        initial = TupleStatus::failed;
        tuple.log = clip_log("dependency failed: " + input->key.hex());
        break;
      }
      if (input->status != TupleStatus::done) initial = TupleStatus::waiting;
    }
    auto [it, inserted] = state.traintuples.emplace(key, std::move(tuple));
    set_status(state, it->second, initial);
    return std::nullopt;
  }

  std::optional<Rejection> operator()(const CreateTesttuple& p) {
    if (state.testtuples.contains(key)) return std::nullopt;

    const auto traintuple = state.traintuples.find(p.traintuple_key);
    if (traintuple == state.traintuples.end()) {
      return reject(RejectionCode::UnknownAsset, "unknown traintuple " + p.traintuple_key.hex());
    }
    const auto objective = state.objectives.find(p.objective_key);
    if (objective == state.objectives.end()) {
      return reject(RejectionCode::UnknownAsset, "unknown objective " + p.objective_key.hex());
    }
    const bool custom = p.dataset_key.has_value();
    if (custom == p.test_sample_keys.empty()) {
      return reject(RejectionCode::KindMismatch,
                    "custom evaluations need a dataset and samples; certified ones neither");
    }
    const Dataset* dataset = nullptr;
    if (custom) {
      const auto it = state.datasets.find(*p.dataset_key);
      if (it == state.datasets.end()) {
        return reject(RejectionCode::UnknownAsset, "unknown dataset " + p.dataset_key->hex());
      }
      dataset = &it->second;
      for (const auto& sample_key : p.test_sample_keys) {
        const auto sample = state.samples.find(sample_key);
        if (sample == state.samples.end()) {
          return reject(RejectionCode::UnknownAsset, "unknown sample " + sample_key.hex());
        }
        if (!sample->second.dataset_keys.contains(dataset->key)) {
          return reject(RejectionCode::UnknownAsset,
                        "sample " + sample_key.hex() + " is not in the named dataset");
        }
      }
    }

    const std::optional<ContentHash> obj{p.objective_key};
    if (!check_process_right(state.model_regime(traintuple->second), creator, obj)) {
      return reject(RejectionCode::PermissionDenied, "no process right on the evaluated model");
    }
    if (custom && !check_process_right(dataset->permissions, creator, obj)) {
      return reject(RejectionCode::PermissionDenied, "no process right on the dataset");
    }

    Testtuple tuple;
    tuple.key = key;
    tuple.creator = creator;
    tuple.traintuple_key = p.traintuple_key;
    tuple.objective_key = p.objective_key;
    tuple.algorithm_key = traintuple->second.algorithm_key;
    tuple.dataset_key = p.dataset_key;
    tuple.certified = !custom;
    tuple.tag = p.tag;
    if (custom) {
      tuple.test_sample_keys = p.test_sample_keys;
      tuple.worker = dataset->owner;
    } else {
      for (const auto& [sample_key, dataset_key] : objective->second.test_samples) {
        tuple.test_sample_keys.push_back(sample_key);
      }
      tuple.worker = objective->second.test_samples.empty()
                         ? objective->second.owner
                         : state.datasets.at(objective->second.test_samples.front().second).owner;
    }

    TupleStatus initial = TupleStatus::waiting;
    if (traintuple->second.status == TupleStatus::done) {
      initial = TupleStatus::todo;
    } else if (traintuple->second.status == TupleStatus::failed) {
      initial = TupleStatus::failed;
      tuple.log = clip_log("dependency failed: " + p.traintuple_key.hex());
    }
    auto [it, inserted] = state.testtuples.emplace(key, std::move(tuple));
    set_status(state, it->second, initial);
    return std::nullopt;
  }

  std::optional<Rejection> operator()(const UpdateStatus& p) {
    Traintuple* train = nullptr;
    Testtuple* test = nullptr;
    if (auto it = state.traintuples.find(p.tuple_key); it != state.traintuples.end()) {
      train = &it->second;
    } else if (auto jt = state.testtuples.find(p.tuple_key); jt != state.testtuples.end()) {
      test = &jt->second;
    } else {
      return reject(RejectionCode::UnknownAsset, "unknown tuple " + p.tuple_key.hex());
    }
    const NodeId& worker = train ? train->worker : test->worker;
    const TupleStatus current = train ? train->status : test->status;
    if (creator != worker) {
      return reject(RejectionCode::NotWorker, "only the designated worker may report");
    }
    if (p.new_status == TupleStatus::doing) {
      if (current != TupleStatus::todo) {
        return reject(RejectionCode::IllegalTransition,
                      "doing is only reachable from todo, not " + to_string(current));
      }
      if (train) {
        set_status(state, *train, TupleStatus::doing);
      } else {
        set_status(state, *test, TupleStatus::doing);
      }
      return std::nullopt;
    }
    if (p.new_status == TupleStatus::failed) {
      if (current != TupleStatus::doing) {
        return reject(RejectionCode::IllegalTransition,
                      "failed is only reachable from doing, not " + to_string(current));
      }
      if (p.log.empty()) {
        return reject(RejectionCode::MissingResult, "a failure needs a log");
      }
      if (train) {
        train->log = clip_log(p.log);
        set_status(state, *train, TupleStatus::failed);
        cascade_failure(state, train->key);
      } else {
        test->log = clip_log(p.log);
        set_status(state, *test, TupleStatus::failed);
      }
      return std::nullopt;
    }
    return reject(RejectionCode::IllegalTransition,
                  to_string(p.new_status) + " cannot be set by a status update");
  }

  std::optional<Rejection> operator()(const LogTrainResult& p) {
    const auto it = state.traintuples.find(p.tuple_key);
    if (it == state.traintuples.end()) {
      return reject(RejectionCode::UnknownAsset, "unknown traintuple " + p.tuple_key.hex());
    }
    Traintuple& tuple = it->second;
    if (creator != tuple.worker) {
      return reject(RejectionCode::NotWorker, "only the designated worker may report");
    }
    if (tuple.status != TupleStatus::doing) {
      return reject(RejectionCode::IllegalTransition,
                    "done is only reachable from doing, not " + to_string(tuple.status));
    }
    const auto kind = state.algorithms.at(tuple.algorithm_key).kind;
    if (kind == ml::AlgorithmKind::composite) {
      if (!p.head_model_hash) {
        return reject(RejectionCode::MissingResult, "a composite result needs its head model");
      }
    } else if (p.head_model_hash) {
      return reject(RejectionCode::KindMismatch, "only composites produce head models");
    }
    if (kind != ml::AlgorithmKind::aggregator && !p.performance) {
      return reject(RejectionCode::MissingResult, "training results carry a performance");
    }

    tuple.output_model_key = p.model_hash;
    tuple.head_model_key = p.head_model_hash;
    tuple.performance = p.performance;
    tuple.log = clip_log(p.log);
    if (!state.models.contains(p.model_hash)) {
      ModelRecord record;
      record.key = p.model_hash;
      record.producing_tuple = tuple.key;
      record.holder = tuple.worker;
      record.permissions = tuple.permissions;
      state.models.emplace(p.model_hash, std::move(record));
    }
    if (p.head_model_hash && !state.models.contains(*p.head_model_hash)) {
      ModelRecord record;
      record.key = *p.head_model_hash;
      record.producing_tuple = tuple.key;
      record.holder = tuple.worker;
      record.permissions = PermissionRegime::private_to(tuple.worker);
      state.models.emplace(*p.head_model_hash, std::move(record));
    }
    set_status(state, tuple, TupleStatus::done);
    release_dependents(state, tuple.key);
    return std::nullopt;
  }

  std::optional<Rejection> operator()(const LogTestResult& p) {
    const auto it = state.testtuples.find(p.tuple_key);
    if (it == state.testtuples.end()) {
      return reject(RejectionCode::UnknownAsset, "unknown testtuple " + p.tuple_key.hex());
    }
    Testtuple& tuple = it->second;
    if (creator != tuple.worker) {
      return reject(RejectionCode::NotWorker, "only the designated worker may report");
    }
    if (tuple.status != TupleStatus::doing) {
      return reject(RejectionCode::IllegalTransition,
                    "done is only reachable from doing, not " + to_string(tuple.status));
    }
    tuple.performance = p.performance;
    tuple.log = clip_log(p.log);
    set_status(state, tuple, TupleStatus::done);
    return std::nullopt;
  }

  std::optional<Rejection> operator()(const UpdatePermissions& p) {
    NodeId asset_owner;
    PermissionRegime* slot = nullptr;
    bool is_dataset = false;
    if (auto it = state.objectives.find(p.asset_key); it != state.objectives.end()) {
      asset_owner = it->second.owner;
      slot = &it->second.permissions;
    } else if (auto dt = state.datasets.find(p.asset_key); dt != state.datasets.end()) {
      asset_owner = dt->second.owner;
      slot = &dt->second.permissions;
      is_dataset = true;
    } else if (auto at = state.algorithms.find(p.asset_key); at != state.algorithms.end()) {
      asset_owner = at->second.owner;
      slot = &at->second.permissions;
    } else if (auto mt = state.models.find(p.asset_key); mt != state.models.end()) {
      asset_owner = mt->second.holder;
      slot = &mt->second.permissions;
    } else {
      return reject(RejectionCode::UnknownAsset, "unknown asset " + p.asset_key.hex());
    }
    if (creator != asset_owner) {
      return reject(RejectionCode::PermissionDenied,
                    "only the owner may change a permission regime");
    }
    if (p.permissions.owner != asset_owner) {
      return reject(RejectionCode::PermissionDenied, "the regime owner cannot change");
    }
    if (is_dataset) {
      for (const auto& node : p.permissions.download) {
        if (node != asset_owner) {
          return reject(RejectionCode::PermissionDenied,
                        "datasets never grant download to other nodes");
        }
      }
    }
    *slot = p.permissions.normalized();
    return std::nullopt;
  }
};

}  // namespace

std::optional<Rejection> apply_transaction(WorldState& state, const Transaction& tx) {
  return std::visit(Applier{state, tx.creator, tx.tx_id}, tx.payload);
}

std::variant<Block, Rejection> try_append(Chain& chain, WorldState& state,
                                          std::vector<Transaction> txs) {
  if (txs.empty()) throw EmptyBlockError("a block needs at least one transaction");
  WorldState trial = state;
  for (const auto& tx : txs) {
    if (tx.tx_id != tx.compute_id()) throw IntegrityError("transaction id mismatch");
    if (auto rejection = apply_transaction(trial, tx)) return *rejection;
  }
  state = std::move(trial);
  return chain.append(std::move(txs));
}

WorldState replay(const Chain& chain) {
  if (!chain.validate()) throw IntegrityError("chain fails hash validation");
  WorldState state;
  for (const Block& block : chain.blocks()) {
    for (const Transaction& tx : block.txs) {
      if (auto rejection = apply_transaction(state, tx)) {
        throw IntegrityError("committed transaction replays as invalid: " + rejection->detail);
      }
    }
  }
  return state;
}

std::vector<std::pair<ContentHash, double>> leaderboard(const WorldState& state,
                                                        const ContentHash& objective_key) {
  const auto objective = state.objectives.find(objective_key);
  if (objective == state.objectives.end()) {
    throw NotFoundError("unknown objective " + objective_key.hex());
  }
  struct Row {
    ContentHash traintuple;
    double performance;
    ContentHash testtuple;
  };
  std::vector<Row> rows;
  for (const auto& [key, tuple] : state.testtuples) {
    if (tuple.objective_key != objective_key || !tuple.certified) continue;
    if (tuple.status != TupleStatus::done || !tuple.performance) continue;
    rows.push_back({tuple.traintuple_key, *tuple.performance, key});
  }
  const bool higher_better = objective->second.metric.higher_is_better();
  std::sort(rows.begin(), rows.end(), [&](const Row& a, const Row& b) {
    if (a.performance != b.performance) {
      return higher_better ? a.performance > b.performance : a.performance < b.performance;
    }
    if (a.traintuple != b.traintuple) return a.traintuple < b.traintuple;
    return a.testtuple < b.testtuple;
  });
  std::vector<std::pair<ContentHash, double>> out;
  out.reserve(rows.size());
  for (const Row& row : rows) out.emplace_back(row.traintuple, row.performance);
  return out;
}

}  // namespace fedledger
