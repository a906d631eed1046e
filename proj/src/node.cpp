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
#include "fedledger/node.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <utility>

#include "fedledger/errors.hpp"

namespace fedledger {

namespace {

/// Internal control flow: the blob could not be fetched this tick, retry
/// later. Covers unreachable holders and denials alike: a holder whose
/// replica lags (fresh heal, slow broadcast) denies requests it will grant
/// once caught up, so only a denial that persists past the fetch timeout
/// fails the tuple.
struct FetchPending {
  ContentHash key;
  std::string denial;  // empty when the holder was unreachable
};

Bytes read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw StoreError("cannot read " + p.string());
  std::ostringstream out;
  out << f.rdbuf();
  return std::move(out).str();
}

}  // namespace

Node::Node(NodeId id, std::filesystem::path dir, std::uint32_t fetch_timeout_ticks)
    : id_(std::move(id)),
      dir_(std::move(dir)),
      fetch_timeout_(fetch_timeout_ticks),
      assets_((std::filesystem::create_directories(dir_), dir_ / "assets")) {
  std::filesystem::create_directories(dir_ / "private");
  const auto ledger_file = dir_ / "ledger.jsonl";
  if (std::filesystem::exists(ledger_file)) {
    chain_ = Chain::load(ledger_file);
    state_ = replay(chain_);
  }
  for (const auto& entry : std::filesystem::directory_iterator(dir_ / "private")) {
    Bytes bytes = read_file(entry.path());
    const ContentHash key = sha256(bytes);
    if (key.hex() != entry.path().filename().string()) {
      throw IntegrityError("private sample file " + entry.path().string() +
                           " does not match its digest name");
    }
    private_samples_.emplace(key, std::move(bytes));
  }
  // Resume bookkeeping from the replica: running tuples were already claimed,
  // settled tuples already produced their terminal transaction.
  for (const auto& [key, tuple] : state_.traintuples) {
    if (tuple.worker != id_) continue;
    if (tuple.status == TupleStatus::doing) claimed_.insert(key);
    if (tuple.status == TupleStatus::done || tuple.status == TupleStatus::failed) {
      claimed_.insert(key);
      finished_.insert(key);
    }
  }
  for (const auto& [key, tuple] : state_.testtuples) {
    if (tuple.worker != id_) continue;
    if (tuple.status == TupleStatus::doing) claimed_.insert(key);
    if (tuple.status == TupleStatus::done || tuple.status == TupleStatus::failed) {
      claimed_.insert(key);
      finished_.insert(key);
    }
  }
}

void Node::receive_block(const Block& block) {
  chain_.append_block(block);
  for (const auto& tx : block.txs) {
    if (const auto rejection = apply_transaction(state_, tx)) {
      throw IntegrityError("replicated block " + std::to_string(block.height) +
                           " carries rejected transaction " + tx.tx_id.hex() + ": " +
                           rejection->detail);
    }
  }
}

std::variant<Bytes, AssetDenial> Node::handle_asset_request(const NodeId& requester,
                                                            const ContentHash& key) {
  // Raw data never leaves the node, no matter who asks.
  if (private_samples_.contains(key) || state_.samples.contains(key)) {
    return AssetDenial{"PrivateAsset"};
  }
  if (!assets_.contains(key)) return AssetDenial{"UnknownAsset"};

  if (const auto it = state_.models.find(key); it != state_.models.end()) {
    if (check_download_right(it->second.permissions, requester) ||
        worker_references_asset(requester, key)) {
      return assets_.get(key);
    }
    return AssetDenial{"PermissionDenied"};
  }
  for (const auto& [akey, algo] : state_.algorithms) {
    if (algo.spec_hash != key) continue;
    if (check_download_right(algo.permissions, requester) ||
        worker_references_asset(requester, key)) {
      return assets_.get(key);
    }
    return AssetDenial{"PermissionDenied"};
  }
  // A blob the ledger does not account for is never served.
  return AssetDenial{"PermissionDenied"};
}

bool Node::worker_references_asset(const NodeId& requester, const ContentHash& key) const {
  const auto active = [](TupleStatus s) {
    return s == TupleStatus::todo || s == TupleStatus::doing;
  };
  const auto algorithm_blob_of = [&](const ContentHash& algorithm_key) {
    const auto it = state_.algorithms.find(algorithm_key);
    return it != state_.algorithms.end() && it->second.spec_hash == key;
  };
  const auto produces = [&](const ContentHash& tuple_key) {
    const auto it = state_.traintuples.find(tuple_key);
    return it != state_.traintuples.end() &&
           (it->second.output_model_key == key || it->second.head_model_key == key);
  };
  for (const auto& [tkey, tuple] : state_.traintuples) {
    if (tuple.worker != requester || !active(tuple.status)) continue;
    if (algorithm_blob_of(tuple.algorithm_key)) return true;
    for (const auto& input : tuple.input_model_keys) {
      if (produces(input)) return true;
    }
  }
  for (const auto& [tkey, tuple] : state_.testtuples) {
    if (tuple.worker != requester || !active(tuple.status)) continue;
    if (algorithm_blob_of(tuple.algorithm_key)) return true;
    if (produces(tuple.traintuple_key)) return true;
  }
  return false;
}

std::vector<ContentHash> Node::register_local_data(const ContentHash& dataset_key,
                                                   const std::vector<Bytes>& sample_blobs,
                                                   const std::vector<bool>& test_only) {
  if (sample_blobs.size() != test_only.size()) {
    throw SchemaError("one test flag per sample blob required");
  }
  if (const auto it = state_.datasets.find(dataset_key);
      it != state_.datasets.end() && it->second.owner != id_) {
    throw PermissionDeniedError("dataset " + dataset_key.hex() + " belongs to " +
                                it->second.owner + ", not " + id_);
  }
  RegisterDataSamples payload;
  payload.dataset_key = dataset_key;
  std::vector<ContentHash> keys;
  for (std::size_t i = 0; i < sample_blobs.size(); ++i) {
    const ContentHash key = sha256(sample_blobs[i]);
    keys.push_back(key);
    if (!private_samples_.contains(key)) {
      const auto path = dir_ / "private" / key.hex();
      std::ofstream f(path, std::ios::binary | std::ios::trunc);
      if (!f) throw StoreError("cannot write " + path.string());
      f.write(sample_blobs[i].data(), static_cast<std::streamsize>(sample_blobs[i].size()));
      private_samples_.emplace(key, sample_blobs[i]);
    }
    // Identical re-registrations are dropped client-side; flag conflicts stay
    // in so the chaincode can refuse them explicitly.
    const auto existing = state_.samples.find(key);
    const bool already = existing != state_.samples.end() &&
                         existing->second.test_only == test_only[i] &&
                         existing->second.dataset_keys.contains(dataset_key);
    if (!already) payload.samples.emplace_back(key, test_only[i]);
  }
  if (!payload.samples.empty()) enqueue(payload);
  return keys;
}

ContentHash Node::store_algorithm_blob(const ml::AlgorithmSpec& spec) {
  return assets_.put(spec.serialize());
}

ContentHash Node::enqueue(TxPayload payload) {
  Transaction tx = Transaction::make(id_, std::move(payload));
  const ContentHash key = tx.tx_id;
  outbox_.push_back({std::move(tx)});
  return key;
}

std::vector<ContentHash> Node::enqueue_group(std::vector<TxPayload> payloads) {
  std::vector<Transaction> group;
  std::vector<ContentHash> keys;
  for (auto& payload : payloads) {
    group.push_back(Transaction::make(id_, std::move(payload)));
    keys.push_back(group.back().tx_id);
  }
  if (group.empty()) throw EmptyBlockError("empty transaction group");
  outbox_.push_back(std::move(group));
  return keys;
}

void Node::enqueue_transactions(std::vector<Transaction> group) {
  if (group.empty()) throw EmptyBlockError("empty transaction group");
  for (const auto& tx : group) {
    if (tx.creator != id_) {
      throw SchemaError("transaction creator " + tx.creator + " does not match node " + id_);
    }
  }
  outbox_.push_back(std::move(group));
}

std::variant<Block, Rejection> Node::order_block(std::vector<Transaction> txs) {
  return try_append(chain_, state_, std::move(txs));
}

std::vector<std::vector<Transaction>> Node::take_outbox() {
  return std::exchange(outbox_, {});
}

Bytes Node::local_or_fetch(Network& network, const ContentHash& key, const NodeId& holder) {
  if (assets_.contains(key)) return assets_.get(key);
  if (holder == id_) {
    throw NotFoundError("blob " + key.hex() + " expected in the local store");
  }
  const FetchResult result = network.request_asset(id_, holder, key);
  switch (result.status) {
    case FetchResult::Status::delivered:
      assets_.put(result.blob);
      return result.blob;
    case FetchResult::Status::denied:
      throw FetchPending{key, "denied by " + holder + ": " + result.reason};
    case FetchResult::Status::unreachable: throw FetchPending{key, ""};
  }
  throw Error("unhandled fetch status");
}

ml::AlgorithmSpec Node::fetch_algorithm_spec(Network& network, const ContentHash& algorithm_key) {
  const Algorithm& record = state_.algorithms.at(algorithm_key);
  const Bytes blob = local_or_fetch(network, record.spec_hash, record.owner);
  ml::AlgorithmSpec spec = ml::AlgorithmSpec::deserialize(blob);
  if (spec.kind != record.kind) {
    throw SchemaError("algorithm blob kind does not match its ledger record");
  }
  return spec;
}

ml::SampleBatch Node::open_local_samples(const ml::OpenerDescriptor& opener,
                                         const std::vector<ContentHash>& keys) const {
  std::vector<Bytes> blobs;
  for (const auto& key : keys) {
    const auto it = private_samples_.find(key);
    if (it == private_samples_.end()) {
      throw NotFoundError("sample " + key.hex() + " not held in this node's vault");
    }
    blobs.push_back(it->second);
  }
  return ml::open_samples(opener, blobs);
}

void Node::poll_and_execute(Network& network, std::uint64_t tick) {
  // Claim phase: announce doing for every fresh assignment.
  const auto claim = [&](const ContentHash& key, TupleStatus status) {
    if (status != TupleStatus::todo || claimed_.contains(key)) return;
    UpdateStatus payload;
    payload.tuple_key = key;
    payload.new_status = TupleStatus::doing;
    enqueue(payload);
    claimed_.insert(key);
  };
  for (const auto& [key, tuple] : state_.traintuples) {
    if (tuple.worker == id_) claim(key, tuple.status);
  }
  for (const auto& [key, tuple] : state_.testtuples) {
    if (tuple.worker == id_) claim(key, tuple.status);
  }

  // Execution phase: one running tuple per tick, lowest key first.
  std::vector<ContentHash> runnable;
  for (const auto& [key, tuple] : state_.traintuples) {
    if (tuple.worker == id_ && tuple.status == TupleStatus::doing && !finished_.contains(key)) {
      runnable.push_back(key);
    }
  }
  for (const auto& [key, tuple] : state_.testtuples) {
    if (tuple.worker == id_ && tuple.status == TupleStatus::doing && !finished_.contains(key)) {
      runnable.push_back(key);
    }
  }
  if (runnable.empty()) return;
  const ContentHash key = *std::min_element(runnable.begin(), runnable.end());

  const auto settle_failure = [&](const std::string& log) {
    UpdateStatus payload;
    payload.tuple_key = key;
    payload.new_status = TupleStatus::failed;
    payload.log = log;
    enqueue(payload);
    finished_.insert(key);
    first_attempt_.erase(key);
  };
  try {
    if (const auto it = state_.traintuples.find(key); it != state_.traintuples.end()) {
      execute_traintuple(network, it->second);
    } else {
      execute_testtuple(network, state_.testtuples.at(key));
    }
    finished_.insert(key);
    first_attempt_.erase(key);
  } catch (const FetchPending& pending) {
    const auto [it, fresh] = first_attempt_.try_emplace(key, tick);
    if (tick - it->second >= fetch_timeout_) {
      std::string log = "asset fetch timed out after " + std::to_string(fetch_timeout_) +
                        " ticks: " + pending.key.hex();
      if (!pending.denial.empty()) log += " (last attempt " + pending.denial + ")";
      settle_failure(log);
    }
    // Otherwise leave the tuple for the next tick's retry.
  } catch (const std::exception& e) {
    settle_failure(e.what());
  }
}

void Node::execute_traintuple(Network& network, const Traintuple& tuple) {
  const ml::AlgorithmSpec spec = fetch_algorithm_spec(network, tuple.algorithm_key);

  const auto input_model = [&](const ContentHash& input_key, bool head) -> ml::ModelWeights {
    const Traintuple& producer = state_.traintuples.at(input_key);
    const auto& model_key = head ? producer.head_model_key : producer.output_model_key;
    if (!model_key) {
      throw NotFoundError("input tuple " + input_key.hex() + " has no recorded output");
    }
    const NodeId& holder = state_.models.at(*model_key).holder;
    return ml::ModelWeights::deserialize(local_or_fetch(network, *model_key, holder));
  };

  LogTrainResult result;
  result.tuple_key = tuple.key;

  if (spec.kind == ml::AlgorithmKind::aggregator) {
    std::vector<ml::ModelWeights> models;
    std::vector<std::size_t> counts;
    for (const auto& input : tuple.input_model_keys) {
      models.push_back(input_model(input, false));
      counts.push_back(state_.traintuples.at(input).train_sample_keys.size());
    }
    std::optional<std::vector<std::size_t>> weights;
    if (spec.aggregator->weighting == ml::Weighting::by_sample_count) weights = counts;
    const ml::ModelWeights merged = ml::aggregate(*spec.aggregator, models, weights);
    result.model_hash = assets_.put(merged.serialize());
    result.log = "aggregated " + std::to_string(models.size()) + " models";
  } else {
    const Dataset& dataset = state_.datasets.at(tuple.dataset_key.value());
    const ml::SampleBatch batch = open_local_samples(dataset.opener, tuple.train_sample_keys);

    if (spec.kind == ml::AlgorithmKind::trainer) {
      std::optional<ml::ModelWeights> init;
      if (!tuple.input_model_keys.empty()) {
        init = input_model(tuple.input_model_keys.front(), false);
      }
      const ml::ModelWeights weights =
          ml::train(*spec.trainer, init, batch.features, batch.labels);
      result.model_hash = assets_.put(weights.serialize());
      result.performance =
          ml::loss(spec.trainer->family, weights, batch.features, batch.labels);
    } else {
      std::optional<ml::ModelWeights> trunk_in;
      std::optional<ml::ModelWeights> head_in;
      if (tuple.input_model_keys.size() == 2) {
        trunk_in = input_model(tuple.input_model_keys[0], false);
        head_in = input_model(tuple.input_model_keys[1], true);
      }
      const ml::CompositePair pair =
          ml::train_composite(*spec.composite, trunk_in, head_in, batch.features, batch.labels);
      result.model_hash = assets_.put(pair.trunk.serialize());
      result.head_model_hash = assets_.put(pair.head.serialize());
      result.performance =
          ml::composite_loss(*spec.composite, pair.trunk, pair.head, batch.features, batch.labels);
    }
    result.log = "trained on " + std::to_string(batch.rows()) + " rows";
  }
  enqueue(result);
}

void Node::execute_testtuple(Network& network, const Testtuple& tuple) {
  const Traintuple& producer = state_.traintuples.at(tuple.traintuple_key);
  const ml::AlgorithmSpec spec = fetch_algorithm_spec(network, tuple.algorithm_key);
  const Objective& objective = state_.objectives.at(tuple.objective_key);

  ContentHash opener_dataset_key;
  if (tuple.dataset_key) {
    opener_dataset_key = *tuple.dataset_key;
  } else if (!objective.test_samples.empty()) {
    opener_dataset_key = objective.test_samples.front().second;
  } else {
    throw EmptyTestSetError("objective " + tuple.objective_key.hex() +
                            " has no certified test samples");
  }
  const Dataset& dataset = state_.datasets.at(opener_dataset_key);
  const ml::SampleBatch batch = open_local_samples(dataset.opener, tuple.test_sample_keys);

  const auto fetch_half = [&](const std::optional<ContentHash>& model_key) -> ml::ModelWeights {
    if (!model_key) {
      throw NotFoundError("traintuple " + tuple.traintuple_key.hex() +
                          " has no recorded output model");
    }
    const NodeId& holder = state_.models.at(*model_key).holder;
    return ml::ModelWeights::deserialize(local_or_fetch(network, *model_key, holder));
  };

  ml::Vector predictions;
  if (spec.kind == ml::AlgorithmKind::composite) {
    const ml::ModelWeights trunk = fetch_half(producer.output_model_key);
    const ml::ModelWeights head = fetch_half(producer.head_model_key);
    predictions = ml::predict_composite(*spec.composite, trunk, head, batch.features);
  } else {
    const ml::ModelWeights weights = fetch_half(producer.output_model_key);
    const ml::Family family = spec.kind == ml::AlgorithmKind::trainer
                                  ? spec.trainer->family
                                  : ml::Family::linear_regression;
    predictions = ml::predict(family, weights, batch.features);
  }

  LogTestResult result;
  result.tuple_key = tuple.key;
  result.performance = ml::evaluate(objective.metric, predictions, batch.labels);
  result.log = "evaluated on " + std::to_string(batch.rows()) + " rows";
  enqueue(result);
}

bool Node::has_runnable_work() const {
  const auto pending = [&](const ContentHash& key, TupleStatus status) {
    if (status == TupleStatus::todo && !claimed_.contains(key)) return true;
    return status == TupleStatus::doing && !finished_.contains(key);
  };
  for (const auto& [key, tuple] : state_.traintuples) {
    if (tuple.worker == id_ && pending(key, tuple.status)) return true;
  }
  for (const auto& [key, tuple] : state_.testtuples) {
    if (tuple.worker == id_ && pending(key, tuple.status)) return true;
  }
  return false;
}

double Node::serve_prediction(const ContentHash& model_key, const ml::Vector& features) const {
  const auto it = state_.models.find(model_key);
  if (it == state_.models.end()) {
    throw NotFoundError("no ledger record for model " + model_key.hex());
  }
  if (!check_process_right(it->second.permissions, id_, std::nullopt)) {
    throw PermissionDeniedError("node " + id_ + " has no process right on model " +
                                model_key.hex());
  }
  const Traintuple& producer = state_.traintuples.at(it->second.producing_tuple);
  const Algorithm& record = state_.algorithms.at(producer.algorithm_key);
  const ml::AlgorithmSpec spec = ml::AlgorithmSpec::deserialize(assets_.get(record.spec_hash));

  if (producer.head_model_key && model_key == *producer.head_model_key) {
    throw SchemaError("head models serve only through their composite trunk key");
  }
  const ml::ModelWeights weights = ml::ModelWeights::deserialize(assets_.get(model_key));
  if (spec.kind == ml::AlgorithmKind::composite) {
    const auto& head_key = producer.head_model_key;
    if (!head_key) throw NotFoundError("composite tuple lacks a head model");
    const auto& head_record = state_.models.at(*head_key);
    if (!check_process_right(head_record.permissions, id_, std::nullopt)) {
      throw PermissionDeniedError("node " + id_ + " has no process right on the head model");
    }
    const ml::ModelWeights head = ml::ModelWeights::deserialize(assets_.get(*head_key));
    return ml::predict_composite_one(*spec.composite, weights, head, features);
  }
  const ml::Family family = spec.kind == ml::AlgorithmKind::trainer
                                ? spec.trainer->family
                                : ml::Family::linear_regression;
  return ml::predict_one(family, weights, features);
}

void Node::save_ledger() const { chain_.save(dir_ / "ledger.jsonl"); }

}  // namespace fedledger
