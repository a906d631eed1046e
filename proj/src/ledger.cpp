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
#include "fedledger/ledger.hpp"

#include <fstream>
#include <sstream>

#include "fedledger/errors.hpp"

namespace fedledger {

// -- tuple status -------------------------------------------------------------

std::string to_string(TupleStatus s) {
  switch (s) {
    case TupleStatus::waiting: return "waiting";
    case TupleStatus::todo: return "todo";
    case TupleStatus::doing: return "doing";
    case TupleStatus::done: return "done";
    case TupleStatus::failed: return "failed";
  }
  throw SchemaError("bad tuple status");
}

TupleStatus tuple_status_from_string(const std::string& s) {
  if (s == "waiting") return TupleStatus::waiting;
  if (s == "todo") return TupleStatus::todo;
  if (s == "doing") return TupleStatus::doing;
  if (s == "done") return TupleStatus::done;
  if (s == "failed") return TupleStatus::failed;
  throw SchemaError("unknown tuple status: " + s);
}

// -- payload JSON -------------------------------------------------------------

namespace {

Json sample_pairs_to_json(const std::vector<std::pair<ContentHash, ContentHash>>& pairs) {
  Json out = Json::array();
  for (const auto& [sample, dataset] : pairs) {
    out.push_back(Json{{"dataset", dataset}, {"sample", sample}});
  }
  return out;
}

std::vector<std::pair<ContentHash, ContentHash>> sample_pairs_from_json(const Json& j) {
  std::vector<std::pair<ContentHash, ContentHash>> out;
  for (const auto& pair : j) {
    out.emplace_back(pair.at("sample").get<ContentHash>(),
                     pair.at("dataset").get<ContentHash>());
  }
  return out;
}

}  // namespace

static void to_json(Json& j, const RegisterObjective& p) {
  j = Json::object();
  j["metric"] = p.metric;
  j["name"] = p.name;
  j["permissions"] = p.permissions;
  j["test_samples"] = sample_pairs_to_json(p.test_samples);
  set_optional(j, "description_hash", p.description_hash);
}

static void from_json(const Json& j, RegisterObjective& p) {
  p = RegisterObjective{};
  p.metric = j.at("metric").get<ml::MetricSpec>();
  p.name = j.at("name").get<std::string>();
  p.permissions = j.at("permissions").get<PermissionRegime>();
  p.test_samples = sample_pairs_from_json(j.at("test_samples"));
  p.description_hash = get_optional<ContentHash>(j, "description_hash");
}

static void to_json(Json& j, const RegisterDataset& p) {
  j = Json::object();
  j["data_type"] = p.data_type;
  j["name"] = p.name;
  j["opener"] = p.opener;
  j["permissions"] = p.permissions;
  set_optional(j, "description_hash", p.description_hash);
  set_optional(j, "objective_key", p.objective_key);
}

static void from_json(const Json& j, RegisterDataset& p) {
  p = RegisterDataset{};
  p.data_type = j.at("data_type").get<std::string>();
  p.name = j.at("name").get<std::string>();
  p.opener = j.at("opener").get<ml::OpenerDescriptor>();
  p.permissions = j.at("permissions").get<PermissionRegime>();
  p.description_hash = get_optional<ContentHash>(j, "description_hash");
  p.objective_key = get_optional<ContentHash>(j, "objective_key");
}

static void to_json(Json& j, const RegisterDataSamples& p) {
  Json samples = Json::array();
  for (const auto& [key, test_only] : p.samples) {
    samples.push_back(Json{{"key", key}, {"test_only", test_only}});
  }
  j = Json{{"dataset_key", p.dataset_key}, {"samples", std::move(samples)}};
}

static void from_json(const Json& j, RegisterDataSamples& p) {
  p = RegisterDataSamples{};
  p.dataset_key = j.at("dataset_key").get<ContentHash>();
  for (const auto& sample : j.at("samples")) {
    p.samples.emplace_back(sample.at("key").get<ContentHash>(),
                           sample.at("test_only").get<bool>());
  }
}

static void to_json(Json& j, const RegisterAlgorithm& p) {
  j = Json::object();
  j["kind"] = ml::to_string(p.kind);
  j["name"] = p.name;
  j["permissions"] = p.permissions;
  j["spec_hash"] = p.spec_hash;
  set_optional(j, "description_hash", p.description_hash);
  set_optional(j, "objective_key", p.objective_key);
}

static void from_json(const Json& j, RegisterAlgorithm& p) {
  p = RegisterAlgorithm{};
  p.kind = ml::algorithm_kind_from_string(j.at("kind").get<std::string>());
  p.name = j.at("name").get<std::string>();
  p.permissions = j.at("permissions").get<PermissionRegime>();
  p.spec_hash = j.at("spec_hash").get<ContentHash>();
  p.description_hash = get_optional<ContentHash>(j, "description_hash");
  p.objective_key = get_optional<ContentHash>(j, "objective_key");
}

static void to_json(Json& j, const CreateTraintuple& p) {
  j = Json::object();
  j["algorithm_key"] = p.algorithm_key;
  j["input_model_keys"] = p.input_model_keys;
  j["objective_key"] = p.objective_key;
  j["train_sample_keys"] = p.train_sample_keys;
  set_optional(j, "dataset_key", p.dataset_key);
  set_optional(j, "requested_permissions", p.requested_permissions);
  set_optional(j, "tag", p.tag);
}

static void from_json(const Json& j, CreateTraintuple& p) {
  p = CreateTraintuple{};
  p.algorithm_key = j.at("algorithm_key").get<ContentHash>();
  p.input_model_keys = j.at("input_model_keys").get<std::vector<ContentHash>>();
  p.objective_key = j.at("objective_key").get<ContentHash>();
  p.train_sample_keys = j.at("train_sample_keys").get<std::vector<ContentHash>>();
  p.dataset_key = get_optional<ContentHash>(j, "dataset_key");
  p.requested_permissions = get_optional<PermissionRegime>(j, "requested_permissions");
  p.tag = get_optional<std::string>(j, "tag");
}

static void to_json(Json& j, const CreateTesttuple& p) {
  j = Json::object();
  j["objective_key"] = p.objective_key;
  j["test_sample_keys"] = p.test_sample_keys;
  j["traintuple_key"] = p.traintuple_key;
  set_optional(j, "dataset_key", p.dataset_key);
  set_optional(j, "tag", p.tag);
}

static void from_json(const Json& j, CreateTesttuple& p) {
  p = CreateTesttuple{};
  p.objective_key = j.at("objective_key").get<ContentHash>();
  p.test_sample_keys = j.at("test_sample_keys").get<std::vector<ContentHash>>();
  p.traintuple_key = j.at("traintuple_key").get<ContentHash>();
  p.dataset_key = get_optional<ContentHash>(j, "dataset_key");
  p.tag = get_optional<std::string>(j, "tag");
}

static void to_json(Json& j, const UpdateStatus& p) {
  j = Json{{"log", p.log},
           {"new_status", to_string(p.new_status)},
           {"tuple_key", p.tuple_key}};
}

static void from_json(const Json& j, UpdateStatus& p) {
  p = UpdateStatus{};
  p.log = j.at("log").get<std::string>();
  p.new_status = tuple_status_from_string(j.at("new_status").get<std::string>());
  p.tuple_key = j.at("tuple_key").get<ContentHash>();
}

static void to_json(Json& j, const LogTrainResult& p) {
  j = Json::object();
  j["log"] = p.log;
  j["model_hash"] = p.model_hash;
  j["tuple_key"] = p.tuple_key;
  set_optional(j, "head_model_hash", p.head_model_hash);
  set_optional(j, "performance", p.performance);
}

static void from_json(const Json& j, LogTrainResult& p) {
  p = LogTrainResult{};
  p.log = j.at("log").get<std::string>();
  p.model_hash = j.at("model_hash").get<ContentHash>();
  p.tuple_key = j.at("tuple_key").get<ContentHash>();
  p.head_model_hash = get_optional<ContentHash>(j, "head_model_hash");
  p.performance = get_optional<double>(j, "performance");
}

static void to_json(Json& j, const LogTestResult& p) {
  j = Json{{"log", p.log}, {"performance", p.performance}, {"tuple_key", p.tuple_key}};
}

static void from_json(const Json& j, LogTestResult& p) {
  p = LogTestResult{};
  p.log = j.at("log").get<std::string>();
  p.performance = j.at("performance").get<double>();
  p.tuple_key = j.at("tuple_key").get<ContentHash>();
}

static void to_json(Json& j, const UpdatePermissions& p) {
  j = Json{{"asset_key", p.asset_key}, {"permissions", p.permissions}};
}

static void from_json(const Json& j, UpdatePermissions& p) {
  p = UpdatePermissions{};
  p.asset_key = j.at("asset_key").get<ContentHash>();
  p.permissions = j.at("permissions").get<PermissionRegime>();
}

std::string payload_type(const TxPayload& payload) {
  struct Namer {
    std::string operator()(const RegisterObjective&) { return "register_objective"; }
    std::string operator()(const RegisterDataset&) { return "register_dataset"; }
    std::string operator()(const RegisterDataSamples&) { return "register_data_samples"; }
    std::string operator()(const RegisterAlgorithm&) { return "register_algorithm"; }
    std::string operator()(const CreateTraintuple&) { return "create_traintuple"; }
    std::string operator()(const CreateTesttuple&) { return "create_testtuple"; }
    std::string operator()(const UpdateStatus&) { return "update_status"; }
    std::string operator()(const LogTrainResult&) { return "log_train_result"; }
    std::string operator()(const LogTestResult&) { return "log_test_result"; }
    std::string operator()(const UpdatePermissions&) { return "update_permissions"; }
  };
  return std::visit(Namer{}, payload);
}

void to_json(Json& j, const TxPayload& payload) {
  std::visit([&j](const auto& p) { to_json(j, p); }, payload);
  j["type"] = payload_type(payload);
}

void from_json(const Json& j, TxPayload& payload) {
  const auto type = j.at("type").get<std::string>();
  if (type == "register_objective") {
    payload = j.get<RegisterObjective>();
  } else if (type == "register_dataset") {
    payload = j.get<RegisterDataset>();
  } else if (type == "register_data_samples") {
    payload = j.get<RegisterDataSamples>();
  } else if (type == "register_algorithm") {
    payload = j.get<RegisterAlgorithm>();
  } else if (type == "create_traintuple") {
    payload = j.get<CreateTraintuple>();
  } else if (type == "create_testtuple") {
    payload = j.get<CreateTesttuple>();
  } else if (type == "update_status") {
    payload = j.get<UpdateStatus>();
  } else if (type == "log_train_result") {
    payload = j.get<LogTrainResult>();
  } else if (type == "log_test_result") {
    payload = j.get<LogTestResult>();
  } else if (type == "update_permissions") {
    payload = j.get<UpdatePermissions>();
  } else {
    throw SchemaError("unknown transaction type: " + type);
  }
}

// -- transactions -------------------------------------------------------------

Transaction Transaction::make(NodeId creator, TxPayload payload) {
  Transaction tx;
  tx.creator = std::move(creator);
  tx.payload = std::move(payload);
  tx.tx_id = tx.compute_id();
  return tx;
}

ContentHash Transaction::compute_id() const {
  Json body = Json::object();
  body["creator"] = creator;
  Json p;
  to_json(p, payload);
  body["payload"] = std::move(p);
  return hash_of(body);
}

void to_json(Json& j, const Transaction& tx) {
  j = Json::object();
  j["creator"] = tx.creator;
  Json p;
  to_json(p, tx.payload);
  j["payload"] = std::move(p);
  j["tx_id"] = tx.tx_id;
}

void from_json(const Json& j, Transaction& tx) {
  tx = Transaction{};
  tx.creator = j.at("creator").get<NodeId>();
  tx.payload = j.at("payload").get<TxPayload>();
  tx.tx_id = j.at("tx_id").get<ContentHash>();
}

// -- blocks -------------------------------------------------------------------

ContentHash Block::compute_hash() const {
  Json body = Json::object();
  body["height"] = height;
  body["prev_hash"] = prev_hash;
  Json ids = Json::array();
  for (const auto& tx : txs) ids.push_back(tx.tx_id);
  body["tx_ids"] = std::move(ids);
  return hash_of(body);
}

void to_json(Json& j, const Block& b) {
  j = Json{{"block_hash", b.block_hash},
           {"height", b.height},
           {"prev_hash", b.prev_hash},
           {"txs", b.txs}};
}

void from_json(const Json& j, Block& b) {
  b = Block{};
  b.block_hash = j.at("block_hash").get<ContentHash>();
  b.height = j.at("height").get<std::uint64_t>();
  b.prev_hash = j.at("prev_hash").get<ContentHash>();
  b.txs = j.at("txs").get<std::vector<Transaction>>();
}

// -- chain --------------------------------------------------------------------

ContentHash Chain::tip_hash() const {
  return blocks_.empty() ? ContentHash{} : blocks_.back().block_hash;
}

const Block& Chain::append(std::vector<Transaction> txs) {
  if (txs.empty()) throw EmptyBlockError("a block needs at least one transaction");
  Block b;
  b.height = blocks_.size();
  b.prev_hash = tip_hash();
  b.txs = std::move(txs);
  b.block_hash = b.compute_hash();
  blocks_.push_back(std::move(b));
  return blocks_.back();
}

void Chain::append_block(Block block) {
  if (block.txs.empty()) throw EmptyBlockError("a block needs at least one transaction");
  if (block.height != blocks_.size()) throw IntegrityError("block height does not extend tip");
  if (block.prev_hash != tip_hash()) throw IntegrityError("block does not link to tip");
  if (block.block_hash != block.compute_hash()) throw IntegrityError("block hash mismatch");
  for (const auto& tx : block.txs) {
    if (tx.tx_id != tx.compute_id()) throw IntegrityError("transaction id mismatch");
  }
  blocks_.push_back(std::move(block));
}

bool Chain::validate() const {
  ContentHash prev;  // genesis links to the all-zero digest
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const Block& b = blocks_[i];
    if (b.height != i) return false;
    if (b.prev_hash != prev) return false;
    if (b.txs.empty()) return false;
    if (b.block_hash != b.compute_hash()) return false;
    for (const auto& tx : b.txs) {
      if (tx.tx_id != tx.compute_id()) return false;
    }
    prev = b.block_hash;
  }
  return true;
}

Bytes Chain::serialize() const {
  std::string out;
  for (const auto& b : blocks_) {
    Json j;
    to_json(j, b);
    out += canonical_dump(j);
    out += '\n';
  }
  return out;
}

void Chain::save(const std::filesystem::path& file) const {
  std::ofstream out{file, std::ios::binary | std::ios::trunc};
  if (!out) throw StoreError("cannot write " + file.string());
  out << serialize();
}

Chain Chain::parse(const Bytes& bytes) {
  Chain chain;
  std::istringstream in{bytes};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      chain.blocks_.push_back(Json::parse(line).get<Block>());
    } catch (const std::exception& e) {
      throw IntegrityError("bad block at line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return chain;
}

Chain Chain::load(const std::filesystem::path& file) {
  std::ifstream in{file, std::ios::binary};
  if (!in) throw NotFoundError("no ledger file at " + file.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

}  // namespace fedledger
