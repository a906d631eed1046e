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
#include <doctest.h>

#include <map>
#include <set>

#include "fedledger/chaincode.hpp"
#include "fedledger/errors.hpp"

using namespace fedledger;

namespace {

/// Chain plus state with single-transaction blocks, mirroring how the
/// orderer commits work.
struct TestNet {
  Chain chain;
  WorldState state;

  std::optional<Rejection> submit(const NodeId& creator, TxPayload payload,
                                  ContentHash* key_out = nullptr) {
    Transaction tx = Transaction::make(creator, std::move(payload));
    if (key_out) *key_out = tx.tx_id;
    auto result = try_append(chain, state, {std::move(tx)});
    if (auto* rejection = std::get_if<Rejection>(&result)) return *rejection;
    return std::nullopt;
  }

  ContentHash must(const NodeId& creator, TxPayload payload) {
    ContentHash key;
    const auto rejection = submit(creator, std::move(payload), &key);
    if (rejection) {
      FAIL("unexpected rejection: ", to_string(rejection->code), " (", rejection->detail, ")");
    }
    return key;
  }

  void must_reject(const NodeId& creator, TxPayload payload, RejectionCode code) {
    const auto before = state.digest();
    const auto rejection = submit(creator, std::move(payload));
    REQUIRE(rejection.has_value());
    CHECK(to_string(rejection->code) == to_string(code));
    CHECK(state.digest() == before);
  }
};

RegisterDataset dataset_payload(const std::string& name, const NodeId& owner,
                                std::set<NodeId> process) {
  RegisterDataset p;
  p.name = name;
  p.opener.feature_columns = {"x"};
  p.opener.label_column = "y";
  p.data_type = "tabular";
  p.permissions.owner = owner;
  p.permissions.process = std::move(process);
  p.permissions.process.insert(owner);
  p.permissions.download = {owner};
  return p;
}

RegisterAlgorithm algorithm_payload(const std::string& name, const NodeId& owner,
                                    ml::AlgorithmKind kind, std::set<NodeId> process) {
  RegisterAlgorithm p;
  p.name = name;
  p.kind = kind;
  p.spec_hash = sha256("spec of " + name);
  p.permissions.owner = owner;
  p.permissions.process = std::move(process);
  p.permissions.process.insert(owner);
  p.permissions.download = {owner};
  return p;
}

RegisterObjective objective_payload(const std::string& name, const NodeId& owner,
                                    std::vector<std::pair<ContentHash, ContentHash>> test_samples,
                                    std::set<NodeId> process) {
  RegisterObjective p;
  p.name = name;
  p.metric.kind = ml::MetricKind::accuracy;
  p.test_samples = std::move(test_samples);
  p.permissions.owner = owner;
  p.permissions.process = std::move(process);
  p.permissions.process.insert(owner);
  p.permissions.download = {owner};
  return p;
}

ContentHash sample_key(int i) { return sha256("sample bytes #" + std::to_string(i)); }

/// Nodes: A holds the data, B owns the objective, C the algorithm, D is an
/// outsider. Samples 1..4 are training data, 5..6 the certified test split.
struct Fixture {
  TestNet net;
  ContentHash dataset;
  ContentHash objective;
  ContentHash trainer;

  explicit Fixture(std::set<NodeId> everyone = {"A", "B", "C"}) {
    dataset = net.must("A", dataset_payload("hospital-a", "A", everyone));
    RegisterDataSamples samples;
    samples.dataset_key = dataset;
    for (int i = 1; i <= 4; ++i) samples.samples.emplace_back(sample_key(i), false);
    for (int i = 5; i <= 6; ++i) samples.samples.emplace_back(sample_key(i), true);
    net.must("A", samples);
    objective = net.must(
        "B", objective_payload("classify", "B",
                               {{sample_key(5), dataset}, {sample_key(6), dataset}}, everyone));
    trainer = net.must(
        "C", algorithm_payload("sgd", "C", ml::AlgorithmKind::trainer, everyone));
  }

  CreateTraintuple traintuple_payload(std::vector<ContentHash> inputs = {}) const {
    CreateTraintuple p;
    p.objective_key = objective;
    p.algorithm_key = trainer;
    p.dataset_key = dataset;
    p.train_sample_keys = {sample_key(1), sample_key(2)};
    p.input_model_keys = std::move(inputs);
    return p;
  }

  /// Drives one traintuple from todo to done on worker A.
  void finish(const ContentHash& tuple, const std::string& weights_tag) {
    UpdateStatus claim;
    claim.tuple_key = tuple;
    claim.new_status = TupleStatus::doing;
    net.must("A", claim);
    LogTrainResult result;
    result.tuple_key = tuple;
    result.model_hash = sha256("weights " + weights_tag);
    result.performance = 0.5;
    result.log = "trained";
    net.must("A", result);
  }
};

}  // namespace

TEST_CASE("registration populates normalized records") {
  Fixture f;
  const auto& ds = f.net.state.datasets.at(f.dataset);
  CHECK(ds.owner == "A");
  CHECK(ds.permissions.valid());
  CHECK(ds.permissions.download == std::set<NodeId>{"A"});
  CHECK(ds.permissions.process == std::set<NodeId>{"A", "B", "C"});
  CHECK(f.net.state.samples.at(sample_key(5)).test_only);
  CHECK(f.net.state.samples.at(sample_key(1)).dataset_keys.contains(f.dataset));
  CHECK(f.net.state.objectives.at(f.objective).test_samples.size() == 2);
  CHECK(f.net.state.algorithms.at(f.trainer).kind == ml::AlgorithmKind::trainer);
}

TEST_CASE("duplicate registrations are idempotent") {
  Fixture f;
  const auto count = f.net.state.datasets.size();
  ContentHash key;
  const auto rejection =
      f.net.submit("A", dataset_payload("hospital-a", "A", {"A", "B", "C"}), &key);
  CHECK_FALSE(rejection.has_value());
  CHECK(key == f.dataset);
  CHECK(f.net.state.datasets.size() == count);
}

TEST_CASE("datasets cannot grant download to other nodes") {
  Fixture f;
  auto payload = dataset_payload("leaky", "A", {"A", "B"});
  payload.permissions.download.insert("B");
  f.net.must_reject("A", payload, RejectionCode::PermissionDenied);
}

TEST_CASE("regime owner must match the transaction creator") {
  Fixture f;
  f.net.must_reject("B", dataset_payload("spoof", "A", {"A"}),
                    RejectionCode::PermissionDenied);
}

TEST_CASE("objective test sets must be existing test-only samples on one node") {
  Fixture f;
  // Not test-only.
  f.net.must_reject(
      "B", objective_payload("bad", "B", {{sample_key(1), f.dataset}}, {"A", "B", "C"}),
      RejectionCode::TestDataSanctuary);
  // Unknown sample.
  f.net.must_reject(
      "B", objective_payload("bad2", "B", {{sample_key(99), f.dataset}}, {"A", "B", "C"}),
      RejectionCode::UnknownAsset);
  // Sample not member of the named dataset.
  const auto other = f.net.must("B", dataset_payload("hospital-b", "B", {"A", "B", "C"}));
  f.net.must_reject(
      "B", objective_payload("bad3", "B", {{sample_key(5), other}}, {"A", "B", "C"}),
      RejectionCode::UnknownAsset);
  // Two different owners.
  RegisterDataSamples more;
  more.dataset_key = other;
  more.samples = {{sample_key(7), true}};
  f.net.must("B", more);
  f.net.must_reject(
      "B",
      objective_payload("bad4", "B", {{sample_key(5), f.dataset}, {sample_key(7), other}},
                        {"A", "B", "C"}),
      RejectionCode::KindMismatch);
}

TEST_CASE("sample test-only flags are immutable") {
  Fixture f;
  RegisterDataSamples flip;
  flip.dataset_key = f.dataset;
  flip.samples = {{sample_key(5), false}};
  f.net.must_reject("A", flip, RejectionCode::IllegalTransition);
}

TEST_CASE("only the dataset owner registers samples") {
  Fixture f;
  RegisterDataSamples foreign;
  foreign.dataset_key = f.dataset;
  foreign.samples = {{sample_key(42), false}};
  f.net.must_reject("B", foreign, RejectionCode::PermissionDenied);
}

TEST_CASE("a fresh traintuple starts todo at rank zero") {
  Fixture f;
  const auto key = f.net.must("B", f.traintuple_payload());
  const auto& tuple = f.net.state.traintuples.at(key);
  CHECK(tuple.status == TupleStatus::todo);
  CHECK(tuple.rank == 0);
  CHECK(tuple.worker == "A");           // where the data lives
  CHECK(tuple.creator == "B");
  CHECK(tuple.permissions.valid());
  // Output regime = dataset ∩ algorithm regimes with the worker kept in.
  CHECK(tuple.permissions.process == std::set<NodeId>{"A", "B", "C"});
  CHECK(tuple.permissions.download == std::set<NodeId>{"A"});
}

TEST_CASE("training on test data is rejected") {
  Fixture f;
  auto payload = f.traintuple_payload();
  payload.train_sample_keys.push_back(sample_key(5));
  f.net.must_reject("B", payload, RejectionCode::TestDataSanctuary);
}

TEST_CASE("unknown references are rejected") {
  Fixture f;
  auto payload = f.traintuple_payload();
  payload.dataset_key = sha256("no such dataset");
  f.net.must_reject("B", payload, RejectionCode::UnknownAsset);

  payload = f.traintuple_payload();
  payload.train_sample_keys = {sha256("no such sample")};
  f.net.must_reject("B", payload, RejectionCode::UnknownAsset);

  payload = f.traintuple_payload({sha256("no such tuple")});
  f.net.must_reject("B", payload, RejectionCode::UnknownAsset);

  CreateTesttuple test;
  test.traintuple_key = sha256("no such tuple");
  test.objective_key = f.objective;
  f.net.must_reject("B", test, RejectionCode::UnknownAsset);
}

TEST_CASE("process rights are enforced for the tuple's objective") {
  Fixture f({"A", "B"});  // C has no process right on the dataset or objective
  f.net.must_reject("C", f.traintuple_payload(), RejectionCode::PermissionDenied);
}

TEST_CASE("an algorithm whitelist pins the objectives it may serve") {
  Fixture f;
  auto gated = algorithm_payload("gated", "C", ml::AlgorithmKind::trainer, {"A", "B", "C"});
  gated.permissions.objective_whitelist = std::set<ContentHash>{f.objective};
  const auto algo = f.net.must("C", gated);

  auto ok = f.traintuple_payload();
  ok.algorithm_key = algo;
  f.net.must("B", ok);

  const auto other_objective =
      f.net.must("B", objective_payload("other", "B", {}, {"A", "B", "C"}));
  auto blocked = f.traintuple_payload();
  blocked.algorithm_key = algo;
  blocked.objective_key = other_objective;
  f.net.must_reject("B", blocked, RejectionCode::PermissionDenied);
}

TEST_CASE("kind arity rules") {
  Fixture f;
  const auto aggregator = f.net.must(
      "B", algorithm_payload("avg", "B", ml::AlgorithmKind::aggregator, {"A", "B", "C"}));
  const auto composite = f.net.must(
      "C", algorithm_payload("trunked", "C", ml::AlgorithmKind::composite, {"A", "B", "C"}));
  const auto t0 = f.net.must("B", f.traintuple_payload());
  const auto t1 = f.net.must("A", [&] {
    auto p = f.traintuple_payload();
    p.train_sample_keys = {sample_key(3)};
    return p;
  }());

  // Trainer with two inputs.
  f.net.must_reject("B", f.traintuple_payload({t0, t1}), RejectionCode::KindMismatch);

  // Aggregator with data, or with fewer than two inputs.
  CreateTraintuple agg;
  agg.objective_key = f.objective;
  agg.algorithm_key = aggregator;
  agg.input_model_keys = {t0, t1};
  {
    auto bad = agg;
    bad.dataset_key = f.dataset;
    bad.train_sample_keys = {sample_key(1)};
    f.net.must_reject("B", bad, RejectionCode::KindMismatch);
  }
  {
    auto bad = agg;
    bad.input_model_keys = {t0};
    f.net.must_reject("B", bad, RejectionCode::KindMismatch);
  }
  f.net.must("B", agg);

  // Composite with one input, and with a non-composite head source.
  {
    auto bad = f.traintuple_payload({t0});
    bad.algorithm_key = composite;
    f.net.must_reject("B", bad, RejectionCode::KindMismatch);
  }
  {
    auto bad = f.traintuple_payload({t0, t1});
    bad.algorithm_key = composite;  // t1 is a plain trainer tuple, no head
    f.net.must_reject("B", bad, RejectionCode::KindMismatch);
  }
  // Trainer without a dataset.
  {
    CreateTraintuple bad;
    bad.objective_key = f.objective;
    bad.algorithm_key = f.trainer;
    f.net.must_reject("B", bad, RejectionCode::KindMismatch);
  }
}

TEST_CASE("traintuple lifecycle with dependents") {
  Fixture f;
  const auto t0 = f.net.must("B", f.traintuple_payload());
  const auto t1 = f.net.must("B", f.traintuple_payload({t0}));
  CHECK(f.net.state.traintuples.at(t1).status == TupleStatus::waiting);
  CHECK(f.net.state.traintuples.at(t1).rank == 1);

  CreateTesttuple certified;
  certified.traintuple_key = t0;
  certified.objective_key = f.objective;
  const auto tt = f.net.must("B", certified);
  CHECK(f.net.state.testtuples.at(tt).status == TupleStatus::waiting);
  CHECK(f.net.state.testtuples.at(tt).certified);
  CHECK(f.net.state.testtuples.at(tt).worker == "A");
  CHECK(f.net.state.testtuples.at(tt).test_sample_keys ==
        std::vector<ContentHash>{sample_key(5), sample_key(6)});

  // Wrong node reports.
  UpdateStatus claim;
  claim.tuple_key = t0;
  claim.new_status = TupleStatus::doing;
  f.net.must_reject("B", claim, RejectionCode::NotWorker);

  // Cannot run before claiming, cannot finish before running.
  LogTrainResult early;
  early.tuple_key = t0;
  early.model_hash = sha256("w");
  early.performance = 0.4;
  f.net.must_reject("A", early, RejectionCode::IllegalTransition);

  f.net.must("A", claim);
  CHECK(f.net.state.traintuples.at(t0).status == TupleStatus::doing);

  // Double claim.
  f.net.must_reject("A", claim, RejectionCode::IllegalTransition);

  // Missing performance for a trainer.
  LogTrainResult incomplete;
  incomplete.tuple_key = t0;
  incomplete.model_hash = sha256("w");
  f.net.must_reject("A", incomplete, RejectionCode::MissingResult);

  LogTrainResult done;
  done.tuple_key = t0;
  done.model_hash = sha256("weights of t0");
  done.performance = 0.25;
  done.log = "trained fine";
  f.net.must("A", done);

  const auto& finished = f.net.state.traintuples.at(t0);
  CHECK(finished.status == TupleStatus::done);
  CHECK(finished.output_model_key == sha256("weights of t0"));
  CHECK(finished.performance == 0.25);
  const auto& model = f.net.state.models.at(sha256("weights of t0"));
  CHECK(model.holder == "A");
  CHECK(model.producing_tuple == t0);
  CHECK(model.permissions == finished.permissions);

  // Completion released the dependents.
  CHECK(f.net.state.traintuples.at(t1).status == TupleStatus::todo);
  CHECK(f.net.state.testtuples.at(tt).status == TupleStatus::todo);

  // Evaluate.
  UpdateStatus test_claim;
  test_claim.tuple_key = tt;
  test_claim.new_status = TupleStatus::doing;
  f.net.must("A", test_claim);
  LogTestResult verdict;
  verdict.tuple_key = tt;
  verdict.performance = 0.75;
  f.net.must("A", verdict);
  CHECK(f.net.state.testtuples.at(tt).status == TupleStatus::done);

  const auto board = leaderboard(f.net.state, f.objective);
  REQUIRE(board.size() == 1);
  CHECK(board[0].first == t0);
  CHECK(board[0].second == 0.75);
}

TEST_CASE("failures cascade to all transitive dependents") {
  Fixture f;
  const auto t0 = f.net.must("B", f.traintuple_payload());
  const auto t1 = f.net.must("B", f.traintuple_payload({t0}));
  const auto t2 = f.net.must("B", f.traintuple_payload({t1}));
  CreateTesttuple on_t1;
  on_t1.traintuple_key = t1;
  on_t1.objective_key = f.objective;
  const auto tt = f.net.must("B", on_t1);

  UpdateStatus claim;
  claim.tuple_key = t0;
  claim.new_status = TupleStatus::doing;
  f.net.must("A", claim);

  UpdateStatus fail;
  fail.tuple_key = t0;
  fail.new_status = TupleStatus::failed;
  fail.log = "";
  f.net.must_reject("A", fail, RejectionCode::MissingResult);
  fail.log = "disk died";
  f.net.must("A", fail);

  // Brute-force expectation: everything reachable from t0 is failed.
  std::map<ContentHash, TupleStatus> expected{{t0, TupleStatus::failed},
                                              {t1, TupleStatus::failed},
                                              {t2, TupleStatus::failed},
                                              {tt, TupleStatus::failed}};
  for (const auto& [key, status] : expected) {
    const auto train = f.net.state.traintuples.find(key);
    if (train != f.net.state.traintuples.end()) {
      CHECK(train->second.status == status);
    } else {
      CHECK(f.net.state.testtuples.at(key).status == status);
    }
  }
  CHECK(f.net.state.traintuples.at(t1).log.find("dependency failed") != std::string::npos);

  // A tuple created on a failed input is failed immediately.
  const auto t3 = f.net.must("B", f.traintuple_payload({t0}));
  CHECK(f.net.state.traintuples.at(t3).status == TupleStatus::failed);
}

TEST_CASE("logs are clipped to the cap") {
  Fixture f;
  const auto t0 = f.net.must("B", f.traintuple_payload());
  UpdateStatus claim;
  claim.tuple_key = t0;
  claim.new_status = TupleStatus::doing;
  f.net.must("A", claim);
  UpdateStatus fail;
  fail.tuple_key = t0;
  fail.new_status = TupleStatus::failed;
  fail.log = std::string(10000, 'x');
  f.net.must("A", fail);
  const auto& log = f.net.state.traintuples.at(t0).log;
  CHECK(log.size() == kMaxLogBytes);
  CHECK(log.ends_with("...[truncated]"));
}

TEST_CASE("requested permissions may narrow but never widen") {
  Fixture f;
  auto narrow = f.traintuple_payload();
  narrow.requested_permissions = PermissionRegime::private_to("A");
  const auto t0 = f.net.must("B", narrow);
  const auto& tuple = f.net.state.traintuples.at(t0);
  CHECK(tuple.permissions.process == std::set<NodeId>{"A"});
  CHECK(tuple.permissions.download == std::set<NodeId>{"A"});

  auto widen = f.traintuple_payload();
  widen.train_sample_keys = {sample_key(3)};  // distinct tuple
  widen.requested_permissions = PermissionRegime::open_to("A", {"A", "B", "C", "D"});
  f.net.must_reject("B", widen, RejectionCode::PermissionWiden);

  // The narrowed output regime now binds testtuple creators.
  f.finish(t0, "narrowed");
  CreateTesttuple test;
  test.traintuple_key = t0;
  test.objective_key = f.objective;
  f.net.must_reject("B", test, RejectionCode::PermissionDenied);
  f.net.must("A", test);
}

TEST_CASE("custom evaluations need a dataset plus samples and yield uncertified rows") {
  Fixture f;
  const auto t0 = f.net.must("B", f.traintuple_payload());
  f.finish(t0, "t0");

  CreateTesttuple missing_samples;
  missing_samples.traintuple_key = t0;
  missing_samples.objective_key = f.objective;
  missing_samples.dataset_key = f.dataset;
  f.net.must_reject("B", missing_samples, RejectionCode::KindMismatch);

  CreateTesttuple custom;
  custom.traintuple_key = t0;
  custom.objective_key = f.objective;
  custom.dataset_key = f.dataset;
  custom.test_sample_keys = {sample_key(3), sample_key(4)};
  const auto tt = f.net.must("B", custom);
  const auto& tuple = f.net.state.testtuples.at(tt);
  CHECK_FALSE(tuple.certified);
  CHECK(tuple.status == TupleStatus::todo);
  CHECK(tuple.worker == "A");

  UpdateStatus claim;
  claim.tuple_key = tt;
  claim.new_status = TupleStatus::doing;
  f.net.must("A", claim);
  LogTestResult verdict;
  verdict.tuple_key = tt;
  verdict.performance = 0.9;
  f.net.must("A", verdict);

  // Custom rows never reach the leaderboard.
  CHECK(leaderboard(f.net.state, f.objective).empty());
}

TEST_CASE("composite results carry a private head") {
  Fixture f;
  const auto composite = f.net.must(
      "C", algorithm_payload("trunked", "C", ml::AlgorithmKind::composite, {"A", "B", "C"}));
  auto payload = f.traintuple_payload();
  payload.algorithm_key = composite;
  const auto t0 = f.net.must("B", payload);

  UpdateStatus claim;
  claim.tuple_key = t0;
  claim.new_status = TupleStatus::doing;
  f.net.must("A", claim);

  LogTrainResult headless;
  headless.tuple_key = t0;
  headless.model_hash = sha256("trunk");
  headless.performance = 0.3;
  f.net.must_reject("A", headless, RejectionCode::MissingResult);

  LogTrainResult full;
  full.tuple_key = t0;
  full.model_hash = sha256("trunk");
  full.head_model_hash = sha256("head");
  full.performance = 0.3;
  f.net.must("A", full);

  CHECK(f.net.state.models.at(sha256("trunk")).permissions ==
        f.net.state.traintuples.at(t0).permissions);
  CHECK(f.net.state.models.at(sha256("head")).permissions ==
        PermissionRegime::private_to("A"));

  // A plain trainer may not report a head.
  const auto t1 = f.net.must("B", f.traintuple_payload());
  claim.tuple_key = t1;
  f.net.must("A", claim);
  LogTrainResult bogus;
  bogus.tuple_key = t1;
  bogus.model_hash = sha256("w1");
  bogus.head_model_hash = sha256("h1");
  bogus.performance = 0.4;
  f.net.must_reject("A", bogus, RejectionCode::KindMismatch);
}

TEST_CASE("aggregator tuples run on the objective owner without a performance") {
  Fixture f;
  const auto aggregator = f.net.must(
      "B", algorithm_payload("avg", "B", ml::AlgorithmKind::aggregator, {"A", "B", "C"}));
  const auto t0 = f.net.must("B", f.traintuple_payload());
  const auto t1 = f.net.must("B", [&] {
    auto p = f.traintuple_payload();
    p.train_sample_keys = {sample_key(3)};
    return p;
  }());
  f.finish(t0, "t0");
  f.finish(t1, "t1");

  CreateTraintuple agg;
  agg.objective_key = f.objective;
  agg.algorithm_key = aggregator;
  agg.input_model_keys = {t0, t1};
  const auto ta = f.net.must("C", agg);
  const auto& tuple = f.net.state.traintuples.at(ta);
  CHECK(tuple.worker == "B");
  CHECK(tuple.status == TupleStatus::todo);
  CHECK(tuple.rank == 1);

  UpdateStatus claim;
  claim.tuple_key = ta;
  claim.new_status = TupleStatus::doing;
  f.net.must("B", claim);
  LogTrainResult result;
  result.tuple_key = ta;
  result.model_hash = sha256("averaged");
  result.log = "averaged 2 models";
  f.net.must("B", result);
  CHECK(f.net.state.traintuples.at(ta).status == TupleStatus::done);
  CHECK_FALSE(f.net.state.traintuples.at(ta).performance.has_value());
}

TEST_CASE("permission updates are owner-only and bind future tuples") {
  Fixture f;
  // Non-owner cannot touch the algorithm's regime.
  UpdatePermissions foreign;
  foreign.asset_key = f.trainer;
  foreign.permissions = PermissionRegime::private_to("C");
  f.net.must_reject("A", foreign, RejectionCode::PermissionDenied);

  // Unknown asset.
  UpdatePermissions nowhere;
  nowhere.asset_key = sha256("missing");
  nowhere.permissions = PermissionRegime::private_to("C");
  f.net.must_reject("C", nowhere, RejectionCode::UnknownAsset);

  // Owner narrows, excluding B.
  UpdatePermissions narrow;
  narrow.asset_key = f.trainer;
  narrow.permissions = PermissionRegime::private_to("C");
  narrow.permissions.process.insert("A");
  f.net.must("C", narrow);
  f.net.must_reject("B", f.traintuple_payload(), RejectionCode::PermissionDenied);
  const auto t0 = f.net.must("A", f.traintuple_payload());

  // Owner widens again; B can create tuples once more.
  UpdatePermissions widen;
  widen.asset_key = f.trainer;
  widen.permissions = PermissionRegime::open_to("C", {"A", "B"});
  f.net.must("C", widen);
  auto second = f.traintuple_payload();
  second.train_sample_keys = {sample_key(3)};
  f.net.must("B", second);

  // After completion the model record's regime governs new consumers.
  f.finish(t0, "t0");
  UpdatePermissions lockdown;
  lockdown.asset_key = *f.net.state.traintuples.at(t0).output_model_key;
  lockdown.permissions = PermissionRegime::private_to("A");
  f.net.must("A", lockdown);
  CreateTesttuple test;
  test.traintuple_key = t0;
  test.objective_key = f.objective;
  f.net.must_reject("B", test, RejectionCode::PermissionDenied);
  f.net.must("A", test);
}

TEST_CASE("blocks are atomic") {
  Fixture f;
  const auto digest_before = f.net.state.digest();
  const auto height_before = f.net.chain.height();

  std::vector<Transaction> txs;
  txs.push_back(Transaction::make("B", f.traintuple_payload()));
  auto bad = f.traintuple_payload();
  bad.train_sample_keys = {sample_key(5)};  // test-only sample
  txs.push_back(Transaction::make("B", bad));

  const auto result = try_append(f.net.chain, f.net.state, txs);
  REQUIRE(std::holds_alternative<Rejection>(result));
  CHECK(std::get<Rejection>(result).code == RejectionCode::TestDataSanctuary);
  CHECK(f.net.state.digest() == digest_before);
  CHECK(f.net.chain.height() == height_before);

  // The same valid tx in its own block commits.
  const auto ok = try_append(f.net.chain, f.net.state, {txs[0]});
  CHECK(std::holds_alternative<Block>(ok));
  CHECK(f.net.chain.height() == height_before + 1);
}

TEST_CASE("forged transaction ids are refused outright") {
  Fixture f;
  Transaction tx = Transaction::make("B", f.traintuple_payload());
  tx.tx_id = sha256("forged");
  CHECK_THROWS_AS(try_append(f.net.chain, f.net.state, {tx}), IntegrityError);
  CHECK_THROWS_AS(try_append(f.net.chain, f.net.state, {}), EmptyBlockError);
}

TEST_CASE("replay rebuilds the exact state") {
  Fixture f;
  const auto t0 = f.net.must("B", f.traintuple_payload());
  f.finish(t0, "t0");
  CreateTesttuple test;
  test.traintuple_key = t0;
  test.objective_key = f.objective;
  f.net.must("B", test);

  REQUIRE(f.net.chain.validate());
  const WorldState replayed = replay(f.net.chain);
  CHECK(replayed.digest() == f.net.state.digest());
  CHECK(canonical_dump(replayed.to_json()) == canonical_dump(f.net.state.to_json()));
  CHECK(replayed.status_journal == f.net.state.status_journal);

  // Prefix consistency: replaying a prefix yields a restriction of the state.
  Chain prefix;
  for (std::size_t i = 0; i + 1 < f.net.chain.blocks().size(); ++i) {
    prefix.append_block(f.net.chain.blocks()[i]);
  }
  const WorldState earlier = replay(prefix);
  for (const auto& [key, dataset] : earlier.datasets) {
    CHECK(replayed.datasets.contains(key));
  }
  CHECK(earlier.traintuples.size() <= replayed.traintuples.size());
}

TEST_CASE("every status assignment walks the transition graph") {
  Fixture f;
  const auto t0 = f.net.must("B", f.traintuple_payload());
  const auto t1 = f.net.must("B", f.traintuple_payload({t0}));
  f.finish(t0, "t0");
  UpdateStatus claim;
  claim.tuple_key = t1;
  claim.new_status = TupleStatus::doing;
  f.net.must("A", claim);
  UpdateStatus fail;
  fail.tuple_key = t1;
  fail.new_status = TupleStatus::failed;
  fail.log = "boom";
  f.net.must("A", fail);

  const auto legal = [](TupleStatus from, TupleStatus to) {
    switch (from) {
      case TupleStatus::waiting: return to == TupleStatus::todo || to == TupleStatus::failed;
      case TupleStatus::todo: return to == TupleStatus::doing;
      case TupleStatus::doing: return to == TupleStatus::done || to == TupleStatus::failed;
      default: return false;
    }
  };
  std::map<ContentHash, TupleStatus> last;
  for (const auto& [key, status] : f.net.state.status_journal) {
    if (auto it = last.find(key); it != last.end()) {
      CHECK(legal(it->second, status));
    }
    last[key] = status;
  }
}

TEST_CASE("leaderboard orders by metric direction with key tie-breaks") {
  Fixture f;
  std::vector<ContentHash> tuples;
  for (int i = 0; i < 3; ++i) {
    auto p = f.traintuple_payload();
    p.tag = "entry-" + std::to_string(i);
    const auto key = f.net.must("B", p);
    f.finish(key, "model-" + std::to_string(i));
    CreateTesttuple test;
    test.traintuple_key = key;
    test.objective_key = f.objective;
    const auto tt = f.net.must("B", test);
    UpdateStatus claim;
    claim.tuple_key = tt;
    claim.new_status = TupleStatus::doing;
    f.net.must("A", claim);
    LogTestResult verdict;
    verdict.tuple_key = tt;
    verdict.performance = i == 2 ? 0.8 : 0.9;  // two-way tie at the top
    f.net.must("A", verdict);
    tuples.push_back(key);
  }

  const auto board = leaderboard(f.net.state, f.objective);
  REQUIRE(board.size() == 3);
  CHECK(board[0].second == 0.9);
  CHECK(board[1].second == 0.9);
  CHECK(board[2].second == 0.8);
  CHECK(board[0].first < board[1].first);  // tie resolved by key order

  CHECK_THROWS_AS(leaderboard(f.net.state, sha256("missing")), NotFoundError);
}

TEST_CASE("accepted traintuples match an independent rights oracle") {
  const std::vector<NodeId> nodes = {"A", "B", "C"};
  const std::vector<std::set<NodeId>> extra_sets = {{}, {"B"}, {"C"}, {"B", "C"}};
  const std::vector<std::set<NodeId>> algo_sets = {{}, {"A"}, {"B"}, {"A", "B"}};
  int accepted = 0, rejected = 0;

  for (const auto& ds_extra : extra_sets) {
    for (const auto& algo_extra : algo_sets) {
      for (int wl_mode = 0; wl_mode < 3; ++wl_mode) {
        for (const auto& creator : nodes) {
          TestNet net;
          auto ds_payload = dataset_payload("d", "A", ds_extra);
          const auto dataset = net.must("A", ds_payload);
          RegisterDataSamples samples;
          samples.dataset_key = dataset;
          samples.samples = {{sample_key(1), false}};
          net.must("A", samples);
          const auto objective =
              net.must("B", objective_payload("o", "B", {}, {"A", "B", "C"}));
          const auto decoy = net.must("B", objective_payload("o2", "B", {}, {"A", "B", "C"}));
          auto algo_payload = algorithm_payload("t", "C", ml::AlgorithmKind::trainer, algo_extra);
          if (wl_mode == 1) algo_payload.permissions.objective_whitelist = {{objective}};
          if (wl_mode == 2) algo_payload.permissions.objective_whitelist = {{decoy}};
          const auto algorithm = net.must("C", algo_payload);

          CreateTraintuple tuple;
          tuple.objective_key = objective;
          tuple.algorithm_key = algorithm;
          tuple.dataset_key = dataset;
          tuple.train_sample_keys = {sample_key(1)};
          const auto rejection = net.submit(creator, tuple);

          // Oracle, from the raw payload regimes: normalization adds the
          // owner and every download grantee to the process set; the
          // whitelist must name the tuple's objective when present.
          auto effective = [](const PermissionRegime& r) {
            std::set<NodeId> p = r.process;
            for (const auto& n : r.download) p.insert(n);
            p.insert(r.owner);
            return p;
          };
          const bool dataset_ok = effective(ds_payload.permissions).contains(creator);
          const bool algo_member = effective(algo_payload.permissions).contains(creator);
          const bool wl_ok = wl_mode != 2;
          const bool objective_ok = true;  // objective regime is open to everyone
          const bool expect_accept = dataset_ok && algo_member && wl_ok && objective_ok;

          CAPTURE(creator);
          CAPTURE(wl_mode);
          CHECK(rejection.has_value() != expect_accept);
          if (rejection) {
            ++rejected;
            CHECK(rejection->code == RejectionCode::PermissionDenied);
          } else {
            ++accepted;
          }
        }
      }
    }
  }
  CHECK(accepted > 0);
  CHECK(rejected > 0);
}
