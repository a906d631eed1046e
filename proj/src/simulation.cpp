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
#include "fedledger/simulation.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "fedledger/errors.hpp"

namespace fedledger {

namespace {

Bytes read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw StoreError("cannot read " + p.string());
  std::ostringstream out;
  out << f.rdbuf();
  return std::move(out).str();
}

void write_file(const std::filesystem::path& p, const Bytes& bytes) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw StoreError("cannot write " + p.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

/// Uniform draw in [-1, 1) with the same bit-exact mapping the weight
/// initializer uses, so generated datasets are identical on every platform.
double uniform_signed(std::mt19937_64& rng) {
  const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return 2.0 * unit - 1.0;
}

/// Ground-truth coefficients for synthetic labels: a fixed cycle so that any
/// two scenarios generating from the same seed agree byte for byte.
double true_coefficient(std::size_t j) {
  switch (j % 3) {
    case 0: return 0.8;
    case 1: return -0.4;
    default: return 0.3;
  }
}

std::string format_cell(double v) { return Json(v).dump(); }

}  // namespace

// -- scenario -----------------------------------------------------------------

Scenario Scenario::parse(const Json& j) {
  Scenario s;
  s.name = j.value("name", std::string("scenario"));
  j.at("nodes").get_to(s.nodes);
  j.at("orderer").get_to(s.orderer);
  s.seed = j.value("seed", std::uint64_t{0});
  s.jitter = j.value("jitter", std::uint32_t{0});
  s.fetch_timeout = j.value("fetch_timeout", std::uint32_t{5});
  s.max_ticks = j.value("max_ticks", std::uint64_t{500});
  if (s.nodes.empty()) throw ScenarioError("a scenario needs at least one node");
  if (std::set<NodeId>(s.nodes.begin(), s.nodes.end()).size() != s.nodes.size()) {
    throw ScenarioError("duplicate node ids in scenario");
  }
  if (std::find(s.nodes.begin(), s.nodes.end(), s.orderer) == s.nodes.end()) {
    throw ScenarioError("orderer " + s.orderer + " is not in the node list");
  }
  if (j.contains("events")) {
    for (const Json& e : j.at("events")) {
      ScenarioEvent evt;
      evt.tick = e.at("tick").get<std::uint64_t>();
      evt.spec = e;
      s.events.push_back(std::move(evt));
    }
  }
  std::stable_sort(s.events.begin(), s.events.end(),
                   [](const ScenarioEvent& a, const ScenarioEvent& b) { return a.tick < b.tick; });
  return s;
}

Scenario Scenario::load(const std::filesystem::path& file) {
  try {
    return parse(Json::parse(read_file(file)));
  } catch (const Json::exception& e) {
    throw ScenarioError("cannot parse scenario " + file.string() + ": " + e.what());
  }
}

Json Scenario::to_json() const {
  Json evts = Json::array();
  for (const auto& e : events) evts.push_back(e.spec);
  return Json{{"name", name},           {"nodes", nodes},
              {"orderer", orderer},     {"seed", seed},
              {"jitter", jitter},       {"fetch_timeout", fetch_timeout},
              {"max_ticks", max_ticks}, {"events", std::move(evts)}};
}

// -- simulation ---------------------------------------------------------------

Simulation::Simulation(Scenario scenario, std::filesystem::path workdir)
    : scenario_(std::move(scenario)),
      workdir_(std::move(workdir)),
      network_(scenario_.seed, scenario_.jitter),
      marker_rng_(scenario_.seed ^ 0x6d61726b65727321ULL) {
  std::filesystem::create_directories(workdir_ / "nodes");
  for (const auto& id : scenario_.nodes) {
    auto node = std::make_unique<Node>(id, workdir_ / "nodes" / id, scenario_.fetch_timeout);
    network_.attach(id, node.get());
    nodes_.emplace(id, std::move(node));
  }
  poll_order_ = scenario_.nodes;
  std::sort(poll_order_.begin(), poll_order_.end());
}

Simulation Simulation::reopen(const std::filesystem::path& workdir) {
  const Json meta = Json::parse(read_file(workdir / "network.json"));
  Simulation sim(Scenario::parse(meta.at("scenario")), workdir);
  sim.tick_ = meta.at("tick").get<std::uint64_t>();
  sim.next_event_ = sim.scenario_.events.size();  // scripted history already played out
  sim.network_.trace() = NetworkTrace::load(workdir / "trace.jsonl");
  return sim;
}

Node& Simulation::node(const NodeId& id) {
  const auto it = nodes_.find(id);
  if (it == nodes_.end()) throw NotFoundError("no node " + id + " in this scenario");
  return *it->second;
}

const Node& Simulation::node(const NodeId& id) const {
  return const_cast<Simulation*>(this)->node(id);
}

const WorldState& Simulation::state() const { return node(scenario_.orderer).state(); }
const Chain& Simulation::chain() const { return node(scenario_.orderer).chain(); }

ContentHash Simulation::resolve(const std::string& symbol) const {
  const auto it = symbols_.find(symbol);
  if (it == symbols_.end()) throw UnknownRefError("unknown scenario symbol '" + symbol + "'");
  return it->second;
}

void Simulation::register_symbol(const std::string& id, const ContentHash& key) {
  if (id.empty()) return;
  if (const auto [it, inserted] = symbols_.emplace(id, key); !inserted && it->second != key) {
    throw ScenarioError("scenario symbol '" + id + "' bound twice");
  }
}

std::vector<ContentHash> Simulation::dataset_samples(const std::string& symbol,
                                                     const std::string& which) const {
  const auto it = dataset_samples_.find(symbol);
  if (it == dataset_samples_.end()) {
    throw UnknownRefError("no samples registered under dataset symbol '" + symbol + "'");
  }
  std::vector<ContentHash> keys;
  for (const auto& [key, test_only] : it->second) {
    if (which == "all" || (which == "test") == test_only) keys.push_back(key);
  }
  if (which != "all" && which != "train" && which != "test") {
    throw ScenarioError("sample selector must be train, test or all, not '" + which + "'");
  }
  return keys;
}

std::uint64_t Simulation::run(std::optional<std::uint64_t> until_tick) {
  const std::uint64_t limit = until_tick.value_or(scenario_.max_ticks);
  while (tick_ < limit && !quiescent()) {
    step();
    ++tick_;
  }
  return tick_;
}

bool Simulation::quiescent() const {
  if (next_event_ < scenario_.events.size()) return false;
  if (!network_.idle()) return false;
  if (!mempool_.empty()) return false;
  const bool orderer_up = network_.attached(scenario_.orderer);
  for (const auto& [id, node] : nodes_) {
    if (!network_.attached(id)) continue;
    if (orderer_up && !node->outbox_empty()) return false;
    if (node->has_runnable_work()) return false;
  }
  return true;
}

void Simulation::step() {
  network_.deliver_due(tick_);

  while (next_event_ < scenario_.events.size() &&
         scenario_.events[next_event_].tick <= tick_) {
    apply_event(scenario_.events[next_event_].spec);
    ++next_event_;
  }

  for (const auto& id : poll_order_) {
    if (network_.attached(id)) nodes_.at(id)->poll_and_execute(network_, tick_);
  }

  for (const auto& id : poll_order_) {
    if (!network_.attached(id) || !network_.reachable(id, scenario_.orderer)) continue;
    for (auto& group : nodes_.at(id)->take_outbox()) mempool_.push_back(std::move(group));
  }

  if (network_.attached(scenario_.orderer)) {
    Node& orderer = *nodes_.at(scenario_.orderer);
    for (auto& group : std::exchange(mempool_, {})) {
      auto result = orderer.order_block(std::move(group));
      if (const auto* block = std::get_if<Block>(&result)) {
        network_.broadcast_block(scenario_.orderer, *block, tick_);
      } else {
        rejections_.push_back(std::get<Rejection>(result));
      }
    }
  }
}

// -- events -------------------------------------------------------------------

namespace {

ContentHash parse_ref(const Simulation& sim, const std::string& ref) {
  if (!ref.empty() && ref.front() == '@') return sim.resolve(ref.substr(1));
  try {
    return ContentHash::from_hex(ref);
  } catch (const std::invalid_argument&) {
    throw UnknownRefError("'" + ref + "' is neither a key nor a scenario symbol");
  }
}

std::string require_symbol(const std::string& ref) {
  if (ref.empty() || ref.front() != '@') {
    throw ScenarioError("this event field needs an '@symbol' reference, got '" + ref + "'");
  }
  return ref.substr(1);
}

}  // namespace

PermissionRegime Simulation::regime_from_event(const Json& spec, const NodeId& owner) const {
  PermissionRegime regime;
  regime.owner = owner;
  const auto read_set = [&](const char* field, std::set<NodeId> fallback) {
    if (!spec.contains(field)) return fallback;
    const Json& v = spec.at(field);
    if (v.is_string() && v.get<std::string>() == "*") {
      return std::set<NodeId>(scenario_.nodes.begin(), scenario_.nodes.end());
    }
    return std::set<NodeId>(v.begin(), v.end());
  };
  regime.process = read_set("process", {owner});
  regime.download = read_set("download", {owner});
  if (spec.contains("whitelist")) {
    std::set<ContentHash> whitelist;
    for (const Json& ref : spec.at("whitelist")) {
      whitelist.insert(parse_ref(*this, ref.get<std::string>()));
    }
    regime.objective_whitelist = std::move(whitelist);
  }
  return regime;
}

std::vector<ContentHash> Simulation::sample_refs_from_event(const Json& spec) const {
  if (!spec.contains("samples")) return {};
  const Json& v = spec.at("samples");
  if (v.is_string()) {
    const std::string symbol = require_symbol(spec.at("dataset").get<std::string>());
    return dataset_samples(symbol, v.get<std::string>());
  }
  std::vector<ContentHash> keys;
  for (const Json& ref : v) keys.push_back(parse_ref(*this, ref.get<std::string>()));
  return keys;
}

Bytes Simulation::next_marker_line() {
  char hex[33];
  std::snprintf(hex, sizeof hex, "%016llx%016llx",
                static_cast<unsigned long long>(marker_rng_()),
                static_cast<unsigned long long>(marker_rng_()));
  return Bytes("# marker:") + hex + "\n";
}

void Simulation::apply_event(const Json& spec) {
  const std::string action = spec.at("action").get<std::string>();

  if (action == "partition" || action == "heal" || action == "remove") {
    const NodeId id = spec.at("node").get<NodeId>();
    if (action == "partition") network_.partition(id);
    if (action == "heal") network_.heal(id);
    if (action == "remove") network_.detach(id);
    return;
  }

  const NodeId node_id = spec.at("node").get<NodeId>();
  if (!network_.attached(node_id)) {
    throw ScenarioError("event targets removed node " + node_id);
  }
  Node& actor = *nodes_.at(node_id);
  const std::string id = spec.value("id", std::string());

  if (action == "register_dataset") {
    RegisterDataset payload;
    payload.name = spec.value("name", id);
    spec.at("features").get_to(payload.opener.feature_columns);
    spec.at("label").get_to(payload.opener.label_column);
    payload.data_type = spec.value("data_type", std::string("tabular"));
    if (spec.contains("objective")) {
      payload.objective_key = parse_ref(*this, spec.at("objective").get<std::string>());
    }
    payload.permissions = regime_from_event(spec, node_id);
    const ml::OpenerDescriptor opener = payload.opener;
    register_symbol(id, actor.enqueue(std::move(payload)));
    if (!id.empty()) openers_[id] = opener;

  } else if (action == "register_samples") {
    const std::string symbol = require_symbol(spec.at("dataset").get<std::string>());
    const ContentHash dataset_key = resolve(symbol);
    std::vector<Bytes> blobs;
    std::vector<bool> flags;
    if (spec.contains("blobs")) {
      for (const Json& b : spec.at("blobs")) {
        blobs.push_back(next_marker_line() + b.at("csv").get<std::string>());
        flags.push_back(b.value("test_only", false));
      }
    } else {
      const auto opener_it = openers_.find(symbol);
      if (opener_it == openers_.end()) {
        throw ScenarioError("cannot synthesize samples for dataset '" + symbol +
                            "' registered outside this scenario");
      }
      const ml::OpenerDescriptor& opener = opener_it->second;
      const std::size_t train = spec.value("train", std::size_t{0});
      const std::size_t test = spec.value("test", std::size_t{0});
      const std::size_t rows = spec.value("rows", std::size_t{4});
      const std::string rule = spec.value("rule", std::string("linear"));
      if (rule != "linear" && rule != "binary") {
        throw ScenarioError("sample rule must be linear or binary, not '" + rule + "'");
      }
      std::mt19937_64 data_rng(spec.value("data_seed", std::uint64_t{0}));
      for (std::size_t s = 0; s < train + test; ++s) {
        std::ostringstream csv;
        for (std::size_t j = 0; j < opener.feature_columns.size(); ++j) {
          csv << (j ? "," : "") << opener.feature_columns[j];
        }
        csv << "," << opener.label_column << "\n";
        for (std::size_t r = 0; r < rows; ++r) {
          double response = 0.25;
          for (std::size_t j = 0; j < opener.feature_columns.size(); ++j) {
            const double x = uniform_signed(data_rng);
            response += true_coefficient(j) * x;
            csv << format_cell(x) << ",";
          }
          const double label = rule == "linear" ? response : (response > 0.25 ? 1.0 : 0.0);
          csv << format_cell(label) << "\n";
        }
        blobs.push_back(next_marker_line() + std::move(csv).str());
        flags.push_back(s >= train);
      }
    }
    const auto keys = actor.register_local_data(dataset_key, blobs, flags);
    auto& listing = dataset_samples_[symbol];
    for (std::size_t i = 0; i < keys.size(); ++i) {
      // The marker is the full comment line minus the trailing newline.
      const Bytes marker = blobs[i].substr(0, blobs[i].find('\n'));
      markers_.emplace_back(keys[i], marker.substr(std::string("# marker:").size()));
      listing.emplace_back(keys[i], flags[i]);
    }

  } else if (action == "register_objective") {
    RegisterObjective payload;
    payload.name = spec.value("name", id);
    payload.metric.kind = ml::metric_kind_from_string(spec.value("metric", std::string("mse")));
    if (spec.contains("description")) {
      payload.description_hash = sha256(spec.at("description").get<std::string>());
    }
    if (spec.contains("test_dataset")) {
      const std::string symbol = require_symbol(spec.at("test_dataset").get<std::string>());
      const ContentHash dataset_key = resolve(symbol);
      for (const auto& [sample, test_only] : dataset_samples_.at(symbol)) {
        if (test_only) payload.test_samples.emplace_back(sample, dataset_key);
      }
    }
    payload.permissions = regime_from_event(spec, node_id);
    register_symbol(id, actor.enqueue(std::move(payload)));

  } else if (action == "register_algorithm") {
    const ml::AlgorithmSpec algo = spec.at("algorithm").get<ml::AlgorithmSpec>();
    RegisterAlgorithm payload;
    payload.name = spec.value("name", id);
    payload.kind = algo.kind;
    payload.spec_hash = actor.store_algorithm_blob(algo);
    if (spec.contains("objective")) {
      payload.objective_key = parse_ref(*this, spec.at("objective").get<std::string>());
    }
    payload.permissions = regime_from_event(spec, node_id);
    register_symbol(id, actor.enqueue(std::move(payload)));

  } else if (action == "create_traintuple") {
    CreateTraintuple payload;
    payload.objective_key = parse_ref(*this, spec.at("objective").get<std::string>());
    payload.algorithm_key = parse_ref(*this, spec.at("algorithm").get<std::string>());
    if (spec.contains("dataset")) {
      payload.dataset_key = parse_ref(*this, spec.at("dataset").get<std::string>());
    }
    payload.train_sample_keys = sample_refs_from_event(spec);
    if (spec.contains("inputs")) {
      for (const Json& ref : spec.at("inputs")) {
        payload.input_model_keys.push_back(parse_ref(*this, ref.get<std::string>()));
      }
    }
    if (spec.contains("requested_permissions")) {
      payload.requested_permissions = regime_from_event(spec.at("requested_permissions"), node_id);
    }
    if (spec.contains("tag")) payload.tag = spec.at("tag").get<std::string>();
    register_symbol(id, actor.enqueue(std::move(payload)));

  } else if (action == "create_testtuple") {
    CreateTesttuple payload;
    payload.traintuple_key = parse_ref(*this, spec.at("traintuple").get<std::string>());
    payload.objective_key = parse_ref(*this, spec.at("objective").get<std::string>());
    if (spec.contains("dataset")) {
      payload.dataset_key = parse_ref(*this, spec.at("dataset").get<std::string>());
    }
    payload.test_sample_keys = sample_refs_from_event(spec);
    if (spec.contains("tag")) payload.tag = spec.at("tag").get<std::string>();
    register_symbol(id, actor.enqueue(std::move(payload)));

  } else if (action == "update_permissions") {
    UpdatePermissions payload;
    payload.asset_key = parse_ref(*this, spec.at("asset").get<std::string>());
    payload.permissions = regime_from_event(spec, node_id);
    actor.enqueue(std::move(payload));

  } else if (action == "update_status") {
    UpdateStatus payload;
    payload.tuple_key = parse_ref(*this, spec.at("tuple").get<std::string>());
    payload.new_status = tuple_status_from_string(spec.at("status").get<std::string>());
    payload.log = spec.value("log", std::string());
    actor.enqueue(std::move(payload));

  } else if (action == "submit_plan") {
    // Scenario convenience: "@dataset:train" (or :test, :all) in a sample
    // list expands to that dataset's registered sample keys.
    Json plan_json = spec.at("plan");
    for (Json& tuple : plan_json.at("tuples")) {
      for (const char* field : {"train_samples", "test_samples"}) {
        if (!tuple.contains(field)) continue;
        Json expanded = Json::array();
        const auto expand = [&](const std::string& ref) {
          const auto colon = ref.rfind(':');
          if (!ref.empty() && ref.front() == '@' && colon != std::string::npos) {
            const std::string symbol = ref.substr(1, colon - 1);
            const std::string which = ref.substr(colon + 1);
            if (dataset_samples_.contains(symbol) &&
                (which == "train" || which == "test" || which == "all")) {
              for (const auto& key : dataset_samples(symbol, which)) expanded.push_back(key.hex());
              return;
            }
          }
          expanded.push_back(ref);
        };
        const Json& v = tuple.at(field);
        if (v.is_string()) {
          expand(v.get<std::string>());
        } else {
          for (const Json& r : v) expand(r.get<std::string>());
        }
        tuple[field] = std::move(expanded);
      }
    }
    const ComputePlan plan = ComputePlan::parse(plan_json);
    std::map<std::string, ContentHash> keys;
    auto txs = plan.resolve(
        node_id, [this](const std::string& symbol) { return resolve(symbol); }, &keys);
    actor.enqueue_transactions(std::move(txs));
    for (const auto& [step_id, key] : keys) register_symbol(step_id, key);

  } else {
    throw ScenarioError("unknown scenario action '" + action + "'");
  }
}

// -- audit and persistence ----------------------------------------------------

std::vector<ContentHash> Simulation::audit_leaks() const {
  std::vector<ContentHash> leaked;
  for (const auto& [key, marker] : markers_) {
    if (trace().contains(marker)) leaked.push_back(key);
  }
  return leaked;
}

void Simulation::save() {
  for (const auto& [id, node] : nodes_) node->save_ledger();
  trace().save(workdir_ / "trace.jsonl");
  const Json meta{{"scenario", scenario_.to_json()}, {"tick", tick_}};
  write_file(workdir_ / "network.json", canonical_dump(meta) + "\n");
}

}  // namespace fedledger
