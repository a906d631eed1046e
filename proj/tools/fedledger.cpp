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

// Operator front end. One binary drives a whole federation workspace: asset
// registration, permission changes, tuple and plan submission, leaderboards,
// local prediction serving, and scripted scenario runs. Exit codes: 0 on
// success, 1 when the chaincode (or local permission check) refuses the
// operation, 2 on usage or environment errors.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fedledger/errors.hpp"
#include "fedledger/simulation.hpp"

namespace {

using namespace fedledger;

Bytes read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw StoreError("cannot read " + p.string());
  std::ostringstream out;
  out << f.rdbuf();
  return std::move(out).str();
}

// -- workspace ----------------------------------------------------------------

/// Opens the workspace, bootstrapping a single-node federation on first use.
/// Reopened replicas that fell behind (a node removed mid-scenario, say) are
/// caught up from the orderer's chain before any new work.
Simulation open_workspace(const std::filesystem::path& dir, const std::string& node_flag) {
  if (std::filesystem::exists(dir / "network.json")) {
    Simulation sim = Simulation::reopen(dir);
    if (!node_flag.empty()) sim.node(node_flag);  // membership check, throws NotFoundError
    const Chain& head = sim.chain();
    for (const auto& id : sim.scenario().nodes) {
      Node& node = sim.node(id);
      while (node.chain().height() < head.height()) {
        node.receive_block(head.blocks()[node.chain().height()]);
      }
    }
    return sim;
  }
  Scenario scenario;
  scenario.name = "cli";
  const NodeId id = node_flag.empty() ? NodeId("node-1") : NodeId(node_flag);
  scenario.nodes = {id};
  scenario.orderer = id;
  Simulation sim(std::move(scenario), dir);
  sim.save();
  return sim;
}

NodeId pick_actor(Simulation& sim, const std::string& node_flag) {
  if (node_flag.empty()) return sim.scenario().orderer;
  sim.node(node_flag);  // membership check; throws NotFoundError otherwise
  return node_flag;
}

/// Pushes the actor's queued transactions through the orderer and replicates
/// each committed block to every peer in lockstep. A rejection aborts the
/// command; nothing of the refused group is applied anywhere.
std::vector<Block> commit_outbox(Simulation& sim, Node& actor) {
  std::vector<Block> blocks;
  Node& orderer = sim.node(sim.scenario().orderer);
  for (auto& group : actor.take_outbox()) {
    auto result = orderer.order_block(std::move(group));
    if (auto* rejection = std::get_if<Rejection>(&result)) {
      sim.save();
      throw *rejection;
    }
    const Block& block = std::get<Block>(result);
    for (const auto& id : sim.scenario().nodes) {
      if (id != sim.scenario().orderer) sim.node(id).receive_block(block);
    }
    blocks.push_back(block);
  }
  sim.save();
  return blocks;
}

ContentHash commit_one(Simulation& sim, const NodeId& actor, TxPayload payload) {
  Node& node = sim.node(actor);
  const ContentHash key = node.enqueue(std::move(payload));
  commit_outbox(sim, node);
  return key;
}

// -- input parsing helpers ----------------------------------------------------

ContentHash parse_key(const std::string& hex) {
  try {
    return ContentHash::from_hex(hex);
  } catch (const std::invalid_argument&) {
    throw SchemaError("'" + hex + "' is not a 64-hex asset key");
  }
}

std::set<NodeId> parse_nodes(const Simulation& sim, const std::vector<std::string>& entries,
                             std::set<NodeId> fallback) {
  if (entries.empty()) return fallback;
  std::set<NodeId> out;
  for (const auto& e : entries) {
    if (e == "*") {
      out.insert(sim.scenario().nodes.begin(), sim.scenario().nodes.end());
    } else {
      out.insert(e);
    }
  }
  return out;
}

PermissionRegime regime_from_flags(const Simulation& sim, const NodeId& owner,
                                   const std::vector<std::string>& process,
                                   const std::vector<std::string>& download,
                                   const std::vector<std::string>& whitelist) {
  PermissionRegime regime;
  regime.owner = owner;
  regime.process = parse_nodes(sim, process, {owner});
  regime.download = parse_nodes(sim, download, {owner});
  if (!whitelist.empty()) {
    std::set<ContentHash> keys;
    for (const auto& w : whitelist) keys.insert(parse_key(w));
    regime.objective_whitelist = std::move(keys);
  }
  return regime;
}

/// Expands "train" / "test" / "all" against the dataset's registered samples
/// (key order); anything else must be a literal sample key.
std::vector<ContentHash> resolve_samples(const Simulation& sim, const std::string& dataset_hex,
                                         const std::vector<std::string>& entries) {
  std::vector<ContentHash> keys;
  for (const auto& e : entries) {
    if (e == "train" || e == "test" || e == "all") {
      if (dataset_hex.empty()) throw SchemaError("--samples " + e + " needs --dataset");
      const ContentHash dataset = parse_key(dataset_hex);
      for (const auto& [key, sample] : sim.state().samples) {
        if (!sample.dataset_keys.contains(dataset)) continue;
        if (e == "all" || (e == "test") == sample.test_only) keys.push_back(key);
      }
    } else {
      keys.push_back(parse_key(e));
    }
  }
  return keys;
}

// -- output -------------------------------------------------------------------

void emit_json(const Json& j) { std::cout << canonical_dump(j) << "\n"; }

void emit_key(const ContentHash& key, const std::string& format) {
  if (format == "json") {
    emit_json(Json{{"key", key}});
  } else {
    std::cout << key.hex() << "\n";
  }
}

void print_table(const std::vector<std::vector<std::string>>& rows) {
  if (rows.empty()) return;
  std::vector<std::size_t> width(rows.front().size(), 0);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::cout << row[i];
      if (i + 1 < row.size()) std::cout << std::string(width[i] - row[i].size() + 2, ' ');
    }
    std::cout << "\n";
  }
}

std::string cell(const Json& j) { return j.is_string() ? j.get<std::string>() : j.dump(); }

// -- listing ------------------------------------------------------------------

struct Listing {
  std::vector<std::string> columns;  // table columns, addressed by JSON field
  std::vector<Json> records;
};

Listing list_records(const WorldState& state, const std::string& kind) {
  Listing out;
  const auto add_all = [&](const auto& map) {
    for (const auto& [key, record] : map) out.records.push_back(Json(record));
  };
  if (kind == "objective") {
    out.columns = {"key", "name", "owner", "metric"};
    add_all(state.objectives);
  } else if (kind == "dataset") {
    out.columns = {"key", "name", "owner", "data_type"};
    add_all(state.datasets);
  } else if (kind == "algo") {
    out.columns = {"key", "name", "owner", "kind"};
    add_all(state.algorithms);
  } else if (kind == "sample") {
    out.columns = {"key", "test_only"};
    add_all(state.samples);
  } else if (kind == "model") {
    out.columns = {"key", "holder", "producing_tuple"};
    add_all(state.models);
  } else if (kind == "traintuple") {
    out.columns = {"key", "status", "worker", "rank"};
    add_all(state.traintuples);
  } else if (kind == "testtuple") {
    out.columns = {"key", "status", "worker", "certified"};
    add_all(state.testtuples);
  } else {
    throw SchemaError("unknown asset kind '" + kind +
                      "' (objective|dataset|algo|sample|model|traintuple|testtuple)");
  }
  return out;
}

void apply_filters(Listing& listing, const std::vector<std::string>& filters) {
  for (const auto& f : filters) {
    const auto eq = f.find('=');
    if (eq == std::string::npos) throw SchemaError("--filter expects key=value, got '" + f + "'");
    const std::string field = f.substr(0, eq);
    const std::string value = f.substr(eq + 1);
    std::erase_if(listing.records, [&](const Json& r) {
      return !r.contains(field) || cell(r.at(field)) != value;
    });
  }
}

// -- scenario summary ---------------------------------------------------------

Json run_summary(const Simulation& sim) {
  std::size_t txs = 0;
  for (const Block& b : sim.chain().blocks()) txs += b.txs.size();
  std::size_t done = 0, failed = 0, pending = 0;
  const auto tally = [&](TupleStatus s) {
    if (s == TupleStatus::done) {
      ++done;
    } else if (s == TupleStatus::failed) {
      ++failed;
    } else {
      ++pending;
    }
  };
  for (const auto& [key, t] : sim.state().traintuples) tally(t.status);
  for (const auto& [key, t] : sim.state().testtuples) tally(t.status);
  return Json{{"name", sim.scenario().name},
              {"ticks", sim.now()},
              {"blocks", sim.chain().height()},
              {"transactions", txs},
              {"tuples_done", done},
              {"tuples_failed", failed},
              {"tuples_pending", pending},
              {"rejections", sim.rejections().size()},
              {"trace_messages", sim.trace().messages().size()},
              {"marker_leaks", sim.audit_leaks().size()}};
}

void emit_summary(const Json& summary, const std::string& format) {
  if (format == "json") {
    emit_json(summary);
    return;
  }
  std::vector<std::vector<std::string>> rows;
  for (const auto& [field, value] : summary.items()) rows.push_back({field, cell(value)});
  print_table(rows);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"federated learning workbench: assets, permissions, tuples, plans and scenarios"};
  app.require_subcommand(1);

  std::string state_dir = "fedledger-state";
  std::string node_flag;
  std::string format = "table";
  app.add_option("--state-dir", state_dir, "workspace directory")
      ->envname("FEDLEDGER_STATE_DIR");
  app.add_option("--node", node_flag, "act as this federation member (default: the orderer)");
  app.add_option("--format", format, "output format")
      ->check(CLI::IsMember({"table", "json"}));

  // Shared option storage; each leaf reads what it declared.
  std::string name, metric = "mse", label, data_type = "tabular", description;
  std::string dataset_hex, objective_hex, algorithm_hex, traintuple_hex, model_hex;
  std::string asset_hex, spec_file, plan_file, tag, list_kind, scenario_file;
  std::vector<std::string> features, process, download, whitelist, sample_refs, input_refs;
  std::vector<std::string> data_files, filters;
  std::vector<double> input_values;
  bool test_only = false;
  bool requested_perms = false;
  std::uint64_t advance_ticks = 0;

  const auto add_regime_flags = [&](CLI::App* cmd) {
    cmd->add_option("--process", process, "nodes granted the process right ('*' for everyone)")
        ->delimiter(',');
    cmd->add_option("--download", download, "nodes granted the download right")->delimiter(',');
    cmd->add_option("--whitelist", whitelist, "objective keys this asset is pinned to")
        ->delimiter(',');
  };

  auto* asset = app.add_subcommand("asset", "register and inspect ledger assets");
  auto* asset_add = asset->add_subcommand("add", "register a new asset");
  asset_add->require_subcommand(1);

  auto* add_objective = asset_add->add_subcommand("objective", "register an objective");
  add_objective->add_option("--name", name)->required();
  add_objective->add_option("--metric", metric)->check(CLI::IsMember({"mse", "accuracy"}));
  add_objective->add_option("--test-dataset", dataset_hex,
                            "dataset whose test-flagged samples certify evaluations");
  add_objective->add_option("--description", description);
  add_regime_flags(add_objective);
  add_objective->callback([&] {
    Simulation sim = open_workspace(state_dir, node_flag);
    const NodeId actor = pick_actor(sim, node_flag);
    RegisterObjective payload;
    payload.name = name;
    payload.metric.kind = ml::metric_kind_from_string(metric);
    if (!description.empty()) payload.description_hash = sha256(description);
    if (!dataset_hex.empty()) {
      const ContentHash dataset = parse_key(dataset_hex);
      for (const auto& [key, sample] : sim.state().samples) {
        if (sample.test_only && sample.dataset_keys.contains(dataset)) {
          payload.test_samples.emplace_back(key, dataset);
        }
      }
    }
    payload.permissions = regime_from_flags(sim, actor, process, download, whitelist);
    emit_key(commit_one(sim, actor, std::move(payload)), format);
  });

  auto* add_dataset = asset_add->add_subcommand("dataset", "register a dataset");
  add_dataset->add_option("--name", name)->required();
  add_dataset->add_option("--features", features, "feature column names")
      ->delimiter(',')
      ->required();
  add_dataset->add_option("--label", label, "label column name")->required();
  add_dataset->add_option("--data-type", data_type);
  add_dataset->add_option("--objective", objective_hex, "objective this dataset serves");
  add_dataset->add_option("--description", description);
  add_regime_flags(add_dataset);
  add_dataset->callback([&] {
    Simulation sim = open_workspace(state_dir, node_flag);
    const NodeId actor = pick_actor(sim, node_flag);
    RegisterDataset payload;
    payload.name = name;
    payload.opener.feature_columns = features;
    payload.opener.label_column = label;
    payload.data_type = data_type;
    if (!description.empty()) payload.description_hash = sha256(description);
    if (!objective_hex.empty()) payload.objective_key = parse_key(objective_hex);
    payload.permissions = regime_from_flags(sim, actor, process, download, whitelist);
    emit_key(commit_one(sim, actor, std::move(payload)), format);
  });

  auto* add_algo = asset_add->add_subcommand("algo", "register an algorithm");
  add_algo->add_option("--name", name)->required();
  add_algo->add_option("--spec", spec_file, "JSON algorithm spec file")->required();
  add_algo->add_option("--objective", objective_hex, "objective this algorithm targets");
  add_algo->add_option("--description", description);
  add_regime_flags(add_algo);
  add_algo->callback([&] {
    Simulation sim = open_workspace(state_dir, node_flag);
    const NodeId actor = pick_actor(sim, node_flag);
    const auto spec = Json::parse(read_file(spec_file)).get<ml::AlgorithmSpec>();
    RegisterAlgorithm payload;
    payload.name = name;
    payload.kind = spec.kind;
    payload.spec_hash = sim.node(actor).store_algorithm_blob(spec);
    if (!description.empty()) payload.description_hash = sha256(description);
    if (!objective_hex.empty()) payload.objective_key = parse_key(objective_hex);
    payload.permissions = regime_from_flags(sim, actor, process, download, whitelist);
    emit_key(commit_one(sim, actor, std::move(payload)), format);
  });

  auto* asset_list = asset->add_subcommand("list", "list ledger assets of one kind");
  asset_list->add_option("kind", list_kind,
                         "objective|dataset|algo|sample|model|traintuple|testtuple")
      ->required();
  asset_list->add_option("--filter", filters, "keep records whose field equals value (key=value)");
  asset_list->callback([&] {
    Simulation sim = open_workspace(state_dir, node_flag);
    Listing listing = list_records(sim.state(), list_kind);
    apply_filters(listing, filters);
    if (format == "json") {
      emit_json(Json(listing.records));
      return;
    }
    std::vector<std::vector<std::string>> rows;
    if (!listing.records.empty()) {
      std::vector<std::string> header;
      for (const auto& c : listing.columns) {
        std::string upper = c;
        std::transform(upper.begin(), upper.end(), upper.begin(),
                       [](unsigned char ch) { return std::toupper(ch); });
        header.push_back(upper);
      }
      rows.push_back(header);
      for (const Json& r : listing.records) {
        std::vector<std::string> row;
        for (const auto& c : listing.columns) row.push_back(cell(r.at(c)));
        rows.push_back(row);
      }
    }
    print_table(rows);
  });

  auto* data = app.add_subcommand("data", "manage private data samples");
  auto* data_add = data->add_subcommand("add", "vault sample files locally, ledger their hashes");
  data_add->add_option("--dataset", dataset_hex, "dataset key the samples belong to")->required();
  data_add->add_option("--file", data_files, "CSV sample files")->required();
  data_add->add_flag("--test-only", test_only, "reserve these samples for evaluation");
  data_add->callback([&] {
    Simulation sim = open_workspace(state_dir, node_flag);
    const NodeId actor = pick_actor(sim, node_flag);
    Node& node = sim.node(actor);
    std::vector<Bytes> blobs;
    for (const auto& f : data_files) blobs.push_back(read_file(f));
    const auto keys = node.register_local_data(parse_key(dataset_hex), blobs,
                                               std::vector<bool>(blobs.size(), test_only));
    if (node.outbox_empty()) {
      std::cerr << "warning: all samples were already registered\n";
      sim.save();
    } else {
      commit_outbox(sim, node);
    }
    if (format == "json") {
      emit_json(Json{{"keys", keys}});
    } else {
      for (const auto& key : keys) std::cout << key.hex() << "\n";
    }
  });

  auto* perm = app.add_subcommand("perm", "change asset permissions");
  auto* perm_set = perm->add_subcommand("set", "replace an asset's permission regime");
  perm_set->add_option("--asset", asset_hex, "asset key")->required();
  add_regime_flags(perm_set);
  perm_set->callback([&] {
    Simulation sim = open_workspace(state_dir, node_flag);
    const NodeId actor = pick_actor(sim, node_flag);
    UpdatePermissions payload;
    payload.asset_key = parse_key(asset_hex);
    payload.permissions = regime_from_flags(sim, actor, process, download, whitelist);
    emit_key(commit_one(sim, actor, std::move(payload)), format);
  });

  auto* tuple = app.add_subcommand("tuple", "submit work orders");
  auto* tuple_train = tuple->add_subcommand("train", "create a traintuple");
  tuple_train->add_option("--objective", objective_hex)->required();
  tuple_train->add_option("--algorithm", algorithm_hex)->required();
  tuple_train->add_option("--dataset", dataset_hex);
  tuple_train->add_option("--samples", sample_refs, "sample keys, or train|test|all")
      ->delimiter(',');
  tuple_train->add_option("--input", input_refs, "input traintuple keys")->delimiter(',');
  tuple_train->add_option("--tag", tag);
  tuple_train->add_flag("--request-perms", requested_perms,
                        "request the regime given by --process/--download for the output");
  add_regime_flags(tuple_train);
  tuple_train->callback([&] {
    Simulation sim = open_workspace(state_dir, node_flag);
    const NodeId actor = pick_actor(sim, node_flag);
    CreateTraintuple payload;
    payload.objective_key = parse_key(objective_hex);
    payload.algorithm_key = parse_key(algorithm_hex);
    if (!dataset_hex.empty()) payload.dataset_key = parse_key(dataset_hex);
    payload.train_sample_keys = resolve_samples(sim, dataset_hex, sample_refs);
    for (const auto& r : input_refs) payload.input_model_keys.push_back(parse_key(r));
    if (requested_perms) {
      payload.requested_permissions = regime_from_flags(sim, actor, process, download, whitelist);
    }
    if (!tag.empty()) payload.tag = tag;
    emit_key(commit_one(sim, actor, std::move(payload)), format);
  });

  auto* tuple_test = tuple->add_subcommand("test", "create a testtuple");
  tuple_test->add_option("--traintuple", traintuple_hex)->required();
  tuple_test->add_option("--objective", objective_hex)->required();
  tuple_test->add_option("--dataset", dataset_hex, "custom evaluation dataset");
  tuple_test->add_option("--samples", sample_refs, "custom evaluation samples")->delimiter(',');
  tuple_test->add_option("--tag", tag);
  tuple_test->callback([&] {
    Simulation sim = open_workspace(state_dir, node_flag);
    const NodeId actor = pick_actor(sim, node_flag);
    CreateTesttuple payload;
    payload.traintuple_key = parse_key(traintuple_hex);
    payload.objective_key = parse_key(objective_hex);
    if (!dataset_hex.empty()) payload.dataset_key = parse_key(dataset_hex);
    payload.test_sample_keys = resolve_samples(sim, dataset_hex, sample_refs);
    if (!tag.empty()) payload.tag = tag;
    emit_key(commit_one(sim, actor, std::move(payload)), format);
  });

  auto* plan = app.add_subcommand("plan", "submit compute plans");
  auto* plan_submit = plan->add_subcommand("submit", "submit a plan file as one atomic block");
  plan_submit->add_option("--file", plan_file, "plan JSON file")->required();
  plan_submit->callback([&] {
    Simulation sim = open_workspace(state_dir, node_flag);
    const NodeId actor = pick_actor(sim, node_flag);
    const ComputePlan parsed = ComputePlan::parse(Json::parse(read_file(plan_file)));
    std::map<std::string, ContentHash> keys;
    Node& node = sim.node(actor);
    node.enqueue_transactions(parsed.resolve(actor, {}, &keys));
    commit_outbox(sim, node);
    if (format == "json") {
      emit_json(Json(keys));
    } else {
      std::vector<std::vector<std::string>> rows{{"STEP", "KEY"}};
      for (const auto& [id, key] : keys) rows.push_back({id, key.hex()});
      print_table(rows);
    }
  });

  auto* board = app.add_subcommand("leaderboard", "certified evaluations of an objective");
  board->add_option("objective", objective_hex, "objective key")->required();
  board->callback([&] {
    Simulation sim = open_workspace(state_dir, node_flag);
    const auto rows = leaderboard(sim.state(), parse_key(objective_hex));
    if (format == "json") {
      Json out = Json::array();
      for (const auto& [tuple_key, perf] : rows) {
        out.push_back(Json{{"traintuple", tuple_key}, {"performance", perf}});
      }
      emit_json(out);
      return;
    }
    std::vector<std::vector<std::string>> table;
    if (!rows.empty()) {
      table.push_back({"RANK", "TRAINTUPLE", "PERFORMANCE"});
      for (std::size_t i = 0; i < rows.size(); ++i) {
        table.push_back({std::to_string(i + 1), rows[i].first.hex(), Json(rows[i].second).dump()});
      }
    }
    print_table(table);
  });

  auto* predict = app.add_subcommand("predict", "serve a prediction from a locally held model");
  predict->add_option("--model", model_hex, "model key")->required();
  predict->add_option("--input", input_values, "feature values")->delimiter(',')->required();
  predict->callback([&] {
    Simulation sim = open_workspace(state_dir, node_flag);
    const NodeId actor = pick_actor(sim, node_flag);
    const double value = sim.node(actor).serve_prediction(parse_key(model_hex), input_values);
    if (format == "json") {
      emit_json(Json{{"prediction", value}});
    } else {
      std::cout << Json(value).dump() << "\n";
    }
  });

  auto* sim_cmd = app.add_subcommand("sim", "run scripted scenarios");
  auto* sim_run = sim_cmd->add_subcommand("run", "run a scenario file in a fresh workspace");
  sim_run->add_option("scenario", scenario_file, "scenario JSON file")->required();
  sim_run->callback([&] {
    if (std::filesystem::exists(std::filesystem::path(state_dir) / "network.json")) {
      throw ScenarioError("workspace " + state_dir + " already exists; pick an empty --state-dir");
    }
    Simulation sim(Scenario::load(scenario_file), state_dir);
    sim.run();
    sim.save();
    emit_summary(run_summary(sim), format);
  });

  auto* sim_advance = sim_cmd->add_subcommand("advance", "tick an existing workspace forward");
  sim_advance->add_option("--ticks", advance_ticks, "tick budget (default: run to quiescence)");
  sim_advance->callback([&] {
    Simulation sim = open_workspace(state_dir, node_flag);
    sim.run(advance_ticks == 0 ? std::optional<std::uint64_t>()
                               : std::optional<std::uint64_t>(sim.now() + advance_ticks));
    sim.save();
    emit_summary(run_summary(sim), format);
  });

  // Let --state-dir / --node / --format appear after any subcommand.
  std::function<void(CLI::App*)> enable_fallthrough = [&](CLI::App* cmd) {
    cmd->fallthrough();
    for (auto* sub : cmd->get_subcommands([](const CLI::App*) { return true; })) {
      enable_fallthrough(sub);
    }
  };
  enable_fallthrough(&app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const Rejection& rejection) {
    std::cerr << to_string(rejection.code) << ": " << rejection.detail << "\n";
    return 1;
  } catch (const PermissionDeniedError& e) {
    std::cerr << "PermissionDenied: " << e.what() << "\n";
    return 1;
  } catch (const Json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
