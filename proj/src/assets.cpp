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
#include "fedledger/assets.hpp"

#include <algorithm>

#include "fedledger/errors.hpp"

namespace fedledger {

namespace {

template <typename T>
std::set<T> intersect_sets(const std::set<T>& a, const std::set<T>& b) {
  std::set<T> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                        std::inserter(out, out.begin()));
  return out;
}

template <typename T>
bool is_subset(const std::set<T>& inner, const std::set<T>& outer) {
  return std::includes(outer.begin(), outer.end(), inner.begin(), inner.end());
}

}  // namespace

// -- permission regimes -------------------------------------------------------

PermissionRegime PermissionRegime::private_to(const NodeId& owner) {
  PermissionRegime r;
  r.owner = owner;
  r.process = {owner};
  r.download = {owner};
  return r;
}

PermissionRegime PermissionRegime::open_to(const NodeId& owner, std::set<NodeId> nodes) {
  PermissionRegime r;
  r.owner = owner;
  nodes.insert(owner);
  r.process = nodes;
  r.download = std::move(nodes);
  return r;
}

bool PermissionRegime::valid() const {
  return !owner.empty() && process.contains(owner) && download.contains(owner) &&
         is_subset(download, process);
}

PermissionRegime PermissionRegime::normalized() const {
  PermissionRegime r = *this;
  r.download.insert(r.owner);
  for (const auto& n : r.download) r.process.insert(n);
  return r;
}

bool PermissionRegime::narrower_or_equal(const PermissionRegime& wider) const {
  if (!is_subset(process, wider.process)) return false;
  if (!is_subset(download, wider.download)) return false;
  if (!wider.objective_whitelist) return true;  // universal allows anything
  if (!objective_whitelist) return false;       // cannot relax to universal
  return is_subset(*objective_whitelist, *wider.objective_whitelist);
}

void to_json(Json& j, const PermissionRegime& r) {
  j = Json::object();
  j["download"] = r.download;
  j["owner"] = r.owner;
  j["process"] = r.process;
  set_optional(j, "whitelist", r.objective_whitelist);
}

void from_json(const Json& j, PermissionRegime& r) {
  r = PermissionRegime{};
  r.download = j.at("download").get<std::set<NodeId>>();
  r.owner = j.at("owner").get<NodeId>();
  r.process = j.at("process").get<std::set<NodeId>>();
  r.objective_whitelist = get_optional<std::set<ContentHash>>(j, "whitelist");
}

PermissionRegime intersect_permissions(const std::vector<PermissionRegime>& regimes,
                                       const NodeId& holder) {
  if (regimes.empty()) throw EmptyInputError("no regimes to intersect");
  PermissionRegime out;
  out.owner = holder;
  out.process = regimes.front().process;
  out.download = regimes.front().download;
  out.objective_whitelist = regimes.front().objective_whitelist;
  for (std::size_t i = 1; i < regimes.size(); ++i) {
    out.process = intersect_sets(out.process, regimes[i].process);
    out.download = intersect_sets(out.download, regimes[i].download);
    if (regimes[i].objective_whitelist) {
      out.objective_whitelist =
          out.objective_whitelist
              ? intersect_sets(*out.objective_whitelist, *regimes[i].objective_whitelist)
              : regimes[i].objective_whitelist;
    }
  }
  // Someone must be able to retrieve the result: the holder gets download,
  // and process grows as needed to keep download inside it.
  out.download.insert(holder);
  for (const auto& n : out.download) out.process.insert(n);
  return out;
}

bool check_process_right(const PermissionRegime& regime, const NodeId& requester,
                         const std::optional<ContentHash>& objective) {
  if (!regime.process.contains(requester)) return false;
  if (!regime.objective_whitelist || !objective) return true;
  return regime.objective_whitelist->contains(*objective);
}

bool check_download_right(const PermissionRegime& regime, const NodeId& requester) {
  return regime.download.contains(requester);
}

// -- asset record JSON --------------------------------------------------------

void to_json(Json& j, const Objective& v) {
  j = Json::object();
  j["key"] = v.key;
  j["metric"] = v.metric;
  j["name"] = v.name;
  j["owner"] = v.owner;
  j["permissions"] = v.permissions;
  Json samples = Json::array();
  for (const auto& [sample, dataset] : v.test_samples) {
    samples.push_back(Json{{"dataset", dataset}, {"sample", sample}});
  }
  j["test_samples"] = std::move(samples);
  set_optional(j, "description_hash", v.description_hash);
}

void from_json(const Json& j, Objective& v) {
  v = Objective{};
  v.key = j.at("key").get<ContentHash>();
  v.metric = j.at("metric").get<ml::MetricSpec>();
  v.name = j.at("name").get<std::string>();
  v.owner = j.at("owner").get<NodeId>();
  v.permissions = j.at("permissions").get<PermissionRegime>();
  for (const auto& pair : j.at("test_samples")) {
    v.test_samples.emplace_back(pair.at("sample").get<ContentHash>(),
                                pair.at("dataset").get<ContentHash>());
  }
  v.description_hash = get_optional<ContentHash>(j, "description_hash");
}

void to_json(Json& j, const Dataset& v) {
  j = Json::object();
  j["data_type"] = v.data_type;
  j["key"] = v.key;
  j["name"] = v.name;
  j["opener"] = v.opener;
  j["owner"] = v.owner;
  j["permissions"] = v.permissions;
  set_optional(j, "description_hash", v.description_hash);
  set_optional(j, "objective_key", v.objective_key);
}

void from_json(const Json& j, Dataset& v) {
  v = Dataset{};
  v.data_type = j.at("data_type").get<std::string>();
  v.key = j.at("key").get<ContentHash>();
  v.name = j.at("name").get<std::string>();
  v.opener = j.at("opener").get<ml::OpenerDescriptor>();
  v.owner = j.at("owner").get<NodeId>();
  v.permissions = j.at("permissions").get<PermissionRegime>();
  v.description_hash = get_optional<ContentHash>(j, "description_hash");
  v.objective_key = get_optional<ContentHash>(j, "objective_key");
}

void to_json(Json& j, const DataSample& v) {
  j = Json{{"datasets", v.dataset_keys}, {"key", v.key}, {"test_only", v.test_only}};
}

void from_json(const Json& j, DataSample& v) {
  v = DataSample{};
  v.dataset_keys = j.at("datasets").get<std::set<ContentHash>>();
  v.key = j.at("key").get<ContentHash>();
  v.test_only = j.at("test_only").get<bool>();
}

void to_json(Json& j, const Algorithm& v) {
  j = Json::object();
  j["key"] = v.key;
  j["kind"] = ml::to_string(v.kind);
  j["name"] = v.name;
  j["owner"] = v.owner;
  j["permissions"] = v.permissions;
  j["spec_hash"] = v.spec_hash;
  set_optional(j, "description_hash", v.description_hash);
  set_optional(j, "objective_key", v.objective_key);
}

void from_json(const Json& j, Algorithm& v) {
  v = Algorithm{};
  v.key = j.at("key").get<ContentHash>();
  v.kind = ml::algorithm_kind_from_string(j.at("kind").get<std::string>());
  v.name = j.at("name").get<std::string>();
  v.owner = j.at("owner").get<NodeId>();
  v.permissions = j.at("permissions").get<PermissionRegime>();
  v.spec_hash = j.at("spec_hash").get<ContentHash>();
  v.description_hash = get_optional<ContentHash>(j, "description_hash");
  v.objective_key = get_optional<ContentHash>(j, "objective_key");
}

void to_json(Json& j, const ModelRecord& v) {
  j = Json{{"holder", v.holder},
           {"key", v.key},
           {"permissions", v.permissions},
           {"producing_tuple", v.producing_tuple}};
}

void from_json(const Json& j, ModelRecord& v) {
  v = ModelRecord{};
  v.holder = j.at("holder").get<NodeId>();
  v.key = j.at("key").get<ContentHash>();
  v.permissions = j.at("permissions").get<PermissionRegime>();
  v.producing_tuple = j.at("producing_tuple").get<ContentHash>();
}

}  // namespace fedledger
