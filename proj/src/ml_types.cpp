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
#include "fedledger/ml/types.hpp"

#include <cmath>

#include "fedledger/errors.hpp"

namespace fedledger::ml {

// -- model weights ------------------------------------------------------------

Bytes ModelWeights::serialize() const {
  for (double v : values) {
    if (!std::isfinite(v)) throw NonFiniteError("cannot serialize non-finite weight");
  }
  Json j;
  to_json(j, *this);
  return canonical_dump(j);
}

ModelWeights ModelWeights::deserialize(const Bytes& bytes) {
  return Json::parse(bytes).get<ModelWeights>();
}

void to_json(Json& j, const ModelWeights& w) {
  j = Json::object();
  j["values"] = w.values;
  if (w.layout) {
    j["layout"] = Json{{"head", w.layout->head_len}, {"trunk", w.layout->trunk_len}};
  }
}

void from_json(const Json& j, ModelWeights& w) {
  w.values = j.at("values").get<std::vector<double>>();
  w.layout.reset();
  if (auto it = j.find("layout"); it != j.end()) {
    WeightLayout l;
    l.trunk_len = it->at("trunk").get<std::size_t>();
    l.head_len = it->at("head").get<std::size_t>();
    if (l.trunk_len + l.head_len != w.values.size()) {
      throw DimensionMismatchError("weight layout does not cover the value vector");
    }
    w.layout = l;
  }
}

// -- enum strings -------------------------------------------------------------

std::string to_string(Family f) {
  return f == Family::linear_regression ? "linear_regression" : "logistic_regression";
}

Family family_from_string(const std::string& s) {
  if (s == "linear_regression") return Family::linear_regression;
  if (s == "logistic_regression") return Family::logistic_regression;
  throw SchemaError("unknown trainer family: " + s);
}

std::string to_string(AlgorithmKind k) {
  switch (k) {
    case AlgorithmKind::trainer: return "trainer";
    case AlgorithmKind::aggregator: return "aggregator";
    case AlgorithmKind::composite: return "composite";
  }
  throw SchemaError("bad algorithm kind");
}

AlgorithmKind algorithm_kind_from_string(const std::string& s) {
  if (s == "trainer") return AlgorithmKind::trainer;
  if (s == "aggregator") return AlgorithmKind::aggregator;
  if (s == "composite") return AlgorithmKind::composite;
  throw SchemaError("unknown algorithm kind: " + s);
}

std::string to_string(MetricKind k) { return k == MetricKind::mse ? "mse" : "accuracy"; }

MetricKind metric_kind_from_string(const std::string& s) {
  if (s == "mse") return MetricKind::mse;
  if (s == "accuracy") return MetricKind::accuracy;
  throw SchemaError("unknown metric kind: " + s);
}

std::string to_string(Weighting w) {
  return w == Weighting::uniform ? "uniform" : "by_sample_count";
}

Weighting weighting_from_string(const std::string& s) {
  if (s == "uniform") return Weighting::uniform;
  if (s == "by_sample_count") return Weighting::by_sample_count;
  throw SchemaError("unknown weighting: " + s);
}

// -- opener -------------------------------------------------------------------

bool OpenerDescriptor::well_formed() const {
  if (format != "csv") return false;
  if (feature_columns.empty()) return false;
  for (const auto& c : feature_columns) {
    if (c.empty() || c == label_column) return false;
  }
  return !label_column.empty();
}

// -- JSON ---------------------------------------------------------------------

void to_json(Json& j, const WeightInit& v) {
  j = Json::object();
  j["kind"] = v.kind == InitKind::zeros ? "zeros" : "seeded";
  if (v.kind == InitKind::seeded) j["seed"] = v.seed;
}

void from_json(const Json& j, WeightInit& v) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "zeros") {
    v = WeightInit{InitKind::zeros, 0};
  } else if (kind == "seeded") {
    v = WeightInit{InitKind::seeded, j.at("seed").get<std::uint64_t>()};
  } else {
    throw SchemaError("unknown init kind: " + kind);
  }
}

void to_json(Json& j, const TrainerSpec& v) {
  j = Json{{"family", to_string(v.family)},
           {"init", v.init},
           {"learning_rate", v.learning_rate},
           {"local_steps", v.local_steps}};
}

void from_json(const Json& j, TrainerSpec& v) {
  v.family = family_from_string(j.at("family").get<std::string>());
  v.init = j.at("init").get<WeightInit>();
  v.learning_rate = j.at("learning_rate").get<double>();
  v.local_steps = j.at("local_steps").get<std::uint32_t>();
  if (!(v.learning_rate > 0.0) && v.learning_rate != 0.0) {
    throw SchemaError("learning_rate must be non-negative and finite");
  }
}

void to_json(Json& j, const AggregatorSpec& v) { j = Json{{"weighting", to_string(v.weighting)}}; }

void from_json(const Json& j, AggregatorSpec& v) {
  v.weighting = weighting_from_string(j.at("weighting").get<std::string>());
}

void to_json(Json& j, const CompositeSpec& v) {
  j = Json{{"head_family", to_string(v.head_family)},
           {"hidden_dim", v.hidden_dim},
           {"init", v.init},
           {"learning_rate", v.learning_rate},
           {"local_steps", v.local_steps}};
}

void from_json(const Json& j, CompositeSpec& v) {
  v.head_family = family_from_string(j.at("head_family").get<std::string>());
  v.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  v.init = j.at("init").get<WeightInit>();
  v.learning_rate = j.at("learning_rate").get<double>();
  v.local_steps = j.at("local_steps").get<std::uint32_t>();
}

void to_json(Json& j, const MetricSpec& v) { j = Json{{"kind", to_string(v.kind)}}; }

void from_json(const Json& j, MetricSpec& v) {
  v.kind = metric_kind_from_string(j.at("kind").get<std::string>());
}

void to_json(Json& j, const OpenerDescriptor& v) {
  j = Json{{"delimiter", std::string(1, v.delimiter)},
           {"feature_columns", v.feature_columns},
           {"format", v.format},
           {"label_column", v.label_column}};
}

void from_json(const Json& j, OpenerDescriptor& v) {
  v.format = j.at("format").get<std::string>();
  v.feature_columns = j.at("feature_columns").get<std::vector<std::string>>();
  v.label_column = j.at("label_column").get<std::string>();
  const auto delim = j.at("delimiter").get<std::string>();
  if (delim.size() != 1) throw SchemaError("delimiter must be a single character");
  v.delimiter = delim[0];
}

// -- algorithm spec blob ------------------------------------------------------

AlgorithmSpec AlgorithmSpec::make(TrainerSpec s) {
  AlgorithmSpec out;
  out.kind = AlgorithmKind::trainer;
  out.trainer = std::move(s);
  return out;
}

AlgorithmSpec AlgorithmSpec::make(AggregatorSpec s) {
  AlgorithmSpec out;
  out.kind = AlgorithmKind::aggregator;
  out.aggregator = std::move(s);
  return out;
}

AlgorithmSpec AlgorithmSpec::make(CompositeSpec s) {
  AlgorithmSpec out;
  out.kind = AlgorithmKind::composite;
  out.composite = std::move(s);
  return out;
}

Bytes AlgorithmSpec::serialize() const {
  Json j;
  to_json(j, *this);
  return canonical_dump(j);
}

AlgorithmSpec AlgorithmSpec::deserialize(const Bytes& bytes) {
  return Json::parse(bytes).get<AlgorithmSpec>();
}

void to_json(Json& j, const AlgorithmSpec& v) {
  j = Json::object();
  j["kind"] = to_string(v.kind);
  switch (v.kind) {
    case AlgorithmKind::trainer: j["trainer"] = v.trainer.value(); break;
    case AlgorithmKind::aggregator: j["aggregator"] = v.aggregator.value(); break;
    case AlgorithmKind::composite: j["composite"] = v.composite.value(); break;
  }
}

void from_json(const Json& j, AlgorithmSpec& v) {
  v = AlgorithmSpec{};
  v.kind = algorithm_kind_from_string(j.at("kind").get<std::string>());
  switch (v.kind) {
    case AlgorithmKind::trainer: v.trainer = j.at("trainer").get<TrainerSpec>(); break;
    case AlgorithmKind::aggregator:
      v.aggregator = j.at("aggregator").get<AggregatorSpec>();
      break;
    case AlgorithmKind::composite: v.composite = j.at("composite").get<CompositeSpec>(); break;
  }
}

}  // namespace fedledger::ml
