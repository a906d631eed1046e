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
#include <optional>
#include <string>
#include <vector>

#include "fedledger/canonical.hpp"
#include "fedledger/hash.hpp"

namespace fedledger::ml {

// -- model weights ------------------------------------------------------------

/// Trunk/head segmentation of a flat weight vector.
struct WeightLayout {
  std::size_t trunk_len = 0;
  std::size_t head_len = 0;

  bool operator==(const WeightLayout&) const = default;
};

/// Flat vector of 64-bit reals. The serialized form is canonical JSON with
/// shortest round-trip decimals, so the blob hash of a weight vector is stable
/// across platforms. All values must be finite.
struct ModelWeights {
  std::vector<double> values;
  std::optional<WeightLayout> layout;

  bool operator==(const ModelWeights&) const = default;

  Bytes serialize() const;
  static ModelWeights deserialize(const Bytes& bytes);

  /// Digest of the canonical serialization; this is the model key.
  ContentHash key() const { return sha256(serialize()); }
};

// -- specs --------------------------------------------------------------------

enum class Family { linear_regression, logistic_regression };

enum class AlgorithmKind { trainer, aggregator, composite };

enum class InitKind { zeros, seeded };

/// Deterministic weight initialization: all-zero or a seeded uniform draw in
/// [-0.5, 0.5) generated without distribution objects, so results are
/// bit-identical everywhere.
struct WeightInit {
  InitKind kind = InitKind::zeros;
  std::uint64_t seed = 0;

  bool operator==(const WeightInit&) const = default;
};

struct TrainerSpec {
  Family family = Family::linear_regression;
  double learning_rate = 0.0;
  std::uint32_t local_steps = 0;
  WeightInit init;

  bool operator==(const TrainerSpec&) const = default;
};

enum class Weighting { uniform, by_sample_count };

struct AggregatorSpec {
  Weighting weighting = Weighting::uniform;

  bool operator==(const AggregatorSpec&) const = default;
};

/// Two-part model: an affine trunk mapping the feature space to hidden_dim
/// outputs, composed with a scalar head of the given family. Both parts train
/// jointly but are stored and permissioned separately.
struct CompositeSpec {
  std::size_t hidden_dim = 1;
  Family head_family = Family::linear_regression;
  double learning_rate = 0.0;
  std::uint32_t local_steps = 0;
  WeightInit init;

  bool operator==(const CompositeSpec&) const = default;
};

enum class MetricKind {
  mse,       // loss-type: lower is better
  accuracy,  // score-type: higher is better
};

struct MetricSpec {
  MetricKind kind = MetricKind::mse;

  bool operator==(const MetricSpec&) const = default;

  /// True when larger performance values rank higher on a leaderboard.
  bool higher_is_better() const { return kind == MetricKind::accuracy; }
};

/// Describes how raw CSV sample blobs open into a feature matrix and label
/// vector. Lines starting with '#' are comments and are skipped.
struct OpenerDescriptor {
  std::string format = "csv";
  std::vector<std::string> feature_columns;
  std::string label_column;
  char delimiter = ',';

  bool operator==(const OpenerDescriptor&) const = default;

  /// feature_columns non-empty, label not among them, format recognized.
  bool well_formed() const;
};

// -- enum <-> string ----------------------------------------------------------

std::string to_string(Family f);
Family family_from_string(const std::string& s);
std::string to_string(AlgorithmKind k);
AlgorithmKind algorithm_kind_from_string(const std::string& s);
std::string to_string(MetricKind k);
MetricKind metric_kind_from_string(const std::string& s);
std::string to_string(Weighting w);
Weighting weighting_from_string(const std::string& s);

// -- JSON ---------------------------------------------------------------------

void to_json(Json& j, const ModelWeights& w);
void from_json(const Json& j, ModelWeights& w);
void to_json(Json& j, const WeightInit& v);
void from_json(const Json& j, WeightInit& v);
void to_json(Json& j, const TrainerSpec& v);
void from_json(const Json& j, TrainerSpec& v);
void to_json(Json& j, const AggregatorSpec& v);
void from_json(const Json& j, AggregatorSpec& v);
void to_json(Json& j, const CompositeSpec& v);
void from_json(const Json& j, CompositeSpec& v);
void to_json(Json& j, const MetricSpec& v);
void from_json(const Json& j, MetricSpec& v);
void to_json(Json& j, const OpenerDescriptor& v);
void from_json(const Json& j, OpenerDescriptor& v);

/// Algorithm payload stored as a content-addressed blob and shipped over the
/// asset network; the ledger record carries only its hash.
struct AlgorithmSpec {
  AlgorithmKind kind = AlgorithmKind::trainer;
  std::optional<TrainerSpec> trainer;
  std::optional<AggregatorSpec> aggregator;
  std::optional<CompositeSpec> composite;

  bool operator==(const AlgorithmSpec&) const = default;

  static AlgorithmSpec make(TrainerSpec s);
  static AlgorithmSpec make(AggregatorSpec s);
  static AlgorithmSpec make(CompositeSpec s);

  Bytes serialize() const;
  static AlgorithmSpec deserialize(const Bytes& bytes);
  ContentHash blob_hash() const { return sha256(serialize()); }
};

void to_json(Json& j, const AlgorithmSpec& v);
void from_json(const Json& j, AlgorithmSpec& v);

}  // namespace fedledger::ml
