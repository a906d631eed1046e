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

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "fedledger/hash.hpp"
#include "fedledger/ml/types.hpp"

namespace fedledger::ml {

using Matrix = std::vector<std::vector<double>>;
using Vector = std::vector<double>;

/// Feature matrix plus label vector produced by opening sample blobs.
struct SampleBatch {
  std::size_t columns = 0;
  Matrix features;
  Vector labels;

  std::size_t rows() const { return labels.size(); }
};

/// Parses CSV blobs into one concatenated batch, in blob order. Each blob
/// carries its own header line; '#' lines and blank lines are skipped.
/// Missing columns raise SchemaError; bad cells raise CsvParseError with
/// 1-based coordinates inside the offending blob.
SampleBatch open_samples(const OpenerDescriptor& opener, const std::vector<Bytes>& blobs);

/// Fresh weight vector of the given length: all zeros, or a seeded uniform
/// draw in [-0.5, 0.5) from std::mt19937_64 mapped with exact arithmetic, so
/// the result is bit-identical on every platform.
ModelWeights init_weights(const WeightInit& init, std::size_t length);

/// Training objective for a flat model over X, y. Last weight is the bias.
/// Linear regression: mean squared error. Logistic: mean log-loss on a
/// clamped sigmoid output.
double loss(Family family, const ModelWeights& w, const Matrix& X, const Vector& y);

/// Exact gradient of loss() with respect to every weight, bias last.
Vector gradient(Family family, const ModelWeights& w, const Matrix& X, const Vector& y);

/// Full-batch gradient descent for local_steps iterations, starting from
/// init_model when present or from spec.init otherwise. Deterministic.
/// Throws NonFiniteError if the weights diverge.
ModelWeights train(const TrainerSpec& spec, const std::optional<ModelWeights>& init_model,
                   const Matrix& X, const Vector& y);

/// Elementwise (weighted) mean of the given models. sample_counts must be
/// present exactly when spec asks for by_sample_count weighting. Layouts must
/// agree and are preserved.
ModelWeights aggregate(const AggregatorSpec& spec, const std::vector<ModelWeights>& models,
                       const std::optional<std::vector<std::size_t>>& sample_counts);

/// Separately stored halves of a composite model: an affine trunk mapping
/// features to hidden_dim values (row-major, each row ending in its bias) and
/// a scalar head over the hidden vector.
struct CompositePair {
  ModelWeights trunk;
  ModelWeights head;
};

/// Joint objective of head(trunk(x)): same family-specific loss as loss(),
/// applied to the composed output.
double composite_loss(const CompositeSpec& spec, const ModelWeights& trunk,
                      const ModelWeights& head, const Matrix& X, const Vector& y);

/// Gradient of composite_loss over the concatenated trunk|head parameters.
Vector composite_gradient(const CompositeSpec& spec, const ModelWeights& trunk,
                          const ModelWeights& head, const Matrix& X, const Vector& y);

/// Joint full-batch gradient descent through both halves. Either half may be
/// absent, in which case it starts from spec.init.
CompositePair train_composite(const CompositeSpec& spec,
                              const std::optional<ModelWeights>& trunk_in,
                              const std::optional<ModelWeights>& head_in, const Matrix& X,
                              const Vector& y);

/// Model outputs: raw affine response for linear regression, sigmoid for
/// logistic regression.
Vector predict(Family family, const ModelWeights& w, const Matrix& X);
double predict_one(Family family, const ModelWeights& w, const Vector& x);

Vector predict_composite(const CompositeSpec& spec, const ModelWeights& trunk,
                         const ModelWeights& head, const Matrix& X);
double predict_composite_one(const CompositeSpec& spec, const ModelWeights& trunk,
                             const ModelWeights& head, const Vector& x);

/// Scores predictions against labels: mse is the mean squared error, accuracy
/// the fraction of correct classes with predictions thresholded at 0.5 (ties
/// predict class 0).
double evaluate(const MetricSpec& metric, const Vector& predictions, const Vector& labels);
double evaluate(const MetricSpec& metric, Family family, const ModelWeights& w, const Matrix& X,
                const Vector& y);

/// Concatenates trunk and head into one blob with a layout marker, and back.
ModelWeights compose_model(const ModelWeights& trunk, const ModelWeights& head);
CompositePair split_model(const ModelWeights& model);

/// Deterministic k-fold split: keys are sorted lexicographically, test folds
/// are contiguous blocks with sizes differing by at most one, and each pair
/// is (all other keys, fold) in sorted order.
std::vector<std::pair<std::vector<ContentHash>, std::vector<ContentHash>>> kfold_split(
    std::vector<ContentHash> sample_keys, std::size_t k);

}  // namespace fedledger::ml
