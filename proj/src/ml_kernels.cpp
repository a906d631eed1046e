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
#include "fedledger/ml/kernels.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>
#include <sstream>
#include <unordered_map>

#include "fedledger/errors.hpp"

namespace fedledger::ml {

namespace {

std::vector<std::string> split_line(const std::string& line, char delimiter) {
  std::vector<std::string> cells;
  std::string cell;
  for (char c : line) {
    if (c == delimiter) {
      cells.push_back(std::move(cell));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  cells.push_back(std::move(cell));
  return cells;
}

bool is_skippable(const std::string& line) { return line.empty() || line[0] == '#'; }

double parse_cell(const std::string& cell, std::size_t row, std::size_t column) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = first + cell.size();
  auto [end, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || end != last) {
    throw CsvParseError(row, column, "not a number: '" + cell + "'");
  }
  if (!std::isfinite(value)) throw CsvParseError(row, column, "non-finite value");
  return value;
}

void check_batch(const Matrix& X, const Vector& y) {
  if (X.size() != y.size()) throw DimensionMismatchError("feature rows != label count");
  if (X.empty()) throw EmptyInputError("no training samples");
  const std::size_t d = X.front().size();
  for (const auto& row : X) {
    if (row.size() != d) throw DimensionMismatchError("ragged feature matrix");
  }
  if (d == 0) throw DimensionMismatchError("samples have no features");
}

double dot_affine(const Vector& w, const Vector& x) {
  double z = w.back();
  for (std::size_t j = 0; j < x.size(); ++j) z += w[j] * x[j];
  return z;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

constexpr double kProbClamp = 1e-12;

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

void check_finite(const Vector& values) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NonFiniteError("training diverged to a non-finite weight");
  }
}

/// 53-bit uniform in [-0.5, 0.5); pure integer-to-double arithmetic so the
/// sequence is identical wherever mt19937_64 is.
double uniform_unit(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53 - 0.5;
}

struct TrunkShape {
  std::size_t hidden = 0;
  std::size_t features = 0;
  std::size_t trunk_len() const { return hidden * (features + 1); }
  std::size_t head_len() const { return hidden + 1; }
};

Vector trunk_forward(const TrunkShape& shape, const Vector& trunk, const Vector& x) {
  Vector h(shape.hidden);
  for (std::size_t i = 0; i < shape.hidden; ++i) {
    const std::size_t base = i * (shape.features + 1);
    double z = trunk[base + shape.features];
    for (std::size_t j = 0; j < shape.features; ++j) z += trunk[base + j] * x[j];
    h[i] = z;
  }
  return h;
}

TrunkShape composite_shape(const CompositeSpec& spec, const Matrix& X, const ModelWeights& trunk,
                           const ModelWeights& head) {
  if (spec.hidden_dim == 0) throw SchemaError("composite hidden_dim must be at least 1");
  TrunkShape shape{spec.hidden_dim, X.front().size()};
  if (trunk.values.size() != shape.trunk_len()) {
    throw DimensionMismatchError("trunk weight count does not match hidden_dim x features");
  }
  if (head.values.size() != shape.head_len()) {
    throw DimensionMismatchError("head weight count does not match hidden_dim");
  }
  return shape;
}

}  // namespace

// -- data opening -------------------------------------------------------------

SampleBatch open_samples(const OpenerDescriptor& opener, const std::vector<Bytes>& blobs) {
  if (!opener.well_formed()) throw SchemaError("malformed opener descriptor");
  SampleBatch batch;
  batch.columns = opener.feature_columns.size();
  for (const auto& blob : blobs) {
    std::istringstream in{blob};
    std::string line;
    bool have_header = false;
    std::vector<std::size_t> feature_idx;
    std::size_t label_idx = 0;
    std::size_t row = 0;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (is_skippable(line)) continue;
      const auto cells = split_line(line, opener.delimiter);
      if (!have_header) {
        std::unordered_map<std::string, std::size_t> index;
        for (std::size_t i = 0; i < cells.size(); ++i) index.emplace(cells[i], i);
        for (const auto& name : opener.feature_columns) {
          auto it = index.find(name);
          if (it == index.end()) throw SchemaError("column not found: " + name);
          feature_idx.push_back(it->second);
        }
        auto it = index.find(opener.label_column);
        if (it == index.end()) throw SchemaError("column not found: " + opener.label_column);
        label_idx = it->second;
        have_header = true;
        continue;
      }
      ++row;
      Vector features(batch.columns);
      for (std::size_t f = 0; f < feature_idx.size(); ++f) {
        const std::size_t c = feature_idx[f];
        if (c >= cells.size()) throw CsvParseError(row, c + 1, "missing cell");
        features[f] = parse_cell(cells[c], row, c + 1);
      }
      if (label_idx >= cells.size()) throw CsvParseError(row, label_idx + 1, "missing cell");
      batch.labels.push_back(parse_cell(cells[label_idx], row, label_idx + 1));
      batch.features.push_back(std::move(features));
    }
    if (!have_header) throw SchemaError("sample blob has no header line");
  }
  return batch;
}

// -- flat trainers ------------------------------------------------------------

ModelWeights init_weights(const WeightInit& init, std::size_t length) {
  ModelWeights w;
  w.values.assign(length, 0.0);
  if (init.kind == InitKind::seeded) {
    std::mt19937_64 gen{init.seed};
    for (auto& v : w.values) v = uniform_unit(gen);
  }
  return w;
}

double loss(Family family, const ModelWeights& w, const Matrix& X, const Vector& y) {
  check_batch(X, y);
  if (w.values.size() != X.front().size() + 1) {
    throw DimensionMismatchError("weight count must be feature count + 1");
  }
  const double n = static_cast<double>(X.size());
  double total = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    const double z = dot_affine(w.values, X[i]);
    if (family == Family::linear_regression) {
      const double r = z - y[i];
      total += r * r;
    } else {
      const double p = clamp_prob(sigmoid(z));
      total += -(y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p));
    }
  }
  return total / n;
}

Vector gradient(Family family, const ModelWeights& w, const Matrix& X, const Vector& y) {
  check_batch(X, y);
  const std::size_t d = X.front().size();
  if (w.values.size() != d + 1) {
    throw DimensionMismatchError("weight count must be feature count + 1");
  }
  const double n = static_cast<double>(X.size());
  Vector g(d + 1, 0.0);
  for (std::size_t i = 0; i < X.size(); ++i) {
    const double z = dot_affine(w.values, X[i]);
    // Per-sample pull on the affine response: 2(z-y)/n for squared error,
    // (sigma(z)-y)/n for log-loss.
    const double delta = family == Family::linear_regression
                             ? 2.0 * (z - y[i]) / n
                             : (sigmoid(z) - y[i]) / n;
    for (std::size_t j = 0; j < d; ++j) g[j] += delta * X[i][j];
    g[d] += delta;
  }
  return g;
}

ModelWeights train(const TrainerSpec& spec, const std::optional<ModelWeights>& init_model,
                   const Matrix& X, const Vector& y) {
  check_batch(X, y);
  if (spec.local_steps == 0) throw SchemaError("local_steps must be at least 1");
  if (!std::isfinite(spec.learning_rate) || spec.learning_rate < 0.0) {
    throw SchemaError("learning_rate must be finite and non-negative");
  }
  const std::size_t d = X.front().size();
  ModelWeights w;
  if (init_model) {
    if (init_model->layout) {
      throw DimensionMismatchError("flat trainer cannot start from a segmented model");
    }
    if (init_model->values.size() != d + 1) {
      throw DimensionMismatchError("initial model does not match feature count");
    }
    w = *init_model;
  } else {
    w = init_weights(spec.init, d + 1);
  }
  for (std::uint32_t step = 0; step < spec.local_steps; ++step) {
    const Vector g = gradient(spec.family, w, X, y);
    for (std::size_t j = 0; j <= d; ++j) w.values[j] -= spec.learning_rate * g[j];
    check_finite(w.values);
  }
  return w;
}

// -- aggregation --------------------------------------------------------------

ModelWeights aggregate(const AggregatorSpec& spec, const std::vector<ModelWeights>& models,
                       const std::optional<std::vector<std::size_t>>& sample_counts) {
  if (models.empty()) throw EmptyInputError("nothing to aggregate");
  if ((spec.weighting == Weighting::by_sample_count) != sample_counts.has_value()) {
    throw SchemaError("sample counts must be given exactly for by_sample_count weighting");
  }
  const std::size_t len = models.front().values.size();
  for (const auto& m : models) {
    if (m.values.size() != len || m.layout != models.front().layout) {
      throw DimensionMismatchError("aggregated models must share dimensions and layout");
    }
  }
  Vector weights;
  if (sample_counts) {
    if (sample_counts->size() != models.size()) {
      throw DimensionMismatchError("one sample count per model required");
    }
    double total = 0.0;
    for (std::size_t c : *sample_counts) total += static_cast<double>(c);
    if (total == 0.0) throw SchemaError("sample counts sum to zero");
    for (std::size_t c : *sample_counts) weights.push_back(static_cast<double>(c) / total);
  } else {
    weights.assign(models.size(), 1.0 / static_cast<double>(models.size()));
  }
  ModelWeights out;
  out.layout = models.front().layout;
  out.values.assign(len, 0.0);
  for (std::size_t m = 0; m < models.size(); ++m) {
    for (std::size_t j = 0; j < len; ++j) out.values[j] += weights[m] * models[m].values[j];
  }
  return out;
}

// -- composite ----------------------------------------------------------------

double composite_loss(const CompositeSpec& spec, const ModelWeights& trunk,
                      const ModelWeights& head, const Matrix& X, const Vector& y) {
  check_batch(X, y);
  const TrunkShape shape = composite_shape(spec, X, trunk, head);
  const double n = static_cast<double>(X.size());
  double total = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    const Vector h = trunk_forward(shape, trunk.values, X[i]);
    const double z = dot_affine(head.values, h);
    if (spec.head_family == Family::linear_regression) {
      const double r = z - y[i];
      total += r * r;
    } else {
      const double p = clamp_prob(sigmoid(z));
      total += -(y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p));
    }
  }
  return total / n;
}

Vector composite_gradient(const CompositeSpec& spec, const ModelWeights& trunk,
                          const ModelWeights& head, const Matrix& X, const Vector& y) {
  check_batch(X, y);
  const TrunkShape shape = composite_shape(spec, X, trunk, head);
  const double n = static_cast<double>(X.size());
  Vector g(shape.trunk_len() + shape.head_len(), 0.0);
  for (std::size_t i = 0; i < X.size(); ++i) {
    const Vector h = trunk_forward(shape, trunk.values, X[i]);
    const double z = dot_affine(head.values, h);
    const double delta = spec.head_family == Family::linear_regression
                             ? 2.0 * (z - y[i]) / n
                             : (sigmoid(z) - y[i]) / n;
    // Head: dz/dv_i = h_i, dz/db = 1. Trunk row i: dz/dA_ij = v_i x_j,
    // dz/dc_i = v_i.
    for (std::size_t u = 0; u < shape.hidden; ++u) {
      g[shape.trunk_len() + u] += delta * h[u];
      const double vi = head.values[u];
      const std::size_t base = u * (shape.features + 1);
      for (std::size_t j = 0; j < shape.features; ++j) g[base + j] += delta * vi * X[i][j];
      g[base + shape.features] += delta * vi;
    }
    g[shape.trunk_len() + shape.hidden] += delta;
  }
  return g;
}

CompositePair train_composite(const CompositeSpec& spec,
                              const std::optional<ModelWeights>& trunk_in,
                              const std::optional<ModelWeights>& head_in, const Matrix& X,
                              const Vector& y) {
  check_batch(X, y);
  if (spec.local_steps == 0) throw SchemaError("local_steps must be at least 1");
  if (!std::isfinite(spec.learning_rate) || spec.learning_rate < 0.0) {
    throw SchemaError("learning_rate must be finite and non-negative");
  }
  if (spec.hidden_dim == 0) throw SchemaError("composite hidden_dim must be at least 1");
  const TrunkShape shape{spec.hidden_dim, X.front().size()};
  CompositePair model;
  if (trunk_in && head_in) {
    model.trunk = *trunk_in;
    model.head = *head_in;
  } else if (!trunk_in && !head_in) {
    if (spec.init.kind == InitKind::seeded) {
      // One stream for both halves: trunk values first, then head.
      std::mt19937_64 gen{spec.init.seed};
      model.trunk.values.resize(shape.trunk_len());
      model.head.values.resize(shape.head_len());
      for (auto& v : model.trunk.values) v = uniform_unit(gen);
      for (auto& v : model.head.values) v = uniform_unit(gen);
    } else {
      model.trunk = init_weights(spec.init, shape.trunk_len());
      model.head = init_weights(spec.init, shape.head_len());
    }
  } else {
    throw SchemaError("composite training needs both halves or neither");
  }
  model.trunk.layout.reset();
  model.head.layout.reset();
  composite_shape(spec, X, model.trunk, model.head);
  for (std::uint32_t step = 0; step < spec.local_steps; ++step) {
    const Vector g = composite_gradient(spec, model.trunk, model.head, X, y);
    for (std::size_t j = 0; j < shape.trunk_len(); ++j) {
      model.trunk.values[j] -= spec.learning_rate * g[j];
    }
    for (std::size_t j = 0; j < shape.head_len(); ++j) {
      model.head.values[j] -= spec.learning_rate * g[shape.trunk_len() + j];
    }
    check_finite(model.trunk.values);
    check_finite(model.head.values);
  }
  return model;
}

// -- prediction & evaluation --------------------------------------------------

double predict_one(Family family, const ModelWeights& w, const Vector& x) {
  if (w.values.size() != x.size() + 1) {
    throw DimensionMismatchError("weight count must be feature count + 1");
  }
  const double z = dot_affine(w.values, x);
  return family == Family::linear_regression ? z : sigmoid(z);
}

Vector predict(Family family, const ModelWeights& w, const Matrix& X) {
  Vector out;
  out.reserve(X.size());
  for (const auto& x : X) out.push_back(predict_one(family, w, x));
  return out;
}

double predict_composite_one(const CompositeSpec& spec, const ModelWeights& trunk,
                             const ModelWeights& head, const Vector& x) {
  if (spec.hidden_dim == 0) throw SchemaError("composite hidden_dim must be at least 1");
  const TrunkShape shape{spec.hidden_dim, x.size()};
  if (trunk.values.size() != shape.trunk_len() || head.values.size() != shape.head_len()) {
    throw DimensionMismatchError("composite model does not match feature count");
  }
  const Vector h = trunk_forward(shape, trunk.values, x);
  const double z = dot_affine(head.values, h);
  return spec.head_family == Family::linear_regression ? z : sigmoid(z);
}

Vector predict_composite(const CompositeSpec& spec, const ModelWeights& trunk,
                         const ModelWeights& head, const Matrix& X) {
  Vector out;
  out.reserve(X.size());
  for (const auto& x : X) out.push_back(predict_composite_one(spec, trunk, head, x));
  return out;
}

double evaluate(const MetricSpec& metric, const Vector& predictions, const Vector& labels) {
  if (labels.empty()) throw EmptyTestSetError("no test labels");
  if (predictions.size() != labels.size()) {
    throw DimensionMismatchError("prediction count != label count");
  }
  const double n = static_cast<double>(labels.size());
  if (metric.kind == MetricKind::mse) {
    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const double r = predictions[i] - labels[i];
      total += r * r;
    }
    return total / n;
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double cls = predictions[i] > 0.5 ? 1.0 : 0.0;
    if (cls == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / n;
}

double evaluate(const MetricSpec& metric, Family family, const ModelWeights& w, const Matrix& X,
                const Vector& y) {
  if (y.empty()) throw EmptyTestSetError("no test labels");
  return evaluate(metric, predict(family, w, X), y);
}

// -- composite blob helpers ---------------------------------------------------

ModelWeights compose_model(const ModelWeights& trunk, const ModelWeights& head) {
  ModelWeights out;
  out.values = trunk.values;
  out.values.insert(out.values.end(), head.values.begin(), head.values.end());
  out.layout = WeightLayout{trunk.values.size(), head.values.size()};
  return out;
}

CompositePair split_model(const ModelWeights& model) {
  if (!model.layout) throw SchemaError("model carries no trunk/head layout");
  CompositePair out;
  out.trunk.values.assign(model.values.begin(),
                          model.values.begin() + static_cast<std::ptrdiff_t>(model.layout->trunk_len));
  out.head.values.assign(model.values.begin() + static_cast<std::ptrdiff_t>(model.layout->trunk_len),
                         model.values.end());
  return out;
}

// -- k-fold -------------------------------------------------------------------

std::vector<std::pair<std::vector<ContentHash>, std::vector<ContentHash>>> kfold_split(
    std::vector<ContentHash> sample_keys, std::size_t k) {
  if (k < 2 || k > sample_keys.size()) {
    throw BadKError("k must satisfy 2 <= k <= number of keys");
  }
  std::sort(sample_keys.begin(), sample_keys.end());
  const std::size_t n = sample_keys.size();
  std::vector<std::pair<std::vector<ContentHash>, std::vector<ContentHash>>> folds;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t begin = i * n / k;
    const std::size_t end = (i + 1) * n / k;
    std::vector<ContentHash> test(sample_keys.begin() + static_cast<std::ptrdiff_t>(begin),
                                  sample_keys.begin() + static_cast<std::ptrdiff_t>(end));
    std::vector<ContentHash> train;
    train.insert(train.end(), sample_keys.begin(),
                 sample_keys.begin() + static_cast<std::ptrdiff_t>(begin));
    train.insert(train.end(), sample_keys.begin() + static_cast<std::ptrdiff_t>(end),
                 sample_keys.end());
    folds.emplace_back(std::move(train), std::move(test));
  }
  return folds;
}

}  // namespace fedledger::ml
