// Copyright 2026 The Trayscan Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "trayscan/core/model.hpp"
#include "trayscan/core/taxonomy.hpp"
#include "trayscan/protonet/embedding.hpp"

namespace trayscan::protonet {

struct Episode {
  std::vector<Sample> support;
  std::vector<Sample> query;
  int ways = 0;
  int shots = 0;
};

using PrototypeSet = std::map<int, Embedding>;
using Distribution = std::map<int, double>;

inline std::map<int, std::vector<std::size_t>> group_by_category(const Dataset& data) {
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < data.size(); ++i) groups[data[i].category].push_back(i);
  return groups;
}

/// C categories uniformly without replacement among those with at least K+1
/// samples; K support samples each; n queries drawn from the remaining
/// samples of the chosen categories.
inline Episode sample_episode(const Dataset& data, int ways, int shots, int queries, std::mt19937_64& rng) {
  if (ways < 1 || shots < 1 || queries < 1) throw ValidationError("episode: ways, shots and queries must be >= 1");
  std::vector<std::pair<int, std::vector<std::size_t>>> eligible;
  for (auto& [category, members] : group_by_category(data)) {
    if (static_cast<int>(members.size()) >= shots + 1) eligible.emplace_back(category, std::move(members));
  }
  if (static_cast<int>(eligible.size()) < ways) {
    throw ValidationError("episode: " + std::to_string(ways) + "-way " + std::to_string(shots) + "-shot needs " +
                          std::to_string(ways) + " categories with >= " + std::to_string(shots + 1) +
                          " samples, found " + std::to_string(eligible.size()));
  }
  std::shuffle(eligible.begin(), eligible.end(), rng);
  eligible.resize(ways);
  std::sort(eligible.begin(), eligible.end());

  Episode ep;
  ep.ways = ways;
  ep.shots = shots;
  std::vector<std::size_t> rest;
  for (auto& [category, members] : eligible) {
    std::shuffle(members.begin(), members.end(), rng);
    for (int k = 0; k < shots; ++k) ep.support.push_back(data[members[k]]);
    rest.insert(rest.end(), members.begin() + shots, members.end());
  }
  if (static_cast<int>(rest.size()) < queries) {
    throw ValidationError("episode: only " + std::to_string(rest.size()) + " samples left for " +
                          std::to_string(queries) + " queries");
  }
  std::shuffle(rest.begin(), rest.end(), rng);
  for (int j = 0; j < queries; ++j) ep.query.push_back(data[rest[j]]);
  return ep;
}

inline Episode sample_episode(const Dataset& data, int ways, int shots, int queries, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_episode(data, ways, shots, queries, rng);
}

inline double squared_distance(const Embedding& a, const Embedding& b) {
  if (a.size() != b.size()) {
    throw ValidationError("squared_distance: lengths " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  return (a - b).squaredNorm();
}

/// Mean embedding per category.
template <EmbeddingProvider P>
PrototypeSet compute_prototypes(const std::vector<Sample>& samples, const P& provider) {
  PrototypeSet protos;
  std::map<int, int> counts;
  for (const auto& s : samples) {
    Embedding e = provider.embed(s);
    auto it = protos.find(s.category);
    if (it == protos.end()) {
      protos.emplace(s.category, std::move(e));
    } else {
      if (it->second.size() != e.size()) throw ValidationError("compute_prototypes: embedding lengths differ");
      it->second += e;
    }
    ++counts[s.category];
  }
  for (auto& [category, c] : protos) c /= static_cast<double>(counts[category]);
  return protos;
}

/// Softmax over negative squared distances, shifted by the minimum distance.
inline Distribution class_probabilities(const Embedding& query, const PrototypeSet& protos) {
  if (protos.empty()) throw ValidationError("class_probabilities: no prototypes");
  Distribution p;
  double nearest = std::numeric_limits<double>::infinity();
  for (const auto& [category, c] : protos) {
    const double d = squared_distance(query, c);
    p[category] = d;
    nearest = std::min(nearest, d);
  }
  double z = 0.0;
  for (auto& [category, v] : p) {
    v = std::exp(-(v - nearest));
    z += v;
  }
  for (auto& [category, v] : p) v /= z;
  return p;
}

/// -log p(true | query) for one query, via log-sum-exp.
inline double query_loss(const Embedding& query, int truth, const PrototypeSet& protos) {
  auto it = protos.find(truth);
  if (it == protos.end()) throw ValidationError("query category " + std::to_string(truth) + " has no prototype");
  double nearest = std::numeric_limits<double>::infinity();
  std::vector<double> d;
  d.reserve(protos.size());
  for (const auto& [category, c] : protos) {
    d.push_back(squared_distance(query, c));
    nearest = std::min(nearest, d.back());
  }
  double z = 0.0;
  for (double v : d) z += std::exp(-(v - nearest));
  return squared_distance(query, it->second) - nearest + std::log(z);
}

template <EmbeddingProvider P>
double episode_loss(const Episode& ep, const P& provider) {
  const PrototypeSet protos = compute_prototypes(ep.support, provider);
  double loss = 0.0;
  for (const auto& q : ep.query) loss += query_loss(provider.embed(q), q.category, protos);
  return loss;
}

struct AffineGradient {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};

/// Exact gradient of the episode loss with respect to (W, b). With
/// a_k = [k = y] - p_k, dJ/de_q = 2 sum_k a_k (e_q - c_k) and
/// dJ/dc_k = -2 a_k (e_q - c_k); each support sample receives 1/K of its
/// prototype's gradient.
inline AffineGradient loss_gradient(const Episode& ep, const AffineEmbedding& f) {
  AffineGradient g{Eigen::MatrixXd::Zero(f.weight.rows(), f.weight.cols()), Eigen::VectorXd::Zero(f.bias.size())};
  const PrototypeSet protos = compute_prototypes(ep.support, f);
  std::map<int, Embedding> proto_grad;
  std::map<int, int> counts;
  for (const auto& s : ep.support) ++counts[s.category];
  for (const auto& [category, c] : protos) proto_grad[category] = Embedding::Zero(c.size());

  auto accumulate = [&](const Embedding& de, const Eigen::VectorXd& x) {
    g.weight.noalias() += de * x.transpose();
    g.bias += de;
  };

  for (const auto& q : ep.query) {
    const Embedding e = f.embed(q);
    const Distribution p = class_probabilities(e, protos);
    Embedding de = Embedding::Zero(e.size());
    for (const auto& [category, c] : protos) {
      const double a = (category == q.category ? 1.0 : 0.0) - p.at(category);
      const Embedding diff = e - c;
      de += 2.0 * a * diff;
      proto_grad[category] -= 2.0 * a * diff;
    }
    accumulate(de, q.features);
  }
  for (const auto& s : ep.support) {
    accumulate(proto_grad[s.category] / static_cast<double>(counts[s.category]), s.features);
  }
  return g;
}

struct TrainOptions {
  int iterations = 500;
  double learning_rate = 1e-2;
  int ways = 10;
  int shots = 1;
  int queries = 1;
  std::uint64_t seed = 1;
};

struct TrainResult {
  AffineEmbedding embedding;
  std::vector<double> loss;
};

/// Plain SGD over freshly sampled episodes. Each entry of the loss trace is
/// the episode loss before that iteration's update.
inline TrainResult train(const Dataset& data, AffineEmbedding init, const TrainOptions& opts) {
  if (opts.iterations < 0) throw ValidationError("train: iterations must be >= 0");
  if (!(opts.learning_rate >= 0.0)) throw ValidationError("train: learning rate must be >= 0");
  std::mt19937_64 rng(opts.seed);
  TrainResult r{std::move(init), {}};
  r.loss.reserve(opts.iterations);
  for (int it = 0; it < opts.iterations; ++it) {
    const Episode ep = sample_episode(data, opts.ways, opts.shots, opts.queries, rng);
    const double loss = episode_loss(ep, r.embedding);
    if (!std::isfinite(loss)) {
      throw NumericError("train: loss became non-finite at iteration " + std::to_string(it) +
                         "; lower the learning rate (now " + std::to_string(opts.learning_rate) + ")");
    }
    r.loss.push_back(loss);
    if (opts.learning_rate == 0.0) continue;
    const AffineGradient g = loss_gradient(ep, r.embedding);
    r.embedding.weight -= opts.learning_rate * g.weight;
    r.embedding.bias -= opts.learning_rate * g.bias;
    if (!r.embedding.weight.allFinite() || !r.embedding.bias.allFinite()) {
      throw NumericError("train: parameters became non-finite at iteration " + std::to_string(it));
    }
  }
  return r;
}

/// Nearest prototype among the candidates; ties go to the smallest id.
/// Candidates without a prototype are skipped.
inline int predict_among(const Embedding& query, const PrototypeSet& protos, const std::vector<int>& candidates) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  bool found = false;
  std::vector<int> sorted = candidates;
  std::sort(sorted.begin(), sorted.end());
  for (int c : sorted) {
    auto it = protos.find(c);
    if (it == protos.end()) continue;
    const double d = squared_distance(query, it->second);
    if (!found || d < best_d) {
      best = c;
      best_d = d;
      found = true;
    }
  }
  if (!found) throw ValidationError("predict: no candidate category has a prototype");
  return best;
}

/// Candidates are the categories under `hyper`, intersected with the menu
/// when one is given.
inline std::vector<int> candidate_set(const Taxonomy& taxonomy, Hyper hyper, const DailyMenu* menu) {
  std::vector<int> all = taxonomy.categories_of(hyper);
  if (!menu) return all;
  std::vector<int> listed = menu->of(hyper);
  std::sort(listed.begin(), listed.end());
  std::vector<int> out;
  std::set_intersection(all.begin(), all.end(), listed.begin(), listed.end(), std::back_inserter(out));
  return out;
}

inline int predict(const Embedding& query, const PrototypeSet& protos, const Taxonomy& taxonomy, Hyper hyper,
                   const DailyMenu* menu = nullptr) {
  const auto candidates = candidate_set(taxonomy, hyper, menu);
  if (candidates.empty()) {
    throw ValidationError(std::string("predict: no candidate categories under ") + std::string(hyper_name(hyper)) +
                          (menu ? " on menu " + menu->date : std::string()));
  }
  return predict_among(query, protos, candidates);
}

}  // namespace trayscan::protonet
