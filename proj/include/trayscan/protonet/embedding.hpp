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

#include <concepts>
#include <cstdint>
#include <map>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "trayscan/core/error.hpp"
#include "trayscan/core/types.hpp"

namespace trayscan::protonet {

using Embedding = Eigen::VectorXd;

inline constexpr int kDefaultEmbeddingDim = 1024;
inline constexpr int kHistogramBinsPerChannel = 3;
inline constexpr int kHistogramDim = kHistogramBinsPerChannel * kHistogramBinsPerChannel * kHistogramBinsPerChannel;

/// A labelled sample. `features` is the raw input of a trainable provider and
/// may be empty for lookup-only samples.
struct Sample {
  int id = 0;
  int category = 0;
  Eigen::VectorXd features;
};

using Dataset = std::vector<Sample>;

template <class P>
concept EmbeddingProvider = requires(const P& p, const Sample& s) {
  { p.embed(s) } -> std::convertible_to<Embedding>;
};

/// Precomputed embeddings keyed by sample id.
class LookupEmbedding {
 public:
  LookupEmbedding() = default;
  explicit LookupEmbedding(std::map<int, Embedding> table) : table_(std::move(table)) {
    for (const auto& [id, e] : table_) check(id, e);
  }

  void add(int id, Embedding e) {
    check(id, e);
    table_[id] = std::move(e);
  }

  Embedding embed(const Sample& s) const {
    auto it = table_.find(s.id);
    if (it == table_.end()) throw ValidationError("no embedding for sample " + std::to_string(s.id));
    return it->second;
  }

  const std::map<int, Embedding>& table() const { return table_; }

 private:
  void check(int id, const Embedding& e) {
    if (!table_.empty() && table_.begin()->second.size() != e.size()) {
      throw ValidationError("embedding for sample " + std::to_string(id) + " has length " + std::to_string(e.size()) +
                            ", table uses " + std::to_string(table_.begin()->second.size()));
    }
    if (!e.allFinite()) throw ValidationError("embedding for sample " + std::to_string(id) + " is not finite");
  }

  std::map<int, Embedding> table_;
};

/// f(x) = W x + b with W of shape D x F.
struct AffineEmbedding {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;

  int output_dim() const { return static_cast<int>(weight.rows()); }
  int input_dim() const { return static_cast<int>(weight.cols()); }

  Embedding embed(const Eigen::VectorXd& x) const {
    if (x.size() != weight.cols()) {
      throw ValidationError("feature length " + std::to_string(x.size()) + " does not match embedding input " +
                            std::to_string(weight.cols()));
    }
    return weight * x + bias;
  }
  Embedding embed(const Sample& s) const { return embed(s.features); }

  /// W ~ N(0, 1/F), b = 0.
  static AffineEmbedding random(int output_dim, int input_dim, std::uint64_t seed) {
    if (output_dim <= 0 || input_dim <= 0) throw ValidationError("embedding dimensions must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0 / std::sqrt(static_cast<double>(input_dim)));
    AffineEmbedding f;
    f.weight.resize(output_dim, input_dim);
    for (int j = 0; j < input_dim; ++j)
      for (int i = 0; i < output_dim; ++i) f.weight(i, j) = n(rng);
    f.bias = Eigen::VectorXd::Zero(output_dim);
    return f;
  }
};

static_assert(EmbeddingProvider<LookupEmbedding>);
static_assert(EmbeddingProvider<AffineEmbedding>);

inline int histogram_bin(std::uint8_t value) { return value * kHistogramBinsPerChannel / 256; }

/// L1-normalised 3x3x3 RGB histogram over a pixel region.
inline Eigen::VectorXd color_histogram(const ColorImage& image, const PixelRegion& region) {
  Eigen::VectorXd h = Eigen::VectorXd::Zero(kHistogramDim);
  for (const auto& p : region) {
    if (!image.contains(p.u, p.v)) throw ValidationError("color_histogram: pixel outside image");
    const Rgb& c = image(p.u, p.v);
    const int bin = (histogram_bin(c.r) * kHistogramBinsPerChannel + histogram_bin(c.g)) * kHistogramBinsPerChannel +
                    histogram_bin(c.b);
    h(bin) += 1.0;
  }
  if (region.empty()) throw ValidationError("color_histogram: empty region");
  return h / static_cast<double>(region.size());
}

}  // namespace trayscan::protonet
