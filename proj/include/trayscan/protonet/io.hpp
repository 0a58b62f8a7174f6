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

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>

#include "trayscan/core/text_io.hpp"
#include "trayscan/protonet/embedding.hpp"

namespace trayscan::protonet {

struct CheckpointInfo {
  std::uint64_t seed = 0;
  int iterations = 0;
};

/// Text checkpoint: a header line `# D=.. F=.. seed=.. iterations=..`, then
/// D rows of `w_0..w_{F-1},b` in shortest round-trip notation.
inline std::string format_checkpoint(const AffineEmbedding& f, const CheckpointInfo& info) {
  std::ostringstream out;
  out << "# D=" << f.output_dim() << " F=" << f.input_dim() << " seed=" << info.seed
      << " iterations=" << info.iterations << "\n";
  for (int i = 0; i < f.output_dim(); ++i) {
    for (int j = 0; j < f.input_dim(); ++j) out << io::format_double(f.weight(i, j)) << ',';
    out << io::format_double(f.bias(i)) << '\n';
  }
  return out.str();
}

inline void save_checkpoint(const std::filesystem::path& path, const AffineEmbedding& f, const CheckpointInfo& info) {
  io::write_text_atomic(path, format_checkpoint(f, info));
}

inline std::pair<AffineEmbedding, CheckpointInfo> parse_checkpoint(const std::string& text, const std::string& name) {
  std::istringstream in(text);
  std::string header;
  std::getline(in, header);
  long long d = 0, f = 0, it = 0;
  unsigned long long seed = 0;
  if (std::sscanf(header.c_str(), "# D=%lld F=%lld seed=%llu iterations=%lld", &d, &f, &seed, &it) != 4 || d <= 0 ||
      f <= 0) {
    throw ValidationError(name + ": malformed checkpoint header '" + header + "'");
  }
  AffineEmbedding e;
  e.weight.resize(d, f);
  e.bias.resize(d);
  std::string line;
  for (long long i = 0; i < d; ++i) {
    if (!std::getline(in, line)) throw ValidationError(name + ": expected " + std::to_string(d) + " rows");
    const auto cells = io::split_csv_line(line);
    if (static_cast<long long>(cells.size()) != f + 1) {
      throw ValidationError(name + ": row " + std::to_string(i + 1) + " has " + std::to_string(cells.size()) +
                            " values, expected " + std::to_string(f + 1));
    }
    for (long long j = 0; j < f; ++j) e.weight(i, j) = io::parse_double(cells[j], name);
    e.bias(i) = io::parse_double(cells[f], name);
  }
  if (!e.weight.allFinite() || !e.bias.allFinite()) throw ValidationError(name + ": non-finite parameter");
  return {std::move(e), CheckpointInfo{seed, static_cast<int>(it)}};
}

inline std::pair<AffineEmbedding, CheckpointInfo> load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(io::read_text(path), path.string());
}

/// `sample_id,v_0,...,v_{D-1}`
inline LookupEmbedding parse_embedding_table(const std::string& text, const std::string& name) {
  const io::CsvTable table = io::parse_csv(text, name);
  LookupEmbedding out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string where = name + ":" + std::to_string(table.line_numbers[r]);
    if (row.size() < 2) throw ValidationError(where + ": need a sample id and at least one value");
    Embedding e(static_cast<Eigen::Index>(row.size() - 1));
    for (std::size_t j = 1; j < row.size(); ++j) e(static_cast<Eigen::Index>(j - 1)) = io::parse_double(row[j], where);
    try {
      out.add(io::parse_int(row[0], where), std::move(e));
    } catch (const ValidationError& err) {
      throw ValidationError(where + ": " + err.what());
    }
  }
  return out;
}

inline std::string format_embedding_table(const LookupEmbedding& table) {
  std::ostringstream out;
  const Eigen::Index d = table.table().empty() ? 0 : table.table().begin()->second.size();
  out << "sample_id";
  for (Eigen::Index j = 0; j < d; ++j) out << ",v_" << j;
  out << '\n';
  for (const auto& [id, e] : table.table()) {
    out << id;
    for (Eigen::Index j = 0; j < e.size(); ++j) out << ',' << io::format_double(e(j));
    out << '\n';
  }
  return out.str();
}

inline LookupEmbedding load_embedding_table(const std::filesystem::path& path) {
  return parse_embedding_table(io::read_text(path), path.string());
}

/// Labelled raw-feature samples: `sample_id,category_id,f_0,...,f_{F-1}`.
inline std::string format_samples(const Dataset& data) {
  std::ostringstream out;
  const Eigen::Index f = data.empty() ? 0 : data.front().features.size();
  out << "sample_id,category_id";
  for (Eigen::Index j = 0; j < f; ++j) out << ",f_" << j;
  out << '\n';
  for (const auto& s : data) {
    out << s.id << ',' << s.category;
    for (Eigen::Index j = 0; j < s.features.size(); ++j) out << ',' << io::format_double(s.features(j));
    out << '\n';
  }
  return out.str();
}

inline Dataset parse_samples(const std::string& text, const std::string& name) {
  const io::CsvTable table = io::parse_csv(text, name);
  Dataset data;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string where = name + ":" + std::to_string(table.line_numbers[r]);
    if (row.size() < 3) throw ValidationError(where + ": need sample id, category and features");
    if (!data.empty() && row.size() - 2 != static_cast<std::size_t>(data.front().features.size())) {
      throw ValidationError(where + ": feature count differs from earlier rows");
    }
    Sample s;
    s.id = io::parse_int(row[0], where);
    s.category = io::parse_int(row[1], where);
    s.features.resize(static_cast<Eigen::Index>(row.size() - 2));
    for (std::size_t j = 2; j < row.size(); ++j) s.features(static_cast<Eigen::Index>(j - 2)) = io::parse_double(row[j], where);
    data.push_back(std::move(s));
  }
  return data;
}

inline Dataset load_samples(const std::filesystem::path& path) { return parse_samples(io::read_text(path), path.string()); }

inline void save_samples(const std::filesystem::path& path, const Dataset& data) {
  io::write_text_atomic(path, format_samples(data));
}

}  // namespace trayscan::protonet
