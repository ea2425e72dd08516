/*
 * Copyright 2026 The AGP Lab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#ifndef AGP_GRAPH_IO_HPP
#define AGP_GRAPH_IO_HPP

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "agp/graph.hpp"

namespace agp {

// JSONL layout: a header line {"D","T","name"} followed by one graph per
// line {"n", "edges": [[i,j],...] (i<j, once each), "x": n rows of D,
// "y": T entries of 0/1/null}. Without a header, D and T come from the
// first graph.

inline nlohmann::json graph_to_json(const Graph &g) {
  nlohmann::json j;
  j["n"] = g.num_nodes();
  auto edges = nlohmann::json::array();
  for (auto [u, v] : edge_list(g))
    edges.push_back({u, v});
  j["edges"] = std::move(edges);
  auto x = nlohmann::json::array();
  for (Index i = 0; i < g.x.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Index k = 0; k < g.x.cols(); ++k)
      row.push_back(g.x(i, k));
    x.push_back(std::move(row));
  }
  j["x"] = std::move(x);
  auto y = nlohmann::json::array();
  for (Index t = 0; t < g.y.cols(); ++t) {
    if (g.mask(0, t) == 0.0)
      y.push_back(nullptr);
    else
      y.push_back(g.y(0, t));
  }
  j["y"] = std::move(y);
  return j;
}

inline std::string serialize_dataset(const Dataset &d) {
  std::ostringstream os;
  nlohmann::json header{{"D", d.feature_dim}, {"T", d.task_count}, {"name", d.name}};
  os << header.dump() << '\n';
  for (const auto &g : d.graphs)
    os << graph_to_json(g).dump() << '\n';
  return os.str();
}

inline void save_dataset(const Dataset &d, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw DataError("cannot open " + path.string() + " for writing");
  out << serialize_dataset(d);
  if (!out)
    throw DataError("write failed: " + path.string());
}

namespace detail {

inline Graph graph_from_json(const nlohmann::json &j, Index dim, Index tasks, std::size_t line) {
  try {
    const auto n = j.at("n").get<Index>();
    if (n <= 0)
      throw ParseError(line, "graph needs at least one node");
    const auto &xs = j.at("x");
    if (static_cast<Index>(xs.size()) != n)
      throw ParseError(line, "x has " + std::to_string(xs.size()) + " rows, expected " +
                                 std::to_string(n));
    Matrix x(n, dim);
    for (Index i = 0; i < n; ++i) {
      const auto &row = xs.at(static_cast<std::size_t>(i));
      if (static_cast<Index>(row.size()) != dim)
        throw ParseError(line, "feature dimension " + std::to_string(row.size()) +
                                   " does not match header D=" + std::to_string(dim));
      for (Index k = 0; k < dim; ++k)
        x(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
    }
    const auto &ys = j.at("y");
    if (static_cast<Index>(ys.size()) != tasks)
      throw ParseError(line, "y has " + std::to_string(ys.size()) + " entries, expected T=" +
                                 std::to_string(tasks));
    Matrix y = Matrix::Zero(1, tasks), mask = Matrix::Zero(1, tasks);
    for (Index t = 0; t < tasks; ++t) {
      const auto &v = ys.at(static_cast<std::size_t>(t));
      if (v.is_null())
        continue;
      y(0, t) = v.get<double>();
      mask(0, t) = 1.0;
    }
    std::vector<std::pair<Index, Index>> edges;
    for (const auto &e : j.at("edges")) {
      if (e.size() != 2)
        throw ParseError(line, "edge must be a pair");
      edges.emplace_back(e.at(0).get<Index>(), e.at(1).get<Index>());
    }
    Graph g = make_graph(std::move(x), edges, std::move(y), std::move(mask));
    validate(g);
    return g;
  } catch (const ParseError &) {
    throw;
  } catch (const std::exception &e) {
    throw ParseError(line, e.what());
  }
}

} // namespace detail

inline Dataset parse_dataset(std::istream &in) {
  Dataset d;
  std::string text;
  std::size_t line = 0;
  bool have_header = false;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r')
      text.pop_back();
    if (text.empty())
      continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception &e) {
      throw ParseError(line, e.what());
    }
    if (!have_header && !j.contains("D") && j.contains("n")) {
      // Headerless file: take D and T from the first graph.
      try {
        const auto &xs = j.at("x");
        d.feature_dim = xs.empty() ? 0 : static_cast<Index>(xs.at(0).size());
        d.task_count = static_cast<Index>(j.at("y").size());
      } catch (const std::exception &e) {
        throw ParseError(line, std::string("bad graph: ") + e.what());
      }
      if (d.feature_dim <= 0 || d.task_count <= 0)
        throw ParseError(line, "cannot infer positive D and T from the first graph");
      have_header = true;
    }
    if (!have_header) {
      try {
        d.feature_dim = j.at("D").get<Index>();
        d.task_count = j.at("T").get<Index>();
        d.name = j.value("name", std::string{});
      } catch (const std::exception &e) {
        throw ParseError(line, std::string("bad header: ") + e.what());
      }
      if (d.feature_dim <= 0 || d.task_count <= 0)
        throw ParseError(line, "header needs positive D and T");
      have_header = true;
      continue;
    }
    d.graphs.push_back(detail::graph_from_json(j, d.feature_dim, d.task_count, line));
  }
  if (!have_header)
    throw ParseError(line, "missing header line");
  return d;
}

inline Dataset load_dataset(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw DataError("cannot open " + path.string());
  return parse_dataset(in);
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Identity of a dataset's content, as hex.
inline std::string dataset_hash(const Dataset &d) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(serialize_dataset(d))));
  return buf;
}

} // namespace agp

#endif
