#pragma once

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "gcllab/errors.hpp"
#include "gcllab/graphcore/graph.hpp"

namespace gcl {

struct ContentCitesResult {
  Graph graph;
  std::size_t skipped_cites = 0;  // cites naming an id absent from content
  std::vector<std::string> class_names;
};

namespace detail {

inline std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  for (std::string tok; is >> tok;) out.push_back(std::move(tok));
  return out;
}

inline double parse_double(const std::string& s, std::size_t line) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw ParseError("not a number: '" + s + "'", line);
  return v;
}

}  // namespace detail

inline ContentCitesResult load_content_cites(const std::string& content_path, const std::string& cites_path) {
  std::ifstream content(content_path);
  if (!content) throw DataError("cannot open " + content_path);
  std::ifstream cites(cites_path);
  if (!cites) throw DataError("cannot open " + cites_path);

  std::unordered_map<std::string, std::size_t> node_of;
  std::unordered_map<std::string, int> label_of;
  ContentCitesResult res;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::size_t width = 0;
  std::string line;
  for (std::size_t ln = 1; std::getline(content, line); ++ln) {
    auto tok = detail::split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() < 2) throw ParseError(content_path + ": expected id, features, label", ln);
    if (width == 0) width = tok.size();
    else if (tok.size() != width)
      throw ParseError(content_path + ": expected " + std::to_string(width) + " fields, got " +
                       std::to_string(tok.size()), ln);
    if (node_of.count(tok.front())) throw ParseError(content_path + ": duplicate id " + tok.front(), ln);
    std::vector<double> feat;
    feat.reserve(tok.size() - 2);
    for (std::size_t k = 1; k + 1 < tok.size(); ++k) feat.push_back(detail::parse_double(tok[k], ln));
    auto [it, fresh] = label_of.emplace(tok.back(), static_cast<int>(label_of.size()));
    if (fresh) res.class_names.push_back(tok.back());
    node_of.emplace(tok.front(), rows.size());
    rows.push_back(std::move(feat));
    labels.push_back(it->second);
  }
  if (rows.empty()) throw DataError(content_path + ": no nodes");

  std::vector<Edge> edges;
  for (std::size_t ln = 1; std::getline(cites, line); ++ln) {
    auto tok = detail::split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != 2) throw ParseError(cites_path + ": expected 'citing cited'", ln);
    auto a = node_of.find(tok[0]);
    auto b = node_of.find(tok[1]);
    if (a == node_of.end() || b == node_of.end()) {
      ++res.skipped_cites;
      continue;
    }
    edges.emplace_back(a->second, b->second);
  }
  const std::size_t h = rows.front().size();
  Matrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(h));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < h; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  res.graph = Graph::from_edges(rows.size(), edges, std::move(x), std::move(labels), content_path);
  res.graph.num_classes = static_cast<int>(label_of.size());
  return res;
}

inline nlohmann::json graph_to_json(const Graph& g) {
  nlohmann::json j;
  j["n"] = g.n;
  nlohmann::json edges = nlohmann::json::array();
  for (auto [a, b] : g.edge_list()) edges.push_back({a, b});
  j["edges"] = std::move(edges);
  nlohmann::json feats = nlohmann::json::array();
  for (Eigen::Index i = 0; i < g.features.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index k = 0; k < g.features.cols(); ++k) row.push_back(g.features(i, k));
    feats.push_back(std::move(row));
  }
  j["features"] = std::move(feats);
  if (g.labels) j["labels"] = *g.labels;
  if (g.graph_label) j["graph_label"] = *g.graph_label;
  if (g.num_classes > 0) j["num_classes"] = g.num_classes;
  if (!g.name.empty()) j["name"] = g.name;
  return j;
}

inline Graph graph_from_json(const nlohmann::json& j) {
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      static const char* known[] = {"n", "edges", "features", "labels", "graph_label", "num_classes", "name"};
      bool ok = false;
      for (const char* k : known) ok = ok || it.key() == k;
      if (!ok) throw DataError("dataset: unknown key '" + it.key() + "'");
    }
    auto n = j.at("n").get<std::size_t>();
    std::vector<Edge> edges;
    for (const auto& e : j.at("edges")) {
      if (!e.is_array() || e.size() != 2) throw DataError("dataset: edge must be a pair");
      edges.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
    }
    const auto& f = j.at("features");
    if (f.size() != n) throw DataError("dataset: feature rows != n");
    std::size_t h = n ? f[0].size() : 0;
    Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(h));
    for (std::size_t i = 0; i < n; ++i) {
      if (f[i].size() != h) throw DataError("dataset: ragged feature rows");
      for (std::size_t k = 0; k < h; ++k)
        x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = f[i][k].get<double>();
    }
    std::optional<std::vector<int>> labels;
    if (j.contains("labels")) labels = j["labels"].get<std::vector<int>>();
    Graph g = Graph::from_edges(n, edges, std::move(x), std::move(labels), j.value("name", std::string{}));
    if (j.contains("num_classes")) g.num_classes = std::max(g.num_classes, j["num_classes"].get<int>());
    if (j.contains("graph_label")) g.graph_label = j["graph_label"].get<int>();
    g.validate();
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("dataset: ") + e.what());
  }
}

// A dataset file holds either one graph object or {"graphs": [...]}.
inline std::vector<Graph> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  std::vector<Graph> out;
  if (j.is_object() && j.contains("graphs")) {
    for (const auto& gj : j["graphs"]) out.push_back(graph_from_json(gj));
    if (out.empty()) throw DataError(path + ": empty graph list");
  } else {
    out.push_back(graph_from_json(j));
  }
  return out;
}

inline void save_dataset(const std::string& path, const std::vector<Graph>& graphs) {
  nlohmann::json j;
  if (graphs.size() == 1) {
    j = graph_to_json(graphs.front());
  } else {
    j["graphs"] = nlohmann::json::array();
    for (const Graph& g : graphs) j["graphs"].push_back(graph_to_json(g));
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump() << '\n';
}

}  // namespace gcl
