#include "cmap/export.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "json.hpp"

#include "cmap/error.hpp"

namespace cmap {

using nlohmann::json;

namespace {

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + '"';
}

}  // namespace

std::string export_dot(const ConceptGraph& graph) {
  std::vector<std::size_t> order(graph.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return graph.nodes[a].canonical < graph.nodes[b].canonical;
  });
  std::vector<std::size_t> rank(graph.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r;

  std::string out = "graph G {\n";
  for (std::size_t i : order) out += "  " + quoted(graph.nodes[i].canonical) + ";\n";

  struct Edge {
    std::size_t a, b;
    double w;
  };
  std::vector<Edge> edges;
  for (const auto& [key, w] : graph.edges) {
    auto [i, j] = key;
    if (rank[j] < rank[i]) std::swap(i, j);
    edges.push_back({i, j, w});
  }
  std::sort(edges.begin(), edges.end(), [&](const Edge& x, const Edge& y) {
    return std::pair(rank[x.a], rank[x.b]) < std::pair(rank[y.a], rank[y.b]);
  });
  char buf[64];
  for (const Edge& e : edges) {
    std::snprintf(buf, sizeof buf, " [weight=%.4f];\n", e.w);
    out += "  " + quoted(graph.nodes[e.a].canonical) + " -- " + quoted(graph.nodes[e.b].canonical) + buf;
  }
  return out + "}";
}

std::string export_json(const ConceptGraph& graph) {
  json nodes = json::array();
  for (std::size_t i = 0; i < graph.size(); ++i) {
    const ConceptNode& n = graph.nodes[i];
    nodes.push_back({{"id", i}, {"canonical", n.canonical}, {"freq", n.frequency},
                     {"first_pos", n.first_position}});
  }
  json edges = json::array();
  for (const auto& [key, w] : graph.edges) edges.push_back({{"s", key.first}, {"t", key.second}, {"w", w}});
  // nlohmann::json objects keep keys sorted; doubles are printed round-trip exact.
  return json{{"nodes", nodes}, {"edges", edges}}.dump();
}

ConceptGraph import_json(const std::string& text) {
  ConceptGraph g;
  try {
    const json j = json::parse(text);
    const json& nodes = j.at("nodes");
    g.nodes.resize(nodes.size());
    for (const json& n : nodes) {
      const auto id = n.at("id").get<std::size_t>();
      if (id >= g.nodes.size()) throw ValidationError("graph json: node id out of range");
      ConceptNode& node = g.nodes[id];
      node.canonical = n.at("canonical").get<std::string>();
      node.frequency = n.at("freq").get<std::size_t>();
      node.first_position = n.at("first_pos").get<std::size_t>();
    }
    for (const json& e : j.at("edges")) {
      const auto s = e.at("s").get<std::size_t>(), t = e.at("t").get<std::size_t>();
      if (s >= g.size() || t >= g.size() || s == t) throw ValidationError("graph json: bad edge");
      g.set_edge(s, t, e.at("w").get<double>());
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("graph json: ") + e.what());
  }
  return g;
}

}  // namespace cmap
