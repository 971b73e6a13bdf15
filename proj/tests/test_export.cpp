#include <random>

#include "doctest.h"
#include "json.hpp"

#include "cmap/concept_graph.hpp"
#include "cmap/export.hpp"

using namespace cmap;

namespace {

ConceptNode named(std::string c, std::size_t pos, std::size_t freq = 1) {
  ConceptNode n;
  n.canonical = std::move(c);
  n.first_position = pos;
  n.frequency = freq;
  for (std::size_t i = 0; i < freq; ++i) n.mentions.push_back(pos + i);
  return n;
}

}  // namespace

TEST_CASE("dot export") {
  ConceptGraph g;
  g.nodes = {named("a", 0), named("b", 1)};
  g.set_edge(0, 1, 0.9);
  CHECK(export_dot(g) == "graph G {\n  \"a\";\n  \"b\";\n  \"a\" -- \"b\" [weight=0.9000];\n}");
  CHECK(export_dot(ConceptGraph{}) == "graph G {\n}");

  ConceptGraph q;
  q.nodes = {named("say \"hi\"", 0), named("back\\slash", 1)};
  const std::string dot = export_dot(q);
  CHECK(dot.find("\"say \\\"hi\\\"\"") != std::string::npos);
  CHECK(dot.find("\"back\\\\slash\"") != std::string::npos);

  ConceptGraph r;
  r.nodes = {named("zeta", 0), named("alpha", 1), named("mid", 2)};
  r.set_edge(0, 2, 1.0 / 3.0);
  const std::string rd = export_dot(r);
  CHECK(rd.find("\"alpha\"") < rd.find("\"mid\""));
  CHECK(rd.find("\"mid\"") < rd.find("\"zeta\""));
  CHECK(rd.find("[weight=0.3333]") != std::string::npos);
  CHECK(export_dot(r) == rd);
}

TEST_CASE("json export") {
  CHECK(export_json(ConceptGraph{}) == R"({"edges":[],"nodes":[]})");

  ConceptGraph g;
  g.nodes = {named("moon surface", 3, 2), named("landing", 7)};
  g.set_edge(0, 1, 0.1 + 0.2);
  const nlohmann::json j = nlohmann::json::parse(export_json(g));
  CHECK(j["nodes"][0]["canonical"] == "moon surface");
  CHECK(j["nodes"][0]["freq"] == 2);
  CHECK(j["nodes"][0]["first_pos"] == 3);
  CHECK(j["edges"][0]["w"].get<double>() == 0.1 + 0.2);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> w(0.01, 5.0);
  for (int trial = 0; trial < 20; ++trial) {
    ConceptGraph r;
    const std::size_t n = 1 + trial % 9;
    for (std::size_t i = 0; i < n; ++i) r.nodes.push_back(named("c" + std::to_string(i), i * 3, 1 + i % 3));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = i + 1; k < n; ++k)
        if (w(rng) > 2.5) r.set_edge(i, k, w(rng));
    const ConceptGraph back = import_json(export_json(r));
    CHECK(back.nodes.size() == r.nodes.size());
    CHECK(back.edges == r.edges);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(back.nodes[i].canonical == r.nodes[i].canonical);
      CHECK(back.nodes[i].frequency == r.nodes[i].frequency);
      CHECK(back.nodes[i].first_position == r.nodes[i].first_position);
    }
    CHECK(export_json(back) == export_json(r));
  }
}
