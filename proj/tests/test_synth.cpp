#include <algorithm>
#include <filesystem>
#include <regex>
#include <set>
#include <sstream>

#include "doctest.h"

#include "cmap/annotation.hpp"
#include "cmap/concept_graph.hpp"
#include "cmap/error.hpp"
#include "cmap/synth.hpp"

using namespace cmap;

namespace {

ConceptGraph with_nodes(std::vector<std::string> canonicals) {
  ConceptGraph g;
  std::size_t pos = 0;
  for (auto& c : canonicals) {
    ConceptNode n;
    n.canonical = std::move(c);
    n.mentions = {pos};
    n.first_position = pos++;
    n.frequency = 1;
    g.nodes.push_back(n);
  }
  return g;
}

}  // namespace

TEST_CASE("synthetic corpus shape") {
  const SynthCorpus s = generate_synthetic({});
  CHECK(s.corpus.size() == 100);
  CHECK(s.corpus.num_classes() == 2);
  CHECK_NOTHROW(s.corpus.validate());
  std::size_t per_class[2] = {0, 0};
  for (const Document& d : s.corpus.documents) ++per_class[d.label];
  CHECK(per_class[0] == 50);
  CHECK(per_class[1] == 50);
  CHECK(s.gold.size() == 100);

  std::set<std::string> words;
  std::size_t total = 0;
  for (const auto& sigs : s.signatures)
    for (const std::string& phrase : sigs) {
      std::istringstream ss(phrase);
      for (std::string w; ss >> w; ++total) words.insert(w);
    }
  CHECK(words.size() == total);
}

TEST_CASE("synthetic generation is a pure function of the spec") {
  SynthSpec spec;
  spec.docs_per_class = 8;
  const SynthCorpus a = generate_synthetic(spec), b = generate_synthetic(spec);
  for (std::size_t i = 0; i < a.corpus.size(); ++i) CHECK(a.corpus.documents[i].text == b.corpus.documents[i].text);
  CHECK(a.gold == b.gold);
  for (const auto& [id, phrase] : a.gold) {
    std::istringstream ss(phrase);
    for (std::string w; ss >> w;) CHECK(a.embeddings.lookup(w) == b.embeddings.lookup(w));
  }
  spec.seed = 1;
  CHECK(generate_synthetic(spec).corpus.documents[0].text != a.corpus.documents[0].text);
}

TEST_CASE("every document carries its class signature") {
  const SynthCorpus s = generate_synthetic({});
  const Lexicon& lex = Lexicon::shared();
  for (const Document& d : s.corpus.documents) {
    const std::string& phrase = s.gold.at(d.id);
    CHECK(std::regex_search(d.text, std::regex("\\b" + phrase + "\\b")));
    const auto& own = s.signatures[d.label];
    CHECK(std::find(own.begin(), own.end(), phrase) != own.end());
    bool found = false;
    for (const ConceptNode& n : extract_nodes(chunk_heuristic(d, lex))) found = found || n.canonical == phrase;
    CHECK(found);
  }
}

TEST_CASE("synthetic files round-trip") {
  SynthSpec spec;
  spec.docs_per_class = 4;
  const SynthCorpus s = generate_synthetic(spec);
  const auto dir = std::filesystem::temp_directory_path() / "cmap_test_synth";
  std::filesystem::remove_all(dir);
  write_synthetic(s, dir);
  CHECK(load_gold(dir / "gold.json") == s.gold);
  CHECK(load_corpus(dir / "corpus.jsonl").size() == 8);
  CHECK(load_embeddings(dir / "embeddings.txt", spec.embedding_dim).size() == s.embeddings.size());
  std::filesystem::remove_all(dir);
}

TEST_CASE("spec validation") {
  SynthSpec spec;
  spec.num_classes = 1;
  CHECK_THROWS_AS(spec.validate(), ParameterError);
  spec = {};
  spec.doc_len = 5;
  CHECK_THROWS_AS(spec.validate(), ParameterError);
  std::istringstream in("docs_per_class = 3\nbogus = 1\n");
  CHECK_THROWS_AS(SynthSpec::parse(in), ParseError);
}

TEST_CASE("planted concept recall") {
  const std::map<std::string, std::string> gold = {
      {"a", "bright star"}, {"b", "red moon"}, {"c", "cold sea"}, {"d", "tall tree"}};
  std::map<std::string, ConceptGraph> all = {{"a", with_nodes({"bright star"})},
                                             {"b", with_nodes({"x", "very red moon"})},
                                             {"c", with_nodes({"cold sea"})},
                                             {"d", with_nodes({"tall tree"})}};
  CHECK(planted_concept_recall(all, gold) == 1.0);
  std::map<std::string, ConceptGraph> three = all;
  three["d"] = with_nodes({"tall", "tree"});
  CHECK(planted_concept_recall(three, gold) == 0.75);
  std::map<std::string, ConceptGraph> none;
  for (const auto& [id, _] : gold) none[id] = with_nodes({"nothing"});
  CHECK(planted_concept_recall(none, gold) == 0.0);
  std::map<std::string, ConceptGraph> missing = all;
  missing.erase("a");
  missing["z"] = with_nodes({"q"});
  CHECK_THROWS_AS(planted_concept_recall(missing, gold), ContractError);
}
