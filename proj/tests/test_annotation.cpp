#include <sstream>

#include "doctest.h"

#include "cmap/annotation.hpp"
#include "cmap/concept_graph.hpp"
#include "cmap/error.hpp"

using namespace cmap;

namespace {

std::string span_text(const AnnotationSet& a, Span s) {
  std::string out;
  for (std::size_t i = s.start; i < s.end; ++i) {
    if (!out.empty()) out += ' ';
    out += a.tokens[i].surface;
  }
  return out;
}

AnnotationSet fixture() {
  AnnotationSet a;
  a.doc_id = "doc1";
  a.tokens = {{"Mr.", "mr.", "NNP"}, {"Haimovitz", "haimovitz", "NNP"}, {"plays", "play", "VBZ"},
              {".", ".", "."},       {"He", "he", "PRP"},               {"bows", "bow", "VBZ"},
              {".", ".", "."}};
  a.sentences = {{0, 4}, {4, 7}};
  a.noun_phrases = {{0, 2}, {4, 5}};
  a.verb_phrases = {{2, 3}, {5, 6}};
  a.coref_chains = {{{0, 2}, {4, 5}}};
  return a;
}

}  // namespace

TEST_CASE("annotation JSON lines round-trip") {
  std::vector<AnnotationSet> anns = {fixture(), fixture(), fixture()};
  anns[1].doc_id = "doc2";
  anns[2].doc_id = "doc3";
  anns[2].coref_chains.clear();
  std::stringstream ss;
  write_annotations(anns, ss);
  std::vector<AnnotationSet> back = parse_annotations(ss);
  REQUIRE(back.size() == 3);
  CHECK(back == anns);
}

TEST_CASE("annotation validation") {
  AnnotationSet a = fixture();
  a.noun_phrases.push_back({5, 9});
  try {
    a.validate();
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("span out of range in doc1") != std::string::npos);
  }
  std::istringstream bad("{\"doc_id\":\"x\",\"tokens\":[[\"a\",\"a\"]]}\n");
  CHECK_THROWS_AS(parse_annotations(bad), ParseError);
}

TEST_CASE("join annotations to a corpus") {
  Corpus c;
  c.class_names = {"x"};
  c.documents = {{"doc2", "b", 0}, {"doc1", "a", 0}};
  AnnotationSet a1 = fixture(), a2 = fixture();
  a2.doc_id = "doc2";
  std::vector<AnnotationSet> joined = join_annotations(c, {a1, a2});
  CHECK(joined[0].doc_id == "doc2");
  CHECK(joined[1].doc_id == "doc1");
  AnnotationSet stray = fixture();
  stray.doc_id = "doc9";
  CHECK_THROWS_AS(join_annotations(c, {a1, a2, stray}), ValidationError);
  CHECK_THROWS_AS(join_annotations(c, {a1}), ValidationError);
}

TEST_CASE("heuristic chunker") {
  const Lexicon& lex = Lexicon::shared();
  SUBCASE("determiner kept in span, dropped from canonical") {
    AnnotationSet a = chunk_heuristic({"d", "The quick brown fox jumps.", 0}, lex);
    REQUIRE(a.noun_phrases.size() == 1);
    CHECK(span_text(a, a.noun_phrases[0]) == "The quick brown fox");
    REQUIRE(a.verb_phrases.size() == 1);
    CHECK(span_text(a, a.verb_phrases[0]) == "jumps");
    std::vector<ConceptNode> nodes = extract_nodes(a);
    REQUIRE(nodes.size() >= 1);
    CHECK(nodes[0].canonical == "quick brown fox");
  }
  SUBCASE("empty text") {
    AnnotationSet a = chunk_heuristic({"d", "", 0}, lex);
    CHECK(a.tokens.empty());
    CHECK(a.noun_phrases.empty());
    CHECK(a.sentences.empty());
  }
  SUBCASE("multi-word concept stays one noun phrase") {
    AnnotationSet a = chunk_heuristic({"d", "We trained deep learning models.", 0}, lex);
    bool found = false;
    for (Span s : a.noun_phrases) found = found || span_text(a, s) == "deep learning models";
    CHECK(found);
  }
  SUBCASE("chunker output always validates") {
    for (const char* text : {"A b. C d e!", "The the the.", "Dr. Smith met Mr. Jones in the U.S. yesterday.",
                             "...", "running quickly, the big dogs barked loudly at 3 cats"}) {
      AnnotationSet a = chunk_heuristic({"d", text, 0}, lex);
      CHECK_NOTHROW(a.validate());
      CHECK(a.coref_chains.empty());
    }
  }
}

TEST_CASE("tokenizer keeps abbreviations") {
  const std::vector<std::string> toks = tokenize("Mr. Haimovitz plays.");
  REQUIRE(toks.size() == 4);
  CHECK(toks[0] == "Mr.");
  CHECK(toks[3] == ".");
}
