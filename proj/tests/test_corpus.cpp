#include <algorithm>
#include <numeric>
#include <sstream>

#include "doctest.h"

#include "cmap/corpus.hpp"
#include "cmap/error.hpp"

using namespace cmap;

namespace {

Corpus make_corpus(std::size_t n) {
  Corpus c;
  c.class_names = {"a", "b"};
  for (std::size_t i = 0; i < n; ++i) c.documents.push_back({"d" + std::to_string(i), "text " + std::to_string(i), i % 2});
  return c;
}

std::vector<std::size_t> joined(const Splits& s) {
  std::vector<std::size_t> all = s.train;
  all.insert(all.end(), s.valid.begin(), s.valid.end());
  all.insert(all.end(), s.test.begin(), s.test.end());
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace

TEST_CASE("parse a two-line corpus") {
  std::istringstream in(R"({"id":"a","text":"Stars shine.","label":"sci"}
{"id":"b","text":"Votes count.","label":"pol"}
)");
  Corpus c = parse_corpus(in);
  CHECK(c.size() == 2);
  CHECK(c.num_classes() == 2);
  CHECK(c.class_names == std::vector<std::string>{"sci", "pol"});
  CHECK(c.documents[1].label == 1);
}

TEST_CASE("corpus errors") {
  SUBCASE("empty file") {
    std::istringstream in("");
    CHECK_THROWS_AS(parse_corpus(in), ValidationError);
  }
  SUBCASE("malformed line names the line number") {
    std::istringstream in("{\"id\":\"a\",\"text\":\"x\",\"label\":\"l\"}\n{not json}\n");
    try {
      parse_corpus(in);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }
  SUBCASE("duplicate id") {
    std::istringstream in("{\"id\":\"a\",\"text\":\"x\",\"label\":\"l\"}\n{\"id\":\"a\",\"text\":\"y\",\"label\":\"l\"}\n");
    CHECK_THROWS_AS(parse_corpus(in), ValidationError);
  }
}

TEST_CASE("corpus serialization round-trips") {
  Corpus c = make_corpus(5);
  c.documents[2].text = "quote \" and\nnewline";
  std::stringstream ss;
  write_corpus(c, ss);
  Corpus back = parse_corpus(ss);
  REQUIRE(back.size() == c.size());
  CHECK(back.class_names == c.class_names);
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(back.documents[i].id == c.documents[i].id);
    CHECK(back.documents[i].text == c.documents[i].text);
    CHECK(back.documents[i].label == c.documents[i].label);
  }
}

TEST_CASE("split sizes and determinism") {
  const Corpus ten = make_corpus(10);
  Splits s = split_corpus(ten, {0.8, 0.1, 0.1}, 7);
  CHECK(s.train.size() == 8);
  CHECK(s.valid.size() == 1);
  CHECK(s.test.size() == 1);
  CHECK(split_corpus(ten, {0.8, 0.1, 0.1}, 7) == s);

  Splits seven = split_corpus(make_corpus(7), {0.8, 0.1, 0.1}, 1);
  CHECK(seven.train.size() == 5);
  CHECK(seven.valid.size() == 1);
  CHECK(seven.test.size() == 1);

  CHECK_THROWS_AS(split_corpus(make_corpus(2), {0.8, 0.1, 0.1}, 1), ValidationError);
  CHECK_THROWS_AS(split_corpus(ten, {0.5, 0.1, 0.1}, 1), ParameterError);
}

TEST_CASE("splits are a partition of the indices") {
  for (std::size_t n : {3u, 4u, 10u, 57u, 100u})
    for (std::uint64_t seed : {0u, 1u, 99u}) {
      std::vector<std::size_t> expect(n);
      std::iota(expect.begin(), expect.end(), 0);
      CHECK(joined(split_corpus(make_corpus(n), {0.8, 0.1, 0.1}, seed)) == expect);
    }
  Splits s = split_corpus(make_corpus(20), {0.6, 0.2, 0.2}, 3);
  CHECK(splits_from_json(splits_to_json(s)) == s);
}

TEST_CASE("embedding table") {
  std::istringstream in("cat 1 0\ndog 0 1\n");
  EmbeddingTable t = parse_embeddings(in, 2);
  CHECK(t.size() == 2);
  CHECK(t.lookup("zebra").size() == 2);
  CHECK(t.lookup("zebra").isZero());
  const Eigen::VectorXd m = t.phrase_mean("cat dog");
  CHECK(m[0] == 0.5);
  CHECK(m[1] == 0.5);
  CHECK(t.lookup("Cat")[0] == 1.0);

  std::istringstream bad("cat 1 0 3\n");
  try {
    parse_embeddings(bad, 2);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("cat") != std::string::npos);
  }

  std::istringstream dup("cat 1 0\ncat 0 1\n");
  EmbeddingTable d = parse_embeddings(dup, 2);
  CHECK(d.duplicates() == 1);
  CHECK(d.lookup("cat")[1] == 1.0);
}
