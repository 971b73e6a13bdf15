#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "cmap/concept_graph.hpp"
#include "cmap/corpus.hpp"

namespace cmap {

/// Planted-signature corpus: each document mentions one class-exclusive
/// adjective-noun phrase among shared distractor phrases and background nouns.
struct SynthSpec {
  std::size_t num_classes = 2;
  std::size_t docs_per_class = 50;
  std::size_t doc_len = 60;               // tokens, including punctuation
  std::size_t signatures_per_class = 3;
  std::size_t signature_repeats = 2;      // mentions of the planted phrase per document
  std::size_t background_vocab = 120;     // background nouns
  std::size_t distractors = 8;            // shared adjective-noun phrases
  std::size_t distractor_mentions = 3;    // per document
  std::size_t embedding_dim = 16;
  std::uint64_t seed = 0;

  void set(std::string_view key, std::string_view value);
  void validate() const;
  static SynthSpec parse(std::istream& in);
  static SynthSpec load(const std::filesystem::path& path);
};

struct SynthCorpus {
  Corpus corpus;
  EmbeddingTable embeddings{1};
  std::map<std::string, std::string> gold;              // doc id -> planted phrase
  std::vector<std::vector<std::string>> signatures;     // per class
};

SynthCorpus generate_synthetic(const SynthSpec& spec);

/// Writes corpus.jsonl, embeddings.txt and gold.json into `dir`.
void write_synthetic(const SynthCorpus& s, const std::filesystem::path& dir);
std::map<std::string, std::string> load_gold(const std::filesystem::path& path);

/// Fraction of documents whose graph has a node containing every token of
/// the gold phrase. Key sets must match.
double planted_concept_recall(const std::map<std::string, ConceptGraph>& generated,
                              const std::map<std::string, std::string>& gold);

}  // namespace cmap
