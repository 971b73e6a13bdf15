#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "cmap/corpus.hpp"

namespace cmap {

struct Token {
  std::string surface;
  std::string lemma;
  std::string pos;

  bool operator==(const Token&) const = default;
};

/// Half-open token range [start, end).
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - start; }
  bool operator==(const Span&) const = default;
  auto operator<=>(const Span&) const = default;
};

/// Linguistic layers for one document, as produced by the heuristic chunker
/// or an external parser bridge.
struct AnnotationSet {
  std::string doc_id;
  std::vector<Token> tokens;
  std::vector<Span> sentences;
  std::vector<Span> noun_phrases;
  std::vector<Span> verb_phrases;
  std::vector<Span> adjectives;
  std::vector<std::vector<Span>> coref_chains;

  /// Throws ValidationError("span out of range in <id>") and friends.
  void validate() const;
  bool operator==(const AnnotationSet&) const = default;
};

nlohmann::json annotation_to_json(const AnnotationSet& ann);
AnnotationSet annotation_from_json(const nlohmann::json& j);

/// JSON-lines reader; every record is validated.
std::vector<AnnotationSet> parse_annotations(std::istream& in);
std::vector<AnnotationSet> load_annotations(const std::filesystem::path& path);
void write_annotations(const std::vector<AnnotationSet>& anns, std::ostream& out);

/// Orders annotations to match the corpus; unknown or missing doc ids throw.
std::vector<AnnotationSet> join_annotations(const Corpus& corpus, std::vector<AnnotationSet> anns);

/// Stopwords plus the part-of-speech lexicon used by the heuristic chunker.
class Lexicon {
 public:
  struct Entry {
    std::string tag;
    std::string lemma;
  };

  /// Reads stopwords.txt and pos_lexicon.txt from `data_dir`.
  static Lexicon load(const std::filesystem::path& data_dir);
  /// Directory baked in at build time, overridable with $CMAP_DATA_DIR.
  static std::filesystem::path default_data_dir();
  static const Lexicon& shared();

  bool is_stopword(std::string_view lower) const;
  const Entry* find(std::string_view lower) const;
  bool is_verb_stem(std::string_view lower) const;
  const std::unordered_set<std::string>& stopwords() const { return stopwords_; }

  void add_stopword(std::string w) { stopwords_.insert(std::move(w)); }
  void add_entry(std::string word, Entry e) { entries_[std::move(word)] = std::move(e); }

 private:
  std::unordered_set<std::string> stopwords_;
  std::unordered_map<std::string, Entry> entries_;
};

/// Word and punctuation tokens; a trailing period stays on known abbreviations.
std::vector<std::string> tokenize(std::string_view text);

/// Suffix-rule lemmatizer used when no lexicon lemma exists.
std::string heuristic_lemma(std::string_view lower, std::string_view tag, const Lexicon& lex);

/// Regex-free rule chunker: lexicon+suffix POS tags, noun phrases as maximal
/// (adjective|noun)+ runs ending in a noun (a directly preceding determiner is
/// kept inside the span), verbs and adjectives outside noun phrases as single
/// tokens. Never produces coreference chains.
AnnotationSet chunk_heuristic(const Document& doc, const Lexicon& lex);

bool is_determiner(std::string_view lower);
bool is_pronoun(std::string_view lower);

}  // namespace cmap
