#include "cmap/annotation.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cmap/error.hpp"

#ifndef CMAP_DATA_DIR
#define CMAP_DATA_DIR "data"
#endif

namespace cmap {

using nlohmann::json;

// ---- AnnotationSet ---------------------------------------------------------

namespace {

void check_spans(const AnnotationSet& ann, const std::vector<Span>& spans, const char* layer,
                 bool disjoint) {
  for (const Span& s : spans) {
    if (s.end > ann.tokens.size() || s.start >= s.end)
      throw ValidationError("span out of range in " + ann.doc_id + " (" + layer + " [" +
                            std::to_string(s.start) + "," + std::to_string(s.end) + "))");
  }
  if (!disjoint) return;
  std::vector<Span> sorted = spans;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i].start < sorted[i - 1].end)
      throw ValidationError("overlapping " + std::string(layer) + " spans in " + ann.doc_id);
  }
}

json spans_to_json(const std::vector<Span>& spans) {
  json out = json::array();
  for (const Span& s : spans) out.push_back({s.start, s.end});
  return out;
}

std::vector<Span> spans_from_json(const json& j) {
  std::vector<Span> out;
  for (const json& s : j) {
    if (!s.is_array() || s.size() != 2) throw ParseError("span must be a [start, end] pair");
    out.push_back({s[0].get<std::size_t>(), s[1].get<std::size_t>()});
  }
  return out;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

void AnnotationSet::validate() const {
  check_spans(*this, sentences, "sentence", true);
  check_spans(*this, noun_phrases, "np", true);
  check_spans(*this, verb_phrases, "vp", true);
  check_spans(*this, adjectives, "adj", true);
  for (const auto& chain : coref_chains) {
    if (chain.size() < 2) throw ValidationError("coref chain with fewer than 2 spans in " + doc_id);
    check_spans(*this, chain, "coref", false);
  }
}

json annotation_to_json(const AnnotationSet& ann) {
  json tokens = json::array();
  for (const Token& t : ann.tokens) tokens.push_back({t.surface, t.lemma, t.pos});
  json coref = json::array();
  for (const auto& chain : ann.coref_chains) coref.push_back(spans_to_json(chain));
  return {{"doc_id", ann.doc_id},
          {"tokens", tokens},
          {"sentences", spans_to_json(ann.sentences)},
          {"np", spans_to_json(ann.noun_phrases)},
          {"vp", spans_to_json(ann.verb_phrases)},
          {"adj", spans_to_json(ann.adjectives)},
          {"coref", coref}};
}

AnnotationSet annotation_from_json(const json& j) {
  AnnotationSet ann;
  try {
    ann.doc_id = j.at("doc_id").get<std::string>();
    for (const json& t : j.at("tokens")) {
      if (!t.is_array() || t.size() != 3) throw ParseError("token must be [surface, lemma, pos]");
      ann.tokens.push_back({t[0].get<std::string>(), t[1].get<std::string>(), t[2].get<std::string>()});
    }
    ann.sentences = spans_from_json(j.value("sentences", json::array()));
    ann.noun_phrases = spans_from_json(j.value("np", json::array()));
    ann.verb_phrases = spans_from_json(j.value("vp", json::array()));
    ann.adjectives = spans_from_json(j.value("adj", json::array()));
    for (const json& chain : j.value("coref", json::array())) ann.coref_chains.push_back(spans_from_json(chain));
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed annotation record: ") + e.what());
  }
  ann.validate();
  return ann;
}

std::vector<AnnotationSet> parse_annotations(std::istream& in) {
  std::vector<AnnotationSet> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError("annotation line " + std::to_string(line_no) + ": " + e.what());
    }
    out.push_back(annotation_from_json(j));
  }
  return out;
}

std::vector<AnnotationSet> load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open annotation file " + path.string());
  return parse_annotations(in);
}

void write_annotations(const std::vector<AnnotationSet>& anns, std::ostream& out) {
  for (const AnnotationSet& a : anns) out << annotation_to_json(a).dump() << '\n';
}

std::vector<AnnotationSet> join_annotations(const Corpus& corpus, std::vector<AnnotationSet> anns) {
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < corpus.documents.size(); ++i) by_id[corpus.documents[i].id] = i;
  std::vector<AnnotationSet> out(corpus.size());
  std::vector<bool> filled(corpus.size(), false);
  for (AnnotationSet& a : anns) {
    auto it = by_id.find(a.doc_id);
    if (it == by_id.end()) throw ValidationError("annotation for unknown doc_id " + a.doc_id);
    if (filled[it->second]) throw ValidationError("duplicate annotation for doc_id " + a.doc_id);
    filled[it->second] = true;
    out[it->second] = std::move(a);
  }
  for (std::size_t i = 0; i < filled.size(); ++i)
    if (!filled[i]) throw ValidationError("no annotation for doc_id " + corpus.documents[i].id);
  return out;
}

// ---- Lexicon ---------------------------------------------------------------

Lexicon Lexicon::load(const std::filesystem::path& data_dir) {
  Lexicon lex;
  {
    std::ifstream in(data_dir / "stopwords.txt");
    if (!in) throw ValidationError("cannot open " + (data_dir / "stopwords.txt").string());
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream ss(line);
      std::string w;
      if (ss >> w && w[0] != '#') lex.stopwords_.insert(to_lower(w));
    }
  }
  {
    std::ifstream in(data_dir / "pos_lexicon.txt");
    if (!in) throw ValidationError("cannot open " + (data_dir / "pos_lexicon.txt").string());
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream ss(line);
      std::string word, tag, lemma;
      if (!(ss >> word) || word[0] == '#') continue;
      if (!(ss >> tag)) throw ParseError("lexicon entry without tag: " + word);
      ss >> lemma;
      word = to_lower(word);
      lex.entries_[word] = {tag, lemma.empty() ? word : lemma};
    }
  }
  return lex;
}

std::filesystem::path Lexicon::default_data_dir() {
  if (const char* env = std::getenv("CMAP_DATA_DIR"); env != nullptr && *env != '\0') return env;
  return CMAP_DATA_DIR;
}

const Lexicon& Lexicon::shared() {
  static const Lexicon lex = load(default_data_dir());
  return lex;
}

bool Lexicon::is_stopword(std::string_view lower) const {
  return stopwords_.count(std::string(lower)) > 0;
}

const Lexicon::Entry* Lexicon::find(std::string_view lower) const {
  auto it = entries_.find(std::string(lower));
  return it == entries_.end() ? nullptr : &it->second;
}

bool Lexicon::is_verb_stem(std::string_view lower) const {
  const Entry* e = find(lower);
  return e != nullptr && e->tag == "VB";
}

// ---- tokenizer / tagger ----------------------------------------------------

namespace {

const std::unordered_set<std::string>& abbreviations() {
  static const std::unordered_set<std::string> set = {"mr", "mrs", "ms", "dr", "prof", "st", "jr",
                                                      "sr", "inc", "ltd", "co", "vs", "etc", "gov",
                                                      "sen", "rep", "gen", "corp", "no"};
  return set;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

bool has_alnum(std::string_view s) { return std::any_of(s.begin(), s.end(), is_word_char); }

bool is_number(std::string_view s) {
  bool digit = false;
  for (char c : s) {
    if (std::isdigit(static_cast<unsigned char>(c))) {
      digit = true;
    } else if (c != '.' && c != ',' && c != '-') {
      return false;
    }
  }
  return digit;
}

bool is_noun_tag(std::string_view t) { return t == "NN" || t == "NNS" || t == "NNP" || t == "NNPS"; }
bool is_adj_tag(std::string_view t) { return t == "JJ" || t == "JJR" || t == "JJS"; }
bool is_verb_tag(std::string_view t) { return t.size() >= 2 && t.substr(0, 2) == "VB"; }
bool is_sentence_end(std::string_view s) { return s == "." || s == "!" || s == "?"; }

/// Previous tag that makes the next word read as a noun ("the jump", "deep learning").
bool nominal_context(std::string_view prev) {
  return prev == "DT" || prev == "PRP$" || is_adj_tag(prev) || prev == "CD";
}

/// Verb stem for an inflected form, or empty.
std::string verb_stem(std::string_view w, const Lexicon& lex) {
  auto try_stem = [&](std::string s) -> std::string { return lex.is_verb_stem(s) ? s : std::string(); };
  std::string s;
  if (ends_with(w, "ies") && w.size() > 4) {
    if (!(s = try_stem(std::string(w.substr(0, w.size() - 3)) + "y")).empty()) return s;
  }
  if (ends_with(w, "es")) {
    if (!(s = try_stem(std::string(w.substr(0, w.size() - 2)))).empty()) return s;
  }
  if (ends_with(w, "s")) {
    if (!(s = try_stem(std::string(w.substr(0, w.size() - 1)))).empty()) return s;
  }
  for (std::string_view suf : {std::string_view("ing"), std::string_view("ed")}) {
    if (!ends_with(w, suf) || w.size() <= suf.size() + 1) continue;
    std::string base(w.substr(0, w.size() - suf.size()));
    if (suf == "ed" && ends_with(base, "i")) {
      if (!(s = try_stem(base.substr(0, base.size() - 1) + "y")).empty()) return s;
    }
    if (!(s = try_stem(base)).empty()) return s;
    if (!(s = try_stem(base + "e")).empty()) return s;
    if (base.size() >= 2 && base[base.size() - 1] == base[base.size() - 2]) {
      if (!(s = try_stem(base.substr(0, base.size() - 1))).empty()) return s;
    }
  }
  return {};
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (is_word_char(c)) {
      std::size_t j = i + 1;
      while (j < n) {
        if (is_word_char(text[j])) {
          ++j;
        } else if ((text[j] == '\'' || text[j] == '-' || text[j] == '.') && j + 1 < n &&
                   is_word_char(text[j + 1])) {
          j += 2;
        } else {
          break;
        }
      }
      std::string word(text.substr(i, j - i));
      if (j < n && text[j] == '.' && abbreviations().count(to_lower(word)) > 0) {
        word += '.';
        ++j;
      }
      out.push_back(std::move(word));
      i = j;
      continue;
    }
    // UTF-8 multibyte sequences are kept together as one symbol token
    std::size_t len = 1;
    const auto uc = static_cast<unsigned char>(c);
    if (uc >= 0xF0) len = 4;
    else if (uc >= 0xE0) len = 3;
    else if (uc >= 0xC0) len = 2;
    out.emplace_back(text.substr(i, std::min(len, n - i)));
    i += len;
  }
  return out;
}

std::string heuristic_lemma(std::string_view lower, std::string_view tag, const Lexicon& lex) {
  if (const Lexicon::Entry* e = lex.find(lower)) return e->lemma;
  std::string w(lower);
  if (is_verb_tag(tag)) {
    if (std::string s = verb_stem(w, lex); !s.empty()) return s;
  }
  if (tag == "NNS" || tag == "VBZ") {
    if (ends_with(w, "ies") && w.size() > 4) return w.substr(0, w.size() - 3) + "y";
    for (std::string_view suf : {"sses", "shes", "ches", "xes", "zes"})
      if (ends_with(w, suf)) return w.substr(0, w.size() - 2);
    if (ends_with(w, "ss") || ends_with(w, "us") || ends_with(w, "is")) return w;
    if (ends_with(w, "s") && w.size() > 2) return w.substr(0, w.size() - 1);
    return w;
  }
  if ((tag == "VBD" || tag == "VBN") && ends_with(w, "ed") && w.size() > 4) {
    if (ends_with(w, "ied")) return w.substr(0, w.size() - 3) + "y";
    return w.substr(0, w.size() - 2);
  }
  if (tag == "VBG" && ends_with(w, "ing") && w.size() > 5) return w.substr(0, w.size() - 3);
  return w;
}

namespace {

std::string tag_word(const std::string& surface, const std::string& lower, std::string_view prev,
                     bool sentence_start, const Lexicon& lex) {
  if (!has_alnum(surface)) return "PUNCT";
  if (is_number(surface)) return "CD";
  if (const Lexicon::Entry* e = lex.find(lower)) {
    if ((e->tag == "VB" || e->tag == "VBP") && nominal_context(prev)) return "NN";
    if (e->tag == "VB" && (is_noun_tag(prev) || prev == "PRP")) return "VBP";
    return e->tag;
  }
  if (!verb_stem(lower, lex).empty()) {
    if (ends_with(lower, "ing")) return nominal_context(prev) ? "NN" : "VBG";
    if (ends_with(lower, "ed")) return prev == "DT" ? "JJ" : "VBD";
    return (nominal_context(prev) || prev == "IN") ? "NNS" : "VBZ";
  }
  if (!sentence_start && std::isupper(static_cast<unsigned char>(surface[0]))) return "NNP";
  const std::size_t n = lower.size();
  if (n > 4 && ends_with(lower, "ly")) return "RB";
  if (n >= 5) {
    for (std::string_view suf : {"ous", "ful", "ive", "able", "ible", "less", "ish", "ical"})
      if (ends_with(lower, suf)) return "JJ";
  }
  if (n > 5 && ends_with(lower, "ing")) return nominal_context(prev) ? "NN" : "VBG";
  if (n > 4 && ends_with(lower, "ed")) return prev == "DT" ? "JJ" : "VBD";
  if (n > 3 && ends_with(lower, "s") && !ends_with(lower, "ss") && !ends_with(lower, "us") &&
      !ends_with(lower, "is"))
    return "NNS";
  return "NN";
}

}  // namespace

bool is_determiner(std::string_view lower) { return lower == "a" || lower == "an" || lower == "the"; }

bool is_pronoun(std::string_view lower) {
  static const std::unordered_set<std::string> set = {
      "i",   "me",  "you", "he",  "him",   "she",  "her",     "it",      "we",     "us",
      "they", "them", "my", "your", "his", "its", "our", "their", "himself", "herself", "itself",
      "themselves", "this", "that", "these", "those", "who", "whom", "which", "mine", "yours", "hers",
      "ours", "theirs", "one"};
  return set.count(std::string(lower)) > 0;
}

AnnotationSet chunk_heuristic(const Document& doc, const Lexicon& lex) {
  AnnotationSet ann;
  ann.doc_id = doc.id;
  const std::vector<std::string> words = tokenize(doc.text);
  if (words.empty()) return ann;

  // sentences
  std::size_t start = 0;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (is_sentence_end(words[i])) {
      ann.sentences.push_back({start, i + 1});
      start = i + 1;
    }
  }
  if (start < words.size()) ann.sentences.push_back({start, words.size()});

  std::vector<bool> sentence_start(words.size(), false);
  for (const Span& s : ann.sentences) sentence_start[s.start] = true;

  // tags and lemmas
  std::string prev = "";
  for (std::size_t i = 0; i < words.size(); ++i) {
    const std::string lower = to_lower(words[i]);
    if (sentence_start[i]) prev = "";
    std::string tag = tag_word(words[i], lower, prev, sentence_start[i], lex);
    std::string lemma = tag == "PUNCT" ? words[i] : heuristic_lemma(lower, tag, lex);
    ann.tokens.push_back({words[i], std::move(lemma), tag});
    prev = ann.tokens.back().pos;
  }

  auto stop = [&](std::size_t i) { return lex.is_stopword(to_lower(ann.tokens[i].surface)); };
  auto np_word = [&](std::size_t i) {
    const std::string& t = ann.tokens[i].pos;
    return (is_noun_tag(t) || is_adj_tag(t)) && !stop(i);
  };

  std::size_t i = 0;
  const std::size_t n = ann.tokens.size();
  while (i < n) {
    if (np_word(i)) {
      std::size_t j = i;
      while (j < n && np_word(j) && (j == i || !sentence_start[j])) ++j;
      std::size_t last_noun = j;
      for (std::size_t k = i; k < j; ++k)
        if (is_noun_tag(ann.tokens[k].pos)) last_noun = k;
      if (last_noun != j) {
        std::size_t s = i;
        if (i > 0 && !sentence_start[i] && ann.tokens[i - 1].pos == "DT") s = i - 1;
        ann.noun_phrases.push_back({s, last_noun + 1});
        for (std::size_t k = last_noun + 1; k < j; ++k) ann.adjectives.push_back({k, k + 1});
      } else {
        for (std::size_t k = i; k < j; ++k) ann.adjectives.push_back({k, k + 1});
      }
      i = j;
      continue;
    }
    if (is_verb_tag(ann.tokens[i].pos) && !stop(i) && ann.tokens[i].lemma != "be" &&
        ann.tokens[i].lemma != "have" && ann.tokens[i].lemma != "do")
      ann.verb_phrases.push_back({i, i + 1});
    ++i;
  }
  return ann;
}

}  // namespace cmap
