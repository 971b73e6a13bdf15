#include "cmap/synth.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

#include "cmap/annotation.hpp"
#include "cmap/error.hpp"

namespace cmap {

namespace {

// Regular verbs from the bundled lexicon; "+s" gives the third person form.
const std::vector<std::string> kVerbs = {"support", "follow",  "protect", "describe", "reveal",
                                         "predict", "explain", "develop", "produce",  "create",
                                         "reduce",  "improve", "prepare", "discover", "generate"};

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

std::size_t to_count(std::string_view key, std::string_view value) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw ParseError("synth spec key '" + std::string(key) + "': bad value '" + std::string(value) + "'");
  return static_cast<std::size_t>(out);
}

std::size_t planted_mentions(const SynthSpec& s) { return s.signature_repeats + s.distractor_mentions; }

class WordMaker {
 public:
  WordMaker(std::mt19937_64& rng, const Lexicon& lex) : rng_(rng), lex_(lex) {}

  std::string noun() { return fresh(std::string(1, pick("kmnprtvz"))); }
  std::string adjective() {
    static const char* suffixes[] = {"ous", "ive", "ful"};
    return fresh(suffixes[std::uniform_int_distribution<int>(0, 2)(rng_)]);
  }

 private:
  char pick(std::string_view chars) {
    return chars[std::uniform_int_distribution<std::size_t>(0, chars.size() - 1)(rng_)];
  }
  std::string fresh(const std::string& ending) {
    for (;;) {
      std::string w;
      for (int syl = 0; syl < 2; ++syl) {
        w += pick("bdfgklmnprstvz");
        w += pick("aeiou");
      }
      w += ending;
      if (lex_.find(w) != nullptr || lex_.is_stopword(w)) continue;
      if (used_.insert(w).second) return w;
    }
  }

  std::mt19937_64& rng_;
  const Lexicon& lex_;
  std::unordered_set<std::string> used_;
};

Eigen::VectorXd random_unit(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = gauss(rng);
  return v.normalized();
}

std::vector<std::string> split_words(const std::string& s) {
  std::istringstream ss(s);
  std::vector<std::string> out;
  for (std::string w; ss >> w;) out.push_back(w);
  return out;
}

}  // namespace

void SynthSpec::set(std::string_view key, std::string_view value) {
  if (key == "num_classes") num_classes = to_count(key, value);
  else if (key == "docs_per_class") docs_per_class = to_count(key, value);
  else if (key == "doc_len") doc_len = to_count(key, value);
  else if (key == "signatures_per_class") signatures_per_class = to_count(key, value);
  else if (key == "signature_repeats") signature_repeats = to_count(key, value);
  else if (key == "background_vocab") background_vocab = to_count(key, value);
  else if (key == "distractors") distractors = to_count(key, value);
  else if (key == "distractor_mentions") distractor_mentions = to_count(key, value);
  else if (key == "embedding_dim") embedding_dim = to_count(key, value);
  else if (key == "seed") seed = to_count(key, value);
  else throw ParseError("unknown synth spec key '" + std::string(key) + "'");
}

void SynthSpec::validate() const {
  if (num_classes < 2) throw ParameterError("synth: need at least two classes");
  if (docs_per_class == 0) throw ParameterError("synth: docs_per_class must be positive");
  if (signatures_per_class == 0 || signature_repeats == 0)
    throw ParameterError("synth: every document needs a signature mention");
  if (background_vocab < 4) throw ParameterError("synth: background_vocab must be at least 4");
  if (distractor_mentions > distractors)
    throw ParameterError("synth: distractor_mentions exceeds the distractor pool");
  if (embedding_dim == 0) throw ParameterError("synth: embedding_dim must be positive");
  // Signatures are two words; each sentence carries at most two phrases in eight tokens.
  if (doc_len < 3 * 2) throw ParameterError("synth: doc_len shorter than three signatures");
  const std::size_t sentences = (planted_mentions(*this) + 1) / 2;
  if (doc_len < 8 * sentences)
    throw ParameterError("synth: doc_len too short for the planted mentions");
}

SynthSpec SynthSpec::parse(std::istream& in) {
  SynthSpec spec;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view s = line;
    if (auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos)
      throw ParseError("synth spec line " + std::to_string(line_no) + ": expected key = value");
    spec.set(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  spec.validate();
  return spec;
}

SynthSpec SynthSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open synth spec " + path.string());
  return parse(in);
}

SynthCorpus generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const Lexicon& lex = Lexicon::shared();
  WordMaker maker(rng, lex);

  SynthCorpus out;
  std::vector<std::string> signature_words;
  out.signatures.resize(spec.num_classes);
  for (auto& sigs : out.signatures)
    for (std::size_t k = 0; k < spec.signatures_per_class; ++k) {
      std::string adj = maker.adjective(), noun = maker.noun();
      signature_words.push_back(adj);
      signature_words.push_back(noun);
      sigs.push_back(adj + " " + noun);
    }
  std::vector<std::string> distractors, background_nouns, background_adjs, other_words;
  for (std::size_t k = 0; k < spec.distractors; ++k) {
    std::string adj = maker.adjective(), noun = maker.noun();
    other_words.push_back(adj);
    other_words.push_back(noun);
    distractors.push_back(adj + " " + noun);
  }
  for (std::size_t k = 0; k < spec.background_vocab; ++k) background_nouns.push_back(maker.noun());
  for (std::size_t k = 0; k < std::max<std::size_t>(2, spec.background_vocab / 4); ++k)
    background_adjs.push_back(maker.adjective());
  other_words.insert(other_words.end(), background_nouns.begin(), background_nouns.end());
  other_words.insert(other_words.end(), background_adjs.begin(), background_adjs.end());
  other_words.insert(other_words.end(), kVerbs.begin(), kVerbs.end());

  // Signature words get mutually orthogonal directions while the dimension allows.
  out.embeddings = EmbeddingTable(spec.embedding_dim);
  std::vector<Eigen::VectorXd> basis;
  for (const std::string& w : signature_words) {
    Eigen::VectorXd v = random_unit(spec.embedding_dim, rng);
    if (basis.size() < spec.embedding_dim) {
      for (const Eigen::VectorXd& b : basis) v -= v.dot(b) * b;
      v.normalize();
      basis.push_back(v);
    }
    out.embeddings.set(w, v);
  }
  // Everything else lives in the complement of the signature subspace when one is left.
  for (const std::string& w : other_words) {
    Eigen::VectorXd v = random_unit(spec.embedding_dim, rng);
    if (basis.size() < spec.embedding_dim) {
      for (const Eigen::VectorXd& b : basis) v -= v.dot(b) * b;
      v.normalize();
    }
    out.embeddings.set(w, v);
  }

  auto uniform = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  auto background_np = [&]() {
    std::string np = background_nouns[uniform(background_nouns.size())];
    if (uniform(2) == 0) np = background_adjs[uniform(background_adjs.size())] + " " + np;
    return np;
  };
  auto sentence = [&](const std::string& a, const std::string& b) {
    return "The " + a + " " + kVerbs[uniform(kVerbs.size())] + "s the " + b + ".";
  };
  auto token_count = [](const std::string& np) { return split_words(np).size(); };

  out.corpus.class_names.clear();
  for (std::size_t c = 0; c < spec.num_classes; ++c) out.corpus.class_names.push_back("class" + std::to_string(c));

  std::size_t doc_index = 0;
  for (std::size_t i = 0; i < spec.docs_per_class; ++i) {
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
      const std::string& sig = out.signatures[c][uniform(spec.signatures_per_class)];
      std::vector<std::string> planted(spec.signature_repeats, sig);
      std::vector<std::size_t> pool(distractors.size());
      std::iota(pool.begin(), pool.end(), 0);
      std::shuffle(pool.begin(), pool.end(), rng);
      for (std::size_t k = 0; k < spec.distractor_mentions; ++k) planted.push_back(distractors[pool[k]]);

      // Sentences hold two phrases and at most eight tokens each.
      const std::size_t sentences = std::max((planted.size() + 1) / 2, spec.doc_len / 8);
      std::vector<std::string> slots(2 * sentences);
      std::vector<std::size_t> positions(slots.size());
      std::iota(positions.begin(), positions.end(), 0);
      std::shuffle(positions.begin(), positions.end(), rng);
      for (std::size_t k = 0; k < planted.size(); ++k) slots[positions[k]] = planted[k];
      for (std::string& s : slots)
        if (s.empty()) s = background_np();

      std::string text;
      std::size_t tokens = 0;
      for (std::size_t s = 0; s < sentences; ++s) {
        if (!text.empty()) text += ' ';
        text += sentence(slots[2 * s], slots[2 * s + 1]);
        tokens += 4 + token_count(slots[2 * s]) + token_count(slots[2 * s + 1]);
      }
      while (tokens + 6 <= spec.doc_len) {
        std::string a = background_nouns[uniform(background_nouns.size())];
        std::string b = background_nouns[uniform(background_nouns.size())];
        text += ' ' + sentence(a, b);
        tokens += 6;
      }

      char id[32];
      std::snprintf(id, sizeof id, "syn%05zu", doc_index++);
      out.corpus.documents.push_back({id, text, c});
      out.gold[id] = sig;
    }
  }
  out.corpus.validate();
  return out;
}

void write_synthetic(const SynthCorpus& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_corpus(s.corpus, dir / "corpus.jsonl");
  {
    std::ofstream out(dir / "embeddings.txt");
    if (!out) throw ValidationError("cannot write " + (dir / "embeddings.txt").string());
    s.embeddings.write(out);
  }
  std::ofstream out(dir / "gold.json");
  if (!out) throw ValidationError("cannot write " + (dir / "gold.json").string());
  out << nlohmann::json(s.gold).dump(1) << '\n';
}

std::map<std::string, std::string> load_gold(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open gold file " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    return j.get<std::map<std::string, std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("gold file " + path.string() + ": " + e.what());
  }
}

double planted_concept_recall(const std::map<std::string, ConceptGraph>& generated,
                              const std::map<std::string, std::string>& gold) {
  if (generated.size() != gold.size()) throw ContractError("recall: document sets differ");
  if (gold.empty()) throw ContractError("recall: no documents");
  std::size_t hits = 0;
  for (const auto& [id, phrase] : gold) {
    auto it = generated.find(id);
    if (it == generated.end()) throw ContractError("recall: no graph for " + id);
    const std::vector<std::string> want = split_words(phrase);
    for (const ConceptNode& node : it->second.nodes) {
      const std::vector<std::string> have = split_words(node.canonical);
      const std::set<std::string> have_set(have.begin(), have.end());
      if (std::all_of(want.begin(), want.end(), [&](const std::string& w) { return have_set.count(w) > 0; })) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

}  // namespace cmap
