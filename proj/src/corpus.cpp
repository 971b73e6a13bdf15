#include "cmap/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "cmap/error.hpp"

namespace cmap {

using nlohmann::json;

void Corpus::validate() const {
  std::unordered_set<std::string> seen;
  for (const Document& d : documents) {
    if (d.text.empty()) throw ValidationError("document " + d.id + " has empty text");
    if (d.label >= class_names.size())
      throw ValidationError("document " + d.id + " has label index out of range");
    if (!seen.insert(d.id).second) throw ValidationError("duplicate document id: " + d.id);
  }
}

Corpus parse_corpus(std::istream& in) {
  Corpus corpus;
  std::unordered_map<std::string, std::size_t> class_index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); }))
      continue;
    Document doc;
    std::string label;
    try {
      const json j = json::parse(line);
      doc.id = j.at("id").get<std::string>();
      doc.text = j.at("text").get<std::string>();
      label = j.at("label").get<std::string>();
    } catch (const json::exception& e) {
      throw ParseError("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
    auto [it, inserted] = class_index.try_emplace(label, corpus.class_names.size());
    if (inserted) corpus.class_names.push_back(label);
    doc.label = it->second;
    corpus.documents.push_back(std::move(doc));
  }
  if (corpus.documents.empty()) throw ValidationError("empty corpus");
  corpus.validate();
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open corpus file " + path.string());
  return parse_corpus(in);
}

void write_corpus(const Corpus& corpus, std::ostream& out) {
  for (const Document& d : corpus.documents) {
    json j = {{"id", d.id}, {"text", d.text}, {"label", corpus.class_names.at(d.label)}};
    out << j.dump() << '\n';
  }
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  write_corpus(corpus, out);
}

Splits split_corpus(const Corpus& corpus, SplitRatios ratios, std::uint64_t seed) {
  const double total = ratios.train + ratios.valid + ratios.test;
  if (ratios.train <= 0.0 || ratios.valid < 0.0 || ratios.test < 0.0 ||
      std::abs(total - 1.0) > 1e-9)
    throw ParameterError("split ratios must be positive and sum to 1");
  const std::size_t n = corpus.size();
  const std::size_t nonzero = 1 + (ratios.valid > 0.0 ? 1 : 0) + (ratios.test > 0.0 ? 1 : 0);
  if (n < nonzero) throw ValidationError("insufficient data: corpus has " + std::to_string(n) +
                                         " documents for " + std::to_string(nonzero) + " splits");

  auto part = [n](double r) -> std::size_t {
    if (r <= 0.0) return 0;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(static_cast<double>(n) * r + 1e-9)));
  };
  const std::size_t n_valid = part(ratios.valid);
  const std::size_t n_test = part(ratios.test);
  if (n_valid + n_test >= n) throw ValidationError("insufficient data for the requested ratios");

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);

  Splits s;
  const std::size_t n_train = n - n_valid - n_test;
  s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.valid.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                 idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
  s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid), idx.end());
  return s;
}

json splits_to_json(const Splits& s) {
  return {{"train", s.train}, {"valid", s.valid}, {"test", s.test}};
}

Splits splits_from_json(const json& j) {
  try {
    Splits s;
    s.train = j.at("train").get<std::vector<std::size_t>>();
    s.valid = j.at("valid").get<std::vector<std::size_t>>();
    s.test = j.at("test").get<std::vector<std::size_t>>();
    return s;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed splits: ") + e.what());
  }
}

// ---- embeddings ------------------------------------------------------------

EmbeddingTable::EmbeddingTable(std::size_t dim) : dim_(dim), oov_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim))) {
  if (dim == 0) throw ParameterError("embedding dimension must be positive");
}

void EmbeddingTable::set(const std::string& word, Eigen::VectorXd v) {
  if (static_cast<std::size_t>(v.size()) != dim_)
    throw ValidationError("embedding for '" + word + "' has wrong length");
  auto [it, inserted] = vectors_.insert_or_assign(word, std::move(v));
  if (inserted) {
    order_.push_back(word);
  } else {
    ++duplicates_;
  }
}

bool EmbeddingTable::contains(std::string_view word) const {
  return vectors_.find(std::string(word)) != vectors_.end();
}

const Eigen::VectorXd& EmbeddingTable::lookup(std::string_view word) const {
  if (auto it = vectors_.find(std::string(word)); it != vectors_.end()) return it->second;
  std::string lower(word);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (auto it = vectors_.find(lower); it != vectors_.end()) return it->second;
  return oov_;
}

Eigen::VectorXd EmbeddingTable::phrase_mean(std::string_view phrase) const {
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_));
  std::istringstream ss{std::string(phrase)};
  std::string tok;
  std::size_t count = 0;
  while (ss >> tok) {
    acc += lookup(tok);
    ++count;
  }
  if (count > 0) acc /= static_cast<double>(count);
  return acc;
}

void EmbeddingTable::write(std::ostream& out) const {
  for (const std::string& w : order_) {
    const Eigen::VectorXd& v = vectors_.at(w);
    out << w;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      char buf[32];
      std::snprintf(buf, sizeof buf, " %.17g", v[i]);
      out << buf;
    }
    out << '\n';
  }
}

EmbeddingTable parse_embeddings(std::istream& in, std::size_t dim) {
  EmbeddingTable table(dim);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string word;
    if (!(ss >> word)) continue;
    std::vector<double> vals;
    std::string tok;
    while (ss >> tok) {
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ParseError("embedding row for '" + word + "' has a non-numeric entry");
      }
    }
    if (vals.size() != dim)
      throw ParseError("embedding row for '" + word + "' has " + std::to_string(vals.size()) +
                       " values, expected " + std::to_string(dim));
    table.set(word, Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(dim)));
  }
  if (table.duplicates() > 0)
    spdlog::warn("embedding file had {} duplicate words (last occurrence kept)", table.duplicates());
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, std::size_t dim) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open embedding file " + path.string());
  return parse_embeddings(in, dim);
}

}  // namespace cmap
