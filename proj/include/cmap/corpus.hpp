#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace cmap {

struct Document {
  std::string id;
  std::string text;
  std::size_t label = 0;
};

/// Labeled documents. Class indices follow first-seen order in the source file.
struct Corpus {
  std::vector<Document> documents;
  std::vector<std::string> class_names;

  std::size_t size() const { return documents.size(); }
  std::size_t num_classes() const { return class_names.size(); }
  /// Throws ValidationError on empty text, bad label or duplicate id.
  void validate() const;
};

/// Reads JSON lines {"id","text","label"}; blank lines are skipped.
Corpus parse_corpus(std::istream& in);
Corpus load_corpus(const std::filesystem::path& path);
void write_corpus(const Corpus& corpus, std::ostream& out);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

struct SplitRatios {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
};

struct Splits {
  std::vector<std::size_t> train;
  std::vector<std::size_t> valid;
  std::vector<std::size_t> test;

  bool operator==(const Splits&) const = default;
};

/// Seeded shuffle, then valid/test get floor(n * ratio) documents (at least one
/// when the ratio is nonzero) and train takes the remainder.
Splits split_corpus(const Corpus& corpus, SplitRatios ratios, std::uint64_t seed);

nlohmann::json splits_to_json(const Splits& splits);
Splits splits_from_json(const nlohmann::json& j);

/// Word vectors in GloVe text layout. Unknown words map to a zero vector.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim = 100);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }
  std::size_t duplicates() const { return duplicates_; }

  /// Inserts or replaces; replacing bumps the duplicate counter.
  void set(const std::string& word, Eigen::VectorXd v);
  bool contains(std::string_view word) const;
  /// Exact match first, then the lower-cased form, else the OOV vector.
  const Eigen::VectorXd& lookup(std::string_view word) const;
  const Eigen::VectorXd& oov_vector() const { return oov_; }
  /// Mean over whitespace-separated tokens (OOV tokens contribute zeros).
  Eigen::VectorXd phrase_mean(std::string_view phrase) const;

  void write(std::ostream& out) const;

 private:
  std::size_t dim_;
  std::unordered_map<std::string, Eigen::VectorXd> vectors_;
  std::vector<std::string> order_;
  Eigen::VectorXd oov_;
  std::size_t duplicates_ = 0;
};

EmbeddingTable parse_embeddings(std::istream& in, std::size_t dim);
EmbeddingTable load_embeddings(const std::filesystem::path& path, std::size_t dim);

}  // namespace cmap
