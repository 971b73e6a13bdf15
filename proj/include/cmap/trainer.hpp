#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "cmap/annotation.hpp"
#include "cmap/concept_graph.hpp"
#include "cmap/corpus.hpp"
#include "cmap/model.hpp"

namespace cmap {

// ---- preprocessing ---------------------------------------------------------

enum class GraphMethod { Init, TextRank, Cooc };
GraphMethod parse_graph_method(std::string_view s);
std::string to_string(GraphMethod m);

struct GraphOptions {
  GraphMethod method = GraphMethod::Init;
  std::size_t window = 5;
  std::size_t top_n = 10;   // textrank / cooc only
  bool binary = false;      // unit edge weights in the initial graph
};

/// Heuristic chunker over every document, in corpus order.
std::vector<AnnotationSet> annotate_heuristic(const Corpus& corpus,
                                              const Lexicon& lex = Lexicon::shared());

ConceptGraph build_graph(const AnnotationSet& ann, const Lexicon& lex, const GraphOptions& opt);

/// Graph, features and adjacency for every document, in corpus order.
/// Documents whose graph comes out empty are rejected with ValidationError.
std::vector<Example> make_examples(const Corpus& corpus, const std::vector<AnnotationSet>& anns,
                                   const EmbeddingTable& emb, const GraphOptions& opt,
                                   const Lexicon& lex = Lexicon::shared());

// ---- training --------------------------------------------------------------

struct TrainConfig {
  double lr = 3e-4;
  std::size_t max_epochs = 500;
  std::size_t batch_size = 64;
  Eigen::Index hidden = 128;
  std::size_t gnn_layers = 2;
  std::size_t max_size = 10;
  double lambda1 = 1.0;
  double lambda2 = 0.1;
  double tau0 = 5.0;
  double tau_min = 0.5;
  double anneal_rate = 0.01;
  double sigma = 4.0;
  double t_prime = 0.0;
  Variant variant = Variant::Neigh;
  std::size_t window = 5;
  std::uint64_t seed = 0;
  std::size_t patience = 25;  // 0 disables early stopping
  double clip_norm = 5.0;
  bool binary_edges = false;
  double threshold = 0.5;

  /// Applies one key=value setting; unknown keys and bad values throw.
  void set(std::string_view key, std::string_view value);
  void validate() const;
  nlohmann::json to_json() const;
  ModelConfig model_config(Eigen::Index feature_dim, std::size_t num_classes) const;

  /// Flat "key = value" lines; '#' starts a comment.
  static TrainConfig parse(std::istream& in);
  static TrainConfig load(const std::filesystem::path& path);
};

/// max(tau_min, tau0 * exp(-anneal_rate * epoch)).
double anneal_temperature(std::size_t epoch, const TrainConfig& cfg);

struct EpochRecord {
  std::size_t epoch = 0;
  double tau = 0.0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double valid_loss = 0.0;
  double valid_accuracy = 0.0;
  LossBreakdown breakdown;  // mean over training documents
  double mean_size = 0.0;   // mean translated size on the training documents
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::optional<std::size_t> best_epoch;  // none when no epoch ran
  double best_valid_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::size_t steps = 0;
  bool stopped_early = false;

  nlohmann::json to_json() const;
};

struct EvalResult {
  double accuracy = 0.0;
  double loss = 0.0;
  std::vector<std::size_t> sizes;  // translated graph size per document
};

/// Eval-mode (noise-free) translation and argmax classification. An empty
/// index list gives accuracy 0.
EvalResult evaluate(Model& model, const std::vector<Example>& examples,
                    const std::vector<std::size_t>& indices);

struct TrainResult {
  Model model;  // validation-best parameters
  TrainReport report;
};

/// Mini-batch Adam on the combined loss. Deterministic given cfg.seed.
TrainResult train(const std::vector<Example>& examples, const Splits& splits,
                  std::size_t num_classes, const TrainConfig& cfg);

}  // namespace cmap
