#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "cmap/autodiff.hpp"
#include "cmap/concept_graph.hpp"
#include "cmap/encoder.hpp"
#include "cmap/predictor.hpp"
#include "cmap/translator.hpp"

namespace cmap {

/// neigh/path: fixed-size translation with the named link generator.
/// init: no translation, the predictor sees the whole initial graph.
/// var: neigh links with EOS enabled, max_size becomes an upper bound.
enum class Variant { Neigh, Path, Init, Var };

std::string to_string(Variant v);
Variant parse_variant(std::string_view s);

struct ModelConfig {
  Eigen::Index feature_dim = 0;
  Eigen::Index hidden = 128;
  std::size_t gnn_layers = 2;
  std::size_t max_size = 10;
  std::size_t num_classes = 2;
  Variant variant = Variant::Neigh;
  double lambda1 = 1.0;
  double lambda2 = 0.1;
  RbfPenalty rbf;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

/// One preprocessed document: its initial graph and the matching inputs.
struct Example {
  std::string doc_id;
  std::size_t label = 0;
  ConceptGraph graph;
  ad::Matrix features;   // n x feature_dim
  ad::Matrix adjacency;  // n x n
};

struct ForwardResult {
  ad::Var total;
  ad::Var logits;
  LossBreakdown losses;
  TranslatedGraph graph;  // init: every node in order, no thetas
  std::size_t predicted = 0;
};

/// Plain-value result of an eval-mode pass; outlives the tape it came from.
struct Inference {
  ad::Matrix logits;
  LossBreakdown losses;
  TranslatedGraph graph;
  std::size_t predicted = 0;
};

struct ForwardOptions {
  Mode mode = Mode::Eval;
  double tau = 1.0;
  ad::GumbelNoise* noise = nullptr;
  bool hard = true;
};

class Model {
 public:
  static Model create(const ModelConfig& cfg, std::uint64_t seed);
  /// Rebinds to an existing parameter set (names must match the config).
  static Model from_params(const ModelConfig& cfg, ad::ParamSet params);

  Model(const Model& other);
  Model& operator=(const Model& other);
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  ForwardResult forward(ad::Tape& tape, const Example& ex, const ForwardOptions& opt);
  /// Eval-mode translation and prediction without gradient bookkeeping.
  Inference infer(const Example& ex);

  const ModelConfig& config() const { return cfg_; }
  ad::ParamSet& params() { return params_; }
  const ad::ParamSet& params() const { return params_; }

  /// {"config": ..., "class_names": [...], "params": manifest}
  nlohmann::json to_checkpoint(const std::vector<std::string>& class_names) const;
  static Model from_checkpoint(const nlohmann::json& j, std::vector<std::string>* class_names);
  void save(const std::filesystem::path& path, const std::vector<std::string>& class_names) const;
  static Model load(const std::filesystem::path& path, std::vector<std::string>* class_names);

 private:
  Model() = default;
  void bind();

  ModelConfig cfg_;
  ad::ParamSet params_;
  EncoderParams encoder_;
  TranslatorParams translator_;
  PredictorParams predictor_;
};

}  // namespace cmap
