#pragma once

#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "cmap/autodiff.hpp"

namespace cmap {

/// GCN-shaped graph layers followed by a two-layer classifier MLP.
struct PredictorParams {
  std::vector<ad::Parameter*> layers;
  ad::Parameter* w1 = nullptr;  // d x hidden
  ad::Parameter* b1 = nullptr;
  ad::Parameter* w2 = nullptr;  // hidden x C
  ad::Parameter* b2 = nullptr;

  static PredictorParams create(ad::ParamSet& params, const std::string& prefix,
                                Eigen::Index input_dim, Eigen::Index hidden,
                                std::size_t num_layers, std::size_t num_classes,
                                std::mt19937_64& rng);
  static PredictorParams bind(ad::ParamSet& params, const std::string& prefix,
                              std::size_t num_layers);
  std::size_t num_classes() const { return static_cast<std::size_t>(w2->value.cols()); }
};

/// Logits (1 x C) for a graph given node embeddings (k x d) and a raw
/// symmetric adjacency (k x k); self-loops and normalization are added here.
ad::Var predict(ad::Tape& tape, ad::Var node_embeddings, ad::Var adjacency,
                const PredictorParams& params);

ad::Var classification_loss(ad::Var logits, std::size_t label);

struct LossBreakdown {
  double cls = 0.0;
  double cov = 0.0;
  double len = 0.0;
  double total = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;

  bool operator==(const LossBreakdown&) const = default;
};

/// total = cls + lambda1 * cov + lambda2 * len. Negative lambdas throw.
LossBreakdown total_loss(double cls, double cov, double len, double lambda1, double lambda2);
/// The same combination on the tape.
ad::Var total_loss(ad::Var cls, ad::Var cov, ad::Var len, double lambda1, double lambda2);

nlohmann::json to_json(const LossBreakdown& b);
LossBreakdown loss_breakdown_from_json(const nlohmann::json& j);

}  // namespace cmap
