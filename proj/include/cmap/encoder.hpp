#pragma once

#include <random>
#include <string>
#include <vector>

#include "cmap/autodiff.hpp"

namespace cmap {

/// Bias-free GCN layer weights, layer k maps width(k) -> hidden.
struct EncoderParams {
  std::vector<ad::Parameter*> layers;

  static EncoderParams create(ad::ParamSet& params, const std::string& prefix,
                              Eigen::Index input_dim, Eigen::Index hidden, std::size_t num_layers,
                              std::mt19937_64& rng);
  static EncoderParams bind(ad::ParamSet& params, const std::string& prefix,
                            std::size_t num_layers);
  Eigen::Index input_dim() const { return layers.front()->value.rows(); }
  Eigen::Index hidden_dim() const { return layers.back()->value.cols(); }
};

struct EncodedGraph {
  ad::Var node_embeddings;  // n x d
  ad::Var graph_embedding;  // 1 x d, column mean of node_embeddings
};

/// Stack of ReLU(N Q W) layers over an already normalized adjacency N (n x n).
ad::Var gcn_stack(ad::Var features, ad::Var normalized, const std::vector<ad::Parameter*>& layers);

/// `adjacency` is the raw symmetric weight matrix; self-loops and
/// normalization are added here.
EncodedGraph encode(ad::Tape& tape, const ad::Matrix& features, const ad::Matrix& adjacency,
                    const EncoderParams& params);

}  // namespace cmap
