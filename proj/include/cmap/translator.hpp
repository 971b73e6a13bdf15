#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "cmap/autodiff.hpp"
#include "cmap/concept_graph.hpp"
#include "cmap/encoder.hpp"

namespace cmap {

/// Marker for the end-of-sequence slot in a candidate ordering.
inline constexpr std::size_t kEos = std::numeric_limits<std::size_t>::max();

enum class AdjacencyKind { Neigh, Path };

struct PointerParams {
  ad::Parameter* v = nullptr;   // a x 1
  ad::Parameter* w1 = nullptr;  // d x a, candidate side
  ad::Parameter* w2 = nullptr;  // h x a, decoder side
};

struct TranslatorParams {
  AdjacencyKind kind = AdjacencyKind::Neigh;
  std::size_t max_size = 10;
  ad::GruWeights decoder;
  PointerParams pointer;
  ad::Parameter* eos = nullptr;  // 1 x d
  // neigh: two-layer MLP from the decoder state to max_size - 1 link logits
  ad::Parameter* mlp_w1 = nullptr;
  ad::Parameter* mlp_b1 = nullptr;
  ad::Parameter* mlp_w2 = nullptr;
  ad::Parameter* mlp_b2 = nullptr;
  // path: edge GRU over the previous link value, one sigmoid head
  ad::GruWeights edge;
  ad::Parameter* head_w = nullptr;
  ad::Parameter* head_b = nullptr;

  static TranslatorParams create(ad::ParamSet& params, const std::string& prefix,
                                 Eigen::Index embed_dim, Eigen::Index hidden,
                                 std::size_t max_size, AdjacencyKind kind, std::mt19937_64& rng);
  static TranslatorParams bind(ad::ParamSet& params, const std::string& prefix,
                               std::size_t max_size, AdjacencyKind kind);
  /// Width of the zero-padded link vector fed back into the decoder.
  Eigen::Index link_width() const { return static_cast<Eigen::Index>(max_size) - 1; }
};

struct RbfPenalty {
  double sigma = 4.0;
  double t_prime = 0.0;
};

/// exp(-(t - t')^2 / (2 sigma^2)).
double rbf(double t, const RbfPenalty& rbf);

/// Slot 0 is kEos; the rest are node indices by ascending first_position,
/// ties kept in node-list order.
std::vector<std::size_t> order_pseudo_sequence(const ConceptGraph& graph);

/// Pointer logits u_i = v . tanh(W1 Q_i + W2 h) with masked slots set to
/// kMaskedLogit. `projected` is Q_aug W1, computed once per document.
ad::Var pointer_logits(ad::Tape& tape, ad::Var projected, ad::Var h, const PointerParams& params,
                       const std::vector<bool>& mask);
/// Attention distribution over the candidates of Q_aug (1 x rows).
ad::Var pointer_step(ad::Tape& tape, ad::Var q_aug, ad::Var h, const PointerParams& params,
                     const std::vector<bool>& mask);

/// Sum over steps of sum_i min(p_t,i, c_t,i), c_t = p_0 + ... + p_{t-1}.
ad::Var coverage_loss(ad::Tape& tape, const std::vector<ad::Var>& attention_history);

/// Link vector to the t previously selected nodes, entries in (0, 1).
ad::Var adjacency_neigh(ad::Tape& tape, ad::Var h, std::size_t t, const TranslatorParams& params);
ad::Var adjacency_path(ad::Tape& tape, ad::Var h, std::size_t t, const TranslatorParams& params);

/// sum_t rbf(t) * eos_probs[t]; each entry is 1 x 1.
ad::Var length_penalty(ad::Tape& tape, const std::vector<ad::Var>& eos_probs,
                       const RbfPenalty& rbf);

enum class Mode { Train, Eval };

struct TranslateConfig {
  double tau = 1.0;
  Mode mode = Mode::Eval;
  /// Lets the decoder stop early on EOS; otherwise exactly
  /// min(max_size, n) nodes are produced.
  bool allow_eos = false;
  /// Straight-through one-hot selection; false keeps the soft Gumbel sample
  /// (used by gradient checks, where the hard forward is piecewise constant).
  bool hard = true;
  ad::GumbelNoise* noise = nullptr;  // required in train mode
  RbfPenalty rbf;
};

struct TranslatedGraph {
  std::vector<std::size_t> selected;          // node indices into the source graph
  std::vector<std::vector<double>> thetas;    // thetas[t] has t entries
  ad::Matrix soft_adjacency;                  // symmetric, zero diagonal
  std::optional<std::size_t> eos_step;        // step at which EOS was chosen
  bool forced_first = false;                  // EOS at step 0 was overridden

  std::size_t size() const { return selected.size(); }
};

struct Translation {
  TranslatedGraph graph;
  ad::Var node_embeddings;  // k x d, one row per selection
  ad::Var soft_adjacency;   // k x k
  ad::Var coverage;         // 1 x 1
  ad::Var length;           // 1 x 1
  std::vector<ad::Matrix> attention;  // p_t per step
};

Translation translate(ad::Tape& tape, const EncodedGraph& enc, const ConceptGraph& graph,
                      const TranslatorParams& params, const TranslateConfig& cfg);

/// Selected nodes with an edge (i, j) wherever theta > threshold (strict).
ConceptGraph assemble_graph(const TranslatedGraph& tg, const ConceptGraph& source,
                            double threshold = 0.5);

/// Per-document run record: size, EOS step and the forced-selection flag.
nlohmann::json run_record(const std::string& doc_id, const TranslatedGraph& tg,
                          const ConceptGraph& assembled);

}  // namespace cmap
