#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cmap/annotation.hpp"
#include "cmap/autodiff.hpp"
#include "cmap/corpus.hpp"

namespace cmap {

struct ConceptNode {
  std::string canonical;             // lemmatized, determiner-free mention text
  std::vector<std::size_t> mentions;  // token index of each mention's first kept token
  std::size_t frequency = 0;
  std::size_t first_position = 0;

  bool operator==(const ConceptNode&) const = default;
};

/// Undirected weighted graph over concept nodes. Edges are keyed (i, j) with i < j.
struct ConceptGraph {
  std::vector<ConceptNode> nodes;
  std::map<std::pair<std::size_t, std::size_t>, double> edges;
  bool directed = false;

  std::size_t size() const { return nodes.size(); }
  bool empty() const { return nodes.empty(); }
  /// Stores weight for {i, j}; zero or negative weights remove the edge.
  void set_edge(std::size_t i, std::size_t j, double w);
  double weight(std::size_t i, std::size_t j) const;
  /// Dense symmetric adjacency with zero diagonal.
  ad::Matrix adjacency(bool binary = false) const;
  /// Symmetry, no self-edges, positive weights, unique canonicals.
  void validate() const;

  bool operator==(const ConceptGraph&) const = default;
};

/// Basic noun phrases, then remaining verb phrases and adjectives, become
/// concept mentions. Determiners are dropped, tokens are replaced by lemmas,
/// coreference chains collapse onto their earliest non-pronoun mention and
/// equal canonicals merge into one node. Nodes come out ordered by first
/// position.
std::vector<ConceptNode> extract_nodes(const AnnotationSet& ann);

/// Edge between two nodes iff some pair of their mentions is closer than
/// `window` tokens; the weight counts such pairs (1.0 each in binary mode).
ConceptGraph link_sliding_window(std::vector<ConceptNode> nodes, std::size_t window,
                                 bool binary = false);

/// Rows are [phrase embedding | scaled frequency | scaled location], where
/// location = 1 - first_position / doc_len; both scalars are min-max scaled
/// over the graph and constant columns (including one-node graphs) map to 1.
ad::Matrix compute_node_features(const ConceptGraph& graph, const EmbeddingTable& emb,
                                 std::size_t doc_len);

// ---- unsupervised baselines -----------------------------------------------

/// Normalized PageRank s = (1-d)/n + d * W s with W_ij = A_ij / deg(j),
/// iterated until the L1 change drops below `tol`.
Eigen::VectorXd pagerank(const ad::Matrix& adjacency, double damping, double tol = 1e-8,
                         std::size_t max_iter = 10000);

/// Words -> co-occurrence weight w = 1 - exp(-c) for c > 0, else 0.
double cooccurrence_weight(double count);

/// TextRank keyword graph: window co-occurrence over non-stopword tokens,
/// PageRank, top_n words as nodes, edges weighted by sentence co-occurrence.
ConceptGraph build_textrank_graph(const AnnotationSet& ann, const Lexicon& lex, std::size_t window,
                                  std::size_t top_n, double damping = 0.85);

struct RankedPhrase {
  std::string canonical;
  double score = 0.0;
  /// Optional known mention positions; when empty they are located by
  /// matching the canonical against the token lemmas.
  std::vector<std::size_t> mentions;
};

/// Fallback phrase ranking: extracted nodes by frequency (desc), then position.
std::vector<RankedPhrase> rank_by_frequency(const std::vector<ConceptNode>& nodes);

/// Top-n phrases as nodes; edge weight from sentence-level co-occurrence.
ConceptGraph build_cooccurrence_graph(const std::vector<RankedPhrase>& phrases,
                                      const AnnotationSet& ann, std::size_t top_n);

}  // namespace cmap
