#include "cmap/concept_graph.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "cmap/error.hpp"

namespace cmap {

// ---- ConceptGraph ----------------------------------------------------------

void ConceptGraph::set_edge(std::size_t i, std::size_t j, double w) {
  if (i == j) throw ContractError("self-edge on node " + std::to_string(i));
  if (i >= nodes.size() || j >= nodes.size()) throw ContractError("edge endpoint out of range");
  const auto key = std::minmax(i, j);
  if (w > 0.0) {
    edges[{key.first, key.second}] = w;
  } else {
    edges.erase({key.first, key.second});
  }
}

double ConceptGraph::weight(std::size_t i, std::size_t j) const {
  const auto key = std::minmax(i, j);
  auto it = edges.find({key.first, key.second});
  return it == edges.end() ? 0.0 : it->second;
}

ad::Matrix ConceptGraph::adjacency(bool binary) const {
  const auto n = static_cast<Eigen::Index>(nodes.size());
  ad::Matrix m = ad::Matrix::Zero(n, n);
  for (const auto& [key, w] : edges) {
    const double v = binary ? 1.0 : w;
    m(static_cast<Eigen::Index>(key.first), static_cast<Eigen::Index>(key.second)) = v;
    m(static_cast<Eigen::Index>(key.second), static_cast<Eigen::Index>(key.first)) = v;
  }
  return m;
}

void ConceptGraph::validate() const {
  std::set<std::string> seen;
  for (const ConceptNode& n : nodes) {
    if (n.canonical.empty()) throw ValidationError("node with empty canonical");
    if (!seen.insert(n.canonical).second) throw ValidationError("duplicate canonical: " + n.canonical);
  }
  for (const auto& [key, w] : edges) {
    if (key.first >= key.second) throw ValidationError("edge key must satisfy i < j");
    if (key.second >= nodes.size()) throw ValidationError("edge endpoint out of range");
    if (!(w > 0.0) || !std::isfinite(w)) throw ValidationError("edge weight must be positive");
  }
}

// ---- node extraction -------------------------------------------------------

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool has_alnum(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](unsigned char c) { return std::isalnum(c) != 0; });
}

struct MentionText {
  std::string canonical;
  std::size_t position = 0;
  bool pronoun_only = true;
};

MentionText mention_text(const AnnotationSet& ann, Span span) {
  MentionText m;
  bool first = true;
  for (std::size_t i = span.start; i < span.end; ++i) {
    const Token& t = ann.tokens[i];
    const std::string surface = lower(t.surface);
    const std::string lemma = lower(t.lemma.empty() ? t.surface : t.lemma);
    if (is_determiner(surface) || is_determiner(lemma) || !has_alnum(surface)) continue;
    if (!is_pronoun(surface) && t.pos.rfind("PRP", 0) != 0) m.pronoun_only = false;
    if (first) {
      m.position = i;
      first = false;
    } else {
      m.canonical += ' ';
    }
    m.canonical += lemma;
  }
  return m;
}

}  // namespace

std::vector<ConceptNode> extract_nodes(const AnnotationSet& ann) {
  // Coreference: every chain span maps to the canonical of the chain's
  // earliest non-pronoun mention.
  std::map<Span, std::string> chain_canonical;
  std::vector<std::pair<std::string, std::size_t>> chain_mentions;
  for (const auto& chain : ann.coref_chains) {
    std::vector<Span> sorted = chain;
    std::sort(sorted.begin(), sorted.end());
    std::string rep;
    for (const Span& s : sorted) {
      MentionText m = mention_text(ann, s);
      if (!m.canonical.empty() && !m.pronoun_only) {
        rep = m.canonical;
        break;
      }
    }
    if (rep.empty()) continue;
    for (const Span& s : sorted) {
      chain_canonical[s] = rep;
      MentionText m = mention_text(ann, s);
      if (!m.canonical.empty()) chain_mentions.emplace_back(rep, m.position);
    }
  }

  std::vector<std::string> order;  // canonicals in discovery order
  std::unordered_map<std::string, std::set<std::size_t>> positions;
  auto add = [&](const std::string& canonical, std::size_t pos) {
    auto [it, inserted] = positions.try_emplace(canonical);
    if (inserted) order.push_back(canonical);
    it->second.insert(pos);
  };

  for (const auto* layer : {&ann.noun_phrases, &ann.verb_phrases, &ann.adjectives}) {
    for (const Span& s : *layer) {
      MentionText m = mention_text(ann, s);
      if (m.canonical.empty()) continue;
      if (auto it = chain_canonical.find(s); it != chain_canonical.end()) {
        add(it->second, m.position);
      } else if (!m.pronoun_only) {
        add(m.canonical, m.position);
      }
    }
  }
  for (const auto& [canonical, pos] : chain_mentions) add(canonical, pos);

  std::vector<ConceptNode> nodes;
  for (const std::string& c : order) {
    ConceptNode n;
    n.canonical = c;
    n.mentions.assign(positions[c].begin(), positions[c].end());
    n.frequency = n.mentions.size();
    n.first_position = n.mentions.front();
    nodes.push_back(std::move(n));
  }
  std::stable_sort(nodes.begin(), nodes.end(), [](const ConceptNode& a, const ConceptNode& b) {
    return a.first_position < b.first_position;
  });
  if (nodes.empty()) spdlog::warn("degenerate document {}: no concept candidates", ann.doc_id);
  return nodes;
}

ConceptGraph link_sliding_window(std::vector<ConceptNode> nodes, std::size_t window, bool binary) {
  if (window < 2) throw ParameterError("sliding window must be at least 2 tokens");
  ConceptGraph g;
  g.nodes = std::move(nodes);
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    for (std::size_t j = i + 1; j < g.nodes.size(); ++j) {
      std::size_t count = 0;
      for (std::size_t p : g.nodes[i].mentions)
        for (std::size_t q : g.nodes[j].mentions)
          if ((p > q ? p - q : q - p) < window) ++count;
      if (count > 0) g.set_edge(i, j, binary ? 1.0 : static_cast<double>(count));
    }
  }
  return g;
}

ad::Matrix compute_node_features(const ConceptGraph& graph, const EmbeddingTable& emb,
                                 std::size_t doc_len) {
  if (graph.empty()) throw ContractError("compute_node_features: empty graph");
  if (doc_len == 0) throw ContractError("compute_node_features: doc_len must be positive");
  const auto n = static_cast<Eigen::Index>(graph.size());
  const auto dim = static_cast<Eigen::Index>(emb.dim());
  ad::Matrix f(n, dim + 2);
  Eigen::VectorXd freq(n), loc(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const ConceptNode& node = graph.nodes[static_cast<std::size_t>(i)];
    f.row(i).head(dim) = emb.phrase_mean(node.canonical).transpose();
    freq[i] = static_cast<double>(node.frequency);
    loc[i] = 1.0 - static_cast<double>(node.first_position) / static_cast<double>(doc_len);
  }
  auto minmax = [](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    const double lo = v.minCoeff(), hi = v.maxCoeff();
    if (hi - lo <= 0.0) return Eigen::VectorXd::Ones(v.size());
    return (v.array() - lo) / (hi - lo);
  };
  f.col(dim) = minmax(freq);
  f.col(dim + 1) = minmax(loc);
  return f;
}

// ---- baselines -------------------------------------------------------------

Eigen::VectorXd pagerank(const ad::Matrix& adjacency, double damping, double tol,
                         std::size_t max_iter) {
  if (!(damping > 0.0 && damping < 1.0)) throw ParameterError("damping must lie in (0, 1)");
  const Eigen::Index n = adjacency.rows();
  if (n == 0) return {};
  const Eigen::VectorXd deg = adjacency.colwise().sum().transpose();
  ad::Matrix w = adjacency;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (deg[j] > 0.0) w.col(j) /= deg[j];
  }
  Eigen::VectorXd s = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  const double base = (1.0 - damping) / static_cast<double>(n);
  for (std::size_t it = 0; it < max_iter; ++it) {
    Eigen::VectorXd next = (base + damping * (w * s).array()).matrix();
    const double diff = (next - s).lpNorm<1>();
    s = std::move(next);
    if (diff < tol) break;
  }
  return s;
}

double cooccurrence_weight(double count) { return count > 0.0 ? 1.0 - std::exp(-count) : 0.0; }

namespace {

std::vector<std::size_t> sentence_of_tokens(const AnnotationSet& ann) {
  std::vector<std::size_t> sent(ann.tokens.size(), 0);
  for (std::size_t s = 0; s < ann.sentences.size(); ++s)
    for (std::size_t i = ann.sentences[s].start; i < ann.sentences[s].end; ++i) sent[i] = s;
  return sent;
}

std::size_t sentence_cooccurrences(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b,
                                   const std::vector<std::size_t>& sent) {
  std::set<std::size_t> sa, sb;
  for (std::size_t p : a) sa.insert(sent[p]);
  for (std::size_t p : b) sb.insert(sent[p]);
  std::size_t c = 0;
  for (std::size_t s : sa) c += sb.count(s);
  return c;
}

void add_cooccurrence_edges(ConceptGraph& g, const AnnotationSet& ann) {
  const auto sent = sentence_of_tokens(ann);
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = i + 1; j < g.size(); ++j) {
      const auto c = sentence_cooccurrences(g.nodes[i].mentions, g.nodes[j].mentions, sent);
      if (c > 0) g.set_edge(i, j, cooccurrence_weight(static_cast<double>(c)));
    }
}

}  // namespace

ConceptGraph build_textrank_graph(const AnnotationSet& ann, const Lexicon& lex, std::size_t window,
                                  std::size_t top_n, double damping) {
  if (top_n < 1) throw ParameterError("top_n must be at least 1");
  if (window < 2) throw ParameterError("window must be at least 2");
  if (!(damping > 0.0 && damping < 1.0)) throw ParameterError("damping must lie in (0, 1)");

  std::vector<std::string> words;                       // distinct, first-occurrence order
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::vector<std::size_t>> positions;
  std::vector<std::size_t> sequence;                    // filtered token stream as word ids
  for (std::size_t i = 0; i < ann.tokens.size(); ++i) {
    const Token& t = ann.tokens[i];
    const std::string surface = lower(t.surface);
    if (!has_alnum(surface) || lex.is_stopword(surface) || t.pos == "CD") continue;
    const std::string key = lower(t.lemma.empty() ? t.surface : t.lemma);
    if (lex.is_stopword(key)) continue;
    auto [it, inserted] = index.try_emplace(key, words.size());
    if (inserted) {
      words.push_back(key);
      positions.emplace_back();
    }
    positions[it->second].push_back(i);
    sequence.push_back(it->second);
  }
  if (words.empty()) throw ValidationError("no eligible words for TextRank in " + ann.doc_id);

  const auto n = static_cast<Eigen::Index>(words.size());
  ad::Matrix adj = ad::Matrix::Zero(n, n);
  for (std::size_t i = 0; i < sequence.size(); ++i)
    for (std::size_t j = i + 1; j < sequence.size() && j - i < window; ++j)
      if (sequence[i] != sequence[j]) {
        adj(static_cast<Eigen::Index>(sequence[i]), static_cast<Eigen::Index>(sequence[j])) = 1.0;
        adj(static_cast<Eigen::Index>(sequence[j]), static_cast<Eigen::Index>(sequence[i])) = 1.0;
      }
  const Eigen::VectorXd score = pagerank(adj, damping);

  std::vector<std::size_t> rank(words.size());
  std::iota(rank.begin(), rank.end(), 0);
  std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
    return score[static_cast<Eigen::Index>(a)] > score[static_cast<Eigen::Index>(b)];
  });
  rank.resize(std::min(top_n, rank.size()));

  ConceptGraph g;
  for (std::size_t w : rank) {
    ConceptNode node;
    node.canonical = words[w];
    node.mentions = positions[w];
    node.frequency = node.mentions.size();
    node.first_position = node.mentions.front();
    g.nodes.push_back(std::move(node));
  }
  add_cooccurrence_edges(g, ann);
  return g;
}

std::vector<RankedPhrase> rank_by_frequency(const std::vector<ConceptNode>& nodes) {
  std::vector<const ConceptNode*> sorted;
  for (const ConceptNode& n : nodes) sorted.push_back(&n);
  std::stable_sort(sorted.begin(), sorted.end(), [](const ConceptNode* a, const ConceptNode* b) {
    if (a->frequency != b->frequency) return a->frequency > b->frequency;
    return a->first_position < b->first_position;
  });
  std::vector<RankedPhrase> out;
  for (const ConceptNode* n : sorted)
    out.push_back({n->canonical, static_cast<double>(n->frequency), n->mentions});
  return out;
}

ConceptGraph build_cooccurrence_graph(const std::vector<RankedPhrase>& phrases,
                                      const AnnotationSet& ann, std::size_t top_n) {
  if (top_n < 1) throw ParameterError("top_n must be at least 1");
  std::vector<const RankedPhrase*> sorted;
  for (const RankedPhrase& p : phrases) sorted.push_back(&p);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const RankedPhrase* a, const RankedPhrase* b) { return a->score > b->score; });

  std::vector<std::string> lemmas;
  for (const Token& t : ann.tokens) lemmas.push_back(lower(t.lemma.empty() ? t.surface : t.lemma));

  ConceptGraph g;
  std::set<std::string> used;
  for (const RankedPhrase* p : sorted) {
    if (g.size() == top_n) break;
    if (p->canonical.empty() || used.count(p->canonical) > 0) continue;
    ConceptNode node;
    node.canonical = p->canonical;
    if (!p->mentions.empty()) {
      node.mentions = p->mentions;
    } else {
      std::istringstream ss(p->canonical);
      std::vector<std::string> parts{std::istream_iterator<std::string>(ss), {}};
      for (std::size_t i = 0; i + parts.size() <= lemmas.size(); ++i) {
        if (std::equal(parts.begin(), parts.end(), lemmas.begin() + static_cast<std::ptrdiff_t>(i)))
          node.mentions.push_back(i);
      }
    }
    if (node.mentions.empty()) {
      spdlog::warn("phrase '{}' not found in {}; skipped", p->canonical, ann.doc_id);
      continue;
    }
    std::sort(node.mentions.begin(), node.mentions.end());
    node.frequency = node.mentions.size();
    node.first_position = node.mentions.front();
    used.insert(node.canonical);
    g.nodes.push_back(std::move(node));
  }
  if (g.size() < top_n)
    spdlog::warn("{}: only {} phrases available for top_n={}", ann.doc_id, g.size(), top_n);
  add_cooccurrence_edges(g, ann);
  return g;
}

}  // namespace cmap
