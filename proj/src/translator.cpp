#include "cmap/translator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "cmap/error.hpp"

namespace cmap {

using ad::Matrix;
using ad::Var;

TranslatorParams TranslatorParams::create(ad::ParamSet& params, const std::string& prefix,
                                          Eigen::Index embed_dim, Eigen::Index hidden,
                                          std::size_t max_size, AdjacencyKind kind,
                                          std::mt19937_64& rng) {
  if (max_size == 0) throw ParameterError("max_size must be at least 1");
  TranslatorParams p;
  p.kind = kind;
  p.max_size = max_size;
  const Eigen::Index links = p.link_width();
  p.decoder = ad::GruWeights::create(params, prefix + ".decoder", embed_dim + links, hidden, rng);
  p.pointer.v = &params.add(prefix + ".pointer.v", ad::xavier(hidden, 1, rng));
  p.pointer.w1 = &params.add(prefix + ".pointer.w1", ad::xavier(embed_dim, hidden, rng));
  p.pointer.w2 = &params.add(prefix + ".pointer.w2", ad::xavier(hidden, hidden, rng));
  p.eos = &params.add(prefix + ".eos", ad::xavier(1, embed_dim, rng));
  if (kind == AdjacencyKind::Neigh) {
    p.mlp_w1 = &params.add(prefix + ".neigh.w1", ad::xavier(hidden, hidden, rng));
    p.mlp_b1 = &params.add(prefix + ".neigh.b1", Matrix::Zero(1, hidden));
    p.mlp_w2 = &params.add(prefix + ".neigh.w2", ad::xavier(hidden, std::max<Eigen::Index>(links, 1), rng));
    p.mlp_b2 = &params.add(prefix + ".neigh.b2", Matrix::Zero(1, std::max<Eigen::Index>(links, 1)));
  } else {
    p.edge = ad::GruWeights::create(params, prefix + ".path.gru", 1, hidden, rng);
    p.head_w = &params.add(prefix + ".path.head_w", ad::xavier(hidden, 1, rng));
    p.head_b = &params.add(prefix + ".path.head_b", Matrix::Zero(1, 1));
  }
  return p;
}

TranslatorParams TranslatorParams::bind(ad::ParamSet& params, const std::string& prefix,
                                        std::size_t max_size, AdjacencyKind kind) {
  TranslatorParams p;
  p.kind = kind;
  p.max_size = max_size;
  p.decoder = ad::GruWeights::bind(params, prefix + ".decoder");
  p.pointer.v = &params.at(prefix + ".pointer.v");
  p.pointer.w1 = &params.at(prefix + ".pointer.w1");
  p.pointer.w2 = &params.at(prefix + ".pointer.w2");
  p.eos = &params.at(prefix + ".eos");
  if (kind == AdjacencyKind::Neigh) {
    p.mlp_w1 = &params.at(prefix + ".neigh.w1");
    p.mlp_b1 = &params.at(prefix + ".neigh.b1");
    p.mlp_w2 = &params.at(prefix + ".neigh.w2");
    p.mlp_b2 = &params.at(prefix + ".neigh.b2");
  } else {
    p.edge = ad::GruWeights::bind(params, prefix + ".path.gru");
    p.head_w = &params.at(prefix + ".path.head_w");
    p.head_b = &params.at(prefix + ".path.head_b");
  }
  return p;
}

double rbf(double t, const RbfPenalty& r) {
  if (!(r.sigma > 0.0)) throw ParameterError("rbf sigma must be positive");
  const double d = t - r.t_prime;
  return std::exp(-(d * d) / (2.0 * r.sigma * r.sigma));
}

std::vector<std::size_t> order_pseudo_sequence(const ConceptGraph& graph) {
  if (graph.empty()) throw ContractError("order_pseudo_sequence: empty graph");
  std::vector<std::size_t> idx(graph.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return graph.nodes[a].first_position < graph.nodes[b].first_position;
  });
  idx.insert(idx.begin(), kEos);
  return idx;
}

Var pointer_logits(ad::Tape& tape, Var projected, Var h, const PointerParams& params,
                   const std::vector<bool>& mask) {
  if (static_cast<Eigen::Index>(mask.size()) != projected.rows())
    throw ContractError("pointer_logits: mask size does not match candidates");
  Var hw = ad::matmul(h, tape.param(*params.w2));              // 1 x a
  Var act = ad::tanh(ad::add_row(projected, hw));               // n x a
  Var u = ad::transpose(ad::matmul(act, tape.param(*params.v)));  // 1 x n
  return ad::masked_fill(u, mask);
}

Var pointer_step(ad::Tape& tape, Var q_aug, Var h, const PointerParams& params,
                 const std::vector<bool>& mask) {
  Var projected = ad::matmul(q_aug, tape.param(*params.w1));
  return ad::softmax_rows(pointer_logits(tape, projected, h, params, mask));
}

Var coverage_loss(ad::Tape& tape, const std::vector<Var>& attention_history) {
  if (attention_history.empty()) throw ContractError("coverage_loss: empty history");
  std::vector<Var> terms;
  Var c = attention_history.front();
  for (std::size_t t = 1; t < attention_history.size(); ++t) {
    terms.push_back(ad::sum(ad::minimum(attention_history[t], c)));
    c = ad::add(c, attention_history[t]);
  }
  if (terms.empty()) return tape.constant(Matrix::Zero(1, 1));
  Var total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = ad::add(total, terms[i]);
  return total;
}

namespace {

void check_step(std::size_t t, const TranslatorParams& params) {
  if (t == 0) throw ContractError("adjacency: step must be at least 1");
  if (static_cast<Eigen::Index>(t) > params.link_width())
    throw ContractError("adjacency: step " + std::to_string(t) + " exceeds max_size - 1");
}

}  // namespace

Var adjacency_neigh(ad::Tape& tape, Var h, std::size_t t, const TranslatorParams& params) {
  check_step(t, params);
  Var hidden = ad::tanh(ad::add(ad::matmul(h, tape.param(*params.mlp_w1)), tape.param(*params.mlp_b1)));
  Var out = ad::sigmoid(ad::add(ad::matmul(hidden, tape.param(*params.mlp_w2)), tape.param(*params.mlp_b2)));
  return ad::slice_cols(out, 0, static_cast<Eigen::Index>(t));
}

Var adjacency_path(ad::Tape& tape, Var h, std::size_t t, const TranslatorParams& params) {
  check_step(t, params);
  Var state = h;
  Var x = tape.constant(Matrix::Ones(1, 1));
  std::vector<Var> links;
  for (std::size_t j = 0; j < t; ++j) {
    state = ad::gru_cell(tape, x, state, params.edge);
    Var link = ad::sigmoid(ad::add(ad::matmul(state, tape.param(*params.head_w)), tape.param(*params.head_b)));
    links.push_back(link);
    x = link;
  }
  return ad::concat_cols(links);
}

Var length_penalty(ad::Tape& tape, const std::vector<Var>& eos_probs, const RbfPenalty& r) {
  if (eos_probs.empty()) return tape.constant(Matrix::Zero(1, 1));
  Var total = ad::scale(eos_probs.front(), rbf(0.0, r));
  for (std::size_t t = 1; t < eos_probs.size(); ++t)
    total = ad::add(total, ad::scale(eos_probs[t], rbf(static_cast<double>(t), r)));
  return total;
}

namespace {

std::size_t argmax_row(const Matrix& m) {
  Eigen::Index best = 0;
  m.row(0).maxCoeff(&best);
  return static_cast<std::size_t>(best);
}

}  // namespace

Translation translate(ad::Tape& tape, const EncodedGraph& enc, const ConceptGraph& graph,
                      const TranslatorParams& params, const TranslateConfig& cfg) {
  const std::vector<std::size_t> order = order_pseudo_sequence(graph);
  const std::size_t n = graph.size();
  if (enc.node_embeddings.rows() != static_cast<Eigen::Index>(n))
    throw ContractError("translate: embeddings do not match graph size");
  if (cfg.mode == Mode::Train && cfg.noise == nullptr)
    throw ContractError("translate: train mode needs a noise source");
  const Eigen::Index d = enc.node_embeddings.cols();
  const Eigen::Index links = params.link_width();

  std::vector<std::size_t> node_order(order.begin() + 1, order.end());
  Var eos_row = tape.param(*params.eos);
  Var parts[] = {eos_row, ad::gather_rows(enc.node_embeddings, node_order)};
  Var q_aug = ad::concat_rows(parts);
  Var projected = ad::matmul(q_aug, tape.param(*params.pointer.w1));

  std::vector<bool> mask(n + 1, false);
  if (!cfg.allow_eos) mask[0] = true;

  Translation out;
  TranslatedGraph& tg = out.graph;
  Var h = enc.graph_embedding;
  Var x = tape.constant(Matrix::Zero(1, d + links));
  std::vector<Var> history, eos_probs, q_rows, theta_vars;
  const std::size_t limit = std::min(params.max_size, n);

  for (std::size_t t = 0; tg.selected.size() < limit; ++t) {
    h = ad::gru_cell(tape, x, h, params.decoder);
    Var logits = pointer_logits(tape, projected, h, params.pointer, mask);
    Var p = ad::softmax_rows(logits);
    history.push_back(p);
    out.attention.push_back(p.value());
    if (cfg.allow_eos) eos_probs.push_back(ad::element(p, 0, 0));

    auto select = [&](Var lg, std::size_t& idx) -> Var {
      if (cfg.mode == Mode::Train) return ad::gumbel_softmax(lg, cfg.tau, cfg.noise, cfg.hard, &idx);
      idx = argmax_row(lg.value());
      Matrix onehot = Matrix::Zero(1, lg.cols());
      onehot(0, static_cast<Eigen::Index>(idx)) = 1.0;
      return tape.constant(std::move(onehot));
    };
    std::size_t idx = 0;
    Var y = select(logits, idx);
    if (idx == 0) {
      if (t > 0) {
        tg.eos_step = t;
        break;
      }
      std::vector<bool> no_eos = mask;
      no_eos[0] = true;
      y = select(ad::masked_fill(logits, no_eos), idx);
      tg.forced_first = true;
    }

    q_rows.push_back(ad::matmul(y, q_aug));
    tg.selected.push_back(node_order[idx - 1]);
    mask[idx] = true;

    const std::size_t k = tg.selected.size() - 1;  // links back to earlier nodes
    Var theta;
    if (k > 0) {
      theta = params.kind == AdjacencyKind::Neigh ? adjacency_neigh(tape, h, k, params)
                                                  : adjacency_path(tape, h, k, params);
      tg.thetas.emplace_back(theta.value().data(), theta.value().data() + k);
    } else {
      tg.thetas.emplace_back();
    }
    theta_vars.push_back(theta);

    std::vector<Var> xs = {q_rows.back()};
    if (k > 0) xs.push_back(theta);
    if (links - static_cast<Eigen::Index>(k) > 0)
      xs.push_back(tape.constant(Matrix::Zero(1, links - static_cast<Eigen::Index>(k))));
    x = ad::concat_cols(xs);
  }

  out.node_embeddings = ad::concat_rows(q_rows);
  out.soft_adjacency = ad::assemble_symmetric(tape, theta_vars);
  tg.soft_adjacency = out.soft_adjacency.value();
  out.coverage = coverage_loss(tape, history);
  out.length = length_penalty(tape, eos_probs, cfg.rbf);
  return out;
}

ConceptGraph assemble_graph(const TranslatedGraph& tg, const ConceptGraph& source,
                            double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw ParameterError("assemble threshold must lie in (0, 1)");
  ConceptGraph g;
  for (std::size_t idx : tg.selected) {
    if (idx >= source.size()) throw ContractError("assemble_graph: selection out of range");
    g.nodes.push_back(source.nodes[idx]);
  }
  for (std::size_t t = 1; t < tg.thetas.size(); ++t)
    for (std::size_t j = 0; j < tg.thetas[t].size(); ++j)
      if (tg.thetas[t][j] > threshold) g.set_edge(j, t, tg.thetas[t][j]);
  return g;
}

nlohmann::json run_record(const std::string& doc_id, const TranslatedGraph& tg,
                          const ConceptGraph& assembled) {
  nlohmann::json j = {{"doc_id", doc_id},
                      {"size", tg.size()},
                      {"edges", assembled.edges.size()},
                      {"edgeless", assembled.edges.empty() && tg.size() > 1},
                      {"forced_first", tg.forced_first}};
  j["eos_step"] = tg.eos_step ? nlohmann::json(*tg.eos_step) : nlohmann::json(nullptr);
  return j;
}

}  // namespace cmap
