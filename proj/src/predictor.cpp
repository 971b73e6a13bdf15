#include "cmap/predictor.hpp"

#include "cmap/encoder.hpp"
#include "cmap/error.hpp"

namespace cmap {

using ad::Matrix;
using ad::Var;

PredictorParams PredictorParams::create(ad::ParamSet& params, const std::string& prefix,
                                        Eigen::Index input_dim, Eigen::Index hidden,
                                        std::size_t num_layers, std::size_t num_classes,
                                        std::mt19937_64& rng) {
  if (num_classes < 2) throw ParameterError("predictor needs at least two classes");
  PredictorParams p;
  p.layers = EncoderParams::create(params, prefix + ".gin", input_dim, hidden, num_layers, rng).layers;
  const auto c = static_cast<Eigen::Index>(num_classes);
  p.w1 = &params.add(prefix + ".mlp.w1", ad::xavier(hidden, hidden, rng));
  p.b1 = &params.add(prefix + ".mlp.b1", Matrix::Zero(1, hidden));
  p.w2 = &params.add(prefix + ".mlp.w2", ad::xavier(hidden, c, rng));
  p.b2 = &params.add(prefix + ".mlp.b2", Matrix::Zero(1, c));
  return p;
}

PredictorParams PredictorParams::bind(ad::ParamSet& params, const std::string& prefix,
                                      std::size_t num_layers) {
  PredictorParams p;
  p.layers = EncoderParams::bind(params, prefix + ".gin", num_layers).layers;
  p.w1 = &params.at(prefix + ".mlp.w1");
  p.b1 = &params.at(prefix + ".mlp.b1");
  p.w2 = &params.at(prefix + ".mlp.w2");
  p.b2 = &params.at(prefix + ".mlp.b2");
  return p;
}

Var predict(ad::Tape& tape, Var node_embeddings, Var adjacency, const PredictorParams& params) {
  if (node_embeddings.rows() == 0) throw ContractError("predict: empty graph");
  Var q = gcn_stack(node_embeddings, ad::gcn_normalize(adjacency), params.layers);
  Var pooled = ad::mean_rows(q);
  Var hidden = ad::relu(ad::add(ad::matmul(pooled, tape.param(*params.w1)), tape.param(*params.b1)));
  return ad::add(ad::matmul(hidden, tape.param(*params.w2)), tape.param(*params.b2));
}

Var classification_loss(Var logits, std::size_t label) {
  return ad::cross_entropy_logits(logits, label);
}

LossBreakdown total_loss(double cls, double cov, double len, double lambda1, double lambda2) {
  if (lambda1 < 0.0 || lambda2 < 0.0) throw ParameterError("loss weights must be nonnegative");
  return {cls, cov, len, cls + lambda1 * cov + lambda2 * len, lambda1, lambda2};
}

Var total_loss(Var cls, Var cov, Var len, double lambda1, double lambda2) {
  if (lambda1 < 0.0 || lambda2 < 0.0) throw ParameterError("loss weights must be nonnegative");
  return ad::add(ad::add(cls, ad::scale(cov, lambda1)), ad::scale(len, lambda2));
}

nlohmann::json to_json(const LossBreakdown& b) {
  return {{"cls", b.cls}, {"cov", b.cov}, {"len", b.len},
          {"total", b.total}, {"lambda1", b.lambda1}, {"lambda2", b.lambda2}};
}

LossBreakdown loss_breakdown_from_json(const nlohmann::json& j) {
  try {
    return {j.at("cls").get<double>(),   j.at("cov").get<double>(),
            j.at("len").get<double>(),   j.at("total").get<double>(),
            j.at("lambda1").get<double>(), j.at("lambda2").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed loss breakdown: ") + e.what());
  }
}

}  // namespace cmap
