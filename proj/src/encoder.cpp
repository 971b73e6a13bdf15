#include "cmap/encoder.hpp"

#include "cmap/error.hpp"

namespace cmap {

EncoderParams EncoderParams::create(ad::ParamSet& params, const std::string& prefix,
                                    Eigen::Index input_dim, Eigen::Index hidden,
                                    std::size_t num_layers, std::mt19937_64& rng) {
  if (num_layers == 0) throw ParameterError("encoder needs at least one layer");
  if (input_dim <= 0 || hidden <= 0) throw ParameterError("encoder widths must be positive");
  EncoderParams p;
  Eigen::Index in = input_dim;
  for (std::size_t k = 0; k < num_layers; ++k) {
    p.layers.push_back(&params.add(prefix + ".w" + std::to_string(k), ad::xavier(in, hidden, rng)));
    in = hidden;
  }
  return p;
}

EncoderParams EncoderParams::bind(ad::ParamSet& params, const std::string& prefix,
                                  std::size_t num_layers) {
  EncoderParams p;
  for (std::size_t k = 0; k < num_layers; ++k)
    p.layers.push_back(&params.at(prefix + ".w" + std::to_string(k)));
  return p;
}

ad::Var gcn_stack(ad::Var features, ad::Var normalized,
                  const std::vector<ad::Parameter*>& layers) {
  if (layers.empty()) throw ContractError("gcn_stack: no layers");
  if (features.cols() != layers.front()->value.rows())
    throw ContractError("gcn_stack: feature width " + std::to_string(features.cols()) +
                        " does not match layer input " +
                        std::to_string(layers.front()->value.rows()));
  if (normalized.rows() != features.rows() || normalized.cols() != features.rows())
    throw ContractError("gcn_stack: adjacency does not match node count");
  ad::Tape& tape = *features.tape();
  ad::Var q = features;
  for (ad::Parameter* w : layers) q = ad::relu(ad::matmul(normalized, ad::matmul(q, tape.param(*w))));
  return q;
}

EncodedGraph encode(ad::Tape& tape, const ad::Matrix& features, const ad::Matrix& adjacency,
                    const EncoderParams& params) {
  if (features.rows() == 0) throw ContractError("encode: empty graph");
  if (features.rows() != adjacency.rows())
    throw ContractError("encode: feature rows do not match adjacency");
  ad::Var norm = tape.constant(ad::normalize_adjacency(adjacency));
  ad::Var q = gcn_stack(tape.constant(features), norm, params.layers);
  return {q, ad::mean_rows(q)};
}

}  // namespace cmap
