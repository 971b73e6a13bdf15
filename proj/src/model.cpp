#include "cmap/model.hpp"

#include <fstream>
#include <numeric>
#include <random>
#include <utility>

#include "cmap/checkpoint.hpp"
#include "cmap/error.hpp"

namespace cmap {

using ad::Matrix;
using ad::Var;
using nlohmann::json;

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Neigh: return "neigh";
    case Variant::Path: return "path";
    case Variant::Init: return "init";
    case Variant::Var: return "var";
  }
  return "?";
}

Variant parse_variant(std::string_view s) {
  if (s == "neigh") return Variant::Neigh;
  if (s == "path") return Variant::Path;
  if (s == "init") return Variant::Init;
  if (s == "var") return Variant::Var;
  throw ParameterError("unknown variant '" + std::string(s) + "' (expected neigh|path|init|var)");
}

json ModelConfig::to_json() const {
  return {{"feature_dim", feature_dim}, {"hidden", hidden},         {"gnn_layers", gnn_layers},
          {"max_size", max_size},       {"num_classes", num_classes}, {"variant", to_string(variant)},
          {"lambda1", lambda1},         {"lambda2", lambda2},       {"sigma", rbf.sigma},
          {"t_prime", rbf.t_prime}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  try {
    ModelConfig c;
    c.feature_dim = j.at("feature_dim").get<Eigen::Index>();
    c.hidden = j.at("hidden").get<Eigen::Index>();
    c.gnn_layers = j.at("gnn_layers").get<std::size_t>();
    c.max_size = j.at("max_size").get<std::size_t>();
    c.num_classes = j.at("num_classes").get<std::size_t>();
    c.variant = parse_variant(j.at("variant").get<std::string>());
    c.lambda1 = j.at("lambda1").get<double>();
    c.lambda2 = j.at("lambda2").get<double>();
    c.rbf.sigma = j.at("sigma").get<double>();
    c.rbf.t_prime = j.at("t_prime").get<double>();
    return c;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed model config: ") + e.what());
  }
}

namespace {

AdjacencyKind kind_of(Variant v) { return v == Variant::Path ? AdjacencyKind::Path : AdjacencyKind::Neigh; }

void check_config(const ModelConfig& cfg) {
  if (cfg.feature_dim <= 0) throw ParameterError("feature_dim must be positive");
  if (cfg.hidden <= 0) throw ParameterError("hidden must be positive");
  if (cfg.gnn_layers == 0) throw ParameterError("gnn_layers must be positive");
  if (cfg.max_size == 0) throw ParameterError("max_size must be positive");
  if (cfg.lambda1 < 0.0 || cfg.lambda2 < 0.0) throw ParameterError("lambdas must be nonnegative");
  if (!(cfg.rbf.sigma > 0.0)) throw ParameterError("sigma must be positive");
}

}  // namespace

Model Model::create(const ModelConfig& cfg, std::uint64_t seed) {
  check_config(cfg);
  Model m;
  m.cfg_ = cfg;
  std::mt19937_64 rng(seed);
  EncoderParams::create(m.params_, "encoder", cfg.feature_dim, cfg.hidden, cfg.gnn_layers, rng);
  if (cfg.variant != Variant::Init)
    TranslatorParams::create(m.params_, "translator", cfg.hidden, cfg.hidden, cfg.max_size,
                             kind_of(cfg.variant), rng);
  PredictorParams::create(m.params_, "predictor", cfg.hidden, cfg.hidden, cfg.gnn_layers,
                          cfg.num_classes, rng);
  m.bind();
  return m;
}

Model Model::from_params(const ModelConfig& cfg, ad::ParamSet params) {
  check_config(cfg);
  Model m;
  m.cfg_ = cfg;
  m.params_ = std::move(params);
  m.bind();
  return m;
}

Model::Model(const Model& other) : cfg_(other.cfg_), params_(other.params_.clone()) { bind(); }

Model& Model::operator=(const Model& other) {
  if (this != &other) {
    cfg_ = other.cfg_;
    params_ = other.params_.clone();
    bind();
  }
  return *this;
}

void Model::bind() {
  encoder_ = EncoderParams::bind(params_, "encoder", cfg_.gnn_layers);
  if (cfg_.variant != Variant::Init)
    translator_ = TranslatorParams::bind(params_, "translator", cfg_.max_size, kind_of(cfg_.variant));
  predictor_ = PredictorParams::bind(params_, "predictor", cfg_.gnn_layers);
  if (encoder_.input_dim() != cfg_.feature_dim)
    throw ValidationError("checkpoint feature width does not match config");
  if (predictor_.num_classes() != cfg_.num_classes)
    throw ValidationError("checkpoint class count does not match config");
}

ForwardResult Model::forward(ad::Tape& tape, const Example& ex, const ForwardOptions& opt) {
  if (ex.label >= cfg_.num_classes) throw ContractError("example label out of range");
  if (ex.features.cols() != cfg_.feature_dim)
    throw ContractError("feature width " + std::to_string(ex.features.cols()) +
                        " does not match model width " + std::to_string(cfg_.feature_dim));
  ForwardResult r;
  EncodedGraph enc = encode(tape, ex.features, ex.adjacency, encoder_);
  Var cov, len;
  if (cfg_.variant == Variant::Init) {
    r.logits = predict(tape, enc.node_embeddings, tape.constant(ex.adjacency), predictor_);
    r.graph.selected.resize(ex.graph.size());
    std::iota(r.graph.selected.begin(), r.graph.selected.end(), 0);
    r.graph.soft_adjacency = ex.adjacency;
    cov = tape.constant(Matrix::Zero(1, 1));
    len = tape.constant(Matrix::Zero(1, 1));
  } else {
    TranslateConfig tc;
    tc.tau = opt.tau;
    tc.mode = opt.mode;
    tc.allow_eos = cfg_.variant == Variant::Var;
    tc.hard = opt.hard;
    tc.noise = opt.noise;
    tc.rbf = cfg_.rbf;
    Translation tr = translate(tape, enc, ex.graph, translator_, tc);
    r.logits = predict(tape, tr.node_embeddings, tr.soft_adjacency, predictor_);
    r.graph = std::move(tr.graph);
    cov = tr.coverage;
    len = tr.length;
  }
  Var cls = classification_loss(r.logits, ex.label);
  r.total = total_loss(cls, cov, len, cfg_.lambda1, cfg_.lambda2);
  r.losses = total_loss(cls.scalar(), cov.scalar(), len.scalar(), cfg_.lambda1, cfg_.lambda2);
  if (r.losses.total != r.total.scalar())
    throw NumericFault("loss breakdown does not reproduce the recorded total");
  Eigen::Index best = 0;
  r.logits.value().row(0).maxCoeff(&best);
  r.predicted = static_cast<std::size_t>(best);
  return r;
}

Inference Model::infer(const Example& ex) {
  ad::Tape tape;
  ForwardResult f = forward(tape, ex, ForwardOptions{});
  return {f.logits.value(), f.losses, std::move(f.graph), f.predicted};
}

json Model::to_checkpoint(const std::vector<std::string>& class_names) const {
  return {{"config", cfg_.to_json()}, {"class_names", class_names},
          {"params", ad::params_to_json(params_)}};
}

Model Model::from_checkpoint(const json& j, std::vector<std::string>* class_names) {
  try {
    ModelConfig cfg = ModelConfig::from_json(j.at("config"));
    if (class_names != nullptr) *class_names = j.at("class_names").get<std::vector<std::string>>();
    return from_params(cfg, ad::params_from_json(j.at("params")));
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what());
  }
}

void Model::save(const std::filesystem::path& path, const std::vector<std::string>& class_names) const {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write checkpoint " + path.string());
  out << to_checkpoint(class_names).dump() << '\n';
}

Model Model::load(const std::filesystem::path& path, std::vector<std::string>* class_names) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open checkpoint " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("checkpoint " + path.string() + ": " + e.what());
  }
  return from_checkpoint(j, class_names);
}

}  // namespace cmap
