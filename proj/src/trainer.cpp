#include "cmap/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include <spdlog/spdlog.h>

#include "cmap/error.hpp"
#include "cmap/optim.hpp"

namespace cmap {

using nlohmann::json;

GraphMethod parse_graph_method(std::string_view s) {
  if (s == "init") return GraphMethod::Init;
  if (s == "textrank") return GraphMethod::TextRank;
  if (s == "cooc") return GraphMethod::Cooc;
  throw ParameterError("unknown graph method '" + std::string(s) + "' (expected init|textrank|cooc)");
}

std::string to_string(GraphMethod m) {
  switch (m) {
    case GraphMethod::Init: return "init";
    case GraphMethod::TextRank: return "textrank";
    case GraphMethod::Cooc: return "cooc";
  }
  return "?";
}

std::vector<AnnotationSet> annotate_heuristic(const Corpus& corpus, const Lexicon& lex) {
  std::vector<AnnotationSet> out;
  out.reserve(corpus.size());
  for (const Document& d : corpus.documents) out.push_back(chunk_heuristic(d, lex));
  return out;
}

ConceptGraph build_graph(const AnnotationSet& ann, const Lexicon& lex, const GraphOptions& opt) {
  switch (opt.method) {
    case GraphMethod::Init:
      return link_sliding_window(extract_nodes(ann), opt.window, opt.binary);
    case GraphMethod::TextRank:
      return build_textrank_graph(ann, lex, opt.window, opt.top_n);
    case GraphMethod::Cooc:
      return build_cooccurrence_graph(rank_by_frequency(extract_nodes(ann)), ann, opt.top_n);
  }
  throw ParameterError("unknown graph method");
}

std::vector<Example> make_examples(const Corpus& corpus, const std::vector<AnnotationSet>& anns,
                                   const EmbeddingTable& emb, const GraphOptions& opt,
                                   const Lexicon& lex) {
  if (anns.size() != corpus.size())
    throw ValidationError("annotation count does not match corpus size");
  std::vector<Example> out;
  out.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Document& doc = corpus.documents[i];
    if (anns[i].doc_id != doc.id)
      throw ValidationError("annotation order does not match corpus at " + doc.id);
    Example ex;
    ex.doc_id = doc.id;
    ex.label = doc.label;
    ex.graph = build_graph(anns[i], lex, opt);
    if (ex.graph.empty()) throw ValidationError("document " + doc.id + " produced an empty graph");
    ex.features = compute_node_features(ex.graph, emb, anns[i].tokens.size());
    ex.adjacency = ex.graph.adjacency(opt.binary);
    out.push_back(std::move(ex));
  }
  return out;
}

// ---- config ----------------------------------------------------------------

namespace {

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end)
    throw ParseError("config key '" + std::string(key) + "': bad value '" + std::string(value) + "'");
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ParseError("config key '" + std::string(key) + "': expected true/false");
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

void TrainConfig::set(std::string_view key, std::string_view value) {
  if (key == "lr") lr = parse_number<double>(key, value);
  else if (key == "max_epochs") max_epochs = parse_number<std::size_t>(key, value);
  else if (key == "batch_size") batch_size = parse_number<std::size_t>(key, value);
  else if (key == "hidden") hidden = parse_number<Eigen::Index>(key, value);
  else if (key == "gnn_layers") gnn_layers = parse_number<std::size_t>(key, value);
  else if (key == "max_size") max_size = parse_number<std::size_t>(key, value);
  else if (key == "lambda1") lambda1 = parse_number<double>(key, value);
  else if (key == "lambda2") lambda2 = parse_number<double>(key, value);
  else if (key == "tau0") tau0 = parse_number<double>(key, value);
  else if (key == "tau_min") tau_min = parse_number<double>(key, value);
  else if (key == "anneal_rate") anneal_rate = parse_number<double>(key, value);
  else if (key == "sigma") sigma = parse_number<double>(key, value);
  else if (key == "t_prime") t_prime = parse_number<double>(key, value);
  else if (key == "variant") variant = parse_variant(value);
  else if (key == "window") window = parse_number<std::size_t>(key, value);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "patience") patience = parse_number<std::size_t>(key, value);
  else if (key == "clip_norm") clip_norm = parse_number<double>(key, value);
  else if (key == "binary_edges") binary_edges = parse_bool(key, value);
  else if (key == "threshold") threshold = parse_number<double>(key, value);
  else throw ParseError("unknown config key '" + std::string(key) + "'");
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ParameterError("lr must be positive");
  if (batch_size == 0) throw ParameterError("batch_size must be positive");
  if (hidden <= 0) throw ParameterError("hidden must be positive");
  if (gnn_layers == 0) throw ParameterError("gnn_layers must be positive");
  if (max_size == 0) throw ParameterError("max_size must be positive");
  if (lambda1 < 0.0 || lambda2 < 0.0) throw ParameterError("lambdas must be nonnegative");
  if (!(tau0 > 0.0) || !(tau_min > 0.0)) throw ParameterError("temperatures must be positive");
  if (anneal_rate < 0.0) throw ParameterError("anneal_rate must be nonnegative");
  if (!(sigma > 0.0)) throw ParameterError("sigma must be positive");
  if (window < 2) throw ParameterError("window must be at least 2");
  if (!(clip_norm > 0.0)) throw ParameterError("clip_norm must be positive");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ParameterError("threshold must lie in (0, 1)");
}

json TrainConfig::to_json() const {
  return {{"lr", lr},           {"max_epochs", max_epochs},   {"batch_size", batch_size},
          {"hidden", hidden},   {"gnn_layers", gnn_layers},   {"max_size", max_size},
          {"lambda1", lambda1}, {"lambda2", lambda2},         {"tau0", tau0},
          {"tau_min", tau_min}, {"anneal_rate", anneal_rate}, {"sigma", sigma},
          {"t_prime", t_prime}, {"variant", to_string(variant)}, {"window", window},
          {"seed", seed},       {"patience", patience},       {"clip_norm", clip_norm},
          {"binary_edges", binary_edges}, {"threshold", threshold}};
}

ModelConfig TrainConfig::model_config(Eigen::Index feature_dim, std::size_t num_classes) const {
  ModelConfig m;
  m.feature_dim = feature_dim;
  m.hidden = hidden;
  m.gnn_layers = gnn_layers;
  m.max_size = max_size;
  m.num_classes = num_classes;
  m.variant = variant;
  m.lambda1 = lambda1;
  m.lambda2 = lambda2;
  m.rbf = {sigma, t_prime};
  return m;
}

TrainConfig TrainConfig::parse(std::istream& in) {
  TrainConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view s = line;
    if (auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos)
      throw ParseError("config line " + std::to_string(line_no) + ": expected key = value");
    cfg.set(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  return parse(in);
}

double anneal_temperature(std::size_t epoch, const TrainConfig& cfg) {
  return std::max(cfg.tau_min, cfg.tau0 * std::exp(-cfg.anneal_rate * static_cast<double>(epoch)));
}

// ---- reports ---------------------------------------------------------------

json TrainReport::to_json() const {
  json ep = json::array();
  for (const EpochRecord& e : epochs)
    ep.push_back({{"epoch", e.epoch},
                  {"tau", e.tau},
                  {"train_loss", e.train_loss},
                  {"train_accuracy", e.train_accuracy},
                  {"valid_loss", e.valid_loss},
                  {"valid_accuracy", e.valid_accuracy},
                  {"breakdown", cmap::to_json(e.breakdown)},
                  {"mean_size", e.mean_size}});
  return {{"epochs", ep},
          {"best_epoch", best_epoch ? json(*best_epoch) : json(nullptr)},
          {"best_valid_accuracy", best_valid_accuracy},
          {"test_accuracy", test_accuracy},
          {"steps", steps},
          {"stopped_early", stopped_early}};
}

// ---- train / evaluate ------------------------------------------------------

EvalResult evaluate(Model& model, const std::vector<Example>& examples,
                    const std::vector<std::size_t>& indices) {
  EvalResult r;
  if (indices.empty()) return r;
  std::size_t correct = 0;
  for (std::size_t i : indices) {
    const Example& ex = examples.at(i);
    const Inference f = model.infer(ex);
    if (f.predicted == ex.label) ++correct;
    r.loss += f.losses.total;
    r.sizes.push_back(f.graph.size());
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(indices.size());
  r.loss /= static_cast<double>(indices.size());
  return r;
}

TrainResult train(const std::vector<Example>& examples, const Splits& splits,
                  std::size_t num_classes, const TrainConfig& cfg) {
  cfg.validate();
  if (splits.train.empty()) throw ValidationError("empty training split");
  if (examples.empty()) throw ValidationError("no examples");
  const Eigen::Index feature_dim = examples.front().features.cols();

  Model model = Model::create(cfg.model_config(feature_dim, num_classes), cfg.seed);
  ad::AdamState adam = ad::AdamState::for_params(model.params(), ad::AdamOptions{.lr = cfg.lr});
  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  ad::GumbelNoise noise(cfg.seed + 1);

  TrainResult result{model, {}};
  TrainReport& report = result.report;
  double best_acc = -1.0;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::vector<std::size_t> order = splits.train;

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.tau = anneal_temperature(epoch, cfg);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    std::size_t correct = 0;
    double size_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double inv = 1.0 / static_cast<double>(end - start);
      model.params().zero_grad();
      for (std::size_t b = start; b < end; ++b) {
        const Example& ex = examples.at(order[b]);
        ad::Tape tape;
        ForwardResult f = model.forward(tape, ex, {Mode::Train, rec.tau, &noise, true});
        if (!std::isfinite(f.losses.total))
          throw NumericFault("loss diverged on " + ex.doc_id + " at epoch " + std::to_string(epoch));
        tape.backward(ad::scale(f.total, inv));
        rec.breakdown.cls += f.losses.cls;
        rec.breakdown.cov += f.losses.cov;
        rec.breakdown.len += f.losses.len;
        rec.breakdown.total += f.losses.total;
        if (f.predicted == ex.label) ++correct;
        size_sum += static_cast<double>(f.graph.size());
      }
      ad::clip_grad_norm(model.params(), cfg.clip_norm);
      ad::adam_step(model.params(), adam);
      ++report.steps;
    }
    const double n_train = static_cast<double>(order.size());
    rec.breakdown.cls /= n_train;
    rec.breakdown.cov /= n_train;
    rec.breakdown.len /= n_train;
    rec.breakdown.total /= n_train;
    rec.breakdown.lambda1 = cfg.lambda1;
    rec.breakdown.lambda2 = cfg.lambda2;
    rec.train_loss = rec.breakdown.total;
    rec.train_accuracy = static_cast<double>(correct) / n_train;
    rec.mean_size = size_sum / n_train;

    // Without a validation split the latest epoch counts as best.
    const bool has_valid = !splits.valid.empty();
    EvalResult valid = evaluate(model, examples, splits.valid);
    rec.valid_loss = valid.loss;
    rec.valid_accuracy = valid.accuracy;
    report.epochs.push_back(rec);
    spdlog::debug("epoch {} tau {:.3f} loss {:.4f} train acc {:.3f} valid acc {:.3f} size {:.2f}",
                  epoch, rec.tau, rec.train_loss, rec.train_accuracy, rec.valid_accuracy,
                  rec.mean_size);

    // Ties on accuracy go to the lower validation loss.
    const bool better = valid.accuracy > best_acc ||
                        (valid.accuracy == best_acc && valid.loss < best_loss);
    if (!has_valid || better) {
      best_acc = valid.accuracy;
      best_loss = valid.loss;
      report.best_epoch = epoch;
      report.best_valid_accuracy = valid.accuracy;
      result.model = model;
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      report.stopped_early = true;
      break;
    }
  }
  report.test_accuracy = evaluate(result.model, examples, splits.test).accuracy;
  return result;
}

}  // namespace cmap
