// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <thread>

#include <spdlog/spdlog.h>

#include "test_util.hpp"

#include "cmap/annotation.hpp"
#include "cmap/concept_graph.hpp"
#include "cmap/encoder.hpp"
#include "cmap/experiments.hpp"
#include "cmap/export.hpp"
#include "cmap/optim.hpp"
#include "cmap/predictor.hpp"
#include "cmap/synth.hpp"
#include "cmap/trainer.hpp"
#include "cmap/translator.hpp"

using namespace cmap;
using ad::Matrix;
using ad::Tape;

namespace {

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail, double seconds) {
  std::printf("%s  %-28s %s (%.1f s)\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str(), seconds);
  std::fflush(stdout);
  if (!ok) ++failures;
}

template <typename Fn>
void criterion(const std::string& name, Fn fn) {
  const auto start = std::chrono::steady_clock::now();
  bool ok = false;
  std::string detail;
  try {
    ok = fn(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report(name, ok, detail, secs);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

std::vector<std::size_t> random_perm(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

std::size_t threads() { return std::max(1u, std::thread::hardware_concurrency()); }

struct SynthData {
  SynthCorpus synth;
  std::vector<Example> examples;
};

SynthData load_synth(const SynthSpec& spec) {
  SynthData d;
  d.synth = generate_synthetic(spec);
  d.examples = make_examples(d.synth.corpus, annotate_heuristic(d.synth.corpus), d.synth.embeddings, {});
  return d;
}

// Hyperparameters for the desk-scale synthetic runs.
TrainConfig synthetic_config() {
  TrainConfig c;
  c.max_epochs = 50;
  c.patience = 0;
  c.lr = 0.003;
  c.batch_size = 8;
  c.hidden = 32;
  c.lambda1 = 0.1;
  c.anneal_rate = 0.05;
  return c;
}

// ---- criteria ----------------------------------------------------------------

bool gradient_suite(std::string& detail) {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  std::string worst_name;
  for (int trial = 0; trial < 3; ++trial)
    for (const testing::PrimitiveCase& pc : testing::primitive_cases(rng)) {
      const double e = testing::check_op(pc.inputs, pc.op, rng, 1e-5);
      if (e > worst) {
        worst = e;
        worst_name = pc.name;
      }
    }
  {
    ad::ParamSet ps;
    ad::GruWeights w = ad::GruWeights::create(ps, "gru", 3, 5, rng);
    for (std::size_t i = 0; i < ps.size(); ++i)
      ps[i].value = testing::random_matrix(ps[i].value.rows(), ps[i].value.cols(), rng);
    const Matrix x = testing::random_matrix(1, 3, rng), h = testing::random_matrix(1, 5, rng);
    const Matrix wout = testing::random_matrix(1, 5, rng);
    ad::GradCheckReport r = ad::grad_check(
        [&](Tape& t) { return ad::sum(ad::mul(ad::gru_cell(t, t.constant(x), t.constant(h), w), t.constant(wout))); },
        ps, 1e-5, 1e-4);
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      worst_name = "gru_cell";
    }
  }
  for (Variant v : {Variant::Neigh, Variant::Path, Variant::Var, Variant::Init}) {
    ModelConfig cfg;
    cfg.feature_dim = 5;
    cfg.hidden = 4;
    cfg.max_size = 3;
    cfg.num_classes = 3;
    cfg.variant = v;
    ad::GradCheckReport r = pipeline_grad_check(cfg, toy_example(4, 5, 1, 11), 3, 1e-5, 1e-4);
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      worst_name = "pipeline/" + to_string(v);
    }
  }
  detail = fmt("max rel err %.3g", worst) + " (" + worst_name + ") < 1e-4";
  return worst < 1e-4;
}

bool algebraic_invariants(std::string& detail) {
  std::mt19937_64 rng(77);
  double softmax_err = 0.0, norm_err = 0.0, equiv_err = 0.0, inv_err = 0.0, identity_err = 0.0;
  bool monotone = true, distinct = true;

  for (int trial = 0; trial < 50; ++trial) {
    Tape tape;
    Matrix s = ad::softmax_rows(tape.constant(testing::random_matrix(testing::random_dim(rng), testing::random_dim(rng), rng, -20, 20))).value();
    softmax_err = std::max(softmax_err, (s.rowwise().sum().array() - 1.0).abs().maxCoeff());
  }

  ad::ParamSet ps;
  EncoderParams enc = EncoderParams::create(ps, "encoder", 6, 8, 2, rng);
  PredictorParams pred = PredictorParams::create(ps, "predictor", 8, 16, 2, 4, rng);
  for (Eigen::Index n = 1; n <= 12; ++n) {
    const Matrix a = testing::random_adjacency(n, rng);
    Matrix brute(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        brute(i, j) = (a(i, j) + (i == j ? 1.0 : 0.0)) / std::sqrt((a.row(i).sum() + 1.0) * (a.row(j).sum() + 1.0));
    norm_err = std::max(norm_err, (ad::normalize_adjacency(a) - brute).cwiseAbs().maxCoeff());

    const Matrix x = testing::random_matrix(n, 6, rng);
    const Matrix p = testing::permutation_matrix(random_perm(static_cast<std::size_t>(n), rng));
    Tape tape;
    EncodedGraph e1 = encode(tape, x, a, enc), e2 = encode(tape, p * x, p * a * p.transpose(), enc);
    equiv_err = std::max(equiv_err, (p * e1.node_embeddings.value() - e2.node_embeddings.value()).cwiseAbs().maxCoeff());
    if (n <= 8) {
      const Matrix h = testing::random_matrix(n, 8, rng);
      const Matrix l1 = predict(tape, tape.constant(h), tape.constant(a), pred).value();
      const Matrix l2 = predict(tape, tape.constant(p * h), tape.constant(p * a * p.transpose()), pred).value();
      inv_err = std::max(inv_err, (l1 - l2).cwiseAbs().maxCoeff());
    }
  }

  for (Variant v : {Variant::Neigh, Variant::Path, Variant::Var}) {
    ModelConfig cfg;
    cfg.feature_dim = 5;
    cfg.hidden = 8;
    cfg.max_size = 10;
    cfg.variant = v;
    Model m = Model::create(cfg, 5);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const Example ex = toy_example(3 + seed * 3, 5, seed % 2, seed);
      ad::GumbelNoise noise(seed);
      Tape tape;
      ForwardResult r = m.forward(tape, ex, {Mode::Train, 0.8, &noise, true});
      identity_err = std::max(identity_err, std::abs(r.losses.total - (r.losses.cls + cfg.lambda1 * r.losses.cov + cfg.lambda2 * r.losses.len)));
      identity_err = std::max(identity_err, std::abs(r.losses.total - r.total.scalar()));
      std::set<std::size_t> uniq(r.graph.selected.begin(), r.graph.selected.end());
      distinct = distinct && uniq.size() == r.graph.selected.size();

      Tape t2;
      EncodedGraph enc2 = encode(t2, ex.features, ex.adjacency, EncoderParams::bind(m.params(), "encoder", cfg.gnn_layers));
      Translation tr = translate(t2, enc2, ex.graph, TranslatorParams::bind(m.params(), "translator", cfg.max_size, v == Variant::Path ? AdjacencyKind::Path : AdjacencyKind::Neigh),
                                 {0.8, Mode::Train, v == Variant::Var, true, &noise, {}});
      Matrix cov = Matrix::Zero(1, tr.attention.front().cols());
      for (const Matrix& pt : tr.attention) {
        const Matrix next = cov + pt;
        monotone = monotone && ((next - cov).array() >= 0.0).all();
        cov = next;
      }
    }
  }

  const bool ok = softmax_err <= 1e-12 && norm_err <= 1e-10 && equiv_err <= 1e-10 && inv_err <= 1e-10 &&
                  identity_err <= 1e-12 && monotone && distinct;
  detail = fmt("softmax %.1e, norm %.1e, ", softmax_err, norm_err) +
           fmt("equivariance %.1e, invariance %.1e, ", equiv_err, inv_err) +
           fmt("loss identity %.1e", identity_err) + (monotone ? ", coverage monotone" : ", coverage NOT monotone") +
           (distinct ? ", selections distinct" : ", DUPLICATE selection");
  return ok;
}

bool closed_forms(std::string& detail) {
  const double cooc = cooccurrence_weight(1.0);
  const RbfPenalty r{4.0, 0.0};
  const double phi4 = rbf(4, r), phi8 = rbf(8, r);
  Tape tape;
  const double ce = classification_loss(tape.constant(Matrix::Zero(1, 5)), 2).scalar();
  const double err = std::max({std::abs(cooc - 0.632120558828558), std::abs(phi4 - 0.606530659712633),
                               std::abs(phi8 - 0.135335283236613), std::abs(ce - 1.6094379124341003)});
  detail = fmt("cooc %.6f, phi(4) %.6f, phi(8) %.6f", cooc, phi4, phi8) + fmt(", ln5 %.6f; max err %.1e", ce, err);
  return err < 1e-9;
}

bool textrank_oracle(std::string& detail) {
  std::mt19937_64 rng(31);
  double worst = 0.0;
  for (int trial = 0; trial < 3; ++trial)
    for (Eigen::Index n = 1; n <= 20; ++n) {
      const Matrix a = testing::random_adjacency(n, rng, 0.15 + 0.2 * trial);
      const Eigen::VectorXd s = pagerank(a, 0.85);
      Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
      for (Eigen::Index j = 0; j < n; ++j)
        if (a.col(j).sum() > 0) w.col(j) = a.col(j) / a.col(j).sum();
      const Eigen::VectorXd dense = (Eigen::MatrixXd::Identity(n, n) - 0.85 * w)
                                        .fullPivLu()
                                        .solve(Eigen::VectorXd::Constant(n, 0.15 / static_cast<double>(n)));
      worst = std::max(worst, (s - dense).cwiseAbs().maxCoeff());
    }
  detail = fmt("max |power - dense| %.2e over n <= 20", worst) + " < 1e-6";
  return worst < 1e-6;
}

bool synthetic_oracle(std::string& detail) {
  const SynthData d = load_synth({});
  const TrainConfig base = synthetic_config();
  const std::vector<std::uint64_t> seeds = default_seeds();
  std::vector<double> acc(seeds.size()), recall(seeds.size());
  parallel_for(seeds.size(), threads(), [&](std::size_t i) {
    TrainConfig c = base;
    c.seed = seeds[i];
    const Splits splits = split_corpus(d.synth.corpus, {}, seeds[i]);
    TrainResult tr = train(d.examples, splits, d.synth.corpus.num_classes(), c);
    acc[i] = tr.report.test_accuracy;
    std::map<std::string, ConceptGraph> generated;
    std::map<std::string, std::string> gold;
    for (std::size_t idx : splits.test) {
      const Example& ex = d.examples[idx];
      generated[ex.doc_id] = assemble_graph(tr.model.infer(ex).graph, ex.graph, base.threshold);
      gold[ex.doc_id] = d.synth.gold.at(ex.doc_id);
    }
    recall[i] = planted_concept_recall(generated, gold);
  });
  const MeanStd a = mean_std(acc), r = mean_std(recall);
  detail = fmt("test acc %.3f +- %.3f (>= 0.95), ", a.mean, a.std) +
           fmt("planted recall %.3f +- %.3f (>= 0.80) over 3 seeds, 50 epochs", r.mean, r.std);
  return a.mean >= 0.95 && r.mean >= 0.80;
}

bool flexibility(std::string& detail) {
  const SynthData d = load_synth({});
  TrainConfig c = synthetic_config();
  c.variant = Variant::Var;
  c.seed = 1;
  const Splits splits = split_corpus(d.synth.corpus, {}, 1);
  auto dists = run_size_distribution(d.examples, splits, 2, c, {10, 20, 30}, threads());
  bool bounded = true, spread = true;
  std::set<std::vector<std::size_t>> histograms;
  std::string stds;
  for (const SizeDistribution& s : dists) {
    for (std::size_t v : s.sizes) bounded = bounded && v <= s.max_size;
    spread = spread && s.summary.std > 0.0;
    histograms.insert(s.histogram);
    stds += fmt(" %.0f:", static_cast<double>(s.max_size)) + fmt("%.2f+-%.2f", s.summary.mean, s.summary.std);
  }
  const bool distinct = histograms.size() > 1;
  detail = std::string("sizes (mean+-std)") + stds + (bounded ? "; all <= max" : "; SIZE ABOVE MAX") +
           (distinct ? "; histograms differ" : "; histograms identical");
  return bounded && spread && distinct;
}

bool label_efficiency(std::string& detail) {
  // Large enough that the smallest proportion still leaves one document per class.
  SynthSpec spec;
  spec.docs_per_class = 1250;
  const SynthData d = load_synth(spec);
  const Splits splits = split_corpus(d.synth.corpus, {0.904, 0.016, 0.08}, 0);
  TrainConfig c = synthetic_config();
  c.patience = 10;
  const auto curve = run_label_efficiency(d.examples, splits, 2, c, default_proportions(), default_seeds(), threads());
  const double rho = curve_spearman(curve);
  std::size_t ran = 0;
  std::string points;
  for (const CurvePoint& p : curve) {
    if (p.skipped) continue;
    ++ran;
    points += fmt(" %.2f", p.summary.mean);
  }
  detail = fmt("%.0f/9 points, spearman rho %.3f (> 0.7); acc", static_cast<double>(ran), rho) + points;
  return ran == curve.size() && rho > 0.7;
}

bool determinism(std::string& detail) {
  SynthSpec spec;
  spec.docs_per_class = 20;
  const SynthData d = load_synth(spec);
  const Splits splits = split_corpus(d.synth.corpus, {}, 4);
  TrainConfig c = synthetic_config();
  c.max_epochs = 4;
  c.seed = 4;
  auto run = [&] {
    TrainResult tr = train(d.examples, splits, 2, c);
    std::string out = tr.report.to_json().dump() + tr.model.to_checkpoint(d.synth.corpus.class_names).dump();
    for (const Example& ex : d.examples) {
      ConceptGraph g = assemble_graph(tr.model.infer(ex).graph, ex.graph, c.threshold);
      out += export_dot(g) + export_json(g);
    }
    return out;
  };
  const std::string a = run(), b = run();
  detail = fmt("%.0f bytes of report, checkpoint and exports", static_cast<double>(a.size())) +
           (a == b ? " identical across runs" : " DIFFER across runs");
  return a == b;
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  criterion("gradient suite", gradient_suite);
  criterion("algebraic invariants", algebraic_invariants);
  criterion("closed-form values", closed_forms);
  criterion("textrank oracle", textrank_oracle);
  criterion("synthetic oracle", synthetic_oracle);
  criterion("flexibility", flexibility);
  criterion("label efficiency", label_efficiency);
  criterion("determinism", determinism);
  std::printf("%d failure(s)\n", failures);
  return failures == 0 ? 0 : 1;
}
