// cmapgen: concept-map generation from labelled documents.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "cmap/annotation.hpp"
#include "cmap/corpus.hpp"
#include "cmap/error.hpp"
#include "cmap/experiments.hpp"
#include "cmap/export.hpp"
#include "cmap/synth.hpp"
#include "cmap/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cmap;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct DataArgs {
  std::string corpus;
  std::string annotations;  // empty: heuristic chunker
  std::string embeddings;
  std::size_t dim = 0;
  std::string method = "init";
  std::size_t window = 5;
  std::size_t top_n = 10;
  bool binary = false;
  double train_ratio = 0.8, valid_ratio = 0.1, test_ratio = 0.1;
};

void add_data_options(CLI::App* app, DataArgs& a, bool need_embeddings) {
  app->add_option("--corpus", a.corpus, "corpus JSONL (id, text, label)")->required();
  app->add_option("--annotations", a.annotations, "annotation JSONL; heuristic chunker when absent");
  auto* e = app->add_option("--embeddings", a.embeddings, "word vectors, one 'word v1 .. vd' per line");
  auto* d = app->add_option("--dim", a.dim, "embedding dimension");
  if (need_embeddings) {
    e->required();
    d->required();
  }
  app->add_option("--method", a.method, "initial graph builder: init|textrank|cooc");
  app->add_option("--window", a.window, "sliding window in tokens");
  app->add_option("--top-n", a.top_n, "nodes kept by textrank/cooc");
  app->add_flag("--binary", a.binary, "unit edge weights");
  app->add_option("--train-ratio", a.train_ratio);
  app->add_option("--valid-ratio", a.valid_ratio);
  app->add_option("--test-ratio", a.test_ratio);
}

struct Data {
  Corpus corpus;
  std::vector<AnnotationSet> anns;
  std::vector<Example> examples;
  Splits splits;
};

std::vector<AnnotationSet> annotations_for(const Corpus& corpus, const std::string& path) {
  if (path.empty()) return annotate_heuristic(corpus);
  return join_annotations(corpus, load_annotations(path));
}

GraphOptions graph_options(const DataArgs& a) {
  GraphOptions g;
  g.method = parse_graph_method(a.method);
  g.window = a.window;
  g.top_n = a.top_n;
  g.binary = a.binary;
  return g;
}

Data load_data(const DataArgs& a, std::uint64_t seed) {
  Data d;
  d.corpus = load_corpus(a.corpus);
  d.anns = annotations_for(d.corpus, a.annotations);
  const EmbeddingTable emb = load_embeddings(a.embeddings, a.dim);
  d.examples = make_examples(d.corpus, d.anns, emb, graph_options(a));
  d.splits = split_corpus(d.corpus, {a.train_ratio, a.valid_ratio, a.test_ratio}, seed);
  return d;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
}

TrainConfig load_config(const std::string& path, std::uint64_t seed, bool seed_given) {
  TrainConfig cfg = path.empty() ? TrainConfig{} : TrainConfig::load(path);
  if (seed_given) cfg.seed = seed;
  return cfg;
}

const std::vector<std::size_t>& split_by_name(const Splits& s, const std::string& name) {
  if (name == "train") return s.train;
  if (name == "valid") return s.valid;
  if (name == "test") return s.test;
  throw ParameterError("unknown split '" + name + "'");
}

ConceptGraph generated_graph(const Model& model, const Inference& f, const Example& ex,
                             double threshold) {
  if (model.config().variant == Variant::Init) return ex.graph;
  return assemble_graph(f.graph, ex.graph, threshold);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cmapgen: weakly supervised concept-map generation"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string log_level = "info";
  auto* seed_opt = app.add_option("--seed", seed, "random seed")->capture_default_str();
  app.add_option("--threads", threads, "worker threads for experiments")->capture_default_str();
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")->capture_default_str();

  // ingest
  auto* ingest = app.add_subcommand("ingest", "validate a corpus and write a normalized copy");
  std::string ingest_in, ingest_out, splits_out;
  double ratios[3] = {0.8, 0.1, 0.1};
  ingest->add_option("--corpus", ingest_in)->required();
  ingest->add_option("--out", ingest_out);
  ingest->add_option("--splits-out", splits_out, "write seeded train/valid/test indices");
  ingest->add_option("--train-ratio", ratios[0]);
  ingest->add_option("--valid-ratio", ratios[1]);
  ingest->add_option("--test-ratio", ratios[2]);

  // annotate
  auto* annotate = app.add_subcommand("annotate", "produce or validate annotation JSONL");
  std::string ann_corpus, ann_from, ann_out;
  bool ann_heuristic = false;
  annotate->add_option("--corpus", ann_corpus)->required();
  auto* heur = annotate->add_flag("--heuristic", ann_heuristic, "built-in chunker");
  auto* from = annotate->add_option("--from", ann_from, "existing annotation file to validate and join");
  heur->excludes(from);
  annotate->add_option("--out", ann_out)->required();

  // build-graphs
  auto* build = app.add_subcommand("build-graphs", "initial or baseline concept graphs");
  DataArgs build_args;
  std::string build_out;
  std::string build_format = "json";
  add_data_options(build, build_args, false);
  build->add_option("--out-dir", build_out)->required();
  build->add_option("--format", build_format, "dot|json");

  // train
  auto* trn = app.add_subcommand("train", "train a generator");
  DataArgs train_args;
  std::string config_path, variant, checkpoint_out, report_out;
  add_data_options(trn, train_args, true);
  trn->add_option("--config", config_path, "key=value training config");
  trn->add_option("--variant", variant, "neigh|path|init|var (overrides config)");
  trn->add_option("--checkpoint", checkpoint_out)->required();
  trn->add_option("--report", report_out, "training report JSON");

  // generate
  auto* gen = app.add_subcommand("generate", "write concept maps with a trained checkpoint");
  DataArgs gen_args;
  std::string gen_ckpt, gen_out, gen_format = "dot", gen_split = "all";
  add_data_options(gen, gen_args, true);
  gen->add_option("--checkpoint", gen_ckpt)->required();
  gen->add_option("--out-dir", gen_out)->required();
  gen->add_option("--format", gen_format, "dot|json");
  gen->add_option("--split", gen_split, "all|train|valid|test");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "accuracy of a checkpoint on a split");
  DataArgs eval_args;
  std::string eval_ckpt, eval_split = "test", eval_gold;
  add_data_options(eval, eval_args, true);
  eval->add_option("--checkpoint", eval_ckpt)->required();
  eval->add_option("--split", eval_split, "train|valid|test");
  eval->add_option("--gold", eval_gold, "planted-phrase gold file for recall");

  // experiment
  auto* exp = app.add_subcommand("experiment", "seed repeats, label efficiency, size distribution");
  DataArgs exp_args;
  std::string exp_kind, exp_config, exp_out;
  std::vector<std::uint64_t> exp_seeds = default_seeds();
  std::vector<double> exp_props = default_proportions();
  std::vector<std::size_t> exp_sizes = {10, 20, 30};
  exp->add_option("kind", exp_kind, "label-efficiency|size-dist|seed-repeats")
      ->required()
      ->check(CLI::IsMember({"label-efficiency", "size-dist", "seed-repeats"}));
  add_data_options(exp, exp_args, true);
  exp->add_option("--config", exp_config);
  exp->add_option("--seeds", exp_seeds);
  exp->add_option("--proportions", exp_props);
  exp->add_option("--max-sizes", exp_sizes);
  exp->add_option("--out", exp_out, "CSV (curves) or JSON (seed repeats)")->required();

  // synth
  auto* syn = app.add_subcommand("synth", "generate a planted-signature corpus");
  std::string synth_spec, synth_out;
  syn->add_option("--spec", synth_spec, "key=value synth spec; defaults when absent");
  syn->add_option("--out-dir", synth_out)->required();

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of the full loss");
  std::size_t gc_nodes = 4;
  gc->add_option("--nodes", gc_nodes)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    spdlog::set_default_logger(spdlog::stderr_color_mt("cmapgen"));
  } catch (const spdlog::spdlog_ex&) {
  }
  spdlog::set_level(spdlog::level::from_str(log_level));
  const bool seed_given = seed_opt->count() > 0;

  try {
    if (*ingest) {
      Corpus c = load_corpus(ingest_in);
      std::printf("%zu documents, %zu classes\n", c.size(), c.num_classes());
      if (!ingest_out.empty()) save_corpus(c, ingest_out);
      if (!splits_out.empty()) {
        Splits s = split_corpus(c, {ratios[0], ratios[1], ratios[2]}, seed);
        write_text(splits_out, splits_to_json(s).dump() + "\n");
        std::printf("split sizes %zu/%zu/%zu\n", s.train.size(), s.valid.size(), s.test.size());
      }
    } else if (*annotate) {
      Corpus c = load_corpus(ann_corpus);
      if (!ann_heuristic && ann_from.empty()) throw ParameterError("annotate needs --heuristic or --from");
      std::vector<AnnotationSet> anns = annotations_for(c, ann_heuristic ? std::string() : ann_from);
      std::ofstream out(ann_out);
      if (!out) throw ValidationError("cannot write " + ann_out);
      write_annotations(anns, out);
      std::printf("%zu annotation records\n", anns.size());
    } else if (*build) {
      if (build_format != "dot" && build_format != "json") throw ParameterError("format must be dot or json");
      Corpus c = load_corpus(build_args.corpus);
      std::vector<AnnotationSet> anns = annotations_for(c, build_args.annotations);
      const GraphOptions opt = graph_options(build_args);
      fs::create_directories(build_out);
      for (std::size_t i = 0; i < c.size(); ++i) {
        ConceptGraph g = build_graph(anns[i], Lexicon::shared(), opt);
        const std::string text = build_format == "dot" ? export_dot(g) + "\n" : export_json(g) + "\n";
        write_text(fs::path(build_out) / (c.documents[i].id + "." + build_format), text);
      }
      std::printf("%zu graphs written to %s\n", c.size(), build_out.c_str());
    } else if (*trn) {
      TrainConfig cfg = load_config(config_path, seed, seed_given);
      if (!variant.empty()) cfg.variant = parse_variant(variant);
      train_args.window = cfg.window;
      train_args.binary = train_args.binary || cfg.binary_edges;
      Data d = load_data(train_args, cfg.seed);
      TrainResult r = train(d.examples, d.splits, d.corpus.num_classes(), cfg);
      json ckpt = r.model.to_checkpoint(d.corpus.class_names);
      ckpt["train_config"] = cfg.to_json();
      write_text(checkpoint_out, ckpt.dump() + "\n");
      if (!report_out.empty()) write_text(report_out, r.report.to_json().dump(1) + "\n");
      std::printf("best epoch %s, valid accuracy %.4f, test accuracy %.4f\n",
                  r.report.best_epoch ? std::to_string(*r.report.best_epoch).c_str() : "-",
                  r.report.best_valid_accuracy, r.report.test_accuracy);
    } else if (*gen || *eval) {
      const bool is_gen = static_cast<bool>(*gen);
      DataArgs& a = is_gen ? gen_args : eval_args;
      std::vector<std::string> class_names;
      std::ifstream in(is_gen ? gen_ckpt : eval_ckpt);
      if (!in) throw ValidationError("cannot open checkpoint");
      json ckpt;
      try {
        in >> ckpt;
      } catch (const json::exception& e) {
        throw ParseError(std::string("checkpoint: ") + e.what());
      }
      Model model = Model::from_checkpoint(ckpt, &class_names);
      TrainConfig cfg;
      if (ckpt.contains("train_config")) {
        const json& tc = ckpt["train_config"];
        a.window = tc.value("window", a.window);
        a.binary = a.binary || tc.value("binary_edges", false);
        cfg.threshold = tc.value("threshold", cfg.threshold);
        cfg.seed = tc.value("seed", cfg.seed);
      }
      Data d = load_data(a, seed_given ? seed : cfg.seed);
      if (d.corpus.class_names != class_names)
        spdlog::warn("corpus class order differs from the checkpoint");
      if (is_gen) {
        if (gen_format != "dot" && gen_format != "json") throw ParameterError("format must be dot or json");
        std::vector<std::size_t> idx;
        if (gen_split == "all") {
          idx.resize(d.examples.size());
          std::iota(idx.begin(), idx.end(), 0);
        } else {
          idx = split_by_name(d.splits, gen_split);
          std::sort(idx.begin(), idx.end());
        }
        fs::create_directories(gen_out);
        std::string report;
        for (std::size_t i : idx) {
          const Example& ex = d.examples[i];
          const Inference f = model.infer(ex);
          ConceptGraph g = generated_graph(model, f, ex, cfg.threshold);
          const std::string text = gen_format == "dot" ? export_dot(g) + "\n" : export_json(g) + "\n";
          write_text(fs::path(gen_out) / (ex.doc_id + "." + gen_format), text);
          json rec = run_record(ex.doc_id, f.graph, g);
          rec["predicted"] = class_names.at(f.predicted);
          report += rec.dump() + "\n";
        }
        write_text(fs::path(gen_out) / "run_report.jsonl", report);
        std::printf("%zu concept maps written to %s\n", idx.size(), gen_out.c_str());
      } else {
        const std::vector<std::size_t>& idx = split_by_name(d.splits, eval_split);
        EvalResult r = evaluate(model, d.examples, idx);
        std::printf("accuracy %.4f on %zu documents\n", r.accuracy, idx.size());
        if (!eval_gold.empty()) {
          const std::map<std::string, std::string> all_gold = load_gold(eval_gold);
          std::map<std::string, ConceptGraph> generated;
          std::map<std::string, std::string> gold;
          for (std::size_t i : idx) {
            const Example& ex = d.examples[i];
            generated[ex.doc_id] = generated_graph(model, model.infer(ex), ex, cfg.threshold);
            gold[ex.doc_id] = all_gold.at(ex.doc_id);
          }
          std::printf("planted concept recall %.4f\n", planted_concept_recall(generated, gold));
        }
      }
    } else if (*exp) {
      TrainConfig cfg = load_config(exp_config, seed, seed_given);
      exp_args.window = cfg.window;
      exp_args.binary = exp_args.binary || cfg.binary_edges;
      Data d = load_data(exp_args, cfg.seed);
      if (exp_kind == "seed-repeats") {
        SeedRepeats r = run_seed_repeats(d.examples, d.splits, d.corpus.num_classes(), cfg, exp_seeds, threads);
        json j = {{"seeds", r.seeds}, {"accuracies", r.accuracies},
                  {"mean", r.summary.mean}, {"std", r.summary.std}};
        write_text(exp_out, j.dump(1) + "\n");
        std::printf("test accuracy %.4f +- %.4f\n", r.summary.mean, r.summary.std);
      } else if (exp_kind == "label-efficiency") {
        auto curve = run_label_efficiency(d.examples, d.splits, d.corpus.num_classes(), cfg,
                                          exp_props, exp_seeds, threads);
        write_text(exp_out, curve_csv(curve));
        std::printf("spearman rho %.4f\n", curve_spearman(curve));
      } else {
        cfg.variant = Variant::Var;
        auto dists = run_size_distribution(d.examples, d.splits, d.corpus.num_classes(), cfg,
                                           exp_sizes, threads);
        write_text(exp_out, size_csv(dists));
        for (const auto& dist : dists)
          std::printf("max %zu: mean size %.2f std %.2f\n", dist.max_size, dist.summary.mean,
                      dist.summary.std);
      }
    } else if (*syn) {
      SynthSpec spec = synth_spec.empty() ? SynthSpec{} : SynthSpec::load(synth_spec);
      if (seed_given) spec.seed = seed;
      SynthCorpus s = generate_synthetic(spec);
      write_synthetic(s, synth_out);
      std::printf("%zu documents, embedding dim %zu, written to %s\n", s.corpus.size(),
                  spec.embedding_dim, synth_out.c_str());
    } else if (*gc) {
      bool ok = true;
      for (Variant v : {Variant::Neigh, Variant::Path, Variant::Var, Variant::Init}) {
        ModelConfig mc;
        mc.feature_dim = 5;
        mc.hidden = 4;
        mc.max_size = gc_nodes > 1 ? gc_nodes - 1 : 1;
        mc.num_classes = 3;
        mc.variant = v;
        Example ex = toy_example(gc_nodes, mc.feature_dim, 1, seed);
        ad::GradCheckReport r = pipeline_grad_check(mc, ex, seed);
        std::printf("%-6s max relative error %.3e  %s\n", to_string(v).c_str(), r.max_rel_error,
                    r.passed ? "ok" : "FAILED");
        for (const auto& e : r.entries)
          if (!e.passed) std::printf("  %s: %.3e\n", e.name.c_str(), e.max_rel_error);
        ok = ok && r.passed;
      }
      return ok ? kOk : kNumeric;
    }
  } catch (const NumericFault& e) {
    spdlog::error("{}", e.what());
    return kNumeric;
  } catch (const ParameterError& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return kData;
  } catch (const std::out_of_range& e) {
    spdlog::error("{}", e.what());
    return kData;
  }
  return kOk;
}
