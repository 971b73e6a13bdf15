#include "cmap/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <numeric>
#include <random>
#include <thread>

#include <spdlog/spdlog.h>

#include "cmap/error.hpp"

namespace cmap {

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd r;
  if (xs.empty()) return r;
  const double n = static_cast<double>(xs.size());
  r.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - r.mean) * (x - r.mean);
  r.std = std::sqrt(ss / n);
  return r;
}

namespace {

std::vector<double> ranks(const std::vector<double>& xs) {
  std::vector<std::size_t> idx(xs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> r(xs.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && xs[idx[j + 1]] == xs[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw ContractError("spearman: length mismatch");
  if (xs.size() < 2) return 0.0;
  const std::vector<double> rx = ranks(xs), ry = ranks(ys);
  const MeanStd mx = mean_std(rx), my = mean_std(ry);
  if (mx.std == 0.0 || my.std == 0.0) return 0.0;
  double cov = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) cov += (rx[i] - mx.mean) * (ry[i] - my.mean);
  cov /= static_cast<double>(rx.size());
  return cov / (mx.std * my.std);
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<std::uint64_t> default_seeds() { return {1, 2, 3}; }

SeedRepeats run_seed_repeats(const std::vector<Example>& examples, const Splits& splits,
                             std::size_t num_classes, const TrainConfig& cfg,
                             const std::vector<std::uint64_t>& seeds, std::size_t threads) {
  if (seeds.size() < 2) throw ParameterError("seed repeats need at least two seeds");
  SeedRepeats r;
  r.seeds = seeds;
  r.reports.resize(seeds.size());
  parallel_for(seeds.size(), threads, [&](std::size_t i) {
    TrainConfig c = cfg;
    c.seed = seeds[i];
    r.reports[i] = train(examples, splits, num_classes, c).report;
  });
  for (const TrainReport& rep : r.reports) r.accuracies.push_back(rep.test_accuracy);
  r.summary = mean_std(r.accuracies);
  return r;
}

std::vector<double> default_proportions() {
  return {0.001, 0.0025, 0.005, 0.0075, 0.01, 0.025, 0.05, 0.075, 0.10};
}

std::vector<std::size_t> stratified_subsample(const std::vector<Example>& examples,
                                              const std::vector<std::size_t>& indices,
                                              double proportion, std::uint64_t seed) {
  if (!(proportion > 0.0 && proportion <= 1.0))
    throw ParameterError("proportion must lie in (0, 1]");
  std::map<std::size_t, std::vector<std::size_t>> by_class;
  for (std::size_t i : indices) by_class[examples.at(i).label].push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> out;
  for (auto& [label, members] : by_class) {
    const auto take = static_cast<std::size_t>(
        std::floor(proportion * static_cast<double>(members.size()) + 1e-9));
    if (take == 0) return {};
    std::shuffle(members.begin(), members.end(), rng);
    out.insert(out.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<CurvePoint> run_label_efficiency(const std::vector<Example>& examples,
                                             const Splits& splits, std::size_t num_classes,
                                             const TrainConfig& cfg,
                                             const std::vector<double>& proportions,
                                             const std::vector<std::uint64_t>& seeds,
                                             std::size_t threads) {
  if (seeds.empty()) throw ParameterError("label efficiency needs at least one seed");
  for (std::size_t i = 0; i < proportions.size(); ++i) {
    if (!(proportions[i] > 0.0 && proportions[i] <= 1.0))
      throw ParameterError("proportions must lie in (0, 1]");
    if (i > 0 && proportions[i] <= proportions[i - 1])
      throw ParameterError("proportions must be ascending");
  }
  std::vector<CurvePoint> curve(proportions.size());
  std::vector<std::vector<std::size_t>> subsets(proportions.size());
  for (std::size_t p = 0; p < proportions.size(); ++p) {
    curve[p].proportion = proportions[p];
    subsets[p] = stratified_subsample(examples, splits.train, proportions[p], cfg.seed);
    curve[p].train_docs = subsets[p].size();
    if (subsets[p].empty()) {
      curve[p].skipped = true;
      spdlog::warn("proportion {} leaves a class without training documents; skipped",
                   proportions[p]);
    }
    curve[p].accuracies.assign(seeds.size(), 0.0);
  }
  const std::size_t jobs = proportions.size() * seeds.size();
  parallel_for(jobs, threads, [&](std::size_t job) {
    const std::size_t p = job / seeds.size(), s = job % seeds.size();
    if (curve[p].skipped) return;
    Splits sub = splits;
    sub.train = subsets[p];
    TrainConfig c = cfg;
    c.seed = seeds[s];
    curve[p].accuracies[s] = train(examples, sub, num_classes, c).report.test_accuracy;
  });
  for (CurvePoint& pt : curve)
    if (!pt.skipped) pt.summary = mean_std(pt.accuracies);
  return curve;
}

double curve_spearman(const std::vector<CurvePoint>& curve) {
  std::vector<double> xs, ys;
  for (const CurvePoint& pt : curve) {
    if (pt.skipped) continue;
    xs.push_back(pt.proportion);
    ys.push_back(pt.summary.mean);
  }
  return spearman(xs, ys);
}

std::string curve_csv(const std::vector<CurvePoint>& curve) {
  std::string out = "proportion,train_docs,mean_accuracy,std_accuracy,skipped\n";
  char buf[128];
  for (const CurvePoint& pt : curve) {
    std::snprintf(buf, sizeof buf, "%.4f,%zu,%.6f,%.6f,%d\n", pt.proportion, pt.train_docs,
                  pt.summary.mean, pt.summary.std, pt.skipped ? 1 : 0);
    out += buf;
  }
  return out;
}

std::size_t size_bucket(std::size_t size) { return size <= 5 ? 0 : (size - 1) / 5; }

std::string bucket_label(std::size_t bucket) {
  if (bucket == 0) return "0-5";
  return std::to_string(bucket * 5 + 1) + "-" + std::to_string(bucket * 5 + 5);
}

std::vector<SizeDistribution> run_size_distribution(const std::vector<Example>& examples,
                                                    const Splits& splits,
                                                    std::size_t num_classes,
                                                    const TrainConfig& cfg,
                                                    const std::vector<std::size_t>& max_sizes,
                                                    std::size_t threads) {
  if (cfg.variant != Variant::Var) throw ParameterError("size distribution needs variant=var");
  std::vector<SizeDistribution> out(max_sizes.size());
  parallel_for(max_sizes.size(), threads, [&](std::size_t i) {
    TrainConfig c = cfg;
    c.max_size = max_sizes[i];
    TrainResult tr = train(examples, splits, num_classes, c);
    EvalResult ev = evaluate(tr.model, examples, splits.test);
    SizeDistribution& d = out[i];
    d.max_size = max_sizes[i];
    d.sizes = ev.sizes;
    d.test_accuracy = ev.accuracy;
    d.histogram.assign(size_bucket(max_sizes[i]) + 1, 0);
    std::vector<double> as_double;
    for (std::size_t s : d.sizes) {
      ++d.histogram[size_bucket(s)];
      as_double.push_back(static_cast<double>(s));
    }
    d.summary = mean_std(as_double);
  });
  return out;
}

std::string size_csv(const std::vector<SizeDistribution>& dists) {
  std::string out = "max_size,bucket,count\n";
  for (const SizeDistribution& d : dists)
    for (std::size_t b = 0; b < d.histogram.size(); ++b)
      out += std::to_string(d.max_size) + "," + bucket_label(b) + "," +
             std::to_string(d.histogram[b]) + "\n";
  return out;
}

// ---- gradient check --------------------------------------------------------

Example toy_example(std::size_t n, Eigen::Index feature_dim, std::size_t label, std::uint64_t seed) {
  if (n == 0) throw ParameterError("toy example needs at least one node");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Example ex;
  ex.doc_id = "toy";
  ex.label = label;
  for (std::size_t i = 0; i < n; ++i) {
    ConceptNode node;
    node.canonical = "c" + std::to_string(i);
    node.first_position = (i * 7 + 3) % (n * 2 + 1);
    node.mentions = {node.first_position};
    node.frequency = 1;
    ex.graph.nodes.push_back(node);
  }
  for (std::size_t i = 0; i + 1 < n; ++i) ex.graph.set_edge(i, i + 1, 1.0 + unit(rng));
  ex.features = ad::Matrix(static_cast<Eigen::Index>(n), feature_dim);
  for (Eigen::Index i = 0; i < ex.features.size(); ++i) ex.features.data()[i] = unit(rng) - 0.5;
  ex.adjacency = ex.graph.adjacency();
  return ex;
}

ad::GradCheckReport pipeline_grad_check(const ModelConfig& cfg, const Example& ex,
                                        std::uint64_t seed, double epsilon, double tolerance) {
  Model model = Model::create(cfg, seed);
  // Zero-initialized biases put ReLU inputs exactly on the kink; move off it.
  std::mt19937_64 rng(seed + 31);
  std::uniform_real_distribution<double> jitter(-0.1, 0.1);
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    ad::Matrix& v = model.params()[i].value;
    for (Eigen::Index k = 0; k < v.size(); ++k) v.data()[k] += jitter(rng);
  }
  ad::LossFn loss = [&](ad::Tape& tape) {
    ad::GumbelNoise noise(seed + 17);
    return model.forward(tape, ex, {Mode::Train, 1.0, &noise, false}).total;
  };
  return ad::grad_check(loss, model.params(), epsilon, tolerance);
}

}  // namespace cmap
