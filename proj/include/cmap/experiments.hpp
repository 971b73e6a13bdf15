#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cmap/optim.hpp"
#include "cmap/trainer.hpp"

namespace cmap {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
};
MeanStd mean_std(const std::vector<double>& xs);

/// Spearman rank correlation with average ranks for ties. Returns 0 when
/// either side is constant.
double spearman(const std::vector<double>& xs, const std::vector<double>& ys);

/// Runs fn(0..n-1) on up to `threads` worker threads; exceptions propagate
/// (the first one by index).
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

std::vector<std::uint64_t> default_seeds();

struct SeedRepeats {
  std::vector<std::uint64_t> seeds;
  std::vector<TrainReport> reports;
  std::vector<double> accuracies;
  MeanStd summary;
};

SeedRepeats run_seed_repeats(const std::vector<Example>& examples, const Splits& splits,
                             std::size_t num_classes, const TrainConfig& cfg,
                             const std::vector<std::uint64_t>& seeds, std::size_t threads = 1);

std::vector<double> default_proportions();

/// Per class, floor(proportion * class count) documents drawn with `seed`.
/// Returns an empty list when some class present in `indices` would get none.
std::vector<std::size_t> stratified_subsample(const std::vector<Example>& examples,
                                              const std::vector<std::size_t>& indices,
                                              double proportion, std::uint64_t seed);

struct CurvePoint {
  double proportion = 0.0;
  std::size_t train_docs = 0;
  std::vector<double> accuracies;  // one per seed
  MeanStd summary;
  bool skipped = false;
};

std::vector<CurvePoint> run_label_efficiency(const std::vector<Example>& examples,
                                             const Splits& splits, std::size_t num_classes,
                                             const TrainConfig& cfg,
                                             const std::vector<double>& proportions,
                                             const std::vector<std::uint64_t>& seeds,
                                             std::size_t threads = 1);
/// Spearman rho over the points that ran.
double curve_spearman(const std::vector<CurvePoint>& curve);
std::string curve_csv(const std::vector<CurvePoint>& curve);

/// Buckets 0-5, 6-10, 11-15, ...
std::size_t size_bucket(std::size_t size);
std::string bucket_label(std::size_t bucket);

struct SizeDistribution {
  std::size_t max_size = 0;
  std::vector<std::size_t> sizes;      // per test document
  std::vector<std::size_t> histogram;  // counts per bucket
  MeanStd summary;
  double test_accuracy = 0.0;
};

std::vector<SizeDistribution> run_size_distribution(const std::vector<Example>& examples,
                                                    const Splits& splits,
                                                    std::size_t num_classes,
                                                    const TrainConfig& cfg,
                                                    const std::vector<std::size_t>& max_sizes,
                                                    std::size_t threads = 1);
std::string size_csv(const std::vector<SizeDistribution>& dists);

// ---- gradient check --------------------------------------------------------

/// Small random document: n candidates on a path graph with distinct positions.
Example toy_example(std::size_t n, Eigen::Index feature_dim, std::size_t label, std::uint64_t seed);

/// Finite-difference check of the whole loss (encoder, translator, predictor)
/// with fixed Gumbel noise and soft selection.
ad::GradCheckReport pipeline_grad_check(const ModelConfig& cfg, const Example& ex,
                                        std::uint64_t seed, double epsilon = 1e-5,
                                        double tolerance = 1e-4);

}  // namespace cmap
