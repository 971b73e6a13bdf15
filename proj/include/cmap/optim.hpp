#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cmap/autodiff.hpp"

namespace cmap::ad {

struct AdamOptions {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment estimates for every parameter of one ParamSet, in set order.
struct AdamState {
  AdamOptions options;
  std::vector<Matrix> first;
  std::vector<Matrix> second;
  std::int64_t step = 0;

  static AdamState for_params(const ParamSet& params, AdamOptions options = {});
};

/// One bias-corrected Adam update from the grads stored in `params`.
/// A NaN/Inf gradient throws NumericFault naming the parameter; no
/// parameter is modified in that case.
void adam_step(ParamSet& params, AdamState& state);

/// Rescales all grads so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_grad_norm(ParamSet& params, double max_norm);

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  bool passed = true;
};

/// Builds the scalar loss on a fresh tape from the current parameter values.
using LossFn = std::function<Var(Tape&)>;

/// Central differences (f(p+e) - f(p-e)) / 2e against the analytic gradient
/// of every scalar in `params`. Relative error is |a - n| / max(|a|, |n|, floor).
GradCheckReport grad_check(const LossFn& loss_fn, ParamSet& params, double epsilon = 1e-5,
                           double tolerance = 1e-4, double floor = 1e-6);

}  // namespace cmap::ad
