#include "cmap/optim.hpp"

#include <algorithm>
#include <cmath>

#include "cmap/error.hpp"

namespace cmap::ad {

AdamState AdamState::for_params(const ParamSet& params, AdamOptions options) {
  AdamState s;
  s.options = options;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& v = params[i].value;
    s.first.push_back(Matrix::Zero(v.rows(), v.cols()));
    s.second.push_back(Matrix::Zero(v.rows(), v.cols()));
  }
  return s;
}

void adam_step(ParamSet& params, AdamState& state) {
  if (state.first.size() != params.size()) throw ContractError("adam_step: state/params mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = params[i];
    if (!p.grad.allFinite()) throw NumericFault("non-finite gradient for parameter " + p.name);
    if (p.grad.rows() != state.first[i].rows() || p.grad.cols() != state.first[i].cols())
      throw ContractError("adam_step: shape mismatch for " + p.name);
  }
  const AdamOptions& o = state.options;
  ++state.step;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    Matrix& m = state.first[i];
    Matrix& v = state.second[i];
    m = o.beta1 * m + (1.0 - o.beta1) * p.grad;
    v = o.beta2 * v + (1.0 - o.beta2) * p.grad.cwiseAbs2();
    p.value.array() -= o.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + o.eps);
  }
}

double clip_grad_norm(ParamSet& params, double max_norm) {
  double sq = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) sq += params[i].grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double f = max_norm / norm;
    for (std::size_t i = 0; i < params.size(); ++i) params[i].grad *= f;
  }
  return norm;
}

GradCheckReport grad_check(const LossFn& loss_fn, ParamSet& params, double epsilon,
                           double tolerance, double floor) {
  params.zero_grad();
  {
    Tape tape;
    Var loss = loss_fn(tape);
    tape.backward(loss);
  }
  auto eval = [&] {
    Tape tape;
    return loss_fn(tape).scalar();
  };

  GradCheckReport report;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    GradCheckEntry e;
    e.name = p.name;
    for (Eigen::Index k = 0; k < p.value.size(); ++k) {
      double& x = p.value.data()[k];
      const double saved = x;
      x = saved + epsilon;
      const double fp = eval();
      x = saved - epsilon;
      const double fm = eval();
      x = saved;
      const double numeric = (fp - fm) / (2.0 * epsilon);
      const double analytic = p.grad.data()[k];
      const double abs_err = std::abs(analytic - numeric);
      const double rel = abs_err / std::max({std::abs(analytic), std::abs(numeric), floor});
      e.max_abs_error = std::max(e.max_abs_error, abs_err);
      e.max_rel_error = std::max(e.max_rel_error, rel);
      ++e.checked;
    }
    e.passed = e.max_rel_error < tolerance;
    report.max_rel_error = std::max(report.max_rel_error, e.max_rel_error);
    report.passed = report.passed && e.passed;
    report.entries.push_back(std::move(e));
  }
  return report;
}

}  // namespace cmap::ad
