#include "cmap/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "cmap/error.hpp"

namespace cmap::ad {

// ---- ParamSet --------------------------------------------------------------

Parameter& ParamSet::add(std::string name, Matrix init) {
  if (contains(name)) throw ContractError("duplicate parameter name: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = std::move(name);
  p->grad = Matrix::Zero(init.rows(), init.cols());
  p->value = std::move(init);
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter& ParamSet::at(std::string_view name) {
  for (auto& p : params_)
    if (p->name == name) return *p;
  throw ContractError("unknown parameter: " + std::string(name));
}

const Parameter& ParamSet::at(std::string_view name) const {
  for (const auto& p : params_)
    if (p->name == name) return *p;
  throw ContractError("unknown parameter: " + std::string(name));
}

bool ParamSet::contains(std::string_view name) const {
  return std::any_of(params_.begin(), params_.end(), [&](const auto& p) { return p->name == name; });
}

void ParamSet::zero_grad() {
  for (auto& p : params_) p->grad.setZero();
}

std::size_t ParamSet::num_scalars() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

ParamSet ParamSet::clone() const {
  ParamSet out;
  for (const auto& p : params_) out.add(p->name, p->value);
  return out;
}

void ParamSet::assign_values(const ParamSet& other) {
  if (other.size() != size()) throw ContractError("parameter set size mismatch");
  for (std::size_t i = 0; i < size(); ++i) {
    const Parameter& src = other[i];
    Parameter& dst = (*this)[i];
    if (src.name != dst.name || src.value.rows() != dst.value.rows() ||
        src.value.cols() != dst.value.cols())
      throw ContractError("parameter mismatch at " + dst.name);
    dst.value = src.value;
  }
}

// ---- Var / Tape ------------------------------------------------------------

const Matrix& Var::value() const { return tape_->value(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw ContractError("scalar() on non-scalar node");
  return v(0, 0);
}

bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::constant(Matrix value) {
  if (!value.allFinite()) throw NumericFault("non-finite constant");
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return {this, it->second};
  if (!p.value.allFinite()) throw NumericFault("non-finite parameter " + p.name);
  param_nodes_[&p] = nodes_.size();
  Node n;
  n.value = p.value;
  n.requires_grad = true;
  n.param = &p;
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::record(std::string_view op, Matrix value, std::span<const Var> inputs, Adjoint adjoint) {
  if (!value.allFinite()) throw NumericFault("non-finite output from " + std::string(op));
  Node n;
  n.value = std::move(value);
  for (const Var& in : inputs) {
    if (in.tape() != this) throw ContractError(std::string(op) + ": operand from another tape");
    n.requires_grad = n.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (n.requires_grad) n.adjoint = std::move(adjoint);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

void Tape::accumulate(std::size_t id, const Matrix& g) { accumulate_expr(id, g); }

BackwardStats Tape::backward(Var output) {
  if (output.tape() != this) throw ContractError("backward: output from another tape");
  const Matrix& out = nodes_[output.id()].value;
  if (out.rows() != 1 || out.cols() != 1) throw ContractError("backward: output must be scalar");

  BackwardStats stats;
  for (auto& n : nodes_) n.grad.resize(0, 0);
  if (!nodes_[output.id()].requires_grad) {
    stats.detached = true;
    spdlog::warn("backward on an output that does not depend on any parameter");
    return stats;
  }
  nodes_[output.id()].grad = Matrix::Ones(1, 1);
  for (std::size_t i = output.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    ++stats.nodes_visited;
    if (n.param != nullptr) {
      n.param->grad += n.grad;
      ++stats.params_touched;
    } else if (n.adjoint) {
      // The closure may append to other nodes' grads; copy ours first since
      // accumulate never touches node i itself.
      const Matrix g = n.grad;
      n.adjoint(*this, g);
    }
  }
  return stats;
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

// ---- primitives ------------------------------------------------------------

namespace {

void require(bool ok, const char* op, const char* what) {
  if (!ok) throw ContractError(std::string(op) + ": " + what);
}

Tape& tape_of(Var a) {
  require(a.valid(), "op", "invalid operand");
  return *a.tape();
}

}  // namespace

Var matmul(Var a, Var b) {
  require(a.cols() == b.rows(), "matmul", "inner dimension mismatch");
  Tape& t = tape_of(a);
  const std::size_t ia = a.id(), ib = b.id();
  Var in[] = {a, b};
  return t.record("matmul", a.value() * b.value(), in, [ia, ib](Tape& t, const Matrix& g) {
    if (t.requires_grad(ia)) t.accumulate_expr(ia, g * t.value(ib).transpose());
    if (t.requires_grad(ib)) t.accumulate_expr(ib, t.value(ia).transpose() * g);
  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  const std::size_t ia = a.id();
  Var in[] = {a};
  return t.record("transpose", a.value().transpose(), in,
                  [ia](Tape& t, const Matrix& g) { t.accumulate_expr(ia, g.transpose()); });
}

Var add(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add", "shape mismatch");
  Tape& t = tape_of(a);
  const std::size_t ia = a.id(), ib = b.id();
  Var in[] = {a, b};
  return t.record("add", a.value() + b.value(), in, [ia, ib](Tape& t, const Matrix& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

Var add_row(Var a, Var b) {
  require(b.rows() == 1 && a.cols() == b.cols(), "add_row", "shape mismatch");
  Tape& t = tape_of(a);
  const std::size_t ia = a.id(), ib = b.id();
  Matrix v = a.value();
  v.rowwise() += b.value().row(0);
  Var in[] = {a, b};
  return t.record("add_row", std::move(v), in, [ia, ib](Tape& t, const Matrix& g) {
    t.accumulate(ia, g);
    if (t.requires_grad(ib)) t.accumulate_expr(ib, g.colwise().sum());
  });
}

Var sub(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub", "shape mismatch");
  Tape& t = tape_of(a);
  const std::size_t ia = a.id(), ib = b.id();
  Var in[] = {a, b};
  return t.record("sub", a.value() - b.value(), in, [ia, ib](Tape& t, const Matrix& g) {
    t.accumulate(ia, g);
    t.accumulate_expr(ib, -g);
  });
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a);
  const std::size_t ia = a.id();
  Var in[] = {a};
  return t.record("scale", a.value() * s, in,
                  [ia, s](Tape& t, const Matrix& g) { t.accumulate_expr(ia, g * s); });
}

Var shift(Var a, double s) {
  Tape& t = tape_of(a);
  const std::size_t ia = a.id();
  Var in[] = {a};
  return t.record("shift", (a.value().array() + s).matrix(), in,
                  [ia](Tape& t, const Matrix& g) { t.accumulate(ia, g); });
}

Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols", "no operands");
  Tape& t = tape_of(parts[0]);
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    require(p.rows() == rows, "concat_cols", "row count mismatch");
    cols += p.cols();
  }
  Matrix v(rows, cols);
  std::vector<std::size_t> ids;
  std::vector<Eigen::Index> widths;
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    v.middleCols(at, p.cols()) = p.value();
    at += p.cols();
    ids.push_back(p.id());
    widths.push_back(p.cols());
  }
  return t.record("concat_cols", std::move(v), parts, [ids, widths](Tape& t, const Matrix& g) {
    Eigen::Index at = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (t.requires_grad(ids[k])) t.accumulate_expr(ids[k], g.middleCols(at, widths[k]));
      at += widths[k];
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows", "no operands");
  Tape& t = tape_of(parts[0]);
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    require(p.cols() == cols, "concat_rows", "column count mismatch");
    rows += p.rows();
  }
  Matrix v(rows, cols);
  std::vector<std::size_t> ids;
  std::vector<Eigen::Index> heights;
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    v.middleRows(at, p.rows()) = p.value();
    at += p.rows();
    ids.push_back(p.id());
    heights.push_back(p.rows());
  }
  return t.record("concat_rows", std::move(v), parts, [ids, heights](Tape& t, const Matrix& g) {
    Eigen::Index at = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (t.requires_grad(ids[k])) t.accumulate_expr(ids[k], g.middleRows(at, heights[k]));
      at += heights[k];
    }
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index len) {
  require(start >= 0 && len >= 0 && start + len <= a.cols(), "slice_cols", "range out of bounds");
  Tape& t = tape_of(a);
  const std::size_t ia = a.id();
  const Eigen::Index rows = a.rows(), cols = a.cols();
  Var in[] = {a};
  return t.record("slice_cols", a.value().middleCols(start, len), in,
                  [ia, rows, cols, start, len](Tape& t, const Matrix& g) {
                    Matrix full = Matrix::Zero(rows, cols);
                    full.middleCols(start, len) = g;
                    t.accumulate(ia, full);
                  });
}

Var softmax_rows(Var a) {
  Tape& t = tape_of(a);
  Matrix y(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const double mx = a.value().row(r).maxCoeff();
    // Scalar exp so masked logits underflow to exactly zero.
    y.row(r) = (a.value().row(r).array() - mx).unaryExpr([](double v) { return std::exp(v); }).matrix();
    y.row(r) /= y.row(r).sum();
  }
  const std::size_t ia = a.id();
  Matrix saved = y;
  Var in[] = {a};
  return t.record("softmax_rows", std::move(y), in,
                  [ia, y = std::move(saved)](Tape& t, const Matrix& g) {
                    Matrix dx(y.rows(), y.cols());
                    for (Eigen::Index r = 0; r < y.rows(); ++r) {
                      const double dot = g.row(r).dot(y.row(r));
                      dx.row(r) = (y.row(r).array() * (g.row(r).array() - dot)).matrix();
                    }
                    t.accumulate(ia, dx);
                  });
}

Var tanh(Var a) {
  Tape& t = tape_of(a);
  Matrix y = a.value().array().tanh().matrix();
  const std::size_t ia = a.id();
  Matrix d = (1.0 - y.array().square()).matrix();
  Var in[] = {a};
  return t.record("tanh", std::move(y), in, [ia, d = std::move(d)](Tape& t, const Matrix& g) {
    t.accumulate_expr(ia, g.cwiseProduct(d));
  });
}

Var sigmoid(Var a) {
  Tape& t = tape_of(a);
  Matrix y = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  const std::size_t ia = a.id();
  Matrix d = (y.array() * (1.0 - y.array())).matrix();
  Var in[] = {a};
  return t.record("sigmoid", std::move(y), in, [ia, d = std::move(d)](Tape& t, const Matrix& g) {
    t.accumulate_expr(ia, g.cwiseProduct(d));
  });
}

Var relu(Var a) {
  Tape& t = tape_of(a);
  Matrix y = a.value().cwiseMax(0.0);
  const std::size_t ia = a.id();
  Var in[] = {a};
  return t.record("relu", std::move(y), in, [ia](Tape& t, const Matrix& g) {
    const Matrix& x = t.value(ia);
    t.accumulate_expr(ia, (x.array() > 0.0).select(g, 0.0).matrix());
  });
}

Var mul(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "mul", "shape mismatch");
  Tape& t = tape_of(a);
  const std::size_t ia = a.id(), ib = b.id();
  Var in[] = {a, b};
  return t.record("mul", a.value().cwiseProduct(b.value()), in,
                  [ia, ib](Tape& t, const Matrix& g) {
                    if (t.requires_grad(ia)) t.accumulate_expr(ia, g.cwiseProduct(t.value(ib)));
                    if (t.requires_grad(ib)) t.accumulate_expr(ib, g.cwiseProduct(t.value(ia)));
                  });
}

Var minimum(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "minimum", "shape mismatch");
  Tape& t = tape_of(a);
  const std::size_t ia = a.id(), ib = b.id();
  Var in[] = {a, b};
  return t.record("minimum", a.value().cwiseMin(b.value()), in,
                  [ia, ib](Tape& t, const Matrix& g) {
                    const auto first = (t.value(ia).array() <= t.value(ib).array());
                    if (t.requires_grad(ia)) t.accumulate_expr(ia, first.select(g, 0.0).matrix());
                    if (t.requires_grad(ib)) t.accumulate_expr(ib, first.select(0.0, g).matrix());
                  });
}

Var exp(Var a) {
  Tape& t = tape_of(a);
  Matrix y = a.value().array().exp().matrix();
  const std::size_t ia = a.id();
  Matrix d = y;
  Var in[] = {a};
  return t.record("exp", std::move(y), in, [ia, d = std::move(d)](Tape& t, const Matrix& g) {
    t.accumulate_expr(ia, g.cwiseProduct(d));
  });
}

Var log(Var a) {
  if (!(a.value().array() > 0.0).all()) throw NumericFault("log: non-positive argument");
  Tape& t = tape_of(a);
  const std::size_t ia = a.id();
  Var in[] = {a};
  return t.record("log", a.value().array().log().matrix(), in, [ia](Tape& t, const Matrix& g) {
    t.accumulate_expr(ia, g.cwiseQuotient(t.value(ia)));
  });
}

Var mean_rows(Var a) {
  require(a.rows() > 0, "mean_rows", "empty matrix");
  Tape& t = tape_of(a);
  const std::size_t ia = a.id();
  const Eigen::Index n = a.rows();
  Var in[] = {a};
  return t.record("mean_rows", a.value().colwise().mean(), in, [ia, n](Tape& t, const Matrix& g) {
    t.accumulate_expr(ia, g.replicate(n, 1) / static_cast<double>(n));
  });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  const std::size_t ia = a.id();
  const Eigen::Index r = a.rows(), c = a.cols();
  Matrix v(1, 1);
  v(0, 0) = a.value().sum();
  Var in[] = {a};
  return t.record("sum", std::move(v), in, [ia, r, c](Tape& t, const Matrix& g) {
    t.accumulate_expr(ia, Matrix::Constant(r, c, g(0, 0)));
  });
}

Var element(Var a, Eigen::Index r, Eigen::Index c) {
  require(r >= 0 && r < a.rows() && c >= 0 && c < a.cols(), "element", "index out of range");
  Tape& t = tape_of(a);
  const std::size_t ia = a.id();
  const Eigen::Index rows = a.rows(), cols = a.cols();
  Matrix v(1, 1);
  v(0, 0) = a.value()(r, c);
  Var in[] = {a};
  return t.record("element", std::move(v), in, [ia, rows, cols, r, c](Tape& t, const Matrix& g) {
    Matrix full = Matrix::Zero(rows, cols);
    full(r, c) = g(0, 0);
    t.accumulate(ia, full);
  });
}

Var cross_entropy_logits(Var logits, std::size_t label) {
  require(logits.rows() == 1, "cross_entropy_logits", "logits must be a row");
  require(label < static_cast<std::size_t>(logits.cols()), "cross_entropy_logits",
          "label out of range");
  Tape& t = tape_of(logits);
  const auto& z = logits.value();
  const double mx = z.maxCoeff();
  const double lse = mx + std::log((z.array() - mx).exp().sum());
  Matrix p = (z.array() - lse).exp().matrix();
  Matrix v(1, 1);
  v(0, 0) = lse - z(0, static_cast<Eigen::Index>(label));
  const std::size_t il = logits.id();
  Var in[] = {logits};
  return t.record("cross_entropy", std::move(v), in,
                  [il, label, p = std::move(p)](Tape& t, const Matrix& g) {
                    Matrix d = p;
                    d(0, static_cast<Eigen::Index>(label)) -= 1.0;
                    t.accumulate_expr(il, d * g(0, 0));
                  });
}

Var select_row(Var a, Eigen::Index index) {
  require(index >= 0 && index < a.rows(), "select_row", "index out of range");
  Matrix onehot = Matrix::Zero(1, a.rows());
  onehot(0, index) = 1.0;
  return matmul(a.tape()->constant(std::move(onehot)), a);
}

Var gather_rows(Var a, std::span<const std::size_t> order) {
  Matrix perm = Matrix::Zero(static_cast<Eigen::Index>(order.size()), a.rows());
  for (std::size_t k = 0; k < order.size(); ++k) {
    require(order[k] < static_cast<std::size_t>(a.rows()), "gather_rows", "index out of range");
    perm(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(order[k])) = 1.0;
  }
  return matmul(a.tape()->constant(std::move(perm)), a);
}

Var masked_fill(Var a, const std::vector<bool>& mask) {
  require(a.rows() == 1 && static_cast<std::size_t>(a.cols()) == mask.size(), "masked_fill",
          "mask width mismatch");
  Tape& t = tape_of(a);
  Matrix v = a.value();
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) v(0, static_cast<Eigen::Index>(i)) = kMaskedLogit;
  const std::size_t ia = a.id();
  Var in[] = {a};
  return t.record("masked_fill", std::move(v), in, [ia, mask](Tape& t, const Matrix& g) {
    Matrix d = g;
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (mask[i]) d(0, static_cast<Eigen::Index>(i)) = 0.0;
    t.accumulate(ia, d);
  });
}

Var straight_through(const Matrix& hard, Var soft) {
  require(hard.rows() == soft.rows() && hard.cols() == soft.cols(), "straight_through",
          "shape mismatch");
  Tape& t = tape_of(soft);
  const std::size_t is = soft.id();
  Var in[] = {soft};
  return t.record("straight_through", hard, in,
                  [is](Tape& t, const Matrix& g) { t.accumulate(is, g); });
}

Matrix normalize_adjacency(const Matrix& m) {
  require(m.rows() == m.cols(), "normalize_adjacency", "matrix must be square");
  require(m.size() > 0, "normalize_adjacency", "empty matrix");
  require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12, "normalize_adjacency",
          "matrix must be symmetric");
  require(m.minCoeff() >= 0.0, "normalize_adjacency", "negative weight");
  const Eigen::Index n = m.rows();
  Matrix mt = m + Matrix::Identity(n, n);
  Eigen::VectorXd s = mt.rowwise().sum().array().rsqrt();
  return s.asDiagonal() * mt * s.asDiagonal();
}

Var gcn_normalize(Var m) {
  require(m.rows() == m.cols(), "gcn_normalize", "matrix must be square");
  Tape& t = tape_of(m);
  const Eigen::Index n = m.rows();
  Matrix mt = m.value() + Matrix::Identity(n, n);
  Eigen::VectorXd d = mt.rowwise().sum();
  require((d.array() > 0.0).all(), "gcn_normalize", "non-positive degree");
  Eigen::VectorXd s = d.array().rsqrt();
  Matrix out = s.asDiagonal() * mt * s.asDiagonal();
  const std::size_t im = m.id();
  Var in[] = {m};
  return t.record("gcn_normalize", std::move(out), in,
                  [im, mt = std::move(mt), d = std::move(d), s = std::move(s)](Tape& t,
                                                                               const Matrix& g) {
                    // N_ij = s_i Mt_ij s_j, s = d^-1/2, d_i = sum_j Mt_ij
                    const Matrix gm = g.cwiseProduct(mt);  // G_ij Mt_ij
                    Eigen::VectorXd row_part = gm * s;                   // sum_j G_ij Mt_ij s_j
                    Eigen::VectorXd col_part = gm.transpose() * s;       // sum_k G_ki Mt_ki s_k
                    Eigen::VectorXd dd =
                        -0.5 * d.array().pow(-1.5) * (row_part + col_part).array();
                    Matrix dm = s.asDiagonal() * g * s.asDiagonal();
                    dm.colwise() += dd;
                    t.accumulate(im, dm);
                  });
}

Var assemble_symmetric(Tape& tape, std::span<const Var> thetas) {
  const Eigen::Index k = static_cast<Eigen::Index>(thetas.size());
  require(k > 0, "assemble_symmetric", "no rows");
  std::vector<Var> inputs;
  std::vector<std::pair<Eigen::Index, std::size_t>> rows;  // (t, node id)
  Matrix v = Matrix::Zero(k, k);
  for (Eigen::Index r = 1; r < k; ++r) {
    const Var& th = thetas[static_cast<std::size_t>(r)];
    require(th.valid(), "assemble_symmetric", "missing row");
    require(th.rows() == 1 && th.cols() == r, "assemble_symmetric", "row t must have width t");
    require(th.tape() == &tape, "assemble_symmetric", "row from another tape");
    inputs.push_back(th);
    rows.emplace_back(r, th.id());
    for (Eigen::Index j = 0; j < r; ++j) {
      v(r, j) = th.value()(0, j);
      v(j, r) = th.value()(0, j);
    }
  }
  if (inputs.empty()) return tape.constant(std::move(v));
  return tape.record("assemble_symmetric", std::move(v), inputs, [rows](Tape& t, const Matrix& g) {
    for (const auto& [r, id] : rows) {
      if (!t.requires_grad(id)) continue;
      Matrix d(1, r);
      for (Eigen::Index j = 0; j < r; ++j) d(0, j) = g(r, j) + g(j, r);
      t.accumulate(id, d);
    }
  });
}

// ---- GRU -------------------------------------------------------------------

GruWeights GruWeights::create(ParamSet& params, const std::string& prefix, Eigen::Index input_dim,
                              Eigen::Index hidden_dim, std::mt19937_64& rng) {
  const Eigen::Index fan_in = input_dim + hidden_dim;
  GruWeights w;
  w.w_z = &params.add(prefix + ".w_z", xavier(fan_in, hidden_dim, rng));
  w.b_z = &params.add(prefix + ".b_z", Matrix::Zero(1, hidden_dim));
  w.w_r = &params.add(prefix + ".w_r", xavier(fan_in, hidden_dim, rng));
  w.b_r = &params.add(prefix + ".b_r", Matrix::Zero(1, hidden_dim));
  w.w_h = &params.add(prefix + ".w_h", xavier(fan_in, hidden_dim, rng));
  w.b_h = &params.add(prefix + ".b_h", Matrix::Zero(1, hidden_dim));
  return w;
}

GruWeights GruWeights::bind(ParamSet& params, const std::string& prefix) {
  GruWeights w;
  w.w_z = &params.at(prefix + ".w_z");
  w.b_z = &params.at(prefix + ".b_z");
  w.w_r = &params.at(prefix + ".w_r");
  w.b_r = &params.at(prefix + ".b_r");
  w.w_h = &params.at(prefix + ".w_h");
  w.b_h = &params.at(prefix + ".b_h");
  return w;
}

Var gru_cell(Tape& tape, Var x, Var h, const GruWeights& w) {
  if (x.rows() != 1 || h.rows() != 1 || x.cols() != w.input_dim() || h.cols() != w.hidden_dim())
    throw ContractError("gru_cell: shape mismatch");
  Var xh_parts[] = {x, h};
  Var xh = concat_cols(xh_parts);
  Var z = sigmoid(add(matmul(xh, tape.param(*w.w_z)), tape.param(*w.b_z)));
  Var r = sigmoid(add(matmul(xh, tape.param(*w.w_r)), tape.param(*w.b_r)));
  Var xrh_parts[] = {x, mul(r, h)};
  Var xrh = concat_cols(xrh_parts);
  Var cand = tanh(add(matmul(xrh, tape.param(*w.w_h)), tape.param(*w.b_h)));
  // (1 - z) * h + z * cand  ==  h + z * (cand - h)
  return add(h, mul(z, sub(cand, h)));
}

// ---- Gumbel ----------------------------------------------------------------

double GumbelNoise::sample() {
  const double u = std::clamp(uniform_(rng_), 1e-12, 1.0 - 1e-12);
  return -std::log(-std::log(u));
}

Var gumbel_softmax(Var logits, double tau, GumbelNoise* noise, bool hard_forward,
                   std::size_t* chosen) {
  if (!(tau > 0.0)) throw ParameterError("gumbel_softmax: tau must be positive");
  require(logits.rows() == 1, "gumbel_softmax", "logits must be a row");
  Tape& t = tape_of(logits);
  Var perturbed = logits;
  if (noise != nullptr) {
    Matrix g(1, logits.cols());
    for (Eigen::Index i = 0; i < g.cols(); ++i) g(0, i) = noise->sample();
    perturbed = add(logits, t.constant(std::move(g)));
  }
  Var soft = softmax_rows(scale(perturbed, 1.0 / tau));
  Eigen::Index best = 0;
  soft.value().row(0).maxCoeff(&best);
  if (chosen != nullptr) *chosen = static_cast<std::size_t>(best);
  if (!hard_forward) return soft;
  Matrix hard = Matrix::Zero(1, logits.cols());
  hard(0, best) = 1.0;
  return straight_through(hard, soft);
}

Matrix xavier(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

}  // namespace cmap::ad
