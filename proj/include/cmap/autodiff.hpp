#pragma once

// Dense reverse-mode automatic differentiation over row-major double matrices.
//
// A Tape records every primitive in creation order together with a closure
// that propagates the output adjoint to its inputs. Parameters live outside
// the tape; a tape leaf created from a Parameter adds its adjoint into
// Parameter::grad during backward(), so repeated backward passes accumulate.

#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace cmap::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Logit written into masked softmax slots. Finite, so every tape value stays
/// finite, but exp(kMaskedLogit - max) underflows to exactly zero.
inline constexpr double kMaskedLogit = -1e30;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
};

/// Named, insertion-ordered collection of parameters with stable addresses.
class ParamSet {
 public:
  Parameter& add(std::string name, Matrix init);
  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;
  bool contains(std::string_view name) const;

  void zero_grad();
  std::size_t size() const { return params_.size(); }
  std::size_t num_scalars() const;

  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  /// Deep copy (values only; grads zeroed).
  ParamSet clone() const;
  /// Overwrites values from another set with identical names/shapes.
  void assign_values(const ParamSet& other);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

class Tape;

/// Handle to one recorded tape node.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  /// Value of a 1x1 node.
  double scalar() const;
  bool requires_grad() const;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

struct BackwardStats {
  std::size_t nodes_visited = 0;
  std::size_t params_touched = 0;
  bool detached = false;  // output did not depend on any parameter
};

class Tape {
 public:
  using Adjoint = std::function<void(Tape&, const Matrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// Leaf for a parameter; repeated calls on one tape return the same node.
  Var param(Parameter& p);

  /// Records a primitive. `inputs` decide requires_grad; `adjoint` is only
  /// invoked when the node requires a gradient.
  Var record(std::string_view op, Matrix value, std::span<const Var> inputs, Adjoint adjoint);

  /// Adds `g` into the adjoint of node `id` (no-op for nodes without grad).
  void accumulate(std::size_t id, const Matrix& g);
  /// Same, for expressions that can be evaluated lazily.
  template <typename Expr>
  void accumulate_expr(std::size_t id, const Expr& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  /// Reverse sweep from a scalar output. Throws ContractError on non-scalar.
  BackwardStats backward(Var output);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Adjoint of an arbitrary node after backward() (zero if never reached).
  Matrix grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    Adjoint adjoint;
  };
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
};

// ---- primitives ------------------------------------------------------------

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
/// a (n x c) + b (1 x c) broadcast over rows.
Var add_row(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double s);
/// a + s elementwise.
Var shift(Var a, double s);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index len);
Var softmax_rows(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var mul(Var a, Var b);
/// Elementwise minimum. The adjoint goes to `a` when a <= b, else to `b`.
Var minimum(Var a, Var b);
Var exp(Var a);
Var log(Var a);
/// Column means: (n x c) -> (1 x c).
Var mean_rows(Var a);
/// Sum of all entries -> 1x1.
Var sum(Var a);
/// Element (r, c) -> 1x1.
Var element(Var a, Eigen::Index r, Eigen::Index c);
/// -log softmax(logits)[label] for a 1 x C row.
Var cross_entropy_logits(Var logits, std::size_t label);
/// One-hot(index) (1 x n) times a (n x c): gathers row `index`.
Var select_row(Var a, Eigen::Index index);
/// Rows of `a` reordered: output row k = a row order[k] (permutation matmul).
Var gather_rows(Var a, std::span<const std::size_t> order);
/// Sets entries where mask is true to kMaskedLogit; masked slots get no gradient.
Var masked_fill(Var a, const std::vector<bool>& mask);
/// Forward value is `hard`, gradient passes unchanged to `soft`.
Var straight_through(const Matrix& hard, Var soft);
/// D^-1/2 (M + I) D^-1/2 with D_ii = sum_j (M + I)_ij.
Var gcn_normalize(Var m);
/// k x k symmetric matrix with zero diagonal from lower-triangular rows:
/// thetas[t] is 1 x t and fills entries (t, j) and (j, t) for j < t.
/// thetas[0] is ignored (the first node has no earlier neighbours).
Var assemble_symmetric(Tape& tape, std::span<const Var> thetas);

/// Dense reference for gcn_normalize on plain matrices.
Matrix normalize_adjacency(const Matrix& m);

// ---- GRU cell --------------------------------------------------------------

/// Weights for one gated recurrent unit; names are registered in a ParamSet.
struct GruWeights {
  Parameter* w_z = nullptr;  // (in + h) x h
  Parameter* b_z = nullptr;  // 1 x h
  Parameter* w_r = nullptr;
  Parameter* b_r = nullptr;
  Parameter* w_h = nullptr;
  Parameter* b_h = nullptr;

  static GruWeights create(ParamSet& params, const std::string& prefix, Eigen::Index input_dim,
                           Eigen::Index hidden_dim, std::mt19937_64& rng);
  static GruWeights bind(ParamSet& params, const std::string& prefix);
  Eigen::Index input_dim() const { return w_z->value.rows() - hidden_dim(); }
  Eigen::Index hidden_dim() const { return w_z->value.cols(); }
};

/// z = s(W_z[x,h]+b_z), r = s(W_r[x,h]+b_r), c = tanh(W_h[x, r*h]+b_h),
/// h' = (1-z)*h + z*c.
Var gru_cell(Tape& tape, Var x, Var h, const GruWeights& w);

// ---- Gumbel-softmax --------------------------------------------------------

/// Source of Gumbel noise. A null pointer means noise-free (argmax) mode.
class GumbelNoise {
 public:
  explicit GumbelNoise(std::uint64_t seed) : rng_(seed) {}
  /// g = -log(-log(u)), u ~ U(0,1) clamped to [1e-12, 1 - 1e-12].
  double sample();

 private:
  std::mt19937_64 rng_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Soft sample softmax((logits + g) / tau); with hard_forward the value is
/// the one-hot argmax of that sample and the gradient is the soft one.
/// `chosen` receives the argmax index.
Var gumbel_softmax(Var logits, double tau, GumbelNoise* noise, bool hard_forward,
                   std::size_t* chosen = nullptr);

/// Xavier/Glorot uniform initializer.
Matrix xavier(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);

}  // namespace cmap::ad
