#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "shine/tensor.hpp"

namespace shine {

// A named trainable tensor with its gradient accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}

  void zero_grad() { grad.fill(0.0); }
};

// Reverse-mode tape over dense 2-D tensors. Build a graph with the op
// methods, then call backward() on a 1x1 loss node; gradients of parameter
// leaves are accumulated into Parameter::grad (so several tapes can share a
// batch), and the gradient of any node is available through grad_of().
//
// All ops validate shapes and reject non-finite outputs.
class Tape {
 public:
  using Var = int;

  explicit Tape(bool check_finite = true) : check_finite_(check_finite) {}

  // Leaves.
  Var input(Tensor t);
  Var param(Parameter& p);

  // Elementwise / algebra.
  Var matmul(Var a, Var b);
  Var matmul_nt(Var a, Var b);  // a (mxk) * b(nxk)^T -> mxn
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var add_rowvec(Var a, Var bias);  // a(mxn) + bias(1xn) broadcast over rows
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  Var relu(Var a);
  Var log_eps(Var a, double eps = 1e-8);  // ln(x + eps); inputs must be >= 0

  // Softmax over each row with max subtraction. The masked variant excludes
  // columns where colmask is 0 (their probability is exactly 0); a row with
  // no admissible column raises NumericError.
  Var softmax_rows(Var a);
  Var softmax_rows_masked(Var a, const std::vector<std::uint8_t>& colmask);

  // Structure.
  Var concat_cols(Var a, Var b);
  Var slice_rows(Var a, int r0, int r1);  // rows [r0, r1)
  Var slice_cols(Var a, int c0, int c1);

  // Pooling over the row axis.
  Var mean_rows(Var a);                                              // -> 1xn
  Var mean_rows_masked(Var a, const std::vector<std::uint8_t>& rm);  // over rows with rm!=0
  Var max_rows(Var a);                                               // -> 1xn, ties -> lowest row
  Var max_rows_masked(Var a, const std::vector<std::uint8_t>& rm);

  Var row_sum(Var a);              // (mxn) -> mx1
  Var div_colvec(Var a, Var s);    // a_ij / s_i, s is mx1
  Var zero_rows(Var a, const std::vector<std::uint8_t>& keep);  // rows with keep==0 -> 0

  Var embedding(Var table, const std::vector<int>& ids);  // -> |ids| x d
  Var layer_norm_rows(Var x, Var gain, Var bias, double eps = 1e-5);
  Var pick_per_row(Var p, const std::vector<int>& idx);  // -> mx1 of p[i, idx[i]]

  Var sum_all(Var a);   // -> 1x1
  Var mean_all(Var a);  // -> 1x1

  // Access.
  const Tensor& val(Var v) const { return nodes_[v].value; }
  double scalar(Var v) const;
  void backward(Var loss);
  const Tensor& grad_of(Var v) const;
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Tape&)> back;  // pulls from this node's grad into parents'
    Parameter* pref = nullptr;
  };

  Var push(Tensor value, std::function<void(Tape&)> back, const char* op);
  Tensor& g(Var v) { return nodes_[v].grad; }

  std::vector<Node> nodes_;
  bool check_finite_ = true;
  bool ran_backward_ = false;
};

}  // namespace shine
