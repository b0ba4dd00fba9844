#include "shine/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "shine/errors.hpp"
#include "shine/kernels.hpp"

namespace shine {

namespace {

void accumulate(Tensor& dst, const Tensor& src) {
  kernels::add(dst.data(), src.data(), dst.data(), dst.size());
}

}  // namespace

Tape::Var Tape::push(Tensor value, std::function<void(Tape&)> back, const char* op) {
  if (check_finite_ && !value.all_finite())
    throw NumericError(std::string("non-finite intermediate in ") + op);
  Node n;
  n.value = std::move(value);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<Var>(nodes_.size() - 1);
}

Tape::Var Tape::input(Tensor t) { return push(std::move(t), nullptr, "input"); }

Tape::Var Tape::param(Parameter& p) {
  Var v = push(p.value, nullptr, "param");
  nodes_[v].pref = &p;
  return v;
}

Tape::Var Tape::matmul(Var a, Var b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  if (A.cols() != B.rows())
    throw DimensionError("matmul: " + A.shape_str() + " x " + B.shape_str());
  int m = A.rows(), k = A.cols(), n = B.cols();
  Tensor C(m, n);
  kernels::matmul_nn(A.data(), B.data(), C.data(), m, k, n);
  Var self = static_cast<Var>(nodes_.size());
  return push(std::move(C),
              [a, b, self, m, k, n](Tape& t) {
                const Tensor& dC = t.g(self);
                // dA += dC * B^T ; dB += A^T * dC
                Tensor dA(m, k), dB(k, n);
                kernels::matmul_nt(dC.data(), t.val(b).data(), dA.data(), m, n, k);
                kernels::matmul_tn(t.val(a).data(), dC.data(), dB.data(), k, m, n);
                accumulate(t.g(a), dA);
                accumulate(t.g(b), dB);
              },
              "matmul");
}

Tape::Var Tape::matmul_nt(Var a, Var b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  if (A.cols() != B.cols())
    throw DimensionError("matmul_nt: " + A.shape_str() + " x " + B.shape_str() + "^T");
  int m = A.rows(), k = A.cols(), n = B.rows();
  Tensor C(m, n);
  kernels::matmul_nt(A.data(), B.data(), C.data(), m, k, n);
  Var self = static_cast<Var>(nodes_.size());
  return push(std::move(C),
              [a, b, self, m, k, n](Tape& t) {
                const Tensor& dC = t.g(self);
                // dA += dC * B ; dB += dC^T * A
                Tensor dA(m, k), dB(n, k);
                kernels::matmul_nn(dC.data(), t.val(b).data(), dA.data(), m, n, k);
                kernels::matmul_tn(dC.data(), t.val(a).data(), dB.data(), n, m, k);
                accumulate(t.g(a), dA);
                accumulate(t.g(b), dB);
              },
              "matmul_nt");
}

Tape::Var Tape::add(Var a, Var b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  require_same_shape(A, B, "add");
  Tensor C(A.rows(), A.cols());
  kernels::add(A.data(), B.data(), C.data(), C.size());
  Var self = static_cast<Var>(nodes_.size());
  return push(std::move(C),
              [a, b, self](Tape& t) {
                accumulate(t.g(a), t.g(self));
                accumulate(t.g(b), t.g(self));
              },
              "add");
}

Tape::Var Tape::sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

Tape::Var Tape::add_rowvec(Var a, Var bias) {
  const Tensor& A = val(a);
  const Tensor& B = val(bias);
  if (B.rows() != 1 || B.cols() != A.cols())
    throw DimensionError("add_rowvec: " + A.shape_str() + " + " + B.shape_str());
  Tensor C(A.rows(), A.cols());
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j) C.at(i, j) = A.at(i, j) + B.at(0, j);
  Var self = static_cast<Var>(nodes_.size());
  return push(std::move(C),
              [a, bias, self](Tape& t) {
                const Tensor& dC = t.g(self);
                accumulate(t.g(a), dC);
                Tensor& dB = t.g(bias);
                for (int i = 0; i < dC.rows(); ++i)
                  for (int j = 0; j < dC.cols(); ++j) dB.at(0, j) += dC.at(i, j);
              },
              "add_rowvec");
}

Tape::Var Tape::mul(Var a, Var b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  require_same_shape(A, B, "mul");
  Tensor C(A.rows(), A.cols());
  kernels::mul(A.data(), B.data(), C.data(), C.size());
  Var self = static_cast<Var>(nodes_.size());
  return push(std::move(C),
              [a, b, self](Tape& t) {
                const Tensor& dC = t.g(self);
                Tensor tmp(dC.rows(), dC.cols());
                kernels::mul(dC.data(), t.val(b).data(), tmp.data(), tmp.size());
                accumulate(t.g(a), tmp);
                kernels::mul(dC.data(), t.val(a).data(), tmp.data(), tmp.size());
                accumulate(t.g(b), tmp);
              },
              "mul");
}

Tape::Var Tape::scale(Var a, double s) {
  const Tensor& A = val(a);
  Tensor C(A.rows(), A.cols());
  kernels::scale(A.data(), s, C.data(), C.size());
  Var self = static_cast<Var>(nodes_.size());
  return push(std::move(C),
              [a, s, self](Tape& t) {
                const Tensor& dC = t.g(self);
                Tensor tmp(dC.rows(), dC.cols());
                kernels::scale(dC.data(), s, tmp.data(), tmp.size());
                accumulate(t.g(a), tmp);
              },
              "scale");
}

Tape::Var Tape::relu(Var a) {
  const Tensor& A = val(a);
  Tensor C(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.size(); ++i) C[i] = A[i] > 0.0 ? A[i] : 0.0;
  Var self = static_cast<Var>(nodes_.size());
  return push(std::move(C),
              [a, self](Tape& t) {
                const Tensor& dC = t.g(self);
                const Tensor& A2 = t.val(a);
                Tensor& dA = t.g(a);
                for (std::size_t i = 0; i < dC.size(); ++i)
                  if (A2[i] > 0.0) dA[i] += dC[i];
              },
              "relu");
}

Tape::Var Tape::log_eps(Var a, double eps) {
  const Tensor& A = val(a);
  Tensor C(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.size(); ++i) C[i] = std::log(A[i] + eps);
  Var self = static_cast<Var>(nodes_.size());
  return push(std::move(C),
              [a, eps, self](Tape& t) {
                const Tensor& dC = t.g(self);
                const Tensor& A2 = t.val(a);
                Tensor& dA = t.g(a);
                for (std::size_t i = 0; i < dC.size(); ++i) dA[i] += dC[i] / (A2[i] + eps);
              },
              "log_eps");
}

namespace {

// Shared softmax backward: dx_j = y_j * (dy_j - sum_k dy_k y_k) per row.
void softmax_backward(const Tensor& y, const Tensor& dy, Tensor& dx) {
  for (int i = 0; i < y.rows(); ++i) {
    double dot = 0.0;
    for (int j = 0; j < y.cols(); ++j) dot += dy.at(i, j) * y.at(i, j);
    for (int j = 0; j < y.cols(); ++j) dx.at(i, j) += y.at(i, j) * (dy.at(i, j) - dot);
  }
}

}  // namespace

Tape::Var Tape::softmax_rows(Var a) {
  const Tensor& A = val(a);
  Tensor Y(A.rows(), A.cols());
  int bad = -1;
  kernels::softmax_rows(A.data(), Y.data(), A.rows(), A.cols(), nullptr, &bad);
  Var self = static_cast<Var>(nodes_.size());
  return push(std::move(Y),
              [a, self](Tape& t) { softmax_backward(t.val(self), t.g(self), t.g(a)); },
              "softmax_rows");
}

Tape::Var Tape::softmax_rows_masked(Var a, const std::vector<std::uint8_t>& colmask) {
  const Tensor& A = val(a);
  if (static_cast<int>(colmask.size()) != A.cols())
    throw DimensionError("softmax_rows_masked: mask length " + std::to_string(colmask.size()) +
                         " vs cols " + std::to_string(A.cols()));
  Tensor Y(A.rows(), A.cols());
  int bad = -1;
  kernels::softmax_rows(A.data(), Y.data(), A.rows(), A.cols(), colmask.data(), &bad);
  if (bad >= 0)
    throw NumericError("softmax_rows_masked: no admissible column in row " + std::to_string(bad));
  Var self = static_cast<Var>(nodes_.size());
  return push(std::move(Y),
              [a, self](Tape& t) { softmax_backward(t.val(self), t.g(self), t.g(a)); },
              "softmax_rows_masked");
}

Tape::Var Tape::concat_cols(Var a, Var b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  if (A.rows() != B.rows())
    throw DimensionError("concat_cols: " + A.shape_str() + " | " + B.shape_str());
  Tensor C(A.rows(), A.cols() + B.cols());
  for (int i = 0; i < A.rows(); ++i) {
    for (int j = 0; j < A.cols(); ++j) C.at(i, j) = A.at(i, j);
    for (int j = 0; j < B.cols(); ++j) C.at(i, A.cols() + j) = B.at(i, j);
  }
  Var self = static_cast<Var>(nodes_.size());
  int ac = A.cols(), bc = B.cols();
  return push(std::move(C),
              [a, b, ac, bc, self](Tape& t) {
                const Tensor& dC = t.g(self);
                Tensor& dA = t.g(a);
                Tensor& dB = t.g(b);
                for (int i = 0; i < dC.rows(); ++i) {
                  for (int j = 0; j < ac; ++j) dA.at(i, j) += dC.at(i, j);
                  for (int j = 0; j < bc; ++j) dB.at(i, j) += dC.at(i, ac + j);
                }
              },
              "concat_cols");
}

Tape::Var Tape::slice_rows(Var a, int r0, int r1) {
  const Tensor& A = val(a);
  if (r0 < 0 || r1 > A.rows() || r0 >= r1)
    throw DimensionError("slice_rows: [" + std::to_string(r0) + "," + std::to_string(r1) +
                         ") of " + A.shape_str());
  Tensor C(r1 - r0, A.cols());
  for (int i = r0; i < r1; ++i)
    for (int j = 0; j < A.cols(); ++j) C.at(i - r0, j) = A.at(i, j);
  Var self = static_cast<Var>(nodes_.size());
  return push(std::move(C),
              [a, r0, self](Tape& t) {
                const Tensor& dC = t.g(self);
                Tensor& dA = t.g(a);
                for (int i = 0; i < dC.rows(); ++i)
                  for (int j = 0; j < dC.cols(); ++j) dA.at(r0 + i, j) += dC.at(i, j);
              },
              "slice_rows");
}

Tape::Var Tape::slice_cols(Var a, int c0, int c1) {
  const Tensor& A = val(a);
  if (c0 < 0 || c1 > A.cols() || c0 >= c1)
    throw DimensionError("slice_cols: [" + std::to_string(c0) + "," + std::to_string(c1) +
                         ") of " + A.shape_str());
  Tensor C(A.rows(), c1 - c0);
  for (int i = 0; i < A.rows(); ++i)
    for (int j = c0; j < c1; ++j) C.at(i, j - c0) = A.at(i, j);
  Var self = static_cast<Var>(nodes_.size());
  return push(std::move(C),
              [a, c0, self](Tape& t) {
                const Tensor& dC = t.g(self);
                Tensor& dA = t.g(a);
                for (int i = 0; i < dC.rows(); ++i)
                  for (int j = 0; j < dC.cols(); ++j) dA.at(i, c0 + j) += dC.at(i, j);
              },
              "slice_cols");
}

Tape::Var Tape::mean_rows(Var a) {
  std::vector<std::uint8_t> all(val(a).rows(), 1);
  return mean_rows_masked(a, all);
}

Tape::Var Tape::mean_rows_masked(Var a, const std::vector<std::uint8_t>& rm) {
  const Tensor& A = val(a);
  if (static_cast<int>(rm.size()) != A.rows())
    throw DimensionError("mean_rows_masked: mask length " + std::to_string(rm.size()) +
                         " vs rows " + std::to_string(A.rows()));
  int count = 0;
  for (auto m : rm) count += m ? 1 : 0;
  if (count == 0) throw NumericError("mean_rows_masked: all rows masked");
  Tensor C(1, A.cols());
  for (int i = 0; i < A.rows(); ++i) {
    if (!rm[i]) continue;
    for (int j = 0; j < A.cols(); ++j) C.at(0, j) += A.at(i, j);
  }
  for (int j = 0; j < A.cols(); ++j) C.at(0, j) /= count;
  Var self = static_cast<Var>(nodes_.size());
  return push(std::move(C),
              [a, rm, count, self](Tape& t) {
                const Tensor& dC = t.g(self);
                Tensor& dA = t.g(a);
                for (int i = 0; i < dA.rows(); ++i) {
                  if (!rm[i]) continue;
                  for (int j = 0; j < dA.cols(); ++j) dA.at(i, j) += dC.at(0, j) / count;
                }
              },
              "mean_rows_masked");
}

Tape::Var Tape::max_rows(Var a) {
  std::vector<std::uint8_t> all(val(a).rows(), 1);
  return max_rows_masked(a, all);
}

Tape::Var Tape::max_rows_masked(Var a, const std::vector<std::uint8_t>& rm) {
  const Tensor& A = val(a);
  if (static_cast<int>(rm.size()) != A.rows())
    throw DimensionError("max_rows_masked: mask length " + std::to_string(rm.size()) +
                         " vs rows " + std::to_string(A.rows()));
  bool any = false;
  for (auto m : rm) any = any || m;
  if (!any) throw NumericError("max_rows_masked: all rows masked");
  Tensor C(1, A.cols());
  std::vector<int> arg(A.cols(), -1);
  for (int j = 0; j < A.cols(); ++j) {
    for (int i = 0; i < A.rows(); ++i) {
      if (!rm[i]) continue;
      if (arg[j] < 0 || A.at(i, j) > C.at(0, j)) {
        C.at(0, j) = A.at(i, j);
        arg[j] = i;
      }
    }
  }
  Var self = static_cast<Var>(nodes_.size());
  return push(std::move(C),
              [a, arg, self](Tape& t) {
                const Tensor& dC = t.g(self);
                Tensor& dA = t.g(a);
                for (int j = 0; j < dC.cols(); ++j) dA.at(arg[j], j) += dC.at(0, j);
              },
              "max_rows_masked");
}

Tape::Var Tape::row_sum(Var a) {
  const Tensor& A = val(a);
  Tensor C(A.rows(), 1);
  for (int i = 0; i < A.rows(); ++i) {
    double s = 0.0;
    for (int j = 0; j < A.cols(); ++j) s += A.at(i, j);
    C.at(i, 0) = s;
  }
  Var self = static_cast<Var>(nodes_.size());
  return push(std::move(C),
              [a, self](Tape& t) {
                const Tensor& dC = t.g(self);
                Tensor& dA = t.g(a);
                for (int i = 0; i < dA.rows(); ++i)
                  for (int j = 0; j < dA.cols(); ++j) dA.at(i, j) += dC.at(i, 0);
              },
              "row_sum");
}

Tape::Var Tape::div_colvec(Var a, Var s) {
  const Tensor& A = val(a);
  const Tensor& S = val(s);
  if (S.rows() != A.rows() || S.cols() != 1)
    throw DimensionError("div_colvec: " + A.shape_str() + " / " + S.shape_str());
  for (int i = 0; i < S.rows(); ++i)
    if (S.at(i, 0) == 0.0) throw NumericError("div_colvec: zero denominator in row " + std::to_string(i));
  Tensor C(A.rows(), A.cols());
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j) C.at(i, j) = A.at(i, j) / S.at(i, 0);
  Var self = static_cast<Var>(nodes_.size());
  return push(std::move(C),
              [a, s, self](Tape& t) {
                const Tensor& dC = t.g(self);
                const Tensor& A2 = t.val(a);
                const Tensor& S2 = t.val(s);
                Tensor& dA = t.g(a);
                Tensor& dS = t.g(s);
                for (int i = 0; i < dC.rows(); ++i) {
                  double si = S2.at(i, 0);
                  double acc = 0.0;
                  for (int j = 0; j < dC.cols(); ++j) {
                    dA.at(i, j) += dC.at(i, j) / si;
                    acc += dC.at(i, j) * A2.at(i, j);
                  }
                  dS.at(i, 0) += -acc / (si * si);
                }
              },
              "div_colvec");
}

Tape::Var Tape::zero_rows(Var a, const std::vector<std::uint8_t>& keep) {
  const Tensor& A = val(a);
  if (static_cast<int>(keep.size()) != A.rows())
    throw DimensionError("zero_rows: mask length " + std::to_string(keep.size()) + " vs rows " +
                         std::to_string(A.rows()));
  Tensor C(A.rows(), A.cols());
  for (int i = 0; i < A.rows(); ++i) {
    if (!keep[i]) continue;
    for (int j = 0; j < A.cols(); ++j) C.at(i, j) = A.at(i, j);
  }
  Var self = static_cast<Var>(nodes_.size());
  return push(std::move(C),
              [a, keep, self](Tape& t) {
                const Tensor& dC = t.g(self);
                Tensor& dA = t.g(a);
                for (int i = 0; i < dC.rows(); ++i) {
                  if (!keep[i]) continue;
                  for (int j = 0; j < dC.cols(); ++j) dA.at(i, j) += dC.at(i, j);
                }
              },
              "zero_rows");
}

Tape::Var Tape::embedding(Var table, const std::vector<int>& ids) {
  const Tensor& T = val(table);
  for (int id : ids)
    if (id < 0 || id >= T.rows())
      throw ValidationError("embedding: id " + std::to_string(id) + " out of range [0," +
                            std::to_string(T.rows()) + ")");
  Tensor C(static_cast<int>(ids.size()), T.cols());
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (int j = 0; j < T.cols(); ++j) C.at(static_cast<int>(i), j) = T.at(ids[i], j);
  Var self = static_cast<Var>(nodes_.size());
  return push(std::move(C),
              [table, ids, self](Tape& t) {
                const Tensor& dC = t.g(self);
                Tensor& dT = t.g(table);
                for (std::size_t i = 0; i < ids.size(); ++i)
                  for (int j = 0; j < dC.cols(); ++j)
                    dT.at(ids[i], j) += dC.at(static_cast<int>(i), j);
              },
              "embedding");
}

Tape::Var Tape::layer_norm_rows(Var x, Var gain, Var bias, double eps) {
  const Tensor& X = val(x);
  const Tensor& G = val(gain);
  const Tensor& B = val(bias);
  if (G.rows() != 1 || G.cols() != X.cols() || B.rows() != 1 || B.cols() != X.cols())
    throw DimensionError("layer_norm_rows: x " + X.shape_str() + " gain " + G.shape_str() +
                         " bias " + B.shape_str());
  Tensor Y(X.rows(), X.cols());
  Tensor mu(X.rows(), 1), rstd(X.rows(), 1);
  kernels::layer_norm_rows(X.data(), G.data(), B.data(), Y.data(), mu.data(), rstd.data(),
                           X.rows(), X.cols(), eps);
  Var self = static_cast<Var>(nodes_.size());
  return push(std::move(Y),
              [x, gain, bias, mu, rstd, self](Tape& t) {
                const Tensor& dY = t.g(self);
                const Tensor& X2 = t.val(x);
                const Tensor& G2 = t.val(gain);
                Tensor& dX = t.g(x);
                Tensor& dG = t.g(gain);
                Tensor& dB = t.g(bias);
                int n = X2.cols();
                for (int i = 0; i < X2.rows(); ++i) {
                  double m = mu.at(i, 0), rs = rstd.at(i, 0);
                  double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                  for (int j = 0; j < n; ++j) {
                    double xhat = (X2.at(i, j) - m) * rs;
                    double dxhat = dY.at(i, j) * G2.at(0, j);
                    dG.at(0, j) += dY.at(i, j) * xhat;
                    dB.at(0, j) += dY.at(i, j);
                    sum_dxhat += dxhat;
                    sum_dxhat_xhat += dxhat * xhat;
                  }
                  for (int j = 0; j < n; ++j) {
                    double xhat = (X2.at(i, j) - m) * rs;
                    double dxhat = dY.at(i, j) * G2.at(0, j);
                    dX.at(i, j) += rs * (dxhat - sum_dxhat / n - xhat * sum_dxhat_xhat / n);
                  }
                }
              },
              "layer_norm_rows");
}

Tape::Var Tape::pick_per_row(Var p, const std::vector<int>& idx) {
  const Tensor& P = val(p);
  if (static_cast<int>(idx.size()) != P.rows())
    throw DimensionError("pick_per_row: " + std::to_string(idx.size()) + " indices vs rows " +
                         std::to_string(P.rows()));
  for (int k : idx)
    if (k < 0 || k >= P.cols())
      throw ValidationError("pick_per_row: column " + std::to_string(k) + " out of range");
  Tensor C(P.rows(), 1);
  for (int i = 0; i < P.rows(); ++i) C.at(i, 0) = P.at(i, idx[i]);
  Var self = static_cast<Var>(nodes_.size());
  return push(std::move(C),
              [p, idx, self](Tape& t) {
                const Tensor& dC = t.g(self);
                Tensor& dP = t.g(p);
                for (int i = 0; i < dC.rows(); ++i) dP.at(i, idx[i]) += dC.at(i, 0);
              },
              "pick_per_row");
}

Tape::Var Tape::sum_all(Var a) {
  const Tensor& A = val(a);
  if (A.size() == 0) throw DimensionError("sum_all: empty tensor");
  Tensor C(1, 1);
  double s = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) s += A[i];
  C[0] = s;
  Var self = static_cast<Var>(nodes_.size());
  return push(std::move(C),
              [a, self](Tape& t) {
                double d = t.g(self)[0];
                Tensor& dA = t.g(a);
                for (std::size_t i = 0; i < dA.size(); ++i) dA[i] += d;
              },
              "sum_all");
}

Tape::Var Tape::mean_all(Var a) {
  const Tensor& A = val(a);
  if (A.size() == 0) throw DimensionError("mean_all: empty tensor");
  return scale(sum_all(a), 1.0 / static_cast<double>(A.size()));
}

double Tape::scalar(Var v) const {
  const Tensor& t = val(v);
  if (t.rows() != 1 || t.cols() != 1) throw DimensionError("scalar: node is " + t.shape_str());
  return t[0];
}

const Tensor& Tape::grad_of(Var v) const {
  if (!ran_backward_) throw Error("grad_of before backward");
  return nodes_[v].grad;
}

void Tape::backward(Var loss) {
  const Tensor& lv = val(loss);
  if (lv.rows() != 1 || lv.cols() != 1)
    throw DimensionError("backward: loss must be 1x1, got " + lv.shape_str());
  for (auto& n : nodes_) n.grad = Tensor(n.value.rows(), n.value.cols());
  nodes_[loss].grad[0] = 1.0;
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i)
    if (nodes_[i].back) nodes_[i].back(*this);
  for (auto& n : nodes_) {
    if (!n.pref) continue;
    if (check_finite_ && !n.grad.all_finite())
      throw NumericError("non-finite gradient for parameter " + n.pref->name);
    kernels::add(n.pref->grad.data(), n.grad.data(), n.pref->grad.data(), n.grad.size());
  }
  ran_backward_ = true;
}

}  // namespace shine
