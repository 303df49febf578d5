// Copyright 2026 The Tarmac Authors
// SPDX-License-Identifier: Apache-2.0
#include "tarmac/nn.hpp"

#include <algorithm>
#include <cmath>

namespace tarmac::nn {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

void require(bool cond, const char* msg) {
  if (!cond) throw ShapeMismatch(msg);
}

}  // namespace

int Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Tensor& Graph::grad_buf(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.empty()) n.grad = Tensor(n.val.rows(), n.val.cols());
  return n.grad;
}

const Tensor& Graph::grad(int id) {
  Node& n = nodes_[check(id)];
  if (!ran_backward_) throw GraphNotRecorded("backward() has not run");
  if (n.grad.empty()) n.grad = Tensor(n.val.rows(), n.val.cols());
  return n.grad;
}

int Graph::input(Tensor v) {
  Node n;
  n.op = Op::Input;
  n.val = std::move(v);
  n.rg = true;
  return push(std::move(n));
}

int Graph::constant(Tensor v) {
  Node n;
  n.op = Op::Constant;
  n.val = std::move(v);
  return push(std::move(n));
}

int Graph::matmul(int a, int b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  require(A.cols() == B.rows(), "matmul inner dims");
  Node n;
  n.op = Op::MatMul;
  n.p = {a, b, -1};
  n.rg = nodes_[check(a)].rg || nodes_[check(b)].rg;
  n.val = Tensor(A.rows(), B.cols());
  const int M = A.rows(), K = A.cols(), N = B.cols();
  for (int i = 0; i < M; ++i) {
    double* out = n.val.data() + static_cast<std::size_t>(i) * N;
    const double* arow = A.data() + static_cast<std::size_t>(i) * K;
    for (int k = 0; k < K; ++k) {
      const double av = arow[k];
      if (av == 0.0) continue;
      const double* brow = B.data() + static_cast<std::size_t>(k) * N;
      for (int j = 0; j < N; ++j) out[j] += av * brow[j];
    }
  }
  return push(std::move(n));
}

int Graph::matmul_nt(int a, int b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  require(A.cols() == B.cols(), "matmul_nt inner dims");
  Node n;
  n.op = Op::MatMulNT;
  n.p = {a, b, -1};
  n.rg = nodes_[check(a)].rg || nodes_[check(b)].rg;
  n.val = Tensor(A.rows(), B.rows());
  const int M = A.rows(), K = A.cols(), N = B.rows();
  for (int i = 0; i < M; ++i) {
    const double* arow = A.data() + static_cast<std::size_t>(i) * K;
    double* out = n.val.data() + static_cast<std::size_t>(i) * N;
    for (int j = 0; j < N; ++j) {
      const double* brow = B.data() + static_cast<std::size_t>(j) * K;
      double acc = 0.0;
      for (int k = 0; k < K; ++k) acc += arow[k] * brow[k];
      out[j] = acc;
    }
  }
  return push(std::move(n));
}

namespace {

template <class F>
Tensor zip(const Tensor& A, const Tensor& B, F f) {
  Tensor out(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.numel(); ++i) out[i] = f(A[i], B[i]);
  return out;
}

}  // namespace

int Graph::add(int a, int b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  require(A.rows() == B.rows() && A.cols() == B.cols(), "add shapes");
  Node n;
  n.op = Op::Add;
  n.p = {a, b, -1};
  n.rg = nodes_[check(a)].rg || nodes_[check(b)].rg;
  n.val = zip(A, B, [](double x, double y) { return x + y; });
  return push(std::move(n));
}

int Graph::sub(int a, int b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  require(A.rows() == B.rows() && A.cols() == B.cols(), "sub shapes");
  Node n;
  n.op = Op::Sub;
  n.p = {a, b, -1};
  n.rg = nodes_[check(a)].rg || nodes_[check(b)].rg;
  n.val = zip(A, B, [](double x, double y) { return x - y; });
  return push(std::move(n));
}

int Graph::mul(int a, int b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  require(A.rows() == B.rows() && A.cols() == B.cols(), "mul shapes");
  Node n;
  n.op = Op::Mul;
  n.p = {a, b, -1};
  n.rg = nodes_[check(a)].rg || nodes_[check(b)].rg;
  n.val = zip(A, B, [](double x, double y) { return x * y; });
  return push(std::move(n));
}

int Graph::div(int a, int b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  require(A.rows() == B.rows() && A.cols() == B.cols(), "div shapes");
  Node n;
  n.op = Op::Div;
  n.p = {a, b, -1};
  n.rg = nodes_[check(a)].rg || nodes_[check(b)].rg;
  n.val = zip(A, B, [](double x, double y) { return x / y; });
  return push(std::move(n));
}

int Graph::affine(int a, double scale, double shift) {
  const Tensor& A = val(a);
  Node n;
  n.op = Op::Affine;
  n.p = {a, -1, -1};
  n.s0 = scale;
  n.s1 = shift;
  n.rg = nodes_[check(a)].rg;
  n.val = Tensor(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.numel(); ++i) n.val[i] = scale * A[i] + shift;
  return push(std::move(n));
}

int Graph::add_row(int a, int row) {
  const Tensor& A = val(a);
  const Tensor& R = val(row);
  require(R.rows() == 1 && R.cols() == A.cols(), "add_row shapes");
  Node n;
  n.op = Op::AddRow;
  n.p = {a, row, -1};
  n.rg = nodes_[check(a)].rg || nodes_[check(row)].rg;
  n.val = Tensor(A.rows(), A.cols());
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j) n.val.at(i, j) = A.at(i, j) + R.at(0, j);
  return push(std::move(n));
}

int Graph::add_col(int a, int col) {
  const Tensor& A = val(a);
  const Tensor& C = val(col);
  require(C.cols() == 1 && C.rows() == A.rows(), "add_col shapes");
  Node n;
  n.op = Op::AddCol;
  n.p = {a, col, -1};
  n.rg = nodes_[check(a)].rg || nodes_[check(col)].rg;
  n.val = Tensor(A.rows(), A.cols());
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j) n.val.at(i, j) = A.at(i, j) + C.at(i, 0);
  return push(std::move(n));
}

int Graph::mul_col(int a, int col) {
  const Tensor& A = val(a);
  const Tensor& C = val(col);
  require(C.cols() == 1 && C.rows() == A.rows(), "mul_col shapes");
  Node n;
  n.op = Op::MulCol;
  n.p = {a, col, -1};
  n.rg = nodes_[check(a)].rg || nodes_[check(col)].rg;
  n.val = Tensor(A.rows(), A.cols());
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j) n.val.at(i, j) = A.at(i, j) * C.at(i, 0);
  return push(std::move(n));
}

int Graph::gelu(int a) {
  const Tensor& A = val(a);
  Node n;
  n.op = Op::Gelu;
  n.p = {a, -1, -1};
  n.rg = nodes_[check(a)].rg;
  n.val = Tensor(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.numel(); ++i)
    n.val[i] = 0.5 * A[i] * (1.0 + std::erf(A[i] * kInvSqrt2));
  return push(std::move(n));
}

int Graph::softplus(int a) {
  const Tensor& A = val(a);
  Node n;
  n.op = Op::Softplus;
  n.p = {a, -1, -1};
  n.rg = nodes_[check(a)].rg;
  n.val = Tensor(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.numel(); ++i) {
    const double x = A[i];
    n.val[i] = x > 30.0 ? x : std::log1p(std::exp(x));
  }
  return push(std::move(n));
}

int Graph::log_(int a) {
  const Tensor& A = val(a);
  Node n;
  n.op = Op::Log;
  n.p = {a, -1, -1};
  n.rg = nodes_[check(a)].rg;
  n.val = Tensor(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.numel(); ++i) n.val[i] = std::log(A[i]);
  return push(std::move(n));
}

int Graph::softmax_masked(int a, Tensor keep) {
  const Tensor& A = val(a);
  require(keep.rows() == A.rows() && keep.cols() == A.cols(), "softmax mask shape");
  Node n;
  n.op = Op::SoftmaxMasked;
  n.p = {a, -1, -1};
  n.rg = nodes_[check(a)].rg;
  n.val = Tensor(A.rows(), A.cols());
  for (int i = 0; i < A.rows(); ++i) {
    double mx = -1e300;
    bool any = false;
    for (int j = 0; j < A.cols(); ++j)
      if (keep.at(i, j) != 0.0) {
        mx = std::max(mx, A.at(i, j));
        any = true;
      }
    if (!any) continue;  // all-masked row stays zero
    double denom = 0.0;
    for (int j = 0; j < A.cols(); ++j)
      if (keep.at(i, j) != 0.0) denom += std::exp(A.at(i, j) - mx);
    for (int j = 0; j < A.cols(); ++j)
      if (keep.at(i, j) != 0.0) n.val.at(i, j) = std::exp(A.at(i, j) - mx) / denom;
  }
  n.ctx = std::move(keep);
  return push(std::move(n));
}

int Graph::logsumexp_rows(int a) {
  const Tensor& A = val(a);
  Node n;
  n.op = Op::LogSumExpRows;
  n.p = {a, -1, -1};
  n.rg = nodes_[check(a)].rg;
  n.val = Tensor(A.rows(), 1);
  for (int i = 0; i < A.rows(); ++i) {
    double mx = A.at(i, 0);
    for (int j = 1; j < A.cols(); ++j) mx = std::max(mx, A.at(i, j));
    double acc = 0.0;
    for (int j = 0; j < A.cols(); ++j) acc += std::exp(A.at(i, j) - mx);
    n.val.at(i, 0) = mx + std::log(acc);
  }
  return push(std::move(n));
}

int Graph::layernorm(int x, int gamma, int beta, double eps) {
  const Tensor& X = val(x);
  const Tensor& G = val(gamma);
  const Tensor& B = val(beta);
  require(G.rows() == 1 && G.cols() == X.cols(), "layernorm gamma shape");
  require(B.rows() == 1 && B.cols() == X.cols(), "layernorm beta shape");
  Node n;
  n.op = Op::LayerNorm;
  n.p = {x, gamma, beta};
  n.s0 = eps;
  n.rg = nodes_[check(x)].rg || nodes_[check(gamma)].rg || nodes_[check(beta)].rg;
  n.val = Tensor(X.rows(), X.cols());
  const int C = X.cols();
  for (int i = 0; i < X.rows(); ++i) {
    double mean = 0.0;
    for (int j = 0; j < C; ++j) mean += X.at(i, j);
    mean /= C;
    double var = 0.0;
    for (int j = 0; j < C; ++j) {
      const double d = X.at(i, j) - mean;
      var += d * d;
    }
    var /= C;
    const double inv = 1.0 / std::sqrt(var + eps);
    for (int j = 0; j < C; ++j)
      n.val.at(i, j) = G.at(0, j) * (X.at(i, j) - mean) * inv + B.at(0, j);
  }
  return push(std::move(n));
}

int Graph::batchnorm_masked(int x, int gamma, int beta, Tensor rowmask, double eps) {
  const Tensor& X = val(x);
  const Tensor& G = val(gamma);
  const Tensor& B = val(beta);
  require(G.rows() == 1 && G.cols() == X.cols(), "batchnorm gamma shape");
  require(B.rows() == 1 && B.cols() == X.cols(), "batchnorm beta shape");
  require(rowmask.rows() == X.rows() && rowmask.cols() == 1, "batchnorm mask shape");
  Node n;
  n.op = Op::BatchNormMasked;
  n.p = {x, gamma, beta};
  n.s0 = eps;
  n.rg = nodes_[check(x)].rg || nodes_[check(gamma)].rg || nodes_[check(beta)].rg;
  n.val = Tensor(X.rows(), X.cols());
  int count = 0;
  for (int i = 0; i < X.rows(); ++i) count += rowmask.at(i, 0) != 0.0 ? 1 : 0;
  if (count > 0) {
    for (int j = 0; j < X.cols(); ++j) {
      double mean = 0.0;
      for (int i = 0; i < X.rows(); ++i)
        if (rowmask.at(i, 0) != 0.0) mean += X.at(i, j);
      mean /= count;
      double var = 0.0;
      for (int i = 0; i < X.rows(); ++i)
        if (rowmask.at(i, 0) != 0.0) {
          const double d = X.at(i, j) - mean;
          var += d * d;
        }
      var /= count;
      const double inv = 1.0 / std::sqrt(var + eps);
      for (int i = 0; i < X.rows(); ++i)
        if (rowmask.at(i, 0) != 0.0)
          n.val.at(i, j) = G.at(0, j) * (X.at(i, j) - mean) * inv + B.at(0, j);
    }
  }
  n.ctx = std::move(rowmask);
  return push(std::move(n));
}

int Graph::slice_cols(int a, int c0, int c1) {
  const Tensor& A = val(a);
  require(0 <= c0 && c0 < c1 && c1 <= A.cols(), "slice_cols bounds");
  Node n;
  n.op = Op::SliceCols;
  n.p = {a, -1, -1};
  n.a0 = c0;
  n.a1 = c1;
  n.rg = nodes_[check(a)].rg;
  n.val = Tensor(A.rows(), c1 - c0);
  for (int i = 0; i < A.rows(); ++i)
    for (int j = c0; j < c1; ++j) n.val.at(i, j - c0) = A.at(i, j);
  return push(std::move(n));
}

int Graph::slice_rows(int a, int r0, int r1) {
  const Tensor& A = val(a);
  require(0 <= r0 && r0 < r1 && r1 <= A.rows(), "slice_rows bounds");
  Node n;
  n.op = Op::SliceRows;
  n.p = {a, -1, -1};
  n.a0 = r0;
  n.a1 = r1;
  n.rg = nodes_[check(a)].rg;
  n.val = Tensor(r1 - r0, A.cols());
  for (int i = r0; i < r1; ++i)
    for (int j = 0; j < A.cols(); ++j) n.val.at(i - r0, j) = A.at(i, j);
  return push(std::move(n));
}

int Graph::concat_cols(int a, int b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  require(A.rows() == B.rows(), "concat_cols rows");
  Node n;
  n.op = Op::ConcatCols;
  n.p = {a, b, -1};
  n.a0 = A.cols();
  n.rg = nodes_[check(a)].rg || nodes_[check(b)].rg;
  n.val = Tensor(A.rows(), A.cols() + B.cols());
  for (int i = 0; i < A.rows(); ++i) {
    for (int j = 0; j < A.cols(); ++j) n.val.at(i, j) = A.at(i, j);
    for (int j = 0; j < B.cols(); ++j) n.val.at(i, A.cols() + j) = B.at(i, j);
  }
  return push(std::move(n));
}

int Graph::concat_rows(int a, int b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  require(A.cols() == B.cols(), "concat_rows cols");
  Node n;
  n.op = Op::ConcatRows;
  n.p = {a, b, -1};
  n.a0 = A.rows();
  n.rg = nodes_[check(a)].rg || nodes_[check(b)].rg;
  n.val = Tensor(A.rows() + B.rows(), A.cols());
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j) n.val.at(i, j) = A.at(i, j);
  for (int i = 0; i < B.rows(); ++i)
    for (int j = 0; j < B.cols(); ++j) n.val.at(A.rows() + i, j) = B.at(i, j);
  return push(std::move(n));
}

int Graph::concat_cols(const std::vector<int>& ids) {
  require(!ids.empty(), "concat_cols empty list");
  int cur = ids[0];
  for (std::size_t i = 1; i < ids.size(); ++i) cur = concat_cols(cur, ids[i]);
  return cur;
}

int Graph::concat_rows(const std::vector<int>& ids) {
  require(!ids.empty(), "concat_rows empty list");
  int cur = ids[0];
  for (std::size_t i = 1; i < ids.size(); ++i) cur = concat_rows(cur, ids[i]);
  return cur;
}

int Graph::row_sum(int a) {
  const Tensor& A = val(a);
  Node n;
  n.op = Op::RowSum;
  n.p = {a, -1, -1};
  n.rg = nodes_[check(a)].rg;
  n.val = Tensor(A.rows(), 1);
  for (int i = 0; i < A.rows(); ++i) {
    double acc = 0.0;
    for (int j = 0; j < A.cols(); ++j) acc += A.at(i, j);
    n.val.at(i, 0) = acc;
  }
  return push(std::move(n));
}

int Graph::cumsum_rows(int a) {
  const Tensor& A = val(a);
  Node n;
  n.op = Op::CumsumRows;
  n.p = {a, -1, -1};
  n.rg = nodes_[check(a)].rg;
  n.val = Tensor(A.rows(), A.cols());
  for (int j = 0; j < A.cols(); ++j) {
    double acc = 0.0;
    for (int i = 0; i < A.rows(); ++i) {
      acc += A.at(i, j);
      n.val.at(i, j) = acc;
    }
  }
  return push(std::move(n));
}

int Graph::sum_all(int a) {
  const Tensor& A = val(a);
  Node n;
  n.op = Op::SumAll;
  n.p = {a, -1, -1};
  n.rg = nodes_[check(a)].rg;
  n.val = Tensor(1, 1);
  double acc = 0.0;
  for (std::size_t i = 0; i < A.numel(); ++i) acc += A[i];
  n.val.at(0, 0) = acc;
  return push(std::move(n));
}

int Graph::reshape(int a, int rows, int cols) {
  const Tensor& A = val(a);
  require(static_cast<std::size_t>(rows) * cols == A.numel(), "reshape numel");
  Node n;
  n.op = Op::Reshape;
  n.p = {a, -1, -1};
  n.rg = nodes_[check(a)].rg;
  n.val = Tensor(rows, cols);
  for (std::size_t i = 0; i < A.numel(); ++i) n.val[i] = A[i];
  return push(std::move(n));
}

int Graph::gather_rows(int a, const std::vector<int>& idx) {
  const Tensor& A = val(a);
  Node n;
  n.op = Op::GatherRows;
  n.p = {a, -1, -1};
  n.rg = nodes_[check(a)].rg;
  n.val = Tensor(static_cast<int>(idx.size()), A.cols());
  n.ctx = Tensor(static_cast<int>(idx.size()), 1);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    require(idx[i] >= 0 && idx[i] < A.rows(), "gather_rows index");
    n.ctx[i] = static_cast<double>(idx[i]);
    for (int j = 0; j < A.cols(); ++j) n.val.at(static_cast<int>(i), j) = A.at(idx[i], j);
  }
  return push(std::move(n));
}

void Graph::backward(int loss_id) {
  const std::size_t loss = check(loss_id);
  require(nodes_[loss].val.rows() == 1 && nodes_[loss].val.cols() == 1, "loss must be scalar");
  grad_buf(loss_id).at(0, 0) = 1.0;
  ran_backward_ = true;

  for (std::size_t ni = nodes_.size(); ni-- > 0;) {
    Node& n = nodes_[ni];
    if (!n.rg || n.grad.empty()) continue;
    const Tensor& g = n.grad;

    auto parent_rg = [&](int slot) {
      return n.p[static_cast<std::size_t>(slot)] >= 0 &&
             nodes_[static_cast<std::size_t>(n.p[static_cast<std::size_t>(slot)])].rg;
    };
    auto pgrad = [&](int slot) -> Tensor& { return grad_buf(n.p[static_cast<std::size_t>(slot)]); };
    auto pval = [&](int slot) -> const Tensor& {
      return nodes_[static_cast<std::size_t>(n.p[static_cast<std::size_t>(slot)])].val;
    };

    switch (n.op) {
      case Op::Input:
      case Op::Constant:
        break;
      case Op::MatMul: {
        const Tensor& A = pval(0);
        const Tensor& B = pval(1);
        const int M = A.rows(), K = A.cols(), N = B.cols();
        if (parent_rg(0)) {
          Tensor& da = pgrad(0);
          for (int i = 0; i < M; ++i)
            for (int k = 0; k < K; ++k) {
              double acc = 0.0;
              for (int j = 0; j < N; ++j) acc += g.at(i, j) * B.at(k, j);
              da.at(i, k) += acc;
            }
        }
        if (parent_rg(1)) {
          Tensor& db = pgrad(1);
          for (int k = 0; k < K; ++k)
            for (int j = 0; j < N; ++j) {
              double acc = 0.0;
              for (int i = 0; i < M; ++i) acc += A.at(i, k) * g.at(i, j);
              db.at(k, j) += acc;
            }
        }
        break;
      }
      case Op::MatMulNT: {
        const Tensor& A = pval(0);
        const Tensor& B = pval(1);
        const int M = A.rows(), K = A.cols(), N = B.rows();
        if (parent_rg(0)) {
          Tensor& da = pgrad(0);
          for (int i = 0; i < M; ++i)
            for (int k = 0; k < K; ++k) {
              double acc = 0.0;
              for (int j = 0; j < N; ++j) acc += g.at(i, j) * B.at(j, k);
              da.at(i, k) += acc;
            }
        }
        if (parent_rg(1)) {
          Tensor& db = pgrad(1);
          for (int j = 0; j < N; ++j)
            for (int k = 0; k < K; ++k) {
              double acc = 0.0;
              for (int i = 0; i < M; ++i) acc += g.at(i, j) * A.at(i, k);
              db.at(j, k) += acc;
            }
        }
        break;
      }
      case Op::Add: {
        for (int s = 0; s < 2; ++s)
          if (parent_rg(s)) {
            Tensor& d = pgrad(s);
            for (std::size_t i = 0; i < g.numel(); ++i) d[i] += g[i];
          }
        break;
      }
      case Op::Sub: {
        if (parent_rg(0)) {
          Tensor& d = pgrad(0);
          for (std::size_t i = 0; i < g.numel(); ++i) d[i] += g[i];
        }
        if (parent_rg(1)) {
          Tensor& d = pgrad(1);
          for (std::size_t i = 0; i < g.numel(); ++i) d[i] -= g[i];
        }
        break;
      }
      case Op::Mul: {
        if (parent_rg(0)) {
          Tensor& d = pgrad(0);
          const Tensor& B = pval(1);
          for (std::size_t i = 0; i < g.numel(); ++i) d[i] += g[i] * B[i];
        }
        if (parent_rg(1)) {
          Tensor& d = pgrad(1);
          const Tensor& A = pval(0);
          for (std::size_t i = 0; i < g.numel(); ++i) d[i] += g[i] * A[i];
        }
        break;
      }
      case Op::Div: {
        const Tensor& A = pval(0);
        const Tensor& B = pval(1);
        if (parent_rg(0)) {
          Tensor& d = pgrad(0);
          for (std::size_t i = 0; i < g.numel(); ++i) d[i] += g[i] / B[i];
        }
        if (parent_rg(1)) {
          Tensor& d = pgrad(1);
          for (std::size_t i = 0; i < g.numel(); ++i) d[i] -= g[i] * A[i] / (B[i] * B[i]);
        }
        break;
      }
      case Op::Affine: {
        if (parent_rg(0)) {
          Tensor& d = pgrad(0);
          for (std::size_t i = 0; i < g.numel(); ++i) d[i] += n.s0 * g[i];
        }
        break;
      }
      case Op::AddRow: {
        if (parent_rg(0)) {
          Tensor& d = pgrad(0);
          for (std::size_t i = 0; i < g.numel(); ++i) d[i] += g[i];
        }
        if (parent_rg(1)) {
          Tensor& d = pgrad(1);
          for (int i = 0; i < g.rows(); ++i)
            for (int j = 0; j < g.cols(); ++j) d.at(0, j) += g.at(i, j);
        }
        break;
      }
      case Op::AddCol: {
        if (parent_rg(0)) {
          Tensor& d = pgrad(0);
          for (std::size_t i = 0; i < g.numel(); ++i) d[i] += g[i];
        }
        if (parent_rg(1)) {
          Tensor& d = pgrad(1);
          for (int i = 0; i < g.rows(); ++i) {
            double acc = 0.0;
            for (int j = 0; j < g.cols(); ++j) acc += g.at(i, j);
            d.at(i, 0) += acc;
          }
        }
        break;
      }
      case Op::MulCol: {
        const Tensor& A = pval(0);
        const Tensor& C = pval(1);
        if (parent_rg(0)) {
          Tensor& d = pgrad(0);
          for (int i = 0; i < g.rows(); ++i)
            for (int j = 0; j < g.cols(); ++j) d.at(i, j) += g.at(i, j) * C.at(i, 0);
        }
        if (parent_rg(1)) {
          Tensor& d = pgrad(1);
          for (int i = 0; i < g.rows(); ++i) {
            double acc = 0.0;
            for (int j = 0; j < g.cols(); ++j) acc += g.at(i, j) * A.at(i, j);
            d.at(i, 0) += acc;
          }
        }
        break;
      }
      case Op::Gelu: {
        if (parent_rg(0)) {
          Tensor& d = pgrad(0);
          const Tensor& X = pval(0);
          for (std::size_t i = 0; i < g.numel(); ++i) {
            const double x = X[i];
            const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
            const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
            d[i] += g[i] * (cdf + x * pdf);
          }
        }
        break;
      }
      case Op::Softplus: {
        if (parent_rg(0)) {
          Tensor& d = pgrad(0);
          const Tensor& X = pval(0);
          for (std::size_t i = 0; i < g.numel(); ++i)
            d[i] += g[i] / (1.0 + std::exp(-X[i]));
        }
        break;
      }
      case Op::Log: {
        if (parent_rg(0)) {
          Tensor& d = pgrad(0);
          const Tensor& X = pval(0);
          for (std::size_t i = 0; i < g.numel(); ++i) d[i] += g[i] / X[i];
        }
        break;
      }
      case Op::SoftmaxMasked: {
        if (parent_rg(0)) {
          Tensor& d = pgrad(0);
          const Tensor& Y = n.val;
          for (int i = 0; i < g.rows(); ++i) {
            double dot = 0.0;
            for (int j = 0; j < g.cols(); ++j) dot += g.at(i, j) * Y.at(i, j);
            for (int j = 0; j < g.cols(); ++j)
              if (n.ctx.at(i, j) != 0.0) d.at(i, j) += Y.at(i, j) * (g.at(i, j) - dot);
          }
        }
        break;
      }
      case Op::LogSumExpRows: {
        if (parent_rg(0)) {
          Tensor& d = pgrad(0);
          const Tensor& X = pval(0);
          for (int i = 0; i < X.rows(); ++i) {
            const double L = n.val.at(i, 0);
            const double gi = g.at(i, 0);
            for (int j = 0; j < X.cols(); ++j) d.at(i, j) += gi * std::exp(X.at(i, j) - L);
          }
        }
        break;
      }
      case Op::LayerNorm: {
        const Tensor& X = pval(0);
        const Tensor& G = pval(1);
        const int C = X.cols();
        const double eps = n.s0;
        for (int i = 0; i < X.rows(); ++i) {
          double mean = 0.0;
          for (int j = 0; j < C; ++j) mean += X.at(i, j);
          mean /= C;
          double var = 0.0;
          for (int j = 0; j < C; ++j) {
            const double dd = X.at(i, j) - mean;
            var += dd * dd;
          }
          var /= C;
          const double inv = 1.0 / std::sqrt(var + eps);
          if (parent_rg(1) || parent_rg(2)) {
            for (int j = 0; j < C; ++j) {
              const double xh = (X.at(i, j) - mean) * inv;
              if (parent_rg(1)) pgrad(1).at(0, j) += g.at(i, j) * xh;
              if (parent_rg(2)) pgrad(2).at(0, j) += g.at(i, j);
            }
          }
          if (parent_rg(0)) {
            double m1 = 0.0, m2 = 0.0;
            for (int j = 0; j < C; ++j) {
              const double gg = g.at(i, j) * G.at(0, j);
              const double xh = (X.at(i, j) - mean) * inv;
              m1 += gg;
              m2 += gg * xh;
            }
            m1 /= C;
            m2 /= C;
            Tensor& d = pgrad(0);
            for (int j = 0; j < C; ++j) {
              const double gg = g.at(i, j) * G.at(0, j);
              const double xh = (X.at(i, j) - mean) * inv;
              d.at(i, j) += inv * (gg - m1 - xh * m2);
            }
          }
        }
        break;
      }
      case Op::BatchNormMasked: {
        const Tensor& X = pval(0);
        const Tensor& G = pval(1);
        const double eps = n.s0;
        int count = 0;
        for (int i = 0; i < X.rows(); ++i) count += n.ctx.at(i, 0) != 0.0 ? 1 : 0;
        if (count == 0) break;
        for (int j = 0; j < X.cols(); ++j) {
          double mean = 0.0;
          for (int i = 0; i < X.rows(); ++i)
            if (n.ctx.at(i, 0) != 0.0) mean += X.at(i, j);
          mean /= count;
          double var = 0.0;
          for (int i = 0; i < X.rows(); ++i)
            if (n.ctx.at(i, 0) != 0.0) {
              const double dd = X.at(i, j) - mean;
              var += dd * dd;
            }
          var /= count;
          const double inv = 1.0 / std::sqrt(var + eps);
          if (parent_rg(1) || parent_rg(2)) {
            for (int i = 0; i < X.rows(); ++i)
              if (n.ctx.at(i, 0) != 0.0) {
                const double xh = (X.at(i, j) - mean) * inv;
                if (parent_rg(1)) pgrad(1).at(0, j) += g.at(i, j) * xh;
                if (parent_rg(2)) pgrad(2).at(0, j) += g.at(i, j);
              }
          }
          if (parent_rg(0)) {
            double m1 = 0.0, m2 = 0.0;
            for (int i = 0; i < X.rows(); ++i)
              if (n.ctx.at(i, 0) != 0.0) {
                const double gg = g.at(i, j) * G.at(0, j);
                const double xh = (X.at(i, j) - mean) * inv;
                m1 += gg;
                m2 += gg * xh;
              }
            m1 /= count;
            m2 /= count;
            Tensor& d = pgrad(0);
            for (int i = 0; i < X.rows(); ++i)
              if (n.ctx.at(i, 0) != 0.0) {
                const double gg = g.at(i, j) * G.at(0, j);
                const double xh = (X.at(i, j) - mean) * inv;
                d.at(i, j) += inv * (gg - m1 - xh * m2);
              }
          }
        }
        break;
      }
      case Op::SliceCols: {
        if (parent_rg(0)) {
          Tensor& d = pgrad(0);
          for (int i = 0; i < g.rows(); ++i)
            for (int j = 0; j < g.cols(); ++j) d.at(i, n.a0 + j) += g.at(i, j);
        }
        break;
      }
      case Op::SliceRows: {
        if (parent_rg(0)) {
          Tensor& d = pgrad(0);
          for (int i = 0; i < g.rows(); ++i)
            for (int j = 0; j < g.cols(); ++j) d.at(n.a0 + i, j) += g.at(i, j);
        }
        break;
      }
      case Op::ConcatCols: {
        if (parent_rg(0)) {
          Tensor& d = pgrad(0);
          for (int i = 0; i < d.rows(); ++i)
            for (int j = 0; j < n.a0; ++j) d.at(i, j) += g.at(i, j);
        }
        if (parent_rg(1)) {
          Tensor& d = pgrad(1);
          for (int i = 0; i < d.rows(); ++i)
            for (int j = 0; j < d.cols(); ++j) d.at(i, j) += g.at(i, n.a0 + j);
        }
        break;
      }
      case Op::ConcatRows: {
        if (parent_rg(0)) {
          Tensor& d = pgrad(0);
          for (int i = 0; i < n.a0; ++i)
            for (int j = 0; j < d.cols(); ++j) d.at(i, j) += g.at(i, j);
        }
        if (parent_rg(1)) {
          Tensor& d = pgrad(1);
          for (int i = 0; i < d.rows(); ++i)
            for (int j = 0; j < d.cols(); ++j) d.at(i, j) += g.at(n.a0 + i, j);
        }
        break;
      }
      case Op::RowSum: {
        if (parent_rg(0)) {
          Tensor& d = pgrad(0);
          for (int i = 0; i < d.rows(); ++i)
            for (int j = 0; j < d.cols(); ++j) d.at(i, j) += g.at(i, 0);
        }
        break;
      }
      case Op::CumsumRows: {
        if (parent_rg(0)) {
          Tensor& d = pgrad(0);
          for (int j = 0; j < g.cols(); ++j) {
            double acc = 0.0;
            for (int i = g.rows() - 1; i >= 0; --i) {
              acc += g.at(i, j);
              d.at(i, j) += acc;
            }
          }
        }
        break;
      }
      case Op::SumAll: {
        if (parent_rg(0)) {
          Tensor& d = pgrad(0);
          const double gg = g.at(0, 0);
          for (std::size_t i = 0; i < d.numel(); ++i) d[i] += gg;
        }
        break;
      }
      case Op::Reshape: {
        if (parent_rg(0)) {
          Tensor& d = pgrad(0);
          for (std::size_t i = 0; i < g.numel(); ++i) d[i] += g[i];
        }
        break;
      }
      case Op::GatherRows: {
        if (parent_rg(0)) {
          Tensor& d = pgrad(0);
          for (int i = 0; i < g.rows(); ++i) {
            const int src = static_cast<int>(n.ctx.at(i, 0));
            for (int j = 0; j < g.cols(); ++j) d.at(src, j) += g.at(i, j);
          }
        }
        break;
      }
    }
  }
}

void adam_step(Tensor& param, const Tensor& grad, AdamState& state, const AdamConfig& cfg) {
  if (state.m.empty()) {
    state.m = Tensor(param.rows(), param.cols());
    state.v = Tensor(param.rows(), param.cols());
  }
  if (grad.rows() != param.rows() || grad.cols() != param.cols())
    throw ShapeMismatch("adam grad shape");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < param.numel(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    param[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

}  // namespace tarmac::nn
