// Copyright 2026 The Tarmac Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "tarmac/common.hpp"

namespace tarmac::nn {

/// Dense row-major matrix of doubles. Everything in the engine is 2D;
/// higher-rank data is handled by the callers as stacked matrices.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int rows, int cols) : r_(rows), c_(cols), v_(static_cast<std::size_t>(rows) * cols, 0.0) {}
  static Tensor full(int rows, int cols, double value) {
    Tensor t(rows, cols);
    std::fill(t.v_.begin(), t.v_.end(), value);
    return t;
  }

  int rows() const { return r_; }
  int cols() const { return c_; }
  std::size_t numel() const { return v_.size(); }
  bool empty() const { return v_.empty(); }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  double& at(int r, int c) { return v_[static_cast<std::size_t>(r) * c_ + c]; }
  double at(int r, int c) const { return v_[static_cast<std::size_t>(r) * c_ + c]; }
  double& operator[](std::size_t i) { return v_[i]; }
  double operator[](std::size_t i) const { return v_[i]; }

 private:
  int r_ = 0, c_ = 0;
  std::vector<double> v_;
};

struct ShapeMismatch : Error {
  using Error::Error;
};
struct GraphNotRecorded : Error {
  using Error::Error;
};

enum class Op : std::uint8_t {
  Input,
  Constant,
  MatMul,
  MatMulNT,
  Add,
  Sub,
  Mul,
  Div,
  Affine,        // s0 * x + s1
  AddRow,        // (m,n) + (1,n)
  AddCol,        // (m,n) + (m,1)
  MulCol,        // (m,n) * (m,1)
  Gelu,
  Softplus,
  Log,
  SoftmaxMasked, // row softmax restricted to ctx keep-mask
  LogSumExpRows, // (m,n) -> (m,1)
  LayerNorm,     // per-row; parents: x, gamma(1,n), beta(1,n)
  BatchNormMasked,  // per-col over ctx-valid rows; parents: x, gamma, beta
  SliceCols,
  SliceRows,
  ConcatCols,
  ConcatRows,
  RowSum,        // (m,n) -> (m,1)
  CumsumRows,    // out[i] = sum of rows 0..i
  SumAll,        // -> (1,1)
  Reshape,
  GatherRows,    // ctx holds row indices
};

/// Reverse-mode tape. Build a computation with the op methods, call
/// backward(loss) once, then read grad(id) for any node that required grad.
class Graph {
 public:
  struct Node {
    Op op = Op::Constant;
    std::array<int, 3> p{-1, -1, -1};
    int a0 = 0, a1 = 0;
    double s0 = 0.0, s1 = 0.0;
    Tensor val;
    Tensor grad;   // allocated lazily during backward
    Tensor ctx;    // op-specific constant payload (masks, indices)
    bool rg = false;
  };

  void reserve(std::size_t n) { nodes_.reserve(n); }
  std::size_t size() const { return nodes_.size(); }

  int input(Tensor v);         // requires grad
  int constant(Tensor v);      // no grad

  int matmul(int a, int b);
  int matmul_nt(int a, int b);
  int add(int a, int b);
  int sub(int a, int b);
  int mul(int a, int b);
  int div(int a, int b);
  int affine(int a, double scale, double shift);
  int add_row(int a, int row);
  int add_col(int a, int col);
  int mul_col(int a, int col);
  int gelu(int a);
  int softplus(int a);
  int log_(int a);
  int softmax_masked(int a, Tensor keep);
  int logsumexp_rows(int a);
  // The batch-norm epsilon is deliberately large: patch activations can have
  // near-zero variance (neighboring map nodes), and a small epsilon puts the
  // loss into a high-curvature regime that finite differences cannot probe.
  int layernorm(int x, int gamma, int beta, double eps = 1e-5);
  int batchnorm_masked(int x, int gamma, int beta, Tensor rowmask, double eps = 1e-2);
  int slice_cols(int a, int c0, int c1);
  int slice_rows(int a, int r0, int r1);
  int concat_cols(int a, int b);
  int concat_rows(int a, int b);
  int concat_cols(const std::vector<int>& ids);
  int concat_rows(const std::vector<int>& ids);
  int row_sum(int a);
  int cumsum_rows(int a);
  int sum_all(int a);
  int reshape(int a, int rows, int cols);
  int gather_rows(int a, const std::vector<int>& idx);

  /// Seed d(loss)/d(loss)=1 and accumulate gradients tape-backwards.
  void backward(int loss_id);

  const Tensor& val(int id) const { return nodes_[check(id)].val; }
  /// Gradient of the loss w.r.t. node `id` (zero if the node is off-path).
  const Tensor& grad(int id);
  bool requires_grad(int id) const { return nodes_[check(id)].rg; }

 private:
  std::size_t check(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
      throw GraphNotRecorded("node id out of range");
    return static_cast<std::size_t>(id);
  }
  int push(Node n);
  Tensor& grad_buf(int id);

  std::vector<Node> nodes_;
  bool ran_backward_ = false;
};

/// Adam with bias correction.
struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Tensor m, v;
  std::int64_t step = 0;
};

void adam_step(Tensor& param, const Tensor& grad, AdamState& state, const AdamConfig& cfg);

}  // namespace tarmac::nn
