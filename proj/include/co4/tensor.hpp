#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "co4/rng.hpp"

namespace co4 {

struct Tensor;

// One recorded operation. Parents are saved by value (they alias the same
// data/grad buffers), so fan-out accumulates additively into shared grads.
struct Node {
  std::vector<Tensor> parents;
  std::shared_ptr<std::vector<double>> out_data;
  std::shared_ptr<std::vector<double>> out_grad;
  std::vector<int> out_shape;
  std::function<void(Node&)> backward;
};

// Dense row-major tensor of 64-bit floats. Copies are shallow: they share
// data, grad and the autodiff node. When requires_grad is set the grad buffer
// is allocated eagerly so every alias sees the same accumulator.
struct Tensor {
  std::vector<int> shape;
  std::shared_ptr<std::vector<double>> data;
  std::shared_ptr<std::vector<double>> grad;
  bool requires_grad = false;
  std::shared_ptr<Node> node;

  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, double value,
                     bool requires_grad = false);
  // Validates that every value is finite.
  static Tensor from_data(std::vector<int> shape, std::vector<double> values,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  std::size_t size() const { return data ? data->size() : 0; }
  int rows() const;
  int cols() const;
  double& operator[](std::size_t i) { return (*data)[i]; }
  const double& operator[](std::size_t i) const { return (*data)[i]; }
  double& at(int i, int j);
  const double& at(int i, int j) const;
  double value() const;  // scalar tensors only

  void zero_grad();
  double grad_at(std::size_t i) const { return (*grad)[i]; }
  void assert_finite(const char* what) const;
};

std::string shape_str(const std::vector<int>& shape);

// ---- autodiff --------------------------------------------------------------

// Reverse-mode sweep from a scalar loss. Visits each recorded node exactly
// once; throws std::runtime_error when loss is not a scalar.
void backward(Tensor& loss);

// ---- differentiable ops ----------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
// x: r×c, bias: length-c (or 1×c) row vector broadcast over rows.
Tensor add_rowvec(const Tensor& x, const Tensor& bias);

Tensor matmul(const Tensor& a, const Tensor& b);
// a: m×k, b: n×k, result m×n = a·bᵀ.
Tensor matmul_nt(const Tensor& a, const Tensor& b);

Tensor relu(const Tensor& x);
Tensor relu6(const Tensor& x);
Tensor softmax_rows(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);

Tensor row(const Tensor& x, int i);                  // 1×c slice of a r×c
Tensor broadcast_rows(const Tensor& x, int r);       // 1×c -> r×c
Tensor mean_rows(const Tensor& x);                   // r×c -> 1×c
Tensor concat_rows(const std::vector<Tensor>& xs);   // stack along rows
Tensor slice_cols(const Tensor& x, int off, int len);
Tensor concat_cols(const std::vector<Tensor>& xs);

Tensor gather_rows(const Tensor& table, const std::vector<int>& ids);
Tensor dropout(const Tensor& x, double p, Rng& rng);
Tensor sum(const Tensor& x);  // -> scalar
// logits: length-C (or 1×C); returns scalar -log softmax(logits)[label].
Tensor cross_entropy_logits(const Tensor& logits, int label);

}  // namespace co4
