#pragma once

#include <functional>
#include <vector>

#include "dapt/tensor.hpp"

namespace dapt {

// Reverse-mode differentiation tape. Define-by-run: every op records one node
// holding its output value, its parent ids and a vector-Jacobian closure.
// Replaying the nodes in reverse creation order visits each node after all of
// its consumers, so a single backward sweep accumulates exact gradients.
//
// A tape is confined to one thread. Tensors returned by ops are plain values
// carrying the producing node id; parent values are read back from the tape
// inside the VJPs, so closures stay small.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Trainable input: gradients are accumulated for it.
  Tensor leaf(Tensor t);
  // On-graph constant: participates in values, never receives gradient.
  Tensor constant(Tensor t);

  // --- elementwise / scalar ---
  Tensor add(const Tensor& a, const Tensor& b);  // same shape, or b row-broadcast over rank-2 a
  Tensor mul(const Tensor& a, const Tensor& b);  // same shape
  Tensor scale(const Tensor& a, double s);
  Tensor add_const(const Tensor& a, double s);
  Tensor relu(const Tensor& a);
  Tensor gelu(const Tensor& a);
  Tensor exp(const Tensor& a);
  Tensor log(const Tensor& a);  // domain error on non-positive input
  Tensor sigmoid(const Tensor& a);

  // --- linear algebra ---
  Tensor matmul(const Tensor& a, const Tensor& b);
  Tensor transpose(const Tensor& a);

  // --- normalization / rows ---
  Tensor softmax_rows(const Tensor& a);  // rank-1 treated as a single row
  Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias,
                         double eps = 1e-5);
  Tensor l2_normalize_rows(const Tensor& a);  // domain error on a zero row

  // --- shape ---
  Tensor concat_rows(const std::vector<Tensor>& parts);
  Tensor concat_cols(const std::vector<Tensor>& parts);
  Tensor slice_rows(const Tensor& a, int start, int count);
  Tensor slice_cols(const Tensor& a, int start, int count);
  Tensor reshape(const Tensor& a, std::vector<int> shape);

  // --- reductions / selection ---
  Tensor sum_all(const Tensor& a);
  Tensor mean_all(const Tensor& a);
  Tensor mean_rows(const Tensor& a);                       // r x c -> 1 x c
  Tensor take_rows(const Tensor& a, std::vector<int> rows);  // row gather (embedding lookup)
  Tensor take_entries(const Tensor& a, std::vector<int> col_per_row);  // a[i, idx[i]]

  // --- metric primitives ---
  Tensor cosine_similarity(const Tensor& a, const Tensor& b);  // scalar in [-1,1]
  Tensor l1_distance(const Tensor& a, const Tensor& b);        // scalar >= 0

  // Backward from a scalar root. Clears previous gradients; leaves
  // unreachable from the root keep zero gradient.
  void backward(const Tensor& root);
  // Backward seeded with an explicit output gradient (used to resume a
  // backward pass across tape boundaries when batching across threads).
  void backward_seeded(const Tensor& root, const Tensor& seed);

  // Gradient assigned to a taped tensor by the last backward sweep; zeros of
  // the tensor's shape when the node was not reached. Lookup error when the
  // tensor is not on this tape.
  Tensor grad_of(const Tensor& t) const;

  const Tensor& value_of(int node) const;
  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  void reset();

 private:
  // Parent gradients are returned aligned with `parents`; empty tensor means
  // no contribution to that parent.
  using Vjp = std::function<std::vector<Tensor>(const Tensor& gout)>;

  struct Node {
    Tensor value;
    std::vector<int> parents;
    Vjp vjp;  // null for leaves/constants
  };

  int push(Tensor value, std::vector<int> parents, Vjp vjp);
  int require_on_tape(const Tensor& t, const char* op) const;
  void run_backward(int root_node, Tensor seed);

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
};

}  // namespace dapt
