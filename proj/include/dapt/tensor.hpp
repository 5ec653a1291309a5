#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dapt {

constexpr int kNoNode = -1;

// Dense n-dimensional array of doubles, row-major. Value semantics; safe to
// move between threads. `node` ties the tensor to a position on a Tape when
// it was produced by (or registered with) one, kNoNode otherwise.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;
  bool requires_grad = false;
  int node = kNoNode;

  Tensor() = default;
  Tensor(std::vector<int> s, std::vector<double> d);

  static Tensor zeros(std::vector<int> s);
  static Tensor full(std::vector<int> s, double v);
  static Tensor scalar(double v);
  static Tensor vec(std::vector<double> d);                 // rank-1
  static Tensor row(std::vector<double> d);                 // 1 x n
  static Tensor matrix(int r, int c, std::vector<double> d);

  int rank() const { return static_cast<int>(shape.size()); }
  std::int64_t size() const;
  int rows() const;  // rank-2 only
  int cols() const;
  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  double& at(std::int64_t i) { return data[static_cast<size_t>(i)]; }
  double at(std::int64_t i) const { return data[static_cast<size_t>(i)]; }
  double& at(int i, int j);
  double at(int i, int j) const;

  double item() const;  // requires size() == 1
  bool all_finite() const;
  bool empty() const { return data.empty(); }
};

std::int64_t shape_size(const std::vector<int>& s);
std::string shape_str(const std::vector<int>& s);

}  // namespace dapt
