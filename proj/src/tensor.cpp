#include "dapt/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dapt {

std::int64_t shape_size(const std::vector<int>& s) {
  std::int64_t n = 1;
  for (int e : s) n *= e;
  return n;
}

std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

Tensor::Tensor(std::vector<int> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
  if (shape_size(shape) != static_cast<std::int64_t>(data.size()))
    throw std::invalid_argument("tensor: data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
}

Tensor Tensor::zeros(std::vector<int> s) {
  Tensor t;
  t.data.assign(static_cast<size_t>(shape_size(s)), 0.0);
  t.shape = std::move(s);
  return t;
}

Tensor Tensor::full(std::vector<int> s, double v) {
  Tensor t = zeros(std::move(s));
  for (double& x : t.data) x = v;
  return t;
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::vec(std::vector<double> d) {
  int n = static_cast<int>(d.size());
  return Tensor({n}, std::move(d));
}

Tensor Tensor::row(std::vector<double> d) {
  int n = static_cast<int>(d.size());
  return Tensor({1, n}, std::move(d));
}

Tensor Tensor::matrix(int r, int c, std::vector<double> d) {
  return Tensor({r, c}, std::move(d));
}

int Tensor::rows() const {
  if (rank() != 2) throw std::invalid_argument("rows(): tensor is not rank-2, shape " + shape_str(shape));
  return shape[0];
}

int Tensor::cols() const {
  if (rank() != 2) throw std::invalid_argument("cols(): tensor is not rank-2, shape " + shape_str(shape));
  return shape[1];
}

std::int64_t Tensor::size() const { return static_cast<std::int64_t>(data.size()); }

double& Tensor::at(int i, int j) { return data[static_cast<size_t>(i) * shape[1] + j]; }
double Tensor::at(int i, int j) const { return data[static_cast<size_t>(i) * shape[1] + j]; }

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("item(): tensor has " + std::to_string(size()) + " elements");
  return data[0];
}

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace dapt
