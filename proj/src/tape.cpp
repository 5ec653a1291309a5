#include "dapt/tape.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace dapt {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConst = Eigen::Map<const RowMat>;

MapConst as_mat(const Tensor& t, int r, int c) { return MapConst(t.data.data(), r, c); }
MapMat as_mat(Tensor& t, int r, int c) { return MapMat(t.data.data(), r, c); }

// rank-1 tensors pass through row ops as a single row
void row_view(const Tensor& t, int& r, int& c, const char* op) {
  if (t.rank() == 1) {
    r = 1;
    c = t.shape[0];
  } else if (t.rank() == 2) {
    r = t.shape[0];
    c = t.shape[1];
  } else {
    throw std::invalid_argument(std::string(op) + ": expected rank-1 or rank-2, got " + shape_str(t.shape));
  }
}

void check_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2)
    throw std::invalid_argument(std::string(op) + ": expected rank-2, got " + shape_str(t.shape));
}

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

}  // namespace

int Tape::push(Tensor value, std::vector<int> parents, Vjp vjp) {
  Node n;
  n.value = std::move(value);
  n.parents = std::move(parents);
  n.vjp = std::move(vjp);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::require_on_tape(const Tensor& t, const char* op) const {
  if (t.node < 0 || t.node >= static_cast<int>(nodes_.size()))
    throw std::invalid_argument(std::string(op) + ": input tensor is not on this tape");
  return t.node;
}

const Tensor& Tape::value_of(int node) const { return nodes_[static_cast<size_t>(node)].value; }

void Tape::reset() {
  nodes_.clear();
  grads_.clear();
}

Tensor Tape::leaf(Tensor t) {
  t.requires_grad = true;
  t.node = push(t, {}, nullptr);
  return t;
}

Tensor Tape::constant(Tensor t) {
  t.requires_grad = false;
  t.node = push(t, {}, nullptr);
  return t;
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  int ia = require_on_tape(a, "add");
  int ib = require_on_tape(b, "add");
  Tensor out;
  bool broadcast = false;
  if (a.same_shape(b)) {
    out = a;
    for (std::int64_t i = 0; i < out.size(); ++i) out.data[i] += b.data[i];
  } else if (a.rank() == 2 && (b.rank() == 1 || (b.rank() == 2 && b.shape[0] == 1)) &&
             b.size() == a.shape[1]) {
    broadcast = true;
    out = a;
    int r = a.shape[0], c = a.shape[1];
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) out.at(i, j) += b.data[j];
  } else {
    throw std::invalid_argument("add: incompatible shapes " + shape_str(a.shape) + " and " +
                                shape_str(b.shape));
  }
  std::vector<int> bshape = b.shape;
  out.node = push(out, {ia, ib}, [broadcast, bshape](const Tensor& g) {
    Tensor gb;
    if (!broadcast) {
      gb = g;
    } else {
      gb = Tensor::zeros(bshape);
      int r = g.shape[0], c = g.shape[1];
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) gb.data[j] += g.at(i, j);
    }
    Tensor ga = g;
    ga.node = kNoNode;
    gb.node = kNoNode;
    return std::vector<Tensor>{std::move(ga), std::move(gb)};
  });
  return out;
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
  int ia = require_on_tape(a, "mul");
  int ib = require_on_tape(b, "mul");
  if (!a.same_shape(b))
    throw std::invalid_argument("mul: shape mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape));
  Tensor out = a;
  for (std::int64_t i = 0; i < out.size(); ++i) out.data[i] *= b.data[i];
  out.node = push(out, {ia, ib}, [this, ia, ib](const Tensor& g) {
    const Tensor& av = value_of(ia);
    const Tensor& bv = value_of(ib);
    Tensor ga = g, gb = g;
    for (std::int64_t i = 0; i < g.size(); ++i) {
      ga.data[i] = g.data[i] * bv.data[i];
      gb.data[i] = g.data[i] * av.data[i];
    }
    ga.node = gb.node = kNoNode;
    return std::vector<Tensor>{std::move(ga), std::move(gb)};
  });
  return out;
}

Tensor Tape::scale(const Tensor& a, double s) {
  int ia = require_on_tape(a, "scale");
  Tensor out = a;
  for (double& v : out.data) v *= s;
  out.node = push(out, {ia}, [s](const Tensor& g) {
    Tensor ga = g;
    for (double& v : ga.data) v *= s;
    ga.node = kNoNode;
    return std::vector<Tensor>{std::move(ga)};
  });
  return out;
}

Tensor Tape::add_const(const Tensor& a, double s) {
  int ia = require_on_tape(a, "add_const");
  Tensor out = a;
  for (double& v : out.data) v += s;
  out.node = push(out, {ia}, [](const Tensor& g) {
    Tensor ga = g;
    ga.node = kNoNode;
    return std::vector<Tensor>{std::move(ga)};
  });
  return out;
}

Tensor Tape::relu(const Tensor& a) {
  int ia = require_on_tape(a, "relu");
  Tensor out = a;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  out.node = push(out, {ia}, [this, ia](const Tensor& g) {
    const Tensor& av = value_of(ia);
    Tensor ga = g;
    for (std::int64_t i = 0; i < g.size(); ++i) ga.data[i] = av.data[i] > 0.0 ? g.data[i] : 0.0;
    ga.node = kNoNode;
    return std::vector<Tensor>{std::move(ga)};
  });
  return out;
}

Tensor Tape::gelu(const Tensor& a) {
  int ia = require_on_tape(a, "gelu");
  Tensor out = a;
  for (double& v : out.data) v = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
  out.node = push(out, {ia}, [this, ia](const Tensor& g) {
    const Tensor& av = value_of(ia);
    Tensor ga = g;
    for (std::int64_t i = 0; i < g.size(); ++i) {
      double x = av.data[i];
      double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
      double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
      ga.data[i] = g.data[i] * (cdf + x * pdf);
    }
    ga.node = kNoNode;
    return std::vector<Tensor>{std::move(ga)};
  });
  return out;
}

Tensor Tape::exp(const Tensor& a) {
  int ia = require_on_tape(a, "exp");
  Tensor out = a;
  for (double& v : out.data) v = std::exp(v);
  int iout;
  out.node = iout = push(out, {ia}, nullptr);
  nodes_[iout].vjp = [this, iout](const Tensor& g) {
    const Tensor& ov = value_of(iout);
    Tensor ga = g;
    for (std::int64_t i = 0; i < g.size(); ++i) ga.data[i] = g.data[i] * ov.data[i];
    ga.node = kNoNode;
    return std::vector<Tensor>{std::move(ga)};
  };
  return out;
}

Tensor Tape::log(const Tensor& a) {
  int ia = require_on_tape(a, "log");
  for (double v : a.data)
    if (!(v > 0.0)) throw std::domain_error("log: non-positive input " + std::to_string(v));
  Tensor out = a;
  for (double& v : out.data) v = std::log(v);
  out.node = push(out, {ia}, [this, ia](const Tensor& g) {
    const Tensor& av = value_of(ia);
    Tensor ga = g;
    for (std::int64_t i = 0; i < g.size(); ++i) ga.data[i] = g.data[i] / av.data[i];
    ga.node = kNoNode;
    return std::vector<Tensor>{std::move(ga)};
  });
  return out;
}

Tensor Tape::sigmoid(const Tensor& a) {
  int ia = require_on_tape(a, "sigmoid");
  Tensor out = a;
  for (double& v : out.data) {
    if (v >= 0.0) {
      v = 1.0 / (1.0 + std::exp(-v));
    } else {
      double e = std::exp(v);
      v = e / (1.0 + e);
    }
  }
  int iout;
  out.node = iout = push(out, {ia}, nullptr);
  nodes_[iout].vjp = [this, iout](const Tensor& g) {
    const Tensor& ov = value_of(iout);
    Tensor ga = g;
    for (std::int64_t i = 0; i < g.size(); ++i) {
      double y = ov.data[i];
      ga.data[i] = g.data[i] * y * (1.0 - y);
    }
    ga.node = kNoNode;
    return std::vector<Tensor>{std::move(ga)};
  };
  return out;
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  int ia = require_on_tape(a, "matmul");
  int ib = require_on_tape(b, "matmul");
  check_rank2(a, "matmul");
  check_rank2(b, "matmul");
  int r = a.shape[0], k = a.shape[1], c = b.shape[1];
  if (b.shape[0] != k)
    throw std::invalid_argument("matmul: inner dims differ, " + shape_str(a.shape) + " x " +
                                shape_str(b.shape));
  Tensor out = Tensor::zeros({r, c});
  as_mat(out, r, c).noalias() = as_mat(a, r, k) * as_mat(b, k, c);
  out.node = push(out, {ia, ib}, [this, ia, ib, r, k, c](const Tensor& g) {
    const Tensor& av = value_of(ia);
    const Tensor& bv = value_of(ib);
    Tensor ga = Tensor::zeros({r, k});
    Tensor gb = Tensor::zeros({k, c});
    as_mat(ga, r, k).noalias() = as_mat(g, r, c) * as_mat(bv, k, c).transpose();
    as_mat(gb, k, c).noalias() = as_mat(av, r, k).transpose() * as_mat(g, r, c);
    return std::vector<Tensor>{std::move(ga), std::move(gb)};
  });
  return out;
}

Tensor Tape::transpose(const Tensor& a) {
  int ia = require_on_tape(a, "transpose");
  check_rank2(a, "transpose");
  int r = a.shape[0], c = a.shape[1];
  Tensor out = Tensor::zeros({c, r});
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out.at(j, i) = a.at(i, j);
  out.node = push(out, {ia}, [r, c](const Tensor& g) {
    Tensor ga = Tensor::zeros({r, c});
    for (int i = 0; i < c; ++i)
      for (int j = 0; j < r; ++j) ga.at(j, i) = g.at(i, j);
    return std::vector<Tensor>{std::move(ga)};
  });
  return out;
}

Tensor Tape::softmax_rows(const Tensor& a) {
  int ia = require_on_tape(a, "softmax_rows");
  int r, c;
  row_view(a, r, c, "softmax_rows");
  Tensor out = a;
  for (int i = 0; i < r; ++i) {
    double* row = out.data.data() + static_cast<size_t>(i) * c;
    double m = row[0];
    for (int j = 1; j < c; ++j) m = std::max(m, row[j]);
    double z = 0.0;
    for (int j = 0; j < c; ++j) {
      row[j] = std::exp(row[j] - m);
      z += row[j];
    }
    for (int j = 0; j < c; ++j) row[j] /= z;
  }
  int iout;
  out.node = iout = push(out, {ia}, nullptr);
  nodes_[iout].vjp = [this, iout, r, c](const Tensor& g) {
    const Tensor& y = value_of(iout);
    Tensor ga = g;
    for (int i = 0; i < r; ++i) {
      const double* yr = y.data.data() + static_cast<size_t>(i) * c;
      const double* gr = g.data.data() + static_cast<size_t>(i) * c;
      double dot = 0.0;
      for (int j = 0; j < c; ++j) dot += gr[j] * yr[j];
      double* d = ga.data.data() + static_cast<size_t>(i) * c;
      for (int j = 0; j < c; ++j) d[j] = yr[j] * (gr[j] - dot);
    }
    ga.node = kNoNode;
    return std::vector<Tensor>{std::move(ga)};
  };
  return out;
}

Tensor Tape::layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  int ix = require_on_tape(x, "layer_norm_rows");
  int ig = require_on_tape(gain, "layer_norm_rows");
  int ib = require_on_tape(bias, "layer_norm_rows");
  int r, c;
  row_view(x, r, c, "layer_norm_rows");
  if (gain.size() != c || bias.size() != c)
    throw std::invalid_argument("layer_norm_rows: gain/bias length must equal feature dim");
  Tensor out = x;
  for (int i = 0; i < r; ++i) {
    double* row = out.data.data() + static_cast<size_t>(i) * c;
    double mu = 0.0;
    for (int j = 0; j < c; ++j) mu += row[j];
    mu /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= c;
    double inv = 1.0 / std::sqrt(var + eps);
    for (int j = 0; j < c; ++j) row[j] = (row[j] - mu) * inv * gain.data[j] + bias.data[j];
  }
  std::vector<int> gshape = gain.shape, bshape = bias.shape;
  out.node = push(out, {ix, ig, ib},
                  [this, ix, ig, r, c, eps, gshape, bshape](const Tensor& g) {
    const Tensor& xv = value_of(ix);
    const Tensor& gv = value_of(ig);
    Tensor gx = g;
    Tensor ggain = Tensor::zeros(gshape);
    Tensor gbias = Tensor::zeros(bshape);
    std::vector<double> xhat(static_cast<size_t>(c));
    for (int i = 0; i < r; ++i) {
      const double* xr = xv.data.data() + static_cast<size_t>(i) * c;
      const double* gr = g.data.data() + static_cast<size_t>(i) * c;
      double mu = 0.0;
      for (int j = 0; j < c; ++j) mu += xr[j];
      mu /= c;
      double var = 0.0;
      for (int j = 0; j < c; ++j) var += (xr[j] - mu) * (xr[j] - mu);
      var /= c;
      double inv = 1.0 / std::sqrt(var + eps);
      double mean_h = 0.0, mean_hx = 0.0;
      for (int j = 0; j < c; ++j) {
        xhat[j] = (xr[j] - mu) * inv;
        double h = gr[j] * gv.data[j];
        mean_h += h;
        mean_hx += h * xhat[j];
        ggain.data[j] += gr[j] * xhat[j];
        gbias.data[j] += gr[j];
      }
      mean_h /= c;
      mean_hx /= c;
      double* d = gx.data.data() + static_cast<size_t>(i) * c;
      for (int j = 0; j < c; ++j)
        d[j] = inv * (gr[j] * gv.data[j] - mean_h - xhat[j] * mean_hx);
    }
    gx.node = kNoNode;
    return std::vector<Tensor>{std::move(gx), std::move(ggain), std::move(gbias)};
  });
  return out;
}

Tensor Tape::l2_normalize_rows(const Tensor& a) {
  int ia = require_on_tape(a, "l2_normalize_rows");
  int r, c;
  row_view(a, r, c, "l2_normalize_rows");
  Tensor out = a;
  for (int i = 0; i < r; ++i) {
    double* row = out.data.data() + static_cast<size_t>(i) * c;
    double n2 = 0.0;
    for (int j = 0; j < c; ++j) n2 += row[j] * row[j];
    double n = std::sqrt(n2);
    if (n == 0.0) throw std::domain_error("l2_normalize_rows: zero-norm row " + std::to_string(i));
    for (int j = 0; j < c; ++j) row[j] /= n;
  }
  int iout;
  out.node = iout = push(out, {ia}, nullptr);
  nodes_[iout].vjp = [this, ia, iout, r, c](const Tensor& g) {
    const Tensor& xv = value_of(ia);
    const Tensor& yv = value_of(iout);
    Tensor ga = g;
    for (int i = 0; i < r; ++i) {
      const double* xr = xv.data.data() + static_cast<size_t>(i) * c;
      const double* yr = yv.data.data() + static_cast<size_t>(i) * c;
      const double* gr = g.data.data() + static_cast<size_t>(i) * c;
      double n2 = 0.0, dot = 0.0;
      for (int j = 0; j < c; ++j) {
        n2 += xr[j] * xr[j];
        dot += gr[j] * yr[j];
      }
      double n = std::sqrt(n2);
      double* d = ga.data.data() + static_cast<size_t>(i) * c;
      for (int j = 0; j < c; ++j) d[j] = (gr[j] - yr[j] * dot) / n;
    }
    ga.node = kNoNode;
    return std::vector<Tensor>{std::move(ga)};
  };
  return out;
}

Tensor Tape::concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no parts");
  std::vector<int> ids;
  std::vector<std::vector<int>> shapes;
  int cols = -1, total = 0;
  for (const Tensor& p : parts) {
    ids.push_back(require_on_tape(p, "concat_rows"));
    int r, c;
    row_view(p, r, c, "concat_rows");
    if (cols < 0) cols = c;
    if (c != cols) throw std::invalid_argument("concat_rows: column mismatch");
    total += r;
    shapes.push_back(p.shape);
  }
  Tensor out = Tensor::zeros({total, cols});
  int at = 0;
  for (const Tensor& p : parts) {
    std::copy(p.data.begin(), p.data.end(), out.data.begin() + static_cast<size_t>(at) * cols);
    at += static_cast<int>(p.size()) / cols;
  }
  out.node = push(out, ids, [shapes, cols](const Tensor& g) {
    std::vector<Tensor> gs;
    int at = 0;
    for (const auto& s : shapes) {
      Tensor gp = Tensor::zeros(s);
      int n = static_cast<int>(gp.size());
      std::copy(g.data.begin() + static_cast<size_t>(at) * cols,
                g.data.begin() + static_cast<size_t>(at) * cols + n, gp.data.begin());
      at += n / cols;
      gs.push_back(std::move(gp));
    }
    return gs;
  });
  return out;
}

Tensor Tape::concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
  std::vector<int> ids;
  std::vector<int> widths;
  int rows = -1, total = 0;
  for (const Tensor& p : parts) {
    ids.push_back(require_on_tape(p, "concat_cols"));
    check_rank2(p, "concat_cols");
    if (rows < 0) rows = p.shape[0];
    if (p.shape[0] != rows) throw std::invalid_argument("concat_cols: row mismatch");
    widths.push_back(p.shape[1]);
    total += p.shape[1];
  }
  Tensor out = Tensor::zeros({rows, total});
  int at = 0;
  for (const Tensor& p : parts) {
    int w = p.shape[1];
    for (int i = 0; i < rows; ++i)
      std::copy(p.data.begin() + static_cast<size_t>(i) * w,
                p.data.begin() + static_cast<size_t>(i) * w + w,
                out.data.begin() + static_cast<size_t>(i) * total + at);
    at += w;
  }
  out.node = push(out, ids, [widths, rows, total](const Tensor& g) {
    std::vector<Tensor> gs;
    int at = 0;
    for (int w : widths) {
      Tensor gp = Tensor::zeros({rows, w});
      for (int i = 0; i < rows; ++i)
        std::copy(g.data.begin() + static_cast<size_t>(i) * total + at,
                  g.data.begin() + static_cast<size_t>(i) * total + at + w,
                  gp.data.begin() + static_cast<size_t>(i) * w);
      at += w;
      gs.push_back(std::move(gp));
    }
    return gs;
  });
  return out;
}

Tensor Tape::slice_rows(const Tensor& a, int start, int count) {
  int ia = require_on_tape(a, "slice_rows");
  check_rank2(a, "slice_rows");
  int r = a.shape[0], c = a.shape[1];
  if (start < 0 || count < 0 || start + count > r)
    throw std::invalid_argument("slice_rows: range [" + std::to_string(start) + "," +
                                std::to_string(start + count) + ") out of " + std::to_string(r));
  Tensor out = Tensor::zeros({count, c});
  std::copy(a.data.begin() + static_cast<size_t>(start) * c,
            a.data.begin() + static_cast<size_t>(start + count) * c, out.data.begin());
  out.node = push(out, {ia}, [r, c, start, count](const Tensor& g) {
    Tensor ga = Tensor::zeros({r, c});
    std::copy(g.data.begin(), g.data.end(), ga.data.begin() + static_cast<size_t>(start) * c);
    return std::vector<Tensor>{std::move(ga)};
  });
  return out;
}

Tensor Tape::slice_cols(const Tensor& a, int start, int count) {
  int ia = require_on_tape(a, "slice_cols");
  check_rank2(a, "slice_cols");
  int r = a.shape[0], c = a.shape[1];
  if (start < 0 || count < 0 || start + count > c)
    throw std::invalid_argument("slice_cols: range out of bounds");
  Tensor out = Tensor::zeros({r, count});
  for (int i = 0; i < r; ++i)
    std::copy(a.data.begin() + static_cast<size_t>(i) * c + start,
              a.data.begin() + static_cast<size_t>(i) * c + start + count,
              out.data.begin() + static_cast<size_t>(i) * count);
  out.node = push(out, {ia}, [r, c, start, count](const Tensor& g) {
    Tensor ga = Tensor::zeros({r, c});
    for (int i = 0; i < r; ++i)
      std::copy(g.data.begin() + static_cast<size_t>(i) * count,
                g.data.begin() + static_cast<size_t>(i) * count + count,
                ga.data.begin() + static_cast<size_t>(i) * c + start);
    return std::vector<Tensor>{std::move(ga)};
  });
  return out;
}

Tensor Tape::reshape(const Tensor& a, std::vector<int> shape) {
  int ia = require_on_tape(a, "reshape");
  if (shape_size(shape) != a.size())
    throw std::invalid_argument("reshape: size mismatch " + shape_str(a.shape) + " -> " +
                                shape_str(shape));
  Tensor out = a;
  out.shape = shape;
  std::vector<int> old = a.shape;
  out.node = push(out, {ia}, [old](const Tensor& g) {
    Tensor ga = g;
    ga.shape = old;
    ga.node = kNoNode;
    return std::vector<Tensor>{std::move(ga)};
  });
  return out;
}

Tensor Tape::sum_all(const Tensor& a) {
  int ia = require_on_tape(a, "sum_all");
  double s = 0.0;
  for (double v : a.data) s += v;
  Tensor out = Tensor::scalar(s);
  std::vector<int> ashape = a.shape;
  out.node = push(out, {ia}, [ashape](const Tensor& g) {
    return std::vector<Tensor>{Tensor::full(ashape, g.data[0])};
  });
  return out;
}

Tensor Tape::mean_all(const Tensor& a) {
  int ia = require_on_tape(a, "mean_all");
  double s = 0.0;
  for (double v : a.data) s += v;
  double n = static_cast<double>(a.size());
  Tensor out = Tensor::scalar(s / n);
  std::vector<int> ashape = a.shape;
  out.node = push(out, {ia}, [ashape, n](const Tensor& g) {
    return std::vector<Tensor>{Tensor::full(ashape, g.data[0] / n)};
  });
  return out;
}

Tensor Tape::mean_rows(const Tensor& a) {
  int ia = require_on_tape(a, "mean_rows");
  check_rank2(a, "mean_rows");
  int r = a.shape[0], c = a.shape[1];
  Tensor out = Tensor::zeros({1, c});
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out.data[j] += a.at(i, j);
  for (int j = 0; j < c; ++j) out.data[j] /= r;
  out.node = push(out, {ia}, [r, c](const Tensor& g) {
    Tensor ga = Tensor::zeros({r, c});
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) ga.at(i, j) = g.data[j] / r;
    return std::vector<Tensor>{std::move(ga)};
  });
  return out;
}

Tensor Tape::take_rows(const Tensor& a, std::vector<int> rows) {
  int ia = require_on_tape(a, "take_rows");
  check_rank2(a, "take_rows");
  int r = a.shape[0], c = a.shape[1];
  for (int idx : rows)
    if (idx < 0 || idx >= r)
      throw std::out_of_range("take_rows: row " + std::to_string(idx) + " out of " + std::to_string(r));
  int n = static_cast<int>(rows.size());
  Tensor out = Tensor::zeros({n, c});
  for (int i = 0; i < n; ++i)
    std::copy(a.data.begin() + static_cast<size_t>(rows[i]) * c,
              a.data.begin() + static_cast<size_t>(rows[i]) * c + c,
              out.data.begin() + static_cast<size_t>(i) * c);
  out.node = push(out, {ia}, [r, c, rows](const Tensor& g) {
    Tensor ga = Tensor::zeros({r, c});
    for (size_t i = 0; i < rows.size(); ++i)
      for (int j = 0; j < c; ++j) ga.at(rows[i], j) += g.at(static_cast<int>(i), j);
    return std::vector<Tensor>{std::move(ga)};
  });
  return out;
}

Tensor Tape::take_entries(const Tensor& a, std::vector<int> col_per_row) {
  int ia = require_on_tape(a, "take_entries");
  check_rank2(a, "take_entries");
  int r = a.shape[0], c = a.shape[1];
  if (static_cast<int>(col_per_row.size()) != r)
    throw std::invalid_argument("take_entries: need one column index per row");
  for (int idx : col_per_row)
    if (idx < 0 || idx >= c) throw std::out_of_range("take_entries: column index out of range");
  Tensor out = Tensor::zeros({r});
  for (int i = 0; i < r; ++i) out.data[i] = a.at(i, col_per_row[i]);
  out.node = push(out, {ia}, [r, c, col_per_row](const Tensor& g) {
    Tensor ga = Tensor::zeros({r, c});
    for (int i = 0; i < r; ++i) ga.at(i, col_per_row[i]) = g.data[i];
    return std::vector<Tensor>{std::move(ga)};
  });
  return out;
}

Tensor Tape::cosine_similarity(const Tensor& a, const Tensor& b) {
  int ia = require_on_tape(a, "cosine_similarity");
  int ib = require_on_tape(b, "cosine_similarity");
  if (a.size() != b.size())
    throw std::invalid_argument("cosine_similarity: length mismatch " + shape_str(a.shape) +
                                " vs " + shape_str(b.shape));
  double na2 = 0.0, nb2 = 0.0, dot = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) {
    na2 += a.data[i] * a.data[i];
    nb2 += b.data[i] * b.data[i];
    dot += a.data[i] * b.data[i];
  }
  if (na2 == 0.0 || nb2 == 0.0) throw std::domain_error("cosine_similarity: zero-norm input");
  double na = std::sqrt(na2), nb = std::sqrt(nb2);
  double cosv = dot / (na * nb);
  Tensor out = Tensor::scalar(cosv);
  std::vector<int> ashape = a.shape, bshape = b.shape;
  out.node = push(out, {ia, ib},
                  [this, ia, ib, na, nb, cosv, ashape, bshape](const Tensor& g) {
    const Tensor& av = value_of(ia);
    const Tensor& bv = value_of(ib);
    Tensor ga = Tensor::zeros(ashape);
    Tensor gb = Tensor::zeros(bshape);
    double gs = g.data[0];
    for (std::int64_t i = 0; i < av.size(); ++i) {
      ga.data[i] = gs * (bv.data[i] / (na * nb) - cosv * av.data[i] / (na * na));
      gb.data[i] = gs * (av.data[i] / (na * nb) - cosv * bv.data[i] / (nb * nb));
    }
    return std::vector<Tensor>{std::move(ga), std::move(gb)};
  });
  return out;
}

Tensor Tape::l1_distance(const Tensor& a, const Tensor& b) {
  int ia = require_on_tape(a, "l1_distance");
  int ib = require_on_tape(b, "l1_distance");
  if (!a.same_shape(b))
    throw std::invalid_argument("l1_distance: shape mismatch " + shape_str(a.shape) + " vs " +
                                shape_str(b.shape));
  double s = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) s += std::abs(a.data[i] - b.data[i]);
  Tensor out = Tensor::scalar(s);
  std::vector<int> ashape = a.shape;
  out.node = push(out, {ia, ib}, [this, ia, ib, ashape](const Tensor& g) {
    const Tensor& av = value_of(ia);
    const Tensor& bv = value_of(ib);
    Tensor ga = Tensor::zeros(ashape);
    Tensor gb = Tensor::zeros(ashape);
    double gs = g.data[0];
    for (std::int64_t i = 0; i < av.size(); ++i) {
      double d = av.data[i] - bv.data[i];
      double sign = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);  // subgradient 0 at ties
      ga.data[i] = gs * sign;
      gb.data[i] = -gs * sign;
    }
    return std::vector<Tensor>{std::move(ga), std::move(gb)};
  });
  return out;
}

void Tape::backward(const Tensor& root) {
  int ir = require_on_tape(root, "backward");
  if (root.size() != 1)
    throw std::invalid_argument("backward: root must be scalar, got shape " + shape_str(root.shape));
  run_backward(ir, Tensor::full(root.shape, 1.0));
}

void Tape::backward_seeded(const Tensor& root, const Tensor& seed) {
  int ir = require_on_tape(root, "backward_seeded");
  if (!root.same_shape(seed))
    throw std::invalid_argument("backward_seeded: seed shape " + shape_str(seed.shape) +
                                " does not match root " + shape_str(root.shape));
  run_backward(ir, seed);
}

void Tape::run_backward(int root_node, Tensor seed) {
  grads_.assign(nodes_.size(), Tensor{});
  grads_[static_cast<size_t>(root_node)] = std::move(seed);
  for (int id = root_node; id >= 0; --id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    Tensor& g = grads_[static_cast<size_t>(id)];
    if (g.empty() || !n.vjp) continue;
    std::vector<Tensor> pg = n.vjp(g);
    for (size_t k = 0; k < n.parents.size(); ++k) {
      if (pg[k].empty()) continue;
      Tensor& dst = grads_[static_cast<size_t>(n.parents[k])];
      if (dst.empty()) {
        dst = std::move(pg[k]);
      } else {
        for (std::int64_t i = 0; i < dst.size(); ++i) dst.data[i] += pg[k].data[i];
      }
    }
  }
}

Tensor Tape::grad_of(const Tensor& t) const {
  if (t.node < 0 || t.node >= static_cast<int>(nodes_.size()))
    throw std::out_of_range("grad_of: tensor is not on this tape");
  if (t.node < static_cast<int>(grads_.size()) && !grads_[static_cast<size_t>(t.node)].empty()) {
    Tensor g = grads_[static_cast<size_t>(t.node)];
    g.node = kNoNode;
    return g;
  }
  return Tensor::zeros(t.shape);
}

}  // namespace dapt
