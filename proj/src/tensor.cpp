#include "co4/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "co4/kernels.hpp"
#include "co4/macs.hpp"

namespace co4 {

namespace {

std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int e : shape) {
    if (e <= 0) throw std::invalid_argument("tensor: non-positive extent in " + shape_str(shape));
    n *= static_cast<std::size_t>(e);
  }
  return n;
}

Tensor make_out(std::vector<int> shape, bool requires_grad) {
  return Tensor::zeros(std::move(shape), requires_grad);
}

bool any_grad(const Tensor& a, const Tensor& b) {
  return a.requires_grad || b.requires_grad;
}

// Attach a node to `out` recording `parents`; call only when out.requires_grad.
Node& record(Tensor& out, std::vector<Tensor> parents) {
  out.node = std::make_shared<Node>();
  out.node->parents = std::move(parents);
  out.node->out_data = out.data;
  out.node->out_grad = out.grad;
  out.node->out_shape = out.shape;
  return *out.node;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape != b.shape)
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a.shape) + " vs " + shape_str(b.shape));
}

void check_2d(const Tensor& x, const char* op) {
  if (x.shape.size() != 2)
    throw std::invalid_argument(std::string(op) + ": expected 2-D, got " + shape_str(x.shape));
}

}  // namespace

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  Tensor t;
  const std::size_t n = shape_numel(shape);
  t.shape = std::move(shape);
  t.data = std::make_shared<std::vector<double>>(n, 0.0);
  t.requires_grad = requires_grad;
  if (requires_grad) t.grad = std::make_shared<std::vector<double>>(n, 0.0);
  return t;
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  std::fill(t.data->begin(), t.data->end(), value);
  return t;
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> values,
                         bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  if (n != values.size())
    throw std::invalid_argument("tensor: " + shape_str(shape) + " needs " +
                                std::to_string(n) + " values, got " +
                                std::to_string(values.size()));
  Tensor t;
  t.shape = std::move(shape);
  t.data = std::make_shared<std::vector<double>>(std::move(values));
  t.requires_grad = requires_grad;
  if (requires_grad) t.grad = std::make_shared<std::vector<double>>(n, 0.0);
  t.assert_finite("from_data");
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

int Tensor::rows() const {
  if (shape.size() != 2) throw std::runtime_error("rows(): tensor is not 2-D");
  return shape[0];
}

int Tensor::cols() const {
  if (shape.size() != 2) throw std::runtime_error("cols(): tensor is not 2-D");
  return shape[1];
}

double& Tensor::at(int i, int j) {
  return (*data)[static_cast<std::size_t>(i) * cols() + j];
}

const double& Tensor::at(int i, int j) const {
  return (*data)[static_cast<std::size_t>(i) * cols() + j];
}

double Tensor::value() const {
  if (size() != 1) throw std::runtime_error("value(): tensor is not scalar");
  return (*data)[0];
}

void Tensor::zero_grad() {
  if (grad) std::fill(grad->begin(), grad->end(), 0.0);
}

void Tensor::assert_finite(const char* what) const {
  for (double v : *data)
    if (!std::isfinite(v))
      throw std::invalid_argument(std::string(what) + ": non-finite value in tensor " + shape_str(shape));
}

// ---- backward sweep --------------------------------------------------------

void backward(Tensor& loss) {
  if (loss.size() != 1)
    throw std::runtime_error("backward: loss must be scalar, got " + shape_str(loss.shape));
  if (!loss.requires_grad) return;
  (*loss.grad)[0] += 1.0;
  if (!loss.node) return;

  // Iterative post-order DFS; reversed it yields consumers before producers.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  seen.insert(loss.node.get());
  stack.emplace_back(loss.node.get(), 0);
  while (!stack.empty()) {
    auto& [nd, idx] = stack.back();
    if (idx < nd->parents.size()) {
      Node* p = nd->parents[idx].node.get();
      ++idx;
      if (p && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(nd);
      stack.pop_back();
    }
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* nd = *it;
    if (nd->backward) nd->backward(*nd);
  }
}

// ---- elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out = make_out(a.shape, any_grad(a, b));
  const std::size_t n = out.size();
  const double* ad = a.data->data();
  const double* bd = b.data->data();
  double* od = out.data->data();
  kernels::map(n, [=](std::size_t i) { od[i] = ad[i] + bd[i]; });
  if (out.requires_grad) {
    record(out, {a, b}).backward = [](Node& nd) {
      const std::vector<double>& g = *nd.out_grad;
      for (Tensor& p : nd.parents) {
        if (!p.requires_grad) continue;
        double* pg = p.grad->data();
        kernels::map(g.size(), [&, pg](std::size_t i) { pg[i] += g[i]; });
      }
    };
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor out = make_out(a.shape, any_grad(a, b));
  const double* ad = a.data->data();
  const double* bd = b.data->data();
  double* od = out.data->data();
  kernels::map(out.size(), [=](std::size_t i) { od[i] = ad[i] - bd[i]; });
  if (out.requires_grad) {
    record(out, {a, b}).backward = [](Node& nd) {
      const std::vector<double>& g = *nd.out_grad;
      if (nd.parents[0].requires_grad) {
        double* pg = nd.parents[0].grad->data();
        kernels::map(g.size(), [&, pg](std::size_t i) { pg[i] += g[i]; });
      }
      if (nd.parents[1].requires_grad) {
        double* pg = nd.parents[1].grad->data();
        kernels::map(g.size(), [&, pg](std::size_t i) { pg[i] -= g[i]; });
      }
    };
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  Tensor out = make_out(a.shape, any_grad(a, b));
  const double* ad = a.data->data();
  const double* bd = b.data->data();
  double* od = out.data->data();
  kernels::map(out.size(), [=](std::size_t i) { od[i] = ad[i] * bd[i]; });
  if (out.requires_grad) {
    record(out, {a, b}).backward = [](Node& nd) {
      const std::vector<double>& g = *nd.out_grad;
      const Tensor& a2 = nd.parents[0];
      const Tensor& b2 = nd.parents[1];
      if (a2.requires_grad) {
        double* pg = a2.grad->data();
        const double* bv = b2.data->data();
        kernels::map(g.size(), [&, pg, bv](std::size_t i) { pg[i] += g[i] * bv[i]; });
      }
      if (b2.requires_grad) {
        double* pg = b2.grad->data();
        const double* av = a2.data->data();
        kernels::map(g.size(), [&, pg, av](std::size_t i) { pg[i] += g[i] * av[i]; });
      }
    };
  }
  return out;
}

Tensor scale(const Tensor& a, double s) {
  Tensor out = make_out(a.shape, a.requires_grad);
  const double* ad = a.data->data();
  double* od = out.data->data();
  kernels::map(out.size(), [=](std::size_t i) { od[i] = ad[i] * s; });
  if (out.requires_grad) {
    record(out, {a}).backward = [s](Node& nd) {
      const std::vector<double>& g = *nd.out_grad;
      double* pg = nd.parents[0].grad->data();
      kernels::map(g.size(), [&, pg](std::size_t i) { pg[i] += g[i] * s; });
    };
  }
  return out;
}

Tensor add_rowvec(const Tensor& x, const Tensor& bias) {
  check_2d(x, "add_rowvec");
  const int r = x.rows(), c = x.cols();
  if (static_cast<int>(bias.size()) != c)
    throw std::invalid_argument("add_rowvec: bias " + shape_str(bias.shape) +
                                " does not match row width of " + shape_str(x.shape));
  Tensor out = make_out(x.shape, any_grad(x, bias));
  const double* xd = x.data->data();
  const double* bd = bias.data->data();
  double* od = out.data->data();
  kernels::row_map(r, static_cast<std::size_t>(c), [=](int i) {
    const std::size_t base = static_cast<std::size_t>(i) * c;
    for (int j = 0; j < c; ++j) od[base + j] = xd[base + j] + bd[j];
  });
  if (out.requires_grad) {
    record(out, {x, bias}).backward = [r, c](Node& nd) {
      const std::vector<double>& g = *nd.out_grad;
      if (nd.parents[0].requires_grad) {
        double* pg = nd.parents[0].grad->data();
        kernels::map(g.size(), [&, pg](std::size_t i) { pg[i] += g[i]; });
      }
      if (nd.parents[1].requires_grad) {
        double* pg = nd.parents[1].grad->data();
        for (int i = 0; i < r; ++i) {
          const std::size_t base = static_cast<std::size_t>(i) * c;
          for (int j = 0; j < c; ++j) pg[j] += g[base + j];
        }
      }
    };
  }
  return out;
}

// ---- products --------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_2d(a, "matmul");
  check_2d(b, "matmul");
  const int m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k)
    throw std::invalid_argument("matmul: inner extents differ, " +
                                shape_str(a.shape) + " vs " + shape_str(b.shape));
  Tensor out = make_out({m, n}, any_grad(a, b));
  macs::count_matmul(m, k, n);
  kernels::matmul_nn(a.data->data(), b.data->data(), out.data->data(), m, k, n);
  if (out.requires_grad) {
    record(out, {a, b}).backward = [m, k, n](Node& nd) {
      const double* g = nd.out_grad->data();
      const Tensor& a2 = nd.parents[0];
      const Tensor& b2 = nd.parents[1];
      if (a2.requires_grad)  // dA += dC · Bᵀ
        kernels::matmul_nt(g, b2.data->data(), a2.grad->data(), m, n, k, true);
      if (b2.requires_grad)  // dB += Aᵀ · dC
        kernels::matmul_tn(a2.data->data(), g, b2.grad->data(), k, m, n, true);
    };
  }
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  check_2d(a, "matmul_nt");
  check_2d(b, "matmul_nt");
  const int m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k)
    throw std::invalid_argument("matmul_nt: inner extents differ, " +
                                shape_str(a.shape) + " vs " + shape_str(b.shape));
  Tensor out = make_out({m, n}, any_grad(a, b));
  macs::count_matmul(m, k, n);
  kernels::matmul_nt(a.data->data(), b.data->data(), out.data->data(), m, k, n);
  if (out.requires_grad) {
    record(out, {a, b}).backward = [m, k, n](Node& nd) {
      const double* g = nd.out_grad->data();
      const Tensor& a2 = nd.parents[0];
      const Tensor& b2 = nd.parents[1];
      if (a2.requires_grad)  // dA += dC · B
        kernels::matmul_nn(g, b2.data->data(), a2.grad->data(), m, n, k, true);
      if (b2.requires_grad)  // dB += dCᵀ · A
        kernels::matmul_tn(g, a2.data->data(), b2.grad->data(), n, m, k, true);
    };
  }
  return out;
}

// ---- activations and normalizers -------------------------------------------

Tensor relu(const Tensor& x) {
  Tensor out = make_out(x.shape, x.requires_grad);
  const double* xd = x.data->data();
  double* od = out.data->data();
  kernels::map(out.size(), [=](std::size_t i) { od[i] = xd[i] > 0.0 ? xd[i] : 0.0; });
  if (out.requires_grad) {
    record(out, {x}).backward = [](Node& nd) {
      const std::vector<double>& g = *nd.out_grad;
      const double* xv = nd.parents[0].data->data();
      double* pg = nd.parents[0].grad->data();
      kernels::map(g.size(), [&, xv, pg](std::size_t i) {
        if (xv[i] > 0.0) pg[i] += g[i];
      });
    };
  }
  return out;
}

Tensor relu6(const Tensor& x) {
  Tensor out = make_out(x.shape, x.requires_grad);
  const double* xd = x.data->data();
  double* od = out.data->data();
  kernels::map(out.size(), [=](std::size_t i) {
    od[i] = std::min(6.0, std::max(0.0, xd[i]));
  });
  if (out.requires_grad) {
    // Subgradient 0 at both kinks.
    record(out, {x}).backward = [](Node& nd) {
      const std::vector<double>& g = *nd.out_grad;
      const double* xv = nd.parents[0].data->data();
      double* pg = nd.parents[0].grad->data();
      kernels::map(g.size(), [&, xv, pg](std::size_t i) {
        if (xv[i] > 0.0 && xv[i] < 6.0) pg[i] += g[i];
      });
    };
  }
  return out;
}

Tensor softmax_rows(const Tensor& x) {
  check_2d(x, "softmax_rows");
  const int r = x.rows(), c = x.cols();
  if (c < 1) throw std::invalid_argument("softmax_rows: empty rows");
  Tensor out = make_out(x.shape, x.requires_grad);
  macs::count_elementwise("softmax", static_cast<long long>(r) * c);
  kernels::softmax_rows(x.data->data(), out.data->data(), r, c);
  if (out.requires_grad) {
    record(out, {x}).backward = [r, c](Node& nd) {
      const double* g = nd.out_grad->data();
      const double* y = nd.out_data->data();
      double* pg = nd.parents[0].grad->data();
      kernels::row_map(r, static_cast<std::size_t>(c) * 3, [=](int i) {
        const std::size_t base = static_cast<std::size_t>(i) * c;
        double dot = 0.0;
        for (int j = 0; j < c; ++j) dot += g[base + j] * y[base + j];
        for (int j = 0; j < c; ++j)
          pg[base + j] += y[base + j] * (g[base + j] - dot);
      });
    };
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps) {
  check_2d(x, "layer_norm");
  const int r = x.rows(), c = x.cols();
  if (c < 2) throw std::invalid_argument("layer_norm: needs at least 2 features");
  if (static_cast<int>(gain.size()) != c || static_cast<int>(bias.size()) != c)
    throw std::invalid_argument("layer_norm: gain/bias must have length " + std::to_string(c));
  Tensor out = make_out(x.shape, x.requires_grad || gain.requires_grad || bias.requires_grad);
  macs::count_elementwise("layer_norm", static_cast<long long>(r) * c);
  auto xhat = std::make_shared<std::vector<double>>(out.size());
  auto inv_std = std::make_shared<std::vector<double>>(r);
  kernels::layer_norm_rows(x.data->data(), gain.data->data(), bias.data->data(),
                           eps, out.data->data(), xhat->data(), inv_std->data(), r, c);
  if (out.requires_grad) {
    record(out, {x, gain, bias}).backward = [r, c, xhat, inv_std](Node& nd) {
      const double* g = nd.out_grad->data();
      const double* xh = xhat->data();
      const double* istd = inv_std->data();
      const Tensor& xp = nd.parents[0];
      const Tensor& gp = nd.parents[1];
      const Tensor& bp = nd.parents[2];
      const double* gainv = gp.data->data();
      if (xp.requires_grad) {
        double* pg = xp.grad->data();
        kernels::row_map(r, static_cast<std::size_t>(c) * 6, [=](int i) {
          const std::size_t base = static_cast<std::size_t>(i) * c;
          double s1 = 0.0, s2 = 0.0;  // mean(dxhat), mean(dxhat*xhat)
          for (int j = 0; j < c; ++j) {
            const double dxh = g[base + j] * gainv[j];
            s1 += dxh;
            s2 += dxh * xh[base + j];
          }
          s1 /= c;
          s2 /= c;
          for (int j = 0; j < c; ++j) {
            const double dxh = g[base + j] * gainv[j];
            pg[base + j] += istd[i] * (dxh - s1 - xh[base + j] * s2);
          }
        });
      }
      if (gp.requires_grad) {
        double* pg = gp.grad->data();
        for (int i = 0; i < r; ++i) {
          const std::size_t base = static_cast<std::size_t>(i) * c;
          for (int j = 0; j < c; ++j) pg[j] += g[base + j] * xh[base + j];
        }
      }
      if (bp.requires_grad) {
        double* pg = bp.grad->data();
        for (int i = 0; i < r; ++i) {
          const std::size_t base = static_cast<std::size_t>(i) * c;
          for (int j = 0; j < c; ++j) pg[j] += g[base + j];
        }
      }
    };
  }
  return out;
}

// ---- shape ops ---------------------------------------------------------------

Tensor row(const Tensor& x, int i) {
  check_2d(x, "row");
  const int r = x.rows(), c = x.cols();
  if (i < 0 || i >= r)
    throw std::invalid_argument("row: index " + std::to_string(i) + " out of " + shape_str(x.shape));
  Tensor out = make_out({1, c}, x.requires_grad);
  const double* xd = x.data->data() + static_cast<std::size_t>(i) * c;
  std::copy(xd, xd + c, out.data->data());
  if (out.requires_grad) {
    record(out, {x}).backward = [i, c](Node& nd) {
      const double* g = nd.out_grad->data();
      double* pg = nd.parents[0].grad->data() + static_cast<std::size_t>(i) * c;
      for (int j = 0; j < c; ++j) pg[j] += g[j];
    };
  }
  return out;
}

Tensor broadcast_rows(const Tensor& x, int r) {
  check_2d(x, "broadcast_rows");
  if (x.rows() != 1) throw std::invalid_argument("broadcast_rows: expected 1×c, got " + shape_str(x.shape));
  const int c = x.cols();
  Tensor out = make_out({r, c}, x.requires_grad);
  const double* xd = x.data->data();
  double* od = out.data->data();
  kernels::row_map(r, static_cast<std::size_t>(c), [=](int i) {
    std::copy(xd, xd + c, od + static_cast<std::size_t>(i) * c);
  });
  if (out.requires_grad) {
    record(out, {x}).backward = [r, c](Node& nd) {
      const double* g = nd.out_grad->data();
      double* pg = nd.parents[0].grad->data();
      for (int i = 0; i < r; ++i) {
        const std::size_t base = static_cast<std::size_t>(i) * c;
        for (int j = 0; j < c; ++j) pg[j] += g[base + j];
      }
    };
  }
  return out;
}

Tensor mean_rows(const Tensor& x) {
  check_2d(x, "mean_rows");
  const int r = x.rows(), c = x.cols();
  Tensor out = make_out({1, c}, x.requires_grad);
  const double* xd = x.data->data();
  double* od = out.data->data();
  for (int i = 0; i < r; ++i) {
    const std::size_t base = static_cast<std::size_t>(i) * c;
    for (int j = 0; j < c; ++j) od[j] += xd[base + j];
  }
  const double inv = 1.0 / r;
  for (int j = 0; j < c; ++j) od[j] *= inv;
  if (out.requires_grad) {
    record(out, {x}).backward = [r, c, inv](Node& nd) {
      const double* g = nd.out_grad->data();
      double* pg = nd.parents[0].grad->data();
      kernels::row_map(r, static_cast<std::size_t>(c), [=](int i) {
        const std::size_t base = static_cast<std::size_t>(i) * c;
        for (int j = 0; j < c; ++j) pg[base + j] += g[j] * inv;
      });
    };
  }
  return out;
}

Tensor concat_rows(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_rows: no inputs");
  const int c = xs[0].cols();
  int r = 0;
  bool rg = false;
  for (const Tensor& t : xs) {
    check_2d(t, "concat_rows");
    if (t.cols() != c) throw std::invalid_argument("concat_rows: column mismatch");
    r += t.rows();
    rg = rg || t.requires_grad;
  }
  Tensor out = make_out({r, c}, rg);
  double* od = out.data->data();
  std::size_t off = 0;
  for (const Tensor& t : xs) {
    std::copy(t.data->begin(), t.data->end(), od + off);
    off += t.size();
  }
  if (out.requires_grad) {
    record(out, xs).backward = [](Node& nd) {
      const double* g = nd.out_grad->data();
      std::size_t off2 = 0;
      for (Tensor& p : nd.parents) {
        if (p.requires_grad) {
          double* pg = p.grad->data();
          for (std::size_t i = 0; i < p.size(); ++i) pg[i] += g[off2 + i];
        }
        off2 += p.size();
      }
    };
  }
  return out;
}

Tensor slice_cols(const Tensor& x, int off, int len) {
  check_2d(x, "slice_cols");
  const int r = x.rows(), c = x.cols();
  if (off < 0 || len <= 0 || off + len > c)
    throw std::invalid_argument("slice_cols: [" + std::to_string(off) + "," +
                                std::to_string(off + len) + ") out of " + shape_str(x.shape));
  Tensor out = make_out({r, len}, x.requires_grad);
  const double* xd = x.data->data();
  double* od = out.data->data();
  kernels::row_map(r, static_cast<std::size_t>(len), [=](int i) {
    std::copy(xd + static_cast<std::size_t>(i) * c + off,
              xd + static_cast<std::size_t>(i) * c + off + len,
              od + static_cast<std::size_t>(i) * len);
  });
  if (out.requires_grad) {
    record(out, {x}).backward = [off, len, c, r](Node& nd) {
      const double* g = nd.out_grad->data();
      double* pg = nd.parents[0].grad->data();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < len; ++j)
          pg[static_cast<std::size_t>(i) * c + off + j] +=
              g[static_cast<std::size_t>(i) * len + j];
    };
  }
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const int r = xs[0].rows();
  int c = 0;
  bool rg = false;
  for (const Tensor& t : xs) {
    check_2d(t, "concat_cols");
    if (t.rows() != r) throw std::invalid_argument("concat_cols: row mismatch");
    c += t.cols();
    rg = rg || t.requires_grad;
  }
  Tensor out = make_out({r, c}, rg);
  double* od = out.data->data();
  int coff = 0;
  for (const Tensor& t : xs) {
    const int tc = t.cols();
    const double* td = t.data->data();
    for (int i = 0; i < r; ++i)
      std::copy(td + static_cast<std::size_t>(i) * tc,
                td + static_cast<std::size_t>(i) * tc + tc,
                od + static_cast<std::size_t>(i) * c + coff);
    coff += tc;
  }
  if (out.requires_grad) {
    record(out, xs).backward = [r, c](Node& nd) {
      const double* g = nd.out_grad->data();
      int coff2 = 0;
      for (Tensor& p : nd.parents) {
        const int tc = p.cols();
        if (p.requires_grad) {
          double* pg = p.grad->data();
          for (int i = 0; i < r; ++i)
            for (int j = 0; j < tc; ++j)
              pg[static_cast<std::size_t>(i) * tc + j] +=
                  g[static_cast<std::size_t>(i) * c + coff2 + j];
        }
        coff2 += tc;
      }
    };
  }
  return out;
}

Tensor gather_rows(const Tensor& table, const std::vector<int>& ids) {
  check_2d(table, "gather_rows");
  const int v = table.rows(), c = table.cols();
  const int n = static_cast<int>(ids.size());
  for (int id : ids)
    if (id < 0 || id >= v)
      throw std::invalid_argument("gather_rows: id " + std::to_string(id) +
                                  " out of table " + shape_str(table.shape));
  Tensor out = make_out({n, c}, table.requires_grad);
  const double* td = table.data->data();
  double* od = out.data->data();
  for (int i = 0; i < n; ++i)
    std::copy(td + static_cast<std::size_t>(ids[i]) * c,
              td + static_cast<std::size_t>(ids[i]) * c + c,
              od + static_cast<std::size_t>(i) * c);
  if (out.requires_grad) {
    record(out, {table}).backward = [ids, c](Node& nd) {
      const double* g = nd.out_grad->data();
      double* pg = nd.parents[0].grad->data();
      for (std::size_t i = 0; i < ids.size(); ++i)
        for (int j = 0; j < c; ++j)
          pg[static_cast<std::size_t>(ids[i]) * c + j] += g[i * c + j];
    };
  }
  return out;
}

Tensor dropout(const Tensor& x, double p, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout: p must be in [0,1)");
  if (p == 0.0) return x;
  const std::size_t n = x.size();
  auto mask = std::make_shared<std::vector<unsigned char>>(n);
  for (std::size_t i = 0; i < n; ++i) (*mask)[i] = rng.uniform() >= p ? 1 : 0;
  const double inv_keep = 1.0 / (1.0 - p);
  Tensor out = make_out(x.shape, x.requires_grad);
  const double* xd = x.data->data();
  double* od = out.data->data();
  const unsigned char* md = mask->data();
  kernels::map(n, [=](std::size_t i) { od[i] = md[i] ? xd[i] * inv_keep : 0.0; });
  if (out.requires_grad) {
    record(out, {x}).backward = [mask, inv_keep](Node& nd) {
      const std::vector<double>& g = *nd.out_grad;
      double* pg = nd.parents[0].grad->data();
      const unsigned char* md2 = mask->data();
      kernels::map(g.size(), [&, pg, md2](std::size_t i) {
        if (md2[i]) pg[i] += g[i] * inv_keep;
      });
    };
  }
  return out;
}

Tensor sum(const Tensor& x) {
  Tensor out = make_out({1}, x.requires_grad);
  double acc = 0.0;
  for (double v : *x.data) acc += v;
  (*out.data)[0] = acc;
  if (out.requires_grad) {
    record(out, {x}).backward = [](Node& nd) {
      const double g = (*nd.out_grad)[0];
      double* pg = nd.parents[0].grad->data();
      kernels::map(nd.parents[0].size(), [=](std::size_t i) { pg[i] += g; });
    };
  }
  return out;
}

Tensor cross_entropy_logits(const Tensor& logits, int label) {
  const int c = static_cast<int>(logits.size());
  if (label < 0 || label >= c)
    throw std::invalid_argument("cross_entropy: label " + std::to_string(label) +
                                " out of range for " + std::to_string(c) + " classes");
  const double* xd = logits.data->data();
  double mx = xd[0];
  for (int j = 1; j < c; ++j) mx = std::max(mx, xd[j]);
  double lse = 0.0;
  for (int j = 0; j < c; ++j) lse += std::exp(xd[j] - mx);
  lse = mx + std::log(lse);
  Tensor out = make_out({1}, logits.requires_grad);
  (*out.data)[0] = lse - xd[label];
  if (out.requires_grad) {
    auto probs = std::make_shared<std::vector<double>>(c);
    for (int j = 0; j < c; ++j) (*probs)[j] = std::exp(xd[j] - lse);
    record(out, {logits}).backward = [probs, label](Node& nd) {
      const double g = (*nd.out_grad)[0];
      double* pg = nd.parents[0].grad->data();
      for (std::size_t j = 0; j < probs->size(); ++j) {
        double d = (*probs)[j];
        if (static_cast<int>(j) == label) d -= 1.0;
        pg[j] += g * d;
      }
    };
  }
  return out;
}

}  // namespace co4
