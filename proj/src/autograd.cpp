#include "emoconv/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "emoconv/errors.hpp"

namespace emoconv::ad {

namespace {

thread_local bool g_grad_enabled = true;

using Index = std::ptrdiff_t;

void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractError(msg);
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ContractError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                        shape_str(b.shape()));
  }
}

// Smallest t with t*stride + off >= 0, and one past the largest t with
// t*stride + off < len, clamped to [0, out_len].
std::pair<Index, Index> valid_range(Index off, Index stride, Index len, Index out_len) {
  Index lo = 0;
  if (off < 0) lo = (-off + stride - 1) / stride;
  Index hi = 0;
  if (len - 1 - off >= 0) hi = (len - 1 - off) / stride + 1;
  hi = std::min(hi, out_len);
  lo = std::min(lo, hi);
  return {lo, hi};
}

}  // namespace

Tensor& Node::grad_buffer() {
  if (grad.empty() && !value.empty()) grad = Tensor(value.shape(), 0.0);
  return grad;
}

Tensor Var::grad() const {
  if (!node_) return {};
  if (node_->grad.empty()) return Tensor(node_->value.shape(), 0.0);
  return node_->grad;
}

void Var::zero_grad() {
  if (node_) node_->grad = Tensor();
}

double Var::item() const {
  require(defined() && value().size() == 1, "item() on a non-scalar");
  return value()[0];
}

Var Var::detach() const { return constant(value()); }

void Var::backward() const {
  require(defined(), "backward() on an undefined Var");
  require(value().size() == 1, "backward() root must be a scalar, got " + shape_str(shape()));
  if (!node_->requires_grad) return;

  // Iterative post-order DFS for a topological ordering.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p && p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  Tensor& seed = node_->grad_buffer();
  seed[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

Var parameter(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(std::move(n));
}

Var make_op(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& in : inputs) needs = needs || in.requires_grad();
  }
  if (needs) {
    n->requires_grad = true;
    n->parents.reserve(inputs.size());
    for (const auto& in : inputs) n->parents.push_back(in.shared());
    n->backward = std::move(backward);
  }
  return Var(std::move(n));
}

// Elementwise ---------------------------------------------------------------

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return make_op(std::move(out), {a, b}, [](Node& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      auto& g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Var scale(const Var& x, double s) { return affine(x, s, 0.0); }

Var affine(const Var& x, double s, double b) {
  Tensor out = x.value();
  for (auto& v : out.vec()) v = s * v + b;
  return make_op(std::move(out), {x}, [s](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
  });
}

Var leaky_relu(const Var& x, double slope) {
  Tensor out = x.value();
  for (auto& v : out.vec()) v = v > 0.0 ? v : slope * v;
  return make_op(std::move(out), {x}, [slope](Node& self) {
    const auto& in = self.parents[0]->value;
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += (in[i] > 0.0 ? 1.0 : slope) * self.grad[i];
  });
}

Var tanh(const Var& x) {
  Tensor out = x.value();
  for (auto& v : out.vec()) v = std::tanh(v);
  return make_op(std::move(out), {x}, [](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      double y = self.value[i];
      g[i] += (1.0 - y * y) * self.grad[i];
    }
  });
}

Var sigmoid(const Var& x) {
  Tensor out = x.value();
  for (auto& v : out.vec()) v = 1.0 / (1.0 + std::exp(-v));
  return make_op(std::move(out), {x}, [](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      double y = self.value[i];
      g[i] += y * (1.0 - y) * self.grad[i];
    }
  });
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return make_op(std::move(out), {x}, [](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

// Convolution ---------------------------------------------------------------

std::size_t conv1d_out_len(std::size_t len, std::size_t kernel, const Conv1dSpec& spec) {
  const std::size_t padded = len + spec.pad_left + spec.pad_right;
  const std::size_t span = spec.dilation * (kernel - 1) + 1;
  if (padded < span) return 0;
  return (padded - span) / spec.stride + 1;
}

Var conv1d(const Var& x, const Var& w, const Var& bias, const Conv1dSpec& spec) {
  require(x.value().rank() == 3, "conv1d: input must be [B, C, L], got " + shape_str(x.shape()));
  require(w.value().rank() == 3, "conv1d: weight must be [Cout, Cin/groups, K]");
  require(spec.stride >= 1 && spec.dilation >= 1 && spec.groups >= 1, "conv1d: bad spec");
  const std::size_t batch = x.shape()[0], cin = x.shape()[1], len = x.shape()[2];
  const std::size_t cout = w.shape()[0], cin_g = w.shape()[1], kernel = w.shape()[2];
  const std::size_t groups = spec.groups;
  require(cin == cin_g * groups, "conv1d: input channels " + std::to_string(cin) +
                                     " do not match weight " + shape_str(w.shape()));
  require(cout % groups == 0, "conv1d: output channels not divisible by groups");
  if (bias.defined()) require(bias.size() == cout, "conv1d: bias size mismatch");
  const std::size_t out_len = conv1d_out_len(len, kernel, spec);
  require(out_len >= 1, "conv1d: input of length " + std::to_string(len) + " too short for kernel");

  const std::size_t cout_g = cout / groups;
  const Index stride = static_cast<Index>(spec.stride);
  const Index dil = static_cast<Index>(spec.dilation);
  const Index pl = static_cast<Index>(spec.pad_left);
  const Index L = static_cast<Index>(len), Lo = static_cast<Index>(out_len);

  Tensor out(Shape{batch, cout, out_len}, 0.0);
  const double* xd = x.value().data();
  const double* wd = w.value().data();
  double* yd = out.data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t co = 0; co < cout; ++co) {
      double* yrow = yd + (b * cout + co) * out_len;
      if (bias.defined()) std::fill(yrow, yrow + out_len, bias.value()[co]);
      const std::size_t g = co / cout_g;
      for (std::size_t cl = 0; cl < cin_g; ++cl) {
        const double* xrow = xd + (b * cin + g * cin_g + cl) * len;
        const double* wrow = wd + (co * cin_g + cl) * kernel;
        for (std::size_t k = 0; k < kernel; ++k) {
          const double wv = wrow[k];
          const Index off = static_cast<Index>(k) * dil - pl;
          auto [lo, hi] = valid_range(off, stride, L, Lo);
          if (stride == 1) {
            const double* xs = xrow + off;
            for (Index t = lo; t < hi; ++t) yrow[t] += wv * xs[t];
          } else {
            for (Index t = lo; t < hi; ++t) yrow[t] += wv * xrow[t * stride + off];
          }
        }
      }
    }
  }

  return make_op(std::move(out), {x, w, bias}, [=](Node& self) {
    Node& xn = *self.parents[0];
    Node& wn = *self.parents[1];
    Node* bn = self.parents[2] ? self.parents[2].get() : nullptr;
    const double* gy = self.grad.data();
    const double* xv = xn.value.data();
    const double* wv = wn.value.data();
    double* gx = xn.requires_grad ? xn.grad_buffer().data() : nullptr;
    double* gw = wn.requires_grad ? wn.grad_buffer().data() : nullptr;
    double* gb = (bn && bn->requires_grad) ? bn->grad_buffer().data() : nullptr;
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t co = 0; co < cout; ++co) {
        const double* grow = gy + (b * cout + co) * out_len;
        if (gb) {
          double s = 0.0;
          for (std::size_t t = 0; t < out_len; ++t) s += grow[t];
          gb[co] += s;
        }
        const std::size_t g = co / cout_g;
        for (std::size_t cl = 0; cl < cin_g; ++cl) {
          const std::size_t xoff = (b * cin + g * cin_g + cl) * len;
          const double* xrow = xv + xoff;
          double* gxrow = gx ? gx + xoff : nullptr;
          const std::size_t woff = (co * cin_g + cl) * kernel;
          for (std::size_t k = 0; k < kernel; ++k) {
            const Index off = static_cast<Index>(k) * dil - pl;
            auto [lo, hi] = valid_range(off, stride, L, Lo);
            if (gw) {
              double s = 0.0;
              if (stride == 1) {
                const double* xs = xrow + off;
                for (Index t = lo; t < hi; ++t) s += grow[t] * xs[t];
              } else {
                for (Index t = lo; t < hi; ++t) s += grow[t] * xrow[t * stride + off];
              }
              gw[woff + k] += s;
            }
            if (gxrow) {
              const double w_k = wv[woff + k];
              if (stride == 1) {
                double* gs = gxrow + off;
                for (Index t = lo; t < hi; ++t) gs[t] += w_k * grow[t];
              } else {
                for (Index t = lo; t < hi; ++t) gxrow[t * stride + off] += w_k * grow[t];
              }
            }
          }
        }
      }
    }
  });
}

Var conv_transpose1d(const Var& x, const Var& w, const Var& bias, std::size_t stride,
                     std::size_t crop_left, std::size_t out_len) {
  require(x.value().rank() == 3, "conv_transpose1d: input must be [B, C, L]");
  require(w.value().rank() == 3, "conv_transpose1d: weight must be [Cin, Cout, K]");
  const std::size_t batch = x.shape()[0], cin = x.shape()[1], len = x.shape()[2];
  const std::size_t cout = w.shape()[1], kernel = w.shape()[2];
  require(w.shape()[0] == cin, "conv_transpose1d: weight/input channel mismatch");
  require(stride >= 1, "conv_transpose1d: stride must be positive");
  const std::size_t full = (len - 1) * stride + kernel;
  require(crop_left + out_len <= full, "conv_transpose1d: crop exceeds full output length");
  if (bias.defined()) require(bias.size() == cout, "conv_transpose1d: bias size mismatch");

  const Index S = static_cast<Index>(stride), Lo = static_cast<Index>(out_len);
  const Index L = static_cast<Index>(len);
  // Output index o = i*S + k - crop; valid i range per k.
  auto in_range = [=](std::size_t k) {
    const Index off = static_cast<Index>(k) - static_cast<Index>(crop_left);
    Index lo = off >= 0 ? 0 : (-off + S - 1) / S;
    Index hi = (Lo - 1 - off) >= 0 ? (Lo - 1 - off) / S + 1 : 0;
    hi = std::min(hi, L);
    lo = std::min(lo, hi);
    return std::tuple<Index, Index, Index>{off, lo, hi};
  };

  Tensor out(Shape{batch, cout, out_len}, 0.0);
  const double* xd = x.value().data();
  const double* wd = w.value().data();
  double* yd = out.data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t co = 0; co < cout; ++co) {
      double* yrow = yd + (b * cout + co) * out_len;
      if (bias.defined()) std::fill(yrow, yrow + out_len, bias.value()[co]);
    }
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const double* xrow = xd + (b * cin + ci) * len;
      for (std::size_t co = 0; co < cout; ++co) {
        double* yrow = yd + (b * cout + co) * out_len;
        const double* wrow = wd + (ci * cout + co) * kernel;
        for (std::size_t k = 0; k < kernel; ++k) {
          auto [off, lo, hi] = in_range(k);
          const double wv = wrow[k];
          for (Index i = lo; i < hi; ++i) yrow[i * S + off] += wv * xrow[i];
        }
      }
    }
  }

  return make_op(std::move(out), {x, w, bias}, [=](Node& self) {
    Node& xn = *self.parents[0];
    Node& wn = *self.parents[1];
    Node* bn = self.parents[2] ? self.parents[2].get() : nullptr;
    const double* gy = self.grad.data();
    const double* xv = xn.value.data();
    const double* wv = wn.value.data();
    double* gx = xn.requires_grad ? xn.grad_buffer().data() : nullptr;
    double* gw = wn.requires_grad ? wn.grad_buffer().data() : nullptr;
    double* gb = (bn && bn->requires_grad) ? bn->grad_buffer().data() : nullptr;
    for (std::size_t b = 0; b < batch; ++b) {
      if (gb) {
        for (std::size_t co = 0; co < cout; ++co) {
          const double* grow = gy + (b * cout + co) * out_len;
          double s = 0.0;
          for (std::size_t t = 0; t < out_len; ++t) s += grow[t];
          gb[co] += s;
        }
      }
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const std::size_t xoff = (b * cin + ci) * len;
        for (std::size_t co = 0; co < cout; ++co) {
          const double* grow = gy + (b * cout + co) * out_len;
          const std::size_t woff = (ci * cout + co) * kernel;
          for (std::size_t k = 0; k < kernel; ++k) {
            auto [off, lo, hi] = in_range(k);
            if (gw) {
              double s = 0.0;
              for (Index i = lo; i < hi; ++i) s += xv[xoff + i] * grow[i * S + off];
              gw[woff + k] += s;
            }
            if (gx) {
              const double w_k = wv[woff + k];
              for (Index i = lo; i < hi; ++i) gx[xoff + i] += w_k * grow[i * S + off];
            }
          }
        }
      }
    }
  });
}

Var avg_pool1d(const Var& x, std::size_t kernel, std::size_t stride, std::size_t pad) {
  require(x.value().rank() == 3, "avg_pool1d: input must be [B, C, L]");
  const std::size_t rows = x.shape()[0] * x.shape()[1], len = x.shape()[2];
  require(len + 2 * pad >= kernel, "avg_pool1d: input too short");
  const std::size_t out_len = (len + 2 * pad - kernel) / stride + 1;
  const double inv = 1.0 / static_cast<double>(kernel);
  Tensor out(Shape{x.shape()[0], x.shape()[1], out_len}, 0.0);
  const double* xd = x.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t t = 0; t < out_len; ++t) {
      double s = 0.0;
      for (std::size_t j = 0; j < kernel; ++j) {
        const Index i = static_cast<Index>(t * stride + j) - static_cast<Index>(pad);
        if (i >= 0 && i < static_cast<Index>(len)) s += xd[r * len + i];
      }
      out[r * out_len + t] = s * inv;
    }
  }
  return make_op(std::move(out), {x}, [=](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t t = 0; t < out_len; ++t) {
        const double gv = self.grad[r * out_len + t] * inv;
        for (std::size_t j = 0; j < kernel; ++j) {
          const Index i = static_cast<Index>(t * stride + j) - static_cast<Index>(pad);
          if (i >= 0 && i < static_cast<Index>(len)) g[r * len + i] += gv;
        }
      }
    }
  });
}

Var fold_period(const Var& x, std::size_t period) {
  require(x.value().rank() == 3, "fold_period: input must be [B, C, T]");
  require(period >= 1, "fold_period: period must be positive");
  const std::size_t batch = x.shape()[0], chans = x.shape()[1], len = x.shape()[2];
  const std::size_t pad = (period - len % period) % period;
  require(pad == 0 || pad < len, "fold_period: signal too short to reflect-pad");
  const std::size_t cols = (len + pad) / period;

  // source[p] for each padded position p
  std::vector<std::size_t> source(len + pad);
  for (std::size_t p = 0; p < len; ++p) source[p] = p;
  for (std::size_t j = 0; j < pad; ++j) source[len + j] = len - 2 - j;

  Tensor out(Shape{batch * period, chans, cols}, 0.0);
  const double* xd = x.value().data();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t j = 0; j < period; ++j)
      for (std::size_t c = 0; c < chans; ++c)
        for (std::size_t i = 0; i < cols; ++i)
          out.at(b * period + j, c, i) = xd[(b * chans + c) * len + source[i * period + j]];

  return make_op(std::move(out), {x}, [=](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < period; ++j)
        for (std::size_t c = 0; c < chans; ++c)
          for (std::size_t i = 0; i < cols; ++i)
            g[(b * chans + c) * len + source[i * period + j]] += self.grad.at(b * period + j, c, i);
  });
}

// Dense ---------------------------------------------------------------------

Var linear(const Var& x, const Var& w, const Var& b) {
  require(x.value().rank() == 2 && w.value().rank() == 2, "linear: expects x [N, Din], w [Dout, Din]");
  const std::size_t n = x.shape()[0], din = x.shape()[1], dout = w.shape()[0];
  require(w.shape()[1] == din, "linear: input width " + std::to_string(din) + " vs weight " +
                                   shape_str(w.shape()));
  if (b.defined()) require(b.size() == dout, "linear: bias size mismatch");
  Tensor out(Shape{n, dout}, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t o = 0; o < dout; ++o) {
      double s = b.defined() ? b.value()[o] : 0.0;
      for (std::size_t i = 0; i < din; ++i) s += w.value().at(o, i) * x.value().at(r, i);
      out.at(r, o) = s;
    }
  return make_op(std::move(out), {x, w, b}, [=](Node& self) {
    Node& xn = *self.parents[0];
    Node& wn = *self.parents[1];
    Node* bn = self.parents[2] ? self.parents[2].get() : nullptr;
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t o = 0; o < dout; ++o) {
        const double g = self.grad.at(r, o);
        if (bn && bn->requires_grad) bn->grad_buffer()[o] += g;
        if (wn.requires_grad) {
          auto& gw = wn.grad_buffer();
          for (std::size_t i = 0; i < din; ++i) gw.at(o, i) += g * xn.value.at(r, i);
        }
        if (xn.requires_grad) {
          auto& gx = xn.grad_buffer();
          for (std::size_t i = 0; i < din; ++i) gx.at(r, i) += g * wn.value.at(o, i);
        }
      }
  });
}

Var embedding(const Var& table, std::span<const int> indices) {
  require(table.value().rank() == 2, "embedding: table must be [K, D]");
  const std::size_t k = table.shape()[0], d = table.shape()[1];
  std::vector<int> idx(indices.begin(), indices.end());
  Tensor out(Shape{idx.size(), d}, 0.0);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    require(idx[r] >= 0 && static_cast<std::size_t>(idx[r]) < k,
            "embedding: index " + std::to_string(idx[r]) + " outside [0, " + std::to_string(k) + ")");
    std::copy_n(table.value().data() + idx[r] * d, d, out.data() + r * d);
  }
  return make_op(std::move(out), {table}, [idx = std::move(idx), d](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t j = 0; j < d; ++j) g[idx[r] * d + j] += self.grad[r * d + j];
  });
}

Var mean_last(const Var& x) {
  require(x.value().rank() >= 2, "mean_last: rank must be at least 2");
  Shape shape = x.shape();
  const std::size_t last = shape.back();
  require(last >= 1, "mean_last: empty last axis");
  shape.pop_back();
  const std::size_t rows = shape_numel(shape);
  Tensor out(shape, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < last; ++j) s += x.value()[r * last + j];
    out[r] = s / static_cast<double>(last);
  }
  return make_op(std::move(out), {x}, [rows, last](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    const double inv = 1.0 / static_cast<double>(last);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < last; ++j) g[r * last + j] += self.grad[r] * inv;
  });
}

// Reductions ----------------------------------------------------------------

Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().vec()) s += v;
  return make_op(Tensor::scalar(s), {x}, [](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0];
  });
}

Var sum_sq_dev(const Var& x, double target) {
  double s = 0.0;
  for (double v : x.value().vec()) s += (target - v) * (target - v);
  return make_op(Tensor::scalar(s), {x}, [target](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    const auto& v = self.parents[0]->value;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += -2.0 * (target - v[i]) * self.grad[0];
  });
}

Var l1_distance(const Var& a, const Var& b) {
  require_same_shape(a, b, "l1_distance");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a.value()[i] - b.value()[i]);
  return make_op(Tensor::scalar(s), {a, b}, [](Node& self) {
    Node& an = *self.parents[0];
    Node& bn = *self.parents[1];
    const double g0 = self.grad[0];
    for (std::size_t i = 0; i < an.value.size(); ++i) {
      const double d = an.value[i] - bn.value[i];
      const double sg = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
      if (an.requires_grad) an.grad_buffer()[i] += sg * g0;
      if (bn.requires_grad) bn.grad_buffer()[i] -= sg * g0;
    }
  });
}

Var weighted_sum(std::span<const Var> terms, std::span<const double> weights) {
  require(terms.size() == weights.size(), "weighted_sum: terms/weights size mismatch");
  double s = 0.0;
  std::vector<Var> inputs;
  for (std::size_t k = 0; k < terms.size(); ++k) {
    require(terms[k].size() == 1, "weighted_sum: terms must be scalars");
    s += weights[k] * terms[k].item();
    inputs.push_back(terms[k]);
  }
  std::vector<double> w(weights.begin(), weights.end());
  return make_op(Tensor::scalar(s), std::move(inputs), [w = std::move(w)](Node& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k)
      if (self.parents[k]->requires_grad) self.parents[k]->grad_buffer()[0] += w[k] * self.grad[0];
  });
}

Var ccc(const Var& x, const Var& y) {
  require(x.size() == y.size(), "ccc: length mismatch");
  require(x.size() >= 2, "ccc: needs at least two points");
  const std::size_t n = x.size();
  const double dn = static_cast<double>(n);
  const auto& xv = x.value();
  const auto& yv = y.value();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xv[i];
    my += yv[i];
  }
  mx /= dn;
  my /= dn;
  double vx = 0.0, vy = 0.0, cxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    vx += (xv[i] - mx) * (xv[i] - mx);
    vy += (yv[i] - my) * (yv[i] - my);
    cxy += (xv[i] - mx) * (yv[i] - my);
  }
  vx /= dn;
  vy /= dn;
  cxy /= dn;
  const double num = 2.0 * cxy;
  const double den = vx + vy + (mx - my) * (mx - my);
  const double value = den > 0.0 ? num / den : 0.0;
  return make_op(Tensor::scalar(value), {x, y}, [=](Node& self) {
    if (!(den > 0.0)) return;
    const double g0 = self.grad[0];
    const auto& xs = self.parents[0]->value;
    const auto& ys = self.parents[1]->value;
    // d num / d x_i = 2 (y_i - my)/n ; d den / d x_i = 2 (x_i - mx)/n + 2 (mx - my)/n
    for (int side = 0; side < 2; ++side) {
      Node& p = *self.parents[side];
      if (!p.requires_grad) continue;
      auto& g = p.grad_buffer();
      const auto& own = side == 0 ? xs : ys;
      const auto& other = side == 0 ? ys : xs;
      const double mown = side == 0 ? mx : my;
      const double mother = side == 0 ? my : mx;
      for (std::size_t i = 0; i < n; ++i) {
        const double dnum = 2.0 * (other[i] - mother) / dn;
        const double dden = 2.0 * (own[i] - mown) / dn + 2.0 * (mown - mother) / dn;
        g[i] += g0 * (dnum * den - num * dden) / (den * den);
      }
    }
  });
}

}  // namespace emoconv::ad
