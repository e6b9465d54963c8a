#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "maskwave/autodiff.hpp"
#include "maskwave/errors.hpp"

namespace maskwave::ad {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i)
    os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

void Node::ensure_grad() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
}

void Node::accumulate(const std::vector<double>& g) {
  ensure_grad();
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
}

namespace {

// Dot product with four independent accumulation chains so the compiler
// can vectorize without reassociating a single serial chain.
inline double dot4(const double* a, const double* b, int n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  double s = (s0 + s1) + (s2 + s3);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

std::shared_ptr<Node> make_node(Shape shape, std::vector<double> value,
                                std::vector<std::shared_ptr<Node>> parents,
                                std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->parents = std::move(parents);
  for (const auto& p : n->parents)
    if (p->requires_grad) n->requires_grad = true;
  if (n->requires_grad) n->backprop = std::move(backprop);
  return n;
}

Tensor wrap(std::shared_ptr<Node> n) {
  Tensor t;
  t.node_ = std::move(n);
  return t;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  if (numel(shape) != values.size())
    throw ShapeError("constant: value count does not match shape");
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->leaf = true;
  return wrap(std::move(n));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  Tensor t = constant(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  return t;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::vector<double> v(numel(shape), 0.0);
  return requires_grad ? parameter(std::move(shape), std::move(v))
                       : constant(std::move(shape), std::move(v));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return requires_grad ? parameter({1}, {v}) : constant({1}, {v});
}

std::vector<double>& Tensor::grad() {
  node_->ensure_grad();
  return node_->grad;
}

double Tensor::item() const {
  if (node_->value.size() != 1)
    throw ContractError("item(): tensor is not scalar");
  return node_->value[0];
}

Tensor Tensor::detach() const {
  return constant(node_->shape, node_->value);
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::backward() {
  if (!node_) throw ContractError("backward on empty tensor");
  if (node_->value.size() != 1)
    throw ContractError("backward requires a scalar output");
  if (!node_->requires_grad)
    throw ContractError("backward on a graph with no trainable inputs");

  // Iterative post-order over parents.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, idx] = stack.back();
    if (idx < n->parents.size()) {
      Node* p = n->parents[idx++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  for (Node* n : order)
    if (!n->leaf && n->backward_done)
      throw ContractError("backward already ran over this tape; re-run forward");

  node_->ensure_grad();
  node_->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop && !n->grad.empty()) n->backprop(*n);
    if (!n->leaf) n->backward_done = true;
  }
}

// ---------------------------------------------------------------- elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> v(a.count());
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = a.values()[i] + b.values()[i];
  return wrap(make_node(a.shape(), std::move(v), {a.node_, b.node_},
                        [](Node& n) {
                          for (int p = 0; p < 2; ++p)
                            if (n.parents[p]->requires_grad)
                              n.parents[p]->accumulate(n.grad);
                        }));
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> v(a.count());
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = a.values()[i] - b.values()[i];
  return wrap(make_node(a.shape(), std::move(v), {a.node_, b.node_},
                        [](Node& n) {
                          if (n.parents[0]->requires_grad)
                            n.parents[0]->accumulate(n.grad);
                          if (n.parents[1]->requires_grad) {
                            n.parents[1]->ensure_grad();
                            auto& g = n.parents[1]->grad;
                            for (std::size_t i = 0; i < g.size(); ++i)
                              g[i] -= n.grad[i];
                          }
                        }));
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> v(a.count());
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = a.values()[i] * b.values()[i];
  return wrap(make_node(a.shape(), std::move(v), {a.node_, b.node_},
                        [](Node& n) {
                          auto& pa = *n.parents[0];
                          auto& pb = *n.parents[1];
                          if (pa.requires_grad) {
                            pa.ensure_grad();
                            for (std::size_t i = 0; i < n.grad.size(); ++i)
                              pa.grad[i] += n.grad[i] * pb.value[i];
                          }
                          if (pb.requires_grad) {
                            pb.ensure_grad();
                            for (std::size_t i = 0; i < n.grad.size(); ++i)
                              pb.grad[i] += n.grad[i] * pa.value[i];
                          }
                        }));
}

Tensor affine(const Tensor& x, double scale, double shift) {
  std::vector<double> v(x.count());
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = scale * x.values()[i] + shift;
  return wrap(make_node(x.shape(), std::move(v), {x.node_},
                        [scale](Node& n) {
                          auto& p = *n.parents[0];
                          p.ensure_grad();
                          for (std::size_t i = 0; i < n.grad.size(); ++i)
                            p.grad[i] += scale * n.grad[i];
                        }));
}

Tensor square(const Tensor& x) {
  std::vector<double> v(x.count());
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = x.values()[i] * x.values()[i];
  return wrap(make_node(x.shape(), std::move(v), {x.node_},
                        [](Node& n) {
                          auto& p = *n.parents[0];
                          p.ensure_grad();
                          for (std::size_t i = 0; i < n.grad.size(); ++i)
                            p.grad[i] += 2.0 * p.value[i] * n.grad[i];
                        }));
}

Tensor abs(const Tensor& x) {
  std::vector<double> v(x.count());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::abs(x.values()[i]);
  return wrap(make_node(x.shape(), std::move(v), {x.node_},
                        [](Node& n) {
                          auto& p = *n.parents[0];
                          p.ensure_grad();
                          for (std::size_t i = 0; i < n.grad.size(); ++i) {
                            const double s =
                                p.value[i] > 0.0 ? 1.0 : (p.value[i] < 0.0 ? -1.0 : 0.0);
                            p.grad[i] += s * n.grad[i];
                          }
                        }));
}

Tensor tanh(const Tensor& x) {
  std::vector<double> v(x.count());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::tanh(x.values()[i]);
  return wrap(make_node(x.shape(), std::move(v), {x.node_},
                        [](Node& n) {
                          auto& p = *n.parents[0];
                          p.ensure_grad();
                          for (std::size_t i = 0; i < n.grad.size(); ++i)
                            p.grad[i] += (1.0 - n.value[i] * n.value[i]) * n.grad[i];
                        }));
}

Tensor leaky_relu(const Tensor& x, double negative_slope) {
  std::vector<double> v(x.count());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double xv = x.values()[i];
    v[i] = xv > 0.0 ? xv : negative_slope * xv;
  }
  return wrap(make_node(x.shape(), std::move(v), {x.node_},
                        [negative_slope](Node& n) {
                          auto& p = *n.parents[0];
                          p.ensure_grad();
                          for (std::size_t i = 0; i < n.grad.size(); ++i)
                            p.grad[i] += (p.value[i] > 0.0 ? 1.0 : negative_slope) *
                                         n.grad[i];
                        }));
}

// ------------------------------------------------------------- linear algebra

Tensor matmul(const Tensor& x, const Tensor& w) {
  if (x.shape().size() != 2 || w.shape().size() != 2)
    throw ShapeError("matmul expects rank-2 tensors");
  const int n = x.shape()[0], k = x.shape()[1];
  const int k2 = w.shape()[0], m = w.shape()[1];
  if (k != k2)
    throw ShapeError("matmul: inner dims " + shape_str(x.shape()) + " vs " +
                     shape_str(w.shape()));
  std::vector<double> v(static_cast<std::size_t>(n) * m, 0.0);
  const auto& xv = x.values();
  const auto& wv = w.values();
  for (int i = 0; i < n; ++i)
    for (int kk = 0; kk < k; ++kk) {
      const double xi = xv[static_cast<std::size_t>(i) * k + kk];
      const double* wrow = wv.data() + static_cast<std::size_t>(kk) * m;
      double* orow = v.data() + static_cast<std::size_t>(i) * m;
      for (int j = 0; j < m; ++j) orow[j] += xi * wrow[j];
    }
  return wrap(make_node({n, m}, std::move(v), {x.node_, w.node_},
                        [n, k, m](Node& node) {
                          auto& px = *node.parents[0];
                          auto& pw = *node.parents[1];
                          if (px.requires_grad) {
                            px.ensure_grad();
                            // dX = dY * W^T
                            for (int i = 0; i < n; ++i)
                              for (int kk = 0; kk < k; ++kk) {
                                const double* grow =
                                    node.grad.data() + static_cast<std::size_t>(i) * m;
                                const double* wrow =
                                    pw.value.data() + static_cast<std::size_t>(kk) * m;
                                px.grad[static_cast<std::size_t>(i) * k + kk] +=
                                    dot4(grow, wrow, m);
                              }
                          }
                          if (pw.requires_grad) {
                            pw.ensure_grad();
                            // dW = X^T * dY
                            for (int kk = 0; kk < k; ++kk)
                              for (int i = 0; i < n; ++i) {
                                const double xi =
                                    px.value[static_cast<std::size_t>(i) * k + kk];
                                const double* grow =
                                    node.grad.data() + static_cast<std::size_t>(i) * m;
                                double* wgrow =
                                    pw.grad.data() + static_cast<std::size_t>(kk) * m;
                                for (int j = 0; j < m; ++j) wgrow[j] += xi * grow[j];
                              }
                          }
                        }));
}

Tensor add_rowvec(const Tensor& x, const Tensor& b) {
  if (x.shape().size() != 2 || b.shape().size() != 1 ||
      x.shape()[1] != b.shape()[0])
    throw ShapeError("add_rowvec: incompatible shapes");
  const int n = x.shape()[0], m = x.shape()[1];
  std::vector<double> v(x.count());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      v[static_cast<std::size_t>(i) * m + j] =
          x.values()[static_cast<std::size_t>(i) * m + j] + b.values()[j];
  return wrap(make_node(x.shape(), std::move(v), {x.node_, b.node_},
                        [n, m](Node& node) {
                          auto& px = *node.parents[0];
                          auto& pb = *node.parents[1];
                          if (px.requires_grad) px.accumulate(node.grad);
                          if (pb.requires_grad) {
                            pb.ensure_grad();
                            for (int i = 0; i < n; ++i)
                              for (int j = 0; j < m; ++j)
                                pb.grad[j] +=
                                    node.grad[static_cast<std::size_t>(i) * m + j];
                          }
                        }));
}

// ----------------------------------------------------------------- conv2d

namespace {

struct ConvDims {
  int n, c, h, w, oc, kh, kw, oh, ow, stride, pad;
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, int stride, int pad) {
  if (x.shape().size() != 4) throw ShapeError("conv2d input must be [N,C,H,W]");
  if (w.shape().size() != 4)
    throw ShapeError("conv2d kernel must be [OC,C,KH,KW]");
  if (stride < 1) throw ParameterError("conv2d stride must be >= 1");
  if (pad < 0) throw ParameterError("conv2d pad must be >= 0");
  ConvDims d;
  d.n = x.shape()[0];
  d.c = x.shape()[1];
  d.h = x.shape()[2];
  d.w = x.shape()[3];
  d.oc = w.shape()[0];
  d.kh = w.shape()[2];
  d.kw = w.shape()[3];
  d.stride = stride;
  d.pad = pad;
  if (w.shape()[1] != d.c)
    throw ShapeError("conv2d: kernel channels " + shape_str(w.shape()) +
                     " do not match input " + shape_str(x.shape()));
  d.oh = (d.h + 2 * pad - d.kh) / stride + 1;
  d.ow = (d.w + 2 * pad - d.kw) / stride + 1;
  if (d.h + 2 * pad < d.kh || d.w + 2 * pad < d.kw)
    throw ShapeError("conv2d: kernel larger than padded input");
  return d;
}

// Gathers one sample's receptive fields into a [C*KH*KW, OH*OW] matrix:
// each row holds one kernel tap across every output position, so stride-1
// rows are contiguous slices of the input.
void im2col(const double* x, const ConvDims& d, double* col) {
  const int patches = d.oh * d.ow;
  int k_idx = 0;
  for (int c = 0; c < d.c; ++c) {
    const double* xc = x + static_cast<std::size_t>(c) * d.h * d.w;
    for (int kh = 0; kh < d.kh; ++kh) {
      for (int kw = 0; kw < d.kw; ++kw, ++k_idx) {
        double* row = col + static_cast<std::size_t>(k_idx) * patches;
        for (int oh = 0; oh < d.oh; ++oh) {
          const int ih = oh * d.stride - d.pad + kh;
          double* dst = row + static_cast<std::size_t>(oh) * d.ow;
          if (ih < 0 || ih >= d.h) {
            std::fill(dst, dst + d.ow, 0.0);
            continue;
          }
          const double* xrow = xc + static_cast<std::size_t>(ih) * d.w;
          if (d.stride == 1) {
            const int base = kw - d.pad;
            int ow = 0;
            for (; ow < d.ow && ow + base < 0; ++ow) dst[ow] = 0.0;
            const int hi = std::min(d.ow, d.w - base);
            for (; ow < hi; ++ow) dst[ow] = xrow[ow + base];
            for (; ow < d.ow; ++ow) dst[ow] = 0.0;
          } else {
            for (int ow = 0; ow < d.ow; ++ow) {
              const int iw = ow * d.stride - d.pad + kw;
              dst[ow] = (iw < 0 || iw >= d.w) ? 0.0 : xrow[iw];
            }
          }
        }
      }
    }
  }
}

// Scatter-adds [C*KH*KW, OH*OW] column-space gradients into the input grad.
void col2im_add(const double* col, const ConvDims& d, double* dx) {
  const int patches = d.oh * d.ow;
  int k_idx = 0;
  for (int c = 0; c < d.c; ++c) {
    double* xc = dx + static_cast<std::size_t>(c) * d.h * d.w;
    for (int kh = 0; kh < d.kh; ++kh) {
      for (int kw = 0; kw < d.kw; ++kw, ++k_idx) {
        const double* row = col + static_cast<std::size_t>(k_idx) * patches;
        for (int oh = 0; oh < d.oh; ++oh) {
          const int ih = oh * d.stride - d.pad + kh;
          if (ih < 0 || ih >= d.h) continue;
          double* xrow = xc + static_cast<std::size_t>(ih) * d.w;
          const double* src = row + static_cast<std::size_t>(oh) * d.ow;
          if (d.stride == 1) {
            const int base = kw - d.pad;
            const int lo = base < 0 ? -base : 0;
            const int hi = std::min(d.ow, d.w - base);
            for (int ow = lo; ow < hi; ++ow) xrow[ow + base] += src[ow];
          } else {
            for (int ow = 0; ow < d.ow; ++ow) {
              const int iw = ow * d.stride - d.pad + kw;
              if (iw >= 0 && iw < d.w) xrow[iw] += src[ow];
            }
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
              int pad) {
  const ConvDims d = conv_dims(x, w, stride, pad);
  const bool has_bias = b.defined();
  if (has_bias && (b.shape().size() != 1 || b.shape()[0] != d.oc))
    throw ShapeError("conv2d bias must be [OC]");

  const int k = d.c * d.kh * d.kw;
  const int patches = d.oh * d.ow;
  std::vector<double> out(
      static_cast<std::size_t>(d.n) * d.oc * d.oh * d.ow, 0.0);
  std::vector<double> col(static_cast<std::size_t>(patches) * k);
  const auto& xv = x.values();
  const auto& wv = w.values();
  for (int n = 0; n < d.n; ++n) {
    im2col(xv.data() + static_cast<std::size_t>(n) * d.c * d.h * d.w, d,
           col.data());
    double* out_n =
        out.data() + static_cast<std::size_t>(n) * d.oc * patches;
    for (int oc = 0; oc < d.oc; ++oc) {
      double* orow = out_n + static_cast<std::size_t>(oc) * patches;
      const double bias = has_bias ? b.values()[oc] : 0.0;
      std::fill(orow, orow + patches, bias);
      const double* wrow = wv.data() + static_cast<std::size_t>(oc) * k;
      for (int i = 0; i < k; ++i) {
        const double wv_i = wrow[i];
        if (wv_i == 0.0) continue;
        const double* crow = col.data() + static_cast<std::size_t>(i) * patches;
        for (int p = 0; p < patches; ++p) orow[p] += wv_i * crow[p];
      }
    }
  }

  std::vector<std::shared_ptr<Node>> parents{x.node_, w.node_};
  if (has_bias) parents.push_back(b.node_);
  return wrap(make_node(
      {d.n, d.oc, d.oh, d.ow}, std::move(out), std::move(parents),
      [d, has_bias](Node& node) {
        auto& px = *node.parents[0];
        auto& pw = *node.parents[1];
        if (px.requires_grad) px.ensure_grad();
        if (pw.requires_grad) pw.ensure_grad();
        const int k = d.c * d.kh * d.kw;
        const int patches = d.oh * d.ow;
        std::vector<double> col(static_cast<std::size_t>(patches) * k);
        std::vector<double> dcol;
        if (px.requires_grad) dcol.resize(col.size());
        for (int n = 0; n < d.n; ++n) {
          const double* g_n =
              node.grad.data() + static_cast<std::size_t>(n) * d.oc * patches;
          if (pw.requires_grad) {
            im2col(px.value.data() + static_cast<std::size_t>(n) * d.c * d.h * d.w,
                   d, col.data());
            for (int oc = 0; oc < d.oc; ++oc) {
              double* dwrow = pw.grad.data() + static_cast<std::size_t>(oc) * k;
              const double* grow = g_n + static_cast<std::size_t>(oc) * patches;
              for (int i = 0; i < k; ++i)
                dwrow[i] += dot4(
                    grow, col.data() + static_cast<std::size_t>(i) * patches,
                    patches);
            }
          }
          if (px.requires_grad) {
            std::fill(dcol.begin(), dcol.end(), 0.0);
            for (int i = 0; i < k; ++i) {
              double* crow = dcol.data() + static_cast<std::size_t>(i) * patches;
              for (int oc = 0; oc < d.oc; ++oc) {
                const double wv_i =
                    pw.value[static_cast<std::size_t>(oc) * k + i];
                if (wv_i == 0.0) continue;
                const double* grow = g_n + static_cast<std::size_t>(oc) * patches;
                for (int p = 0; p < patches; ++p) crow[p] += wv_i * grow[p];
              }
            }
            col2im_add(dcol.data(), d,
                       px.grad.data() +
                           static_cast<std::size_t>(n) * d.c * d.h * d.w);
          }
        }
        if (has_bias && node.parents[2]->requires_grad) {
          auto& pb = *node.parents[2];
          pb.ensure_grad();
          for (int n = 0; n < d.n; ++n)
            for (int oc = 0; oc < d.oc; ++oc) {
              const double* g_p =
                  node.grad.data() +
                  (static_cast<std::size_t>(n) * d.oc + oc) * d.oh * d.ow;
              double s = 0.0;
              for (int i = 0; i < d.oh * d.ow; ++i) s += g_p[i];
              pb.grad[oc] += s;
            }
        }
      }));
}

Tensor conv2d(const Tensor& x, const Tensor& w, int stride, int pad) {
  return conv2d(x, w, Tensor(), stride, pad);
}

// ----------------------------------------------------------- spatial ops

Tensor upsample_nearest(const Tensor& x, int factor) {
  if (x.shape().size() != 4)
    throw ShapeError("upsample_nearest input must be [N,C,H,W]");
  if (factor < 1) throw ParameterError("upsample factor must be >= 1");
  const int n = x.shape()[0], c = x.shape()[1], h = x.shape()[2],
            w = x.shape()[3];
  const int oh = h * factor, ow = w * factor;
  std::vector<double> v(static_cast<std::size_t>(n) * c * oh * ow);
  for (int nc = 0; nc < n * c; ++nc) {
    const double* xp = x.values().data() + static_cast<std::size_t>(nc) * h * w;
    double* op = v.data() + static_cast<std::size_t>(nc) * oh * ow;
    for (int i = 0; i < oh; ++i)
      for (int j = 0; j < ow; ++j)
        op[static_cast<std::size_t>(i) * ow + j] =
            xp[static_cast<std::size_t>(i / factor) * w + j / factor];
  }
  return wrap(make_node({n, c, oh, ow}, std::move(v), {x.node_},
                        [n, c, h, w, factor](Node& node) {
                          auto& p = *node.parents[0];
                          p.ensure_grad();
                          const int oh = h * factor, ow = w * factor;
                          for (int nc = 0; nc < n * c; ++nc) {
                            const double* gp = node.grad.data() +
                                               static_cast<std::size_t>(nc) * oh * ow;
                            double* dxp =
                                p.grad.data() + static_cast<std::size_t>(nc) * h * w;
                            for (int i = 0; i < oh; ++i)
                              for (int j = 0; j < ow; ++j)
                                dxp[static_cast<std::size_t>(i / factor) * w +
                                    j / factor] +=
                                    gp[static_cast<std::size_t>(i) * ow + j];
                          }
                        }));
}

Tensor global_avg_pool(const Tensor& x) {
  if (x.shape().size() != 4)
    throw ShapeError("global_avg_pool input must be [N,C,H,W]");
  const int n = x.shape()[0], c = x.shape()[1];
  const int hw = x.shape()[2] * x.shape()[3];
  std::vector<double> v(static_cast<std::size_t>(n) * c);
  for (int i = 0; i < n * c; ++i) {
    const double* xp = x.values().data() + static_cast<std::size_t>(i) * hw;
    double s = 0.0;
    for (int j = 0; j < hw; ++j) s += xp[j];
    v[i] = s / hw;
  }
  return wrap(make_node({n, c}, std::move(v), {x.node_},
                        [n, c, hw](Node& node) {
                          auto& p = *node.parents[0];
                          p.ensure_grad();
                          for (int i = 0; i < n * c; ++i) {
                            const double g = node.grad[i] / hw;
                            double* dxp =
                                p.grad.data() + static_cast<std::size_t>(i) * hw;
                            for (int j = 0; j < hw; ++j) dxp[j] += g;
                          }
                        }));
}

Tensor global_max_pool(const Tensor& x) {
  if (x.shape().size() != 4)
    throw ShapeError("global_max_pool input must be [N,C,H,W]");
  const int n = x.shape()[0], c = x.shape()[1];
  const int hw = x.shape()[2] * x.shape()[3];
  std::vector<double> v(static_cast<std::size_t>(n) * c);
  std::vector<int> arg(static_cast<std::size_t>(n) * c);
  for (int i = 0; i < n * c; ++i) {
    const double* xp = x.values().data() + static_cast<std::size_t>(i) * hw;
    int best = 0;
    for (int j = 1; j < hw; ++j)
      if (xp[j] > xp[best]) best = j;
    v[i] = xp[best];
    arg[i] = best;
  }
  auto node = make_node({n, c}, std::move(v), {x.node_},
                        [n, c, hw](Node& nd) {
                          auto& p = *nd.parents[0];
                          p.ensure_grad();
                          for (int i = 0; i < n * c; ++i)
                            p.grad[static_cast<std::size_t>(i) * hw + nd.aux[i]] +=
                                nd.grad[i];
                        });
  node->aux = std::move(arg);
  return wrap(std::move(node));
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 4 || b.shape().size() != 4)
    throw ShapeError("concat_channels expects [N,C,H,W] inputs");
  if (a.shape()[0] != b.shape()[0] || a.shape()[2] != b.shape()[2] ||
      a.shape()[3] != b.shape()[3])
    throw ShapeError("concat_channels: non-channel dims differ");
  const int n = a.shape()[0], c1 = a.shape()[1], c2 = b.shape()[1];
  const int hw = a.shape()[2] * a.shape()[3];
  std::vector<double> v(static_cast<std::size_t>(n) * (c1 + c2) * hw);
  for (int i = 0; i < n; ++i) {
    std::copy_n(a.values().data() + static_cast<std::size_t>(i) * c1 * hw,
                static_cast<std::size_t>(c1) * hw,
                v.data() + static_cast<std::size_t>(i) * (c1 + c2) * hw);
    std::copy_n(b.values().data() + static_cast<std::size_t>(i) * c2 * hw,
                static_cast<std::size_t>(c2) * hw,
                v.data() + static_cast<std::size_t>(i) * (c1 + c2) * hw +
                    static_cast<std::size_t>(c1) * hw);
  }
  return wrap(make_node(
      {n, c1 + c2, a.shape()[2], a.shape()[3]}, std::move(v),
      {a.node_, b.node_}, [n, c1, c2, hw](Node& node) {
        auto& pa = *node.parents[0];
        auto& pb = *node.parents[1];
        if (pa.requires_grad) pa.ensure_grad();
        if (pb.requires_grad) pb.ensure_grad();
        for (int i = 0; i < n; ++i) {
          const double* g =
              node.grad.data() + static_cast<std::size_t>(i) * (c1 + c2) * hw;
          if (pa.requires_grad) {
            double* da = pa.grad.data() + static_cast<std::size_t>(i) * c1 * hw;
            for (int j = 0; j < c1 * hw; ++j) da[j] += g[j];
          }
          if (pb.requires_grad) {
            double* db = pb.grad.data() + static_cast<std::size_t>(i) * c2 * hw;
            for (int j = 0; j < c2 * hw; ++j) db[j] += g[c1 * hw + j];
          }
        }
      }));
}

Tensor channel_scale(const Tensor& x, const Tensor& w) {
  if (x.shape().size() < 2) throw ShapeError("channel_scale input rank < 2");
  const int n = x.shape()[0], c = x.shape()[1];
  if (numel(w.shape()) != static_cast<std::size_t>(c))
    throw ShapeError("channel_scale weight must have C elements");
  std::size_t inner = 1;
  for (std::size_t i = 2; i < x.shape().size(); ++i)
    inner *= static_cast<std::size_t>(x.shape()[i]);
  std::vector<double> v(x.count());
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      const std::size_t off = (static_cast<std::size_t>(i) * c + ch) * inner;
      const double wv = w.values()[ch];
      for (std::size_t j = 0; j < inner; ++j)
        v[off + j] = x.values()[off + j] * wv;
    }
  return wrap(make_node(x.shape(), std::move(v), {x.node_, w.node_},
                        [n, c, inner](Node& node) {
                          auto& px = *node.parents[0];
                          auto& pw = *node.parents[1];
                          if (px.requires_grad) px.ensure_grad();
                          if (pw.requires_grad) pw.ensure_grad();
                          for (int i = 0; i < n; ++i)
                            for (int ch = 0; ch < c; ++ch) {
                              const std::size_t off =
                                  (static_cast<std::size_t>(i) * c + ch) * inner;
                              const double wv = pw.value[ch];
                              double dw = 0.0;
                              for (std::size_t j = 0; j < inner; ++j) {
                                const double g = node.grad[off + j];
                                if (px.requires_grad) px.grad[off + j] += g * wv;
                                dw += g * px.value[off + j];
                              }
                              if (pw.requires_grad) pw.grad[ch] += dw;
                            }
                        }));
}

// -------------------------------------------------------------- normalization

namespace {

struct NormStats {
  std::vector<double> mean;
  std::vector<double> inv_std;
};

// Per-group mean/invstd where the input splits into `groups` contiguous
// chunks of `len` elements each.
NormStats group_stats(const std::vector<double>& v, std::size_t groups,
                      std::size_t len, double eps) {
  NormStats st;
  st.mean.resize(groups);
  st.inv_std.resize(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    const double* p = v.data() + g * len;
    double m = 0.0;
    for (std::size_t i = 0; i < len; ++i) m += p[i];
    m /= static_cast<double>(len);
    double var = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      const double d = p[i] - m;
      var += d * d;
    }
    var /= static_cast<double>(len);
    st.mean[g] = m;
    st.inv_std[g] = 1.0 / std::sqrt(var + eps);
  }
  return st;
}

// dx for y = (x - mean)/std with arbitrary per-element upstream t over one
// contiguous group.
void norm_backward_group(const double* x, const double* t, double mean,
                         double inv_std, std::size_t len, double* dx) {
  double sum_t = 0.0, sum_tx = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    const double xh = (x[i] - mean) * inv_std;
    sum_t += t[i];
    sum_tx += t[i] * xh;
  }
  const double mt = sum_t / static_cast<double>(len);
  const double mtx = sum_tx / static_cast<double>(len);
  for (std::size_t i = 0; i < len; ++i) {
    const double xh = (x[i] - mean) * inv_std;
    dx[i] += inv_std * (t[i] - mt - xh * mtx);
  }
}

}  // namespace

Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                     double eps) {
  if (x.shape().size() != 4)
    throw ShapeError("instance_norm input must be [N,C,H,W]");
  const int n = x.shape()[0], c = x.shape()[1];
  const std::size_t hw =
      static_cast<std::size_t>(x.shape()[2]) * x.shape()[3];
  if (numel(gamma.shape()) != static_cast<std::size_t>(c) ||
      numel(beta.shape()) != static_cast<std::size_t>(c))
    throw ShapeError("instance_norm affine params must have C elements");

  auto st = group_stats(x.values(), static_cast<std::size_t>(n) * c, hw, eps);
  std::vector<double> v(x.count());
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      const std::size_t g = static_cast<std::size_t>(i) * c + ch;
      const std::size_t off = g * hw;
      const double m = st.mean[g], s = st.inv_std[g];
      const double ga = gamma.values()[ch], be = beta.values()[ch];
      for (std::size_t j = 0; j < hw; ++j)
        v[off + j] = ga * (x.values()[off + j] - m) * s + be;
    }

  return wrap(make_node(
      x.shape(), std::move(v), {x.node_, gamma.node_, beta.node_},
      [n, c, hw, st = std::move(st)](Node& node) {
        auto& px = *node.parents[0];
        auto& pg = *node.parents[1];
        auto& pb = *node.parents[2];
        if (px.requires_grad) px.ensure_grad();
        if (pg.requires_grad) pg.ensure_grad();
        if (pb.requires_grad) pb.ensure_grad();
        std::vector<double> t(hw);
        for (int i = 0; i < n; ++i)
          for (int ch = 0; ch < c; ++ch) {
            const std::size_t g = static_cast<std::size_t>(i) * c + ch;
            const std::size_t off = g * hw;
            const double m = st.mean[g], s = st.inv_std[g];
            const double ga = pg.value[ch];
            double dga = 0.0, dbe = 0.0;
            for (std::size_t j = 0; j < hw; ++j) {
              const double gj = node.grad[off + j];
              const double xh = (px.value[off + j] - m) * s;
              dga += gj * xh;
              dbe += gj;
              t[j] = gj * ga;
            }
            if (pg.requires_grad) pg.grad[ch] += dga;
            if (pb.requires_grad) pb.grad[ch] += dbe;
            if (px.requires_grad)
              norm_backward_group(px.value.data() + off, t.data(), m, s, hw,
                                  px.grad.data() + off);
          }
      }));
}

Tensor adalin(const Tensor& x, const Tensor& rho, const Tensor& gamma,
              const Tensor& beta, double eps) {
  if (x.shape().size() != 4)
    throw ShapeError("adalin input must be [N,C,H,W]");
  const int n = x.shape()[0], c = x.shape()[1];
  const std::size_t hw =
      static_cast<std::size_t>(x.shape()[2]) * x.shape()[3];
  const std::size_t chw = static_cast<std::size_t>(c) * hw;
  if (numel(rho.shape()) != static_cast<std::size_t>(c) ||
      numel(gamma.shape()) != static_cast<std::size_t>(c) ||
      numel(beta.shape()) != static_cast<std::size_t>(c))
    throw ShapeError("adalin params must have C elements");

  auto in_st = group_stats(x.values(), static_cast<std::size_t>(n) * c, hw, eps);
  auto ln_st = group_stats(x.values(), static_cast<std::size_t>(n), chw, eps);

  std::vector<double> v(x.count());
  for (int i = 0; i < n; ++i) {
    const double lm = ln_st.mean[i], ls = ln_st.inv_std[i];
    for (int ch = 0; ch < c; ++ch) {
      const std::size_t g = static_cast<std::size_t>(i) * c + ch;
      const std::size_t off = g * hw;
      const double im = in_st.mean[g], is = in_st.inv_std[g];
      const double r = rho.values()[ch];
      const double ga = gamma.values()[ch], be = beta.values()[ch];
      for (std::size_t j = 0; j < hw; ++j) {
        const double xv = x.values()[off + j];
        const double u = r * (xv - im) * is + (1.0 - r) * (xv - lm) * ls;
        v[off + j] = ga * u + be;
      }
    }
  }

  return wrap(make_node(
      x.shape(), std::move(v),
      {x.node_, rho.node_, gamma.node_, beta.node_},
      [n, c, hw, chw, in_st = std::move(in_st),
       ln_st = std::move(ln_st)](Node& node) {
        auto& px = *node.parents[0];
        auto& pr = *node.parents[1];
        auto& pg = *node.parents[2];
        auto& pb = *node.parents[3];
        if (px.requires_grad) px.ensure_grad();
        if (pr.requires_grad) pr.ensure_grad();
        if (pg.requires_grad) pg.ensure_grad();
        if (pb.requires_grad) pb.ensure_grad();

        std::vector<double> t_in(hw);
        std::vector<double> t_ln(chw);
        for (int i = 0; i < n; ++i) {
          const double lm = ln_st.mean[i], ls = ln_st.inv_std[i];
          for (int ch = 0; ch < c; ++ch) {
            const std::size_t g = static_cast<std::size_t>(i) * c + ch;
            const std::size_t off = g * hw;
            const double im = in_st.mean[g], is = in_st.inv_std[g];
            const double r = pr.value[ch];
            const double ga = pg.value[ch];
            double dga = 0.0, dbe = 0.0, dr = 0.0;
            for (std::size_t j = 0; j < hw; ++j) {
              const double gj = node.grad[off + j];
              const double xv = px.value[off + j];
              const double xin = (xv - im) * is;
              const double xln = (xv - lm) * ls;
              const double u = r * xin + (1.0 - r) * xln;
              dga += gj * u;
              dbe += gj;
              const double du = gj * ga;
              dr += du * (xin - xln);
              t_in[j] = du * r;
              t_ln[static_cast<std::size_t>(ch) * hw + j] = du * (1.0 - r);
            }
            if (pg.requires_grad) pg.grad[ch] += dga;
            if (pb.requires_grad) pb.grad[ch] += dbe;
            if (pr.requires_grad) pr.grad[ch] += dr;
            if (px.requires_grad)
              norm_backward_group(px.value.data() + off, t_in.data(), im, is,
                                  hw, px.grad.data() + off);
          }
          if (px.requires_grad) {
            const std::size_t off = static_cast<std::size_t>(i) * chw;
            norm_backward_group(px.value.data() + off, t_ln.data(), lm, ls,
                                chw, px.grad.data() + off);
          }
        }
      }));
}

// ----------------------------------------------------------- shape/reduction

Tensor reshape(const Tensor& x, Shape new_shape) {
  if (numel(new_shape) != x.count())
    throw ShapeError("reshape: element count mismatch");
  std::vector<double> v = x.values();
  return wrap(make_node(std::move(new_shape), std::move(v), {x.node_},
                        [](Node& node) {
                          node.parents[0]->accumulate(node.grad);
                        }));
}

Tensor mean_all(const Tensor& x) {
  const std::size_t n = x.count();
  if (n == 0) throw ContractError("mean_all over empty tensor");
  double s = 0.0;
  for (double v : x.values()) s += v;
  return wrap(make_node({1}, {s / static_cast<double>(n)}, {x.node_},
                        [n](Node& node) {
                          auto& p = *node.parents[0];
                          p.ensure_grad();
                          const double g = node.grad[0] / static_cast<double>(n);
                          for (std::size_t i = 0; i < p.grad.size(); ++i)
                            p.grad[i] += g;
                        }));
}

Tensor softmax_cross_entropy(const Tensor& logits,
                             const std::vector<int>& labels) {
  if (logits.shape().size() != 2)
    throw ShapeError("softmax_cross_entropy expects [N,K] logits");
  const int n = logits.shape()[0], k = logits.shape()[1];
  if (static_cast<int>(labels.size()) != n)
    throw ShapeError("labels size does not match batch");
  for (int y : labels)
    if (y < 0 || y >= k) throw ParameterError("label out of range");

  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double* row = logits.values().data() + static_cast<std::size_t>(i) * k;
    double mx = row[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    double lse = 0.0;
    for (int j = 0; j < k; ++j) lse += std::exp(row[j] - mx);
    lse = mx + std::log(lse);
    loss += lse - row[labels[static_cast<std::size_t>(i)]];
  }
  loss /= n;

  return wrap(make_node({1}, {loss}, {logits.node_},
                        [n, k, labels](Node& node) {
                          auto& p = *node.parents[0];
                          p.ensure_grad();
                          const double g = node.grad[0] / n;
                          for (int i = 0; i < n; ++i) {
                            const double* row =
                                p.value.data() + static_cast<std::size_t>(i) * k;
                            double mx = row[0];
                            for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
                            double z = 0.0;
                            for (int j = 0; j < k; ++j) z += std::exp(row[j] - mx);
                            double* grow =
                                p.grad.data() + static_cast<std::size_t>(i) * k;
                            for (int j = 0; j < k; ++j) {
                              const double soft = std::exp(row[j] - mx) / z;
                              grow[j] += g * (soft -
                                              (j == labels[static_cast<std::size_t>(i)]
                                                   ? 1.0
                                                   : 0.0));
                            }
                          }
                        }));
}

}  // namespace maskwave::ad
