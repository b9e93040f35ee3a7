#include "dualgan/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>

namespace dualgan {

std::string activation_name(const Activation& a) {
  switch (a.kind) {
    case ActivationKind::identity: return "identity";
    case ActivationKind::relu: return "relu";
    case ActivationKind::leaky_relu: return "leaky_relu";
    case ActivationKind::tanh: return "tanh";
  }
  return "?";
}

std::int64_t same_out_extent(std::int64_t in, std::int64_t stride) { return (in + stride - 1) / stride; }

// ---------------------------------------------------------------------------
// Tape

template <typename T>
BasicVar<T> BasicTape<T>::constant(BasicTensor<T> value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
BasicVar<T> BasicTape<T>::param(BasicParameter<T>& p, bool track) {
  Node n;
  n.value = p.value;
  if (track && !p.frozen) {
    n.requires_grad = true;
    n.param = &p;
  }
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
BasicVar<T> BasicTape<T>::variable(BasicTensor<T> value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
void BasicTape<T>::exclude(const std::vector<BasicParameter<T>*>& params) {
  for (auto& n : nodes_) {
    if (n.param != nullptr && std::find(params.begin(), params.end(), n.param) != params.end()) {
      n.param = nullptr;
      n.requires_grad = false;
    }
  }
}

template <typename T>
BasicVar<T> BasicTape<T>::record(BasicTensor<T> value, std::vector<int> inputs, Backward backward) {
  if (finite_checks_enabled() && !all_finite(value)) {
    throw NumericError("non-finite value produced at tape node " + std::to_string(nodes_.size()));
  }
  Node n;
  n.value = std::move(value);
  for (int i : inputs) n.requires_grad = n.requires_grad || node(i).requires_grad;
  n.inputs = std::move(inputs);
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
BasicTensor<T>& BasicTape<T>::grad_slot(int id) {
  auto& n = node(id);
  if (n.grad.shape() != n.value.shape() || n.grad.empty() != n.value.empty()) {
    n.grad = BasicTensor<T>(n.value.shape());
  }
  return n.grad;
}

template <typename T>
void BasicTape<T>::accumulate(int id, const BasicTensor<T>& g) {
  if (!node(id).requires_grad) return;
  auto& slot = grad_slot(id);
  T* dst = slot.data();
  const T* src = g.data();
  for (std::int64_t i = 0; i < slot.size(); ++i) dst[i] += src[i];
}

template <typename T>
void BasicTape<T>::backward(BasicVar<T> root) {
  if (root.valid() && &root.tape() != this) throw std::invalid_argument("backward: root is on another tape");
  const auto& r = node(root.id());
  if (r.value.size() != 1) throw ShapeError("backward: root must be scalar, got " + shape_string(r.value.shape()));
  backward(root, BasicTensor<T>(r.value.shape(), T(1)));
}

template <typename T>
void BasicTape<T>::backward(BasicVar<T> output, const BasicTensor<T>& seed) {
  if (output.valid() && &output.tape() != this) throw std::invalid_argument("backward: output is on another tape");
  auto& r = node(output.id());
  if (seed.shape() != r.value.shape()) {
    throw ShapeError("backward: seed " + shape_string(seed.shape()) + " does not match output " +
                     shape_string(r.value.shape()));
  }
  for (auto& n : nodes_) n.grad = BasicTensor<T>();
  visits_ = 0;
  if (!r.requires_grad) return;
  r.grad = seed;
  for (int id = output.id(); id >= 0; --id) {
    auto& n = node(id);
    if (!n.requires_grad || n.grad.empty()) continue;
    ++visits_;
    if (n.param != nullptr) {
      auto& pg = n.param->grad;
      if (pg.shape() != n.param->value.shape()) pg = BasicTensor<T>(n.param->value.shape());
      for (std::int64_t i = 0; i < pg.size(); ++i) pg[i] += n.grad[i];
    }
    if (n.backward) n.backward(*this, id);
  }
}

// ---------------------------------------------------------------------------
// GEMM and im2col helpers

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

struct ConvGeometry {
  std::int64_t in_h, in_w, channels, k, stride, pad_t, pad_l, out_h, out_w;
};

ConvGeometry same_geometry(std::int64_t in_h, std::int64_t in_w, std::int64_t channels, std::int64_t k,
                           std::int64_t stride) {
  const std::int64_t oh = same_out_extent(in_h, stride), ow = same_out_extent(in_w, stride);
  const std::int64_t ph = std::max<std::int64_t>((oh - 1) * stride + k - in_h, 0);
  const std::int64_t pw = std::max<std::int64_t>((ow - 1) * stride + k - in_w, 0);
  return {in_h, in_w, channels, k, stride, ph / 2, pw / 2, oh, ow};
}

// src [in_h,in_w,C] -> cols [out_h*out_w, k*k*C], column order (ky,kx,c).
template <typename T>
void im2col(const T* src, const ConvGeometry& g, T* cols) {
  const std::int64_t C = g.channels, kkc = g.k * g.k * C;
  for (std::int64_t oy = 0; oy < g.out_h; ++oy) {
    for (std::int64_t ox = 0; ox < g.out_w; ++ox) {
      T* row = cols + (oy * g.out_w + ox) * kkc;
      for (std::int64_t ky = 0; ky < g.k; ++ky) {
        const std::int64_t iy = oy * g.stride - g.pad_t + ky;
        T* seg = row + ky * g.k * C;
        if (iy < 0 || iy >= g.in_h) {
          std::fill(seg, seg + g.k * C, T(0));
          continue;
        }
        for (std::int64_t kx = 0; kx < g.k; ++kx) {
          const std::int64_t ix = ox * g.stride - g.pad_l + kx;
          if (ix < 0 || ix >= g.in_w) {
            std::fill(seg + kx * C, seg + (kx + 1) * C, T(0));
          } else {
            std::memcpy(seg + kx * C, src + (iy * g.in_w + ix) * C, sizeof(T) * C);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add cols back into dst [in_h,in_w,C].
template <typename T>
void col2im(const T* cols, const ConvGeometry& g, T* dst) {
  const std::int64_t C = g.channels, kkc = g.k * g.k * C;
  for (std::int64_t oy = 0; oy < g.out_h; ++oy) {
    for (std::int64_t ox = 0; ox < g.out_w; ++ox) {
      const T* row = cols + (oy * g.out_w + ox) * kkc;
      for (std::int64_t ky = 0; ky < g.k; ++ky) {
        const std::int64_t iy = oy * g.stride - g.pad_t + ky;
        if (iy < 0 || iy >= g.in_h) continue;
        for (std::int64_t kx = 0; kx < g.k; ++kx) {
          const std::int64_t ix = ox * g.stride - g.pad_l + kx;
          if (ix < 0 || ix >= g.in_w) continue;
          const T* s = row + (ky * g.k + kx) * C;
          T* d = dst + (iy * g.in_w + ix) * C;
          for (std::int64_t c = 0; c < C; ++c) d[c] += s[c];
        }
      }
    }
  }
}

struct Nhwc {
  std::int64_t n, h, w, c;
  bool batched;
};

template <typename T>
Nhwc nhwc(const BasicTensor<T>& t, const char* who) {
  if (t.rank() == 3) return {1, t.dim(0), t.dim(1), t.dim(2), false};
  if (t.rank() == 4) return {t.dim(0), t.dim(1), t.dim(2), t.dim(3), true};
  throw ShapeError(std::string(who) + ": expected [H,W,C] or [N,H,W,C], got " + shape_string(t.shape()));
}

Shape image_shape(const Nhwc& d, std::int64_t h, std::int64_t w, std::int64_t c) {
  if (d.batched) return {d.n, h, w, c};
  return {h, w, c};
}

template <typename T>
void add_bias_rows(T* out, std::int64_t rows, const T* bias, std::int64_t cols) {
  for (std::int64_t r = 0; r < rows; ++r) {
    T* o = out + r * cols;
    for (std::int64_t c = 0; c < cols; ++c) o[c] += bias[c];
  }
}

template <typename T>
void sum_rows_into(const T* src, std::int64_t rows, std::int64_t cols, T* dst) {
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* s = src + r * cols;
    for (std::int64_t c = 0; c < cols; ++c) dst[c] += s[c];
  }
}

template <typename T>
void require_same_tape(BasicVar<T> a, BasicVar<T> b, const char* who) {
  if (&a.tape() != &b.tape()) throw std::invalid_argument(std::string(who) + ": operands on different tapes");
}

}  // namespace

// ---------------------------------------------------------------------------
// conv2d

template <typename T>
BasicVar<T> conv2d(BasicVar<T> input, BasicVar<T> kernel, BasicVar<T> bias, int stride) {
  require_same_tape(input, kernel, "conv2d");
  require_same_tape(input, bias, "conv2d");
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be positive, got " + std::to_string(stride));
  const auto& x = input.value();
  const auto& w = kernel.value();
  const auto d = nhwc(x, "conv2d");
  if (w.rank() != 4 || w.dim(0) != w.dim(1) || w.dim(0) < 1) {
    throw ShapeError("conv2d: kernel must be [k,k,Cin,Cout], got " + shape_string(w.shape()));
  }
  if (w.dim(2) != d.c) {
    throw ShapeError("conv2d: input has " + std::to_string(d.c) + " channels, kernel expects " +
                     std::to_string(w.dim(2)));
  }
  const std::int64_t cout = w.dim(3);
  if (bias.value().size() != cout) throw ShapeError("conv2d: bias extent mismatch");
  const auto g = same_geometry(d.h, d.w, d.c, w.dim(0), stride);
  const std::int64_t rows = g.out_h * g.out_w, kkc = g.k * g.k * d.c;

  BasicTensor<T> out(image_shape(d, g.out_h, g.out_w, cout));
  std::vector<T> cols(static_cast<std::size_t>(rows * kkc));
  CMapMat<T> W(w.data(), kkc, cout);
  for (std::int64_t n = 0; n < d.n; ++n) {
    im2col(x.data() + n * d.h * d.w * d.c, g, cols.data());
    MapMat<T> O(out.data() + n * rows * cout, rows, cout);
    O.noalias() = CMapMat<T>(cols.data(), rows, kkc) * W;
    add_bias_rows(O.data(), rows, bias.value().data(), cout);
  }

  const int xi = input.id(), wi = kernel.id(), bi = bias.id();
  return input.tape().record(std::move(out), {xi, wi, bi}, [=](BasicTape<T>& tape, int self) {
    const auto& gout = tape.node(self).grad;
    const auto& xv = tape.node(xi).value;
    const auto& wv = tape.node(wi).value;
    const bool need_x = tape.node(xi).requires_grad;
    const bool need_w = tape.node(wi).requires_grad;
    const bool need_b = tape.node(bi).requires_grad;
    std::vector<T> c(static_cast<std::size_t>(rows * kkc));
    CMapMat<T> Wm(wv.data(), kkc, cout);
    if (need_b) {
      auto& gb = tape.grad_slot(bi);
      sum_rows_into(gout.data(), d.n * rows, cout, gb.data());
    }
    for (std::int64_t n = 0; n < d.n; ++n) {
      CMapMat<T> G(gout.data() + n * rows * cout, rows, cout);
      if (need_w) {
        im2col(xv.data() + n * d.h * d.w * d.c, g, c.data());
        auto& gw = tape.grad_slot(wi);
        MapMat<T>(gw.data(), kkc, cout).noalias() += CMapMat<T>(c.data(), rows, kkc).transpose() * G;
      }
      if (need_x) {
        MapMat<T>(c.data(), rows, kkc).noalias() = G * Wm.transpose();
        auto& gx = tape.grad_slot(xi);
        col2im(c.data(), g, gx.data() + n * d.h * d.w * d.c);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// conv_transpose2d: adjoint of a same-padded conv2d mapping [H*s] -> [H].

template <typename T>
BasicVar<T> conv_transpose2d(BasicVar<T> input, BasicVar<T> kernel, BasicVar<T> bias, int stride) {
  require_same_tape(input, kernel, "conv_transpose2d");
  require_same_tape(input, bias, "conv_transpose2d");
  if (stride < 1) {
    throw std::invalid_argument("conv_transpose2d: stride must be positive, got " + std::to_string(stride));
  }
  const auto& x = input.value();
  const auto& w = kernel.value();
  const auto d = nhwc(x, "conv_transpose2d");
  if (w.rank() != 4 || w.dim(1) != w.dim(2) || w.dim(1) < 1) {
    throw ShapeError("conv_transpose2d: kernel must be [Cin,k,k,Cout], got " + shape_string(w.shape()));
  }
  if (w.dim(0) != d.c) {
    throw ShapeError("conv_transpose2d: input has " + std::to_string(d.c) + " channels, kernel expects " +
                     std::to_string(w.dim(0)));
  }
  const std::int64_t k = w.dim(1), cout = w.dim(3);
  if (bias.value().size() != cout) throw ShapeError("conv_transpose2d: bias extent mismatch");
  const std::int64_t oh = d.h * stride, ow = d.w * stride;
  // Geometry of the forward conv whose adjoint this is: input oh x ow, output d.h x d.w.
  const auto g = same_geometry(oh, ow, cout, k, stride);
  const std::int64_t rows = d.h * d.w, kkc = k * k * cout;

  BasicTensor<T> out(image_shape(d, oh, ow, cout));
  std::vector<T> cols(static_cast<std::size_t>(rows * kkc));
  CMapMat<T> W(w.data(), d.c, kkc);
  for (std::int64_t n = 0; n < d.n; ++n) {
    MapMat<T>(cols.data(), rows, kkc).noalias() = CMapMat<T>(x.data() + n * rows * d.c, rows, d.c) * W;
    T* o = out.data() + n * oh * ow * cout;
    col2im(cols.data(), g, o);
    add_bias_rows(o, oh * ow, bias.value().data(), cout);
  }

  const int xi = input.id(), wi = kernel.id(), bi = bias.id();
  return input.tape().record(std::move(out), {xi, wi, bi}, [=](BasicTape<T>& tape, int self) {
    const auto& gout = tape.node(self).grad;
    const auto& xv = tape.node(xi).value;
    const auto& wv = tape.node(wi).value;
    const bool need_x = tape.node(xi).requires_grad;
    const bool need_w = tape.node(wi).requires_grad;
    const bool need_b = tape.node(bi).requires_grad;
    if (need_b) {
      auto& gb = tape.grad_slot(bi);
      sum_rows_into(gout.data(), d.n * oh * ow, cout, gb.data());
    }
    if (!need_x && !need_w) return;
    std::vector<T> c(static_cast<std::size_t>(rows * kkc));
    CMapMat<T> Wm(wv.data(), d.c, kkc);
    for (std::int64_t n = 0; n < d.n; ++n) {
      im2col(gout.data() + n * oh * ow * cout, g, c.data());
      CMapMat<T> Gc(c.data(), rows, kkc);
      if (need_w) {
        auto& gw = tape.grad_slot(wi);
        MapMat<T>(gw.data(), d.c, kkc).noalias() +=
            CMapMat<T>(xv.data() + n * rows * d.c, rows, d.c).transpose() * Gc;
      }
      if (need_x) {
        auto& gx = tape.grad_slot(xi);
        MapMat<T>(gx.data() + n * rows * d.c, rows, d.c).noalias() += Gc * Wm.transpose();
      }
    }
  });
}

// ---------------------------------------------------------------------------
// dense

template <typename T>
BasicVar<T> dense(BasicVar<T> input, BasicVar<T> weight, BasicVar<T> bias) {
  require_same_tape(input, weight, "dense");
  require_same_tape(input, bias, "dense");
  const auto& x = input.value();
  const auto& w = weight.value();
  if (w.rank() != 2) throw ShapeError("dense: weight must be [N,M], got " + shape_string(w.shape()));
  if (x.rank() != 1 && x.rank() != 2) throw ShapeError("dense: input must be [N] or [B,N], got " + shape_string(x.shape()));
  const std::int64_t in = w.dim(0), outn = w.dim(1);
  const std::int64_t batch = x.rank() == 2 ? x.dim(0) : 1;
  if (x.dim(-1) != in) {
    throw ShapeError("dense: input extent " + std::to_string(x.dim(-1)) + " does not match weight " +
                     shape_string(w.shape()));
  }
  if (bias.value().size() != outn) throw ShapeError("dense: bias extent mismatch");
  BasicTensor<T> out(x.rank() == 2 ? Shape{batch, outn} : Shape{outn});
  MapMat<T> O(out.data(), batch, outn);
  O.noalias() = CMapMat<T>(x.data(), batch, in) * CMapMat<T>(w.data(), in, outn);
  add_bias_rows(out.data(), batch, bias.value().data(), outn);

  const int xi = input.id(), wi = weight.id(), bi = bias.id();
  return input.tape().record(std::move(out), {xi, wi, bi}, [=](BasicTape<T>& tape, int self) {
    const auto& gout = tape.node(self).grad;
    CMapMat<T> G(gout.data(), batch, outn);
    if (tape.node(bi).requires_grad) sum_rows_into(gout.data(), batch, outn, tape.grad_slot(bi).data());
    if (tape.node(wi).requires_grad) {
      const auto& xv = tape.node(xi).value;
      MapMat<T>(tape.grad_slot(wi).data(), in, outn).noalias() += CMapMat<T>(xv.data(), batch, in).transpose() * G;
    }
    if (tape.node(xi).requires_grad) {
      const auto& wv = tape.node(wi).value;
      MapMat<T>(tape.grad_slot(xi).data(), batch, in).noalias() += G * CMapMat<T>(wv.data(), in, outn).transpose();
    }
  });
}

// ---------------------------------------------------------------------------
// elementwise

template <typename T>
BasicVar<T> apply_activation(BasicVar<T> input, Activation act) {
  if (act.kind == ActivationKind::leaky_relu && !(act.alpha > 0.0 && act.alpha < 1.0)) {
    throw std::invalid_argument("leaky_relu: alpha must lie in (0,1)");
  }
  const auto& x = input.value();
  BasicTensor<T> out(x.shape());
  const T alpha = static_cast<T>(act.alpha);
  const std::int64_t n = x.size();
  switch (act.kind) {
    case ActivationKind::identity:
      out = x;
      break;
    case ActivationKind::relu:
      for (std::int64_t i = 0; i < n; ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
      break;
    case ActivationKind::leaky_relu:
      for (std::int64_t i = 0; i < n; ++i) out[i] = x[i] > T(0) ? x[i] : alpha * x[i];
      break;
    case ActivationKind::tanh:
      for (std::int64_t i = 0; i < n; ++i) out[i] = std::tanh(x[i]);
      break;
  }
  const int xi = input.id();
  const auto kind = act.kind;
  return input.tape().record(std::move(out), {xi}, [=](BasicTape<T>& tape, int self) {
    const auto& g = tape.node(self).grad;
    const auto& xv = tape.node(xi).value;
    const auto& yv = tape.node(self).value;
    auto& gx = tape.grad_slot(xi);
    for (std::int64_t i = 0; i < n; ++i) {
      T dy;
      switch (kind) {
        case ActivationKind::identity: dy = T(1); break;
        case ActivationKind::relu: dy = xv[i] > T(0) ? T(1) : T(0); break;
        case ActivationKind::leaky_relu: dy = xv[i] > T(0) ? T(1) : alpha; break;
        default: dy = T(1) - yv[i] * yv[i]; break;
      }
      gx[i] += g[i] * dy;
    }
  });
}

template <typename T>
BasicVar<T> reshape(BasicVar<T> input, Shape shape) {
  auto out = input.value().reshaped(std::move(shape));
  const int xi = input.id();
  return input.tape().record(std::move(out), {xi}, [=](BasicTape<T>& tape, int self) {
    const auto& g = tape.node(self).grad;
    auto& gx = tape.grad_slot(xi);
    for (std::int64_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

template <typename T>
BasicVar<T> flatten(BasicVar<T> input) {
  const auto& s = input.shape();
  if (s.size() == 4) return reshape(input, Shape{s[0], s[1] * s[2] * s[3]});
  return reshape(input, Shape{input.value().size()});
}

template <typename T>
BasicVar<T> concat_channels(BasicVar<T> a, BasicVar<T> b) {
  require_same_tape(a, b, "concat_channels");
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rank() != bv.rank() || av.rank() < 1 ||
      !std::equal(av.shape().begin(), av.shape().end() - 1, bv.shape().begin())) {
    throw ShapeError("concat_channels: spatial mismatch " + shape_string(av.shape()) + " vs " +
                     shape_string(bv.shape()));
  }
  const std::int64_t ca = av.dim(-1), cb = bv.dim(-1), pix = av.size() / std::max<std::int64_t>(ca, 1);
  Shape s = av.shape();
  s.back() = ca + cb;
  BasicTensor<T> out(s);
  for (std::int64_t p = 0; p < pix; ++p) {
    std::memcpy(out.data() + p * (ca + cb), av.data() + p * ca, sizeof(T) * ca);
    std::memcpy(out.data() + p * (ca + cb) + ca, bv.data() + p * cb, sizeof(T) * cb);
  }
  const int ai = a.id(), bi = b.id();
  return a.tape().record(std::move(out), {ai, bi}, [=](BasicTape<T>& tape, int self) {
    const auto& g = tape.node(self).grad;
    if (tape.node(ai).requires_grad) {
      auto& ga = tape.grad_slot(ai);
      for (std::int64_t p = 0; p < pix; ++p)
        for (std::int64_t c = 0; c < ca; ++c) ga[p * ca + c] += g[p * (ca + cb) + c];
    }
    if (tape.node(bi).requires_grad) {
      auto& gb = tape.grad_slot(bi);
      for (std::int64_t p = 0; p < pix; ++p)
        for (std::int64_t c = 0; c < cb; ++c) gb[p * cb + c] += g[p * (ca + cb) + ca + c];
    }
  });
}

template <typename T>
BasicVar<T> pack2x2(BasicVar<T> tl, BasicVar<T> tr, BasicVar<T> bl, BasicVar<T> br) {
  require_same_tape(tl, tr, "pack2x2");
  require_same_tape(tl, bl, "pack2x2");
  require_same_tape(tl, br, "pack2x2");
  auto out = pack2x2(tl.value(), tr.value(), bl.value(), br.value());
  const int ids[4] = {tl.id(), tr.id(), bl.id(), br.id()};
  return tl.tape().record(std::move(out), {ids[0], ids[1], ids[2], ids[3]}, [ids](BasicTape<T>& tape, int self) {
    auto quads = unpack2x2(tape.node(self).grad);
    for (int q = 0; q < 4; ++q) tape.accumulate(ids[q], quads[q]);
  });
}

template <typename T>
BasicVar<T> pack_quartets(BasicVar<T> batch) {
  const auto& x = batch.value();
  if (x.rank() != 4 || x.dim(0) % 4 != 0 || x.dim(0) == 0) {
    throw ShapeError("pack_quartets: need [4M,H,W,C], got " + shape_string(x.shape()));
  }
  const std::int64_t m = x.dim(0) / 4, h = x.dim(1), w = x.dim(2), c = x.dim(3);
  const std::int64_t img = h * w * c, row = w * c;
  BasicTensor<T> out(Shape{m, 2 * h, 2 * w, c});
  auto place = [=](std::int64_t g, int q, std::int64_t y) {
    const std::int64_t oy = (q / 2) * h + y, ox = (q % 2) * w;
    return g * 4 * img + (oy * 2 * w + ox) * c;
  };
  for (std::int64_t g = 0; g < m; ++g)
    for (int q = 0; q < 4; ++q)
      for (std::int64_t y = 0; y < h; ++y)
        std::memcpy(out.data() + place(g, q, y), x.data() + (4 * g + q) * img + y * row, sizeof(T) * row);
  const int xi = batch.id();
  return batch.tape().record(std::move(out), {xi}, [=](BasicTape<T>& tape, int self) {
    const auto& gout = tape.node(self).grad;
    auto& gx = tape.grad_slot(xi);
    for (std::int64_t g = 0; g < m; ++g)
      for (int q = 0; q < 4; ++q)
        for (std::int64_t y = 0; y < h; ++y) {
          const T* s = gout.data() + place(g, q, y);
          T* d = gx.data() + (4 * g + q) * img + y * row;
          for (std::int64_t i = 0; i < row; ++i) d[i] += s[i];
        }
  });
}

template <typename T>
BasicVar<T> slice_batch(BasicVar<T> input, std::int64_t begin, std::int64_t end) {
  auto out = slice_leading(input.value(), begin, end);
  const std::int64_t inner = input.value().size() / input.value().dim(0);
  const int xi = input.id();
  return input.tape().record(std::move(out), {xi}, [=](BasicTape<T>& tape, int self) {
    const auto& g = tape.node(self).grad;
    auto& gx = tape.grad_slot(xi);
    for (std::int64_t i = 0; i < g.size(); ++i) gx[begin * inner + i] += g[i];
  });
}

template <typename T>
BasicVar<T> concat_batch(BasicVar<T> a, BasicVar<T> b) {
  require_same_tape(a, b, "concat_batch");
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rank() < 1 || av.rank() != bv.rank() ||
      !std::equal(av.shape().begin() + 1, av.shape().end(), bv.shape().begin() + 1)) {
    throw ShapeError("concat_batch: mismatch " + shape_string(av.shape()) + " vs " + shape_string(bv.shape()));
  }
  Shape s = av.shape();
  s[0] += bv.dim(0);
  std::vector<T> v(av.storage());
  v.insert(v.end(), bv.storage().begin(), bv.storage().end());
  const std::int64_t na = av.size();
  const int ai = a.id(), bi = b.id();
  return a.tape().record(BasicTensor<T>(std::move(s), std::move(v)), {ai, bi}, [=](BasicTape<T>& tape, int self) {
    const auto& g = tape.node(self).grad;
    if (tape.node(ai).requires_grad) {
      auto& ga = tape.grad_slot(ai);
      for (std::int64_t i = 0; i < na; ++i) ga[i] += g[i];
    }
    if (tape.node(bi).requires_grad) {
      auto& gb = tape.grad_slot(bi);
      for (std::int64_t i = 0; i < gb.size(); ++i) gb[i] += g[na + i];
    }
  });
}

template <typename T>
BasicVar<T> reduce_sum(BasicVar<T> input) {
  const auto& x = input.value();
  if (x.empty()) throw ShapeError("reduce_sum: empty tensor");
  T s = T(0);
  for (T v : x.values()) s += v;
  const int xi = input.id();
  return input.tape().record(BasicTensor<T>::scalar(s), {xi}, [=](BasicTape<T>& tape, int self) {
    const T g = tape.node(self).grad[0];
    auto& gx = tape.grad_slot(xi);
    for (std::int64_t i = 0; i < gx.size(); ++i) gx[i] += g;
  });
}

template <typename T>
BasicVar<T> reduce_mean(BasicVar<T> input) {
  const auto& x = input.value();
  if (x.empty()) throw ShapeError("reduce_mean: empty tensor");
  T s = T(0);
  for (T v : x.values()) s += v;
  const T inv = T(1) / static_cast<T>(x.size());
  const int xi = input.id();
  return input.tape().record(BasicTensor<T>::scalar(s * inv), {xi}, [=](BasicTape<T>& tape, int self) {
    const T g = tape.node(self).grad[0] * inv;
    auto& gx = tape.grad_slot(xi);
    for (std::int64_t i = 0; i < gx.size(); ++i) gx[i] += g;
  });
}

namespace {

template <typename T, typename Fwd, typename Bwd>
BasicVar<T> binary_same_shape(BasicVar<T> a, BasicVar<T> b, const char* who, Fwd fwd, Bwd bwd) {
  require_same_tape(a, b, who);
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.shape() != bv.shape()) {
    throw ShapeError(std::string(who) + ": shape mismatch " + shape_string(av.shape()) + " vs " +
                     shape_string(bv.shape()));
  }
  BasicTensor<T> out(av.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i], bv[i]);
  const int ai = a.id(), bi = b.id();
  return a.tape().record(std::move(out), {ai, bi}, [=](BasicTape<T>& tape, int self) {
    const auto& g = tape.node(self).grad;
    const auto& x = tape.node(ai).value;
    const auto& y = tape.node(bi).value;
    const bool na = tape.node(ai).requires_grad, nb = tape.node(bi).requires_grad;
    T* ga = na ? tape.grad_slot(ai).data() : nullptr;
    T* gb = nb ? tape.grad_slot(bi).data() : nullptr;
    for (std::int64_t i = 0; i < g.size(); ++i) {
      const auto [da, db] = bwd(x[i], y[i]);
      if (na) ga[i] += g[i] * da;
      if (nb) gb[i] += g[i] * db;
    }
  });
}

}  // namespace

template <typename T>
BasicVar<T> add(BasicVar<T> a, BasicVar<T> b) {
  return binary_same_shape(
      a, b, "add", [](T x, T y) { return x + y; }, [](T, T) { return std::pair<T, T>{T(1), T(1)}; });
}

template <typename T>
BasicVar<T> sub(BasicVar<T> a, BasicVar<T> b) {
  return binary_same_shape(
      a, b, "sub", [](T x, T y) { return x - y; }, [](T, T) { return std::pair<T, T>{T(1), T(-1)}; });
}

template <typename T>
BasicVar<T> mul(BasicVar<T> a, BasicVar<T> b) {
  return binary_same_shape(
      a, b, "mul", [](T x, T y) { return x * y; }, [](T x, T y) { return std::pair<T, T>{y, x}; });
}

template <typename T>
BasicVar<T> scale(BasicVar<T> a, T factor) {
  BasicTensor<T> out = a.value();
  for (auto& v : out.storage()) v *= factor;
  const int ai = a.id();
  return a.tape().record(std::move(out), {ai}, [=](BasicTape<T>& tape, int self) {
    const auto& g = tape.node(self).grad;
    auto& ga = tape.grad_slot(ai);
    for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
  });
}

template <typename T>
BasicVar<T> softmax_cross_entropy(BasicVar<T> logits, const std::vector<int>& labels) {
  const auto& z = logits.value();
  if (z.rank() != 2) throw ShapeError("softmax_cross_entropy: logits must be [B,K], got " + shape_string(z.shape()));
  const std::int64_t b = z.dim(0), k = z.dim(1);
  if (static_cast<std::int64_t>(labels.size()) != b) throw ShapeError("softmax_cross_entropy: label count mismatch");
  BasicTensor<T> prob(z.shape());
  T loss = T(0);
  for (std::int64_t i = 0; i < b; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= k) throw std::invalid_argument("softmax_cross_entropy: label out of range");
    const T* row = z.data() + i * k;
    const T mx = *std::max_element(row, row + k);
    T sum = T(0);
    for (std::int64_t j = 0; j < k; ++j) sum += std::exp(row[j] - mx);
    for (std::int64_t j = 0; j < k; ++j) prob[i * k + j] = std::exp(row[j] - mx) / sum;
    loss += std::log(sum) + mx - row[y];
  }
  loss /= static_cast<T>(b);
  const int zi = logits.id();
  return logits.tape().record(BasicTensor<T>::scalar(loss), {zi},
                              [=, prob = std::move(prob)](BasicTape<T>& tape, int self) {
                                const T g = tape.node(self).grad[0] / static_cast<T>(b);
                                auto& gz = tape.grad_slot(zi);
                                for (std::int64_t i = 0; i < b; ++i) {
                                  for (std::int64_t j = 0; j < k; ++j) {
                                    const T onehot = j == labels[static_cast<std::size_t>(i)] ? T(1) : T(0);
                                    gz[i * k + j] += g * (prob[i * k + j] - onehot);
                                  }
                                }
                              });
}

template <typename T>
BasicVar<T> batch_norm(BasicVar<T> input, T epsilon) {
  const auto& x = input.value();
  if (x.rank() < 2) throw ShapeError("batch_norm: need at least rank 2");
  const std::int64_t c = x.dim(-1), m = x.size() / c;
  std::vector<T> mean(static_cast<std::size_t>(c), T(0)), inv_std(static_cast<std::size_t>(c), T(0));
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < c; ++j) mean[j] += x[i * c + j];
  for (auto& v : mean) v /= static_cast<T>(m);
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < c; ++j) {
      const T d = x[i * c + j] - mean[j];
      inv_std[j] += d * d;
    }
  for (auto& v : inv_std) v = T(1) / std::sqrt(v / static_cast<T>(m) + epsilon);
  BasicTensor<T> out(x.shape());
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < c; ++j) out[i * c + j] = (x[i * c + j] - mean[j]) * inv_std[j];
  const int xi = input.id();
  return input.tape().record(std::move(out), {xi}, [=](BasicTape<T>& tape, int self) {
    const auto& g = tape.node(self).grad;
    const auto& y = tape.node(self).value;
    std::vector<T> mg(static_cast<std::size_t>(c), T(0)), mgy(static_cast<std::size_t>(c), T(0));
    for (std::int64_t i = 0; i < m; ++i)
      for (std::int64_t j = 0; j < c; ++j) {
        mg[j] += g[i * c + j];
        mgy[j] += g[i * c + j] * y[i * c + j];
      }
    for (std::int64_t j = 0; j < c; ++j) {
      mg[j] /= static_cast<T>(m);
      mgy[j] /= static_cast<T>(m);
    }
    auto& gx = tape.grad_slot(xi);
    for (std::int64_t i = 0; i < m; ++i)
      for (std::int64_t j = 0; j < c; ++j)
        gx[i * c + j] += inv_std[j] * (g[i * c + j] - mg[j] - y[i * c + j] * mgy[j]);
  });
}

template <typename T>
std::map<std::string, BasicTensor<T>> gradients(const std::vector<BasicParameter<T>*>& params) {
  std::map<std::string, BasicTensor<T>> out;
  for (auto* p : params) {
    out[p->name] = p->grad.shape() == p->value.shape() ? p->grad : BasicTensor<T>(p->value.shape());
  }
  return out;
}

#define DUALGAN_INSTANTIATE(T)                                                                              \
  template class BasicTape<T>;                                                                              \
  template BasicVar<T> conv2d<T>(BasicVar<T>, BasicVar<T>, BasicVar<T>, int);                               \
  template BasicVar<T> conv_transpose2d<T>(BasicVar<T>, BasicVar<T>, BasicVar<T>, int);                     \
  template BasicVar<T> dense<T>(BasicVar<T>, BasicVar<T>, BasicVar<T>);                                     \
  template BasicVar<T> apply_activation<T>(BasicVar<T>, Activation);                                        \
  template BasicVar<T> flatten<T>(BasicVar<T>);                                                             \
  template BasicVar<T> reshape<T>(BasicVar<T>, Shape);                                                      \
  template BasicVar<T> concat_channels<T>(BasicVar<T>, BasicVar<T>);                                        \
  template BasicVar<T> pack2x2<T>(BasicVar<T>, BasicVar<T>, BasicVar<T>, BasicVar<T>);                      \
  template BasicVar<T> pack_quartets<T>(BasicVar<T>);                                                       \
  template BasicVar<T> slice_batch<T>(BasicVar<T>, std::int64_t, std::int64_t);                             \
  template BasicVar<T> concat_batch<T>(BasicVar<T>, BasicVar<T>);                                           \
  template BasicVar<T> reduce_mean<T>(BasicVar<T>);                                                         \
  template BasicVar<T> reduce_sum<T>(BasicVar<T>);                                                          \
  template BasicVar<T> add<T>(BasicVar<T>, BasicVar<T>);                                                    \
  template BasicVar<T> sub<T>(BasicVar<T>, BasicVar<T>);                                                    \
  template BasicVar<T> mul<T>(BasicVar<T>, BasicVar<T>);                                                    \
  template BasicVar<T> scale<T>(BasicVar<T>, T);                                                            \
  template BasicVar<T> softmax_cross_entropy<T>(BasicVar<T>, const std::vector<int>&);                      \
  template BasicVar<T> batch_norm<T>(BasicVar<T>, T);                                                       \
  template std::map<std::string, BasicTensor<T>> gradients<T>(const std::vector<BasicParameter<T>*>&);

DUALGAN_INSTANTIATE(float)
DUALGAN_INSTANTIATE(double)
#undef DUALGAN_INSTANTIATE

}  // namespace dualgan
