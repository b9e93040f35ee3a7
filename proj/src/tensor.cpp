#include "dualgan/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace dualgan {

namespace {
#ifdef NDEBUG
bool g_finite_checks = false;
#else
bool g_finite_checks = true;
#endif
}  // namespace

void set_finite_checks(bool enabled) { g_finite_checks = enabled; }
bool finite_checks_enabled() { return g_finite_checks; }

std::int64_t shape_size(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    if (d < 0) throw ShapeError("negative extent in shape " + shape_string(shape));
    n *= d;
  }
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename T>
bool all_finite(const BasicTensor<T>& t) {
  for (T v : t.values()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

namespace {

struct ImageDims {
  std::int64_t n, h, w, c;
};

template <typename T>
ImageDims image_dims(const BasicTensor<T>& t, const char* who) {
  if (t.rank() == 3) return {1, t.dim(0), t.dim(1), t.dim(2)};
  if (t.rank() == 4) return {t.dim(0), t.dim(1), t.dim(2), t.dim(3)};
  throw ShapeError(std::string(who) + ": expected [H,W,C] or [N,H,W,C], got " + shape_string(t.shape()));
}

Shape with_spatial(const Shape& like, std::int64_t h, std::int64_t w) {
  Shape s = like;
  s[s.size() - 3] = h;
  s[s.size() - 2] = w;
  return s;
}

}  // namespace

template <typename T>
BasicTensor<T> pack2x2(const BasicTensor<T>& tl, const BasicTensor<T>& tr, const BasicTensor<T>& bl,
                       const BasicTensor<T>& br) {
  if (tl.shape() != tr.shape() || tl.shape() != bl.shape() || tl.shape() != br.shape()) {
    throw ShapeError("pack2x2: quadrant shapes differ (" + shape_string(tl.shape()) + ", " +
                     shape_string(tr.shape()) + ", " + shape_string(bl.shape()) + ", " +
                     shape_string(br.shape()) + ")");
  }
  const auto d = image_dims(tl, "pack2x2");
  BasicTensor<T> out(with_spatial(tl.shape(), 2 * d.h, 2 * d.w));
  const BasicTensor<T>* quads[4] = {&tl, &tr, &bl, &br};
  const std::int64_t row = d.w * d.c;
  for (std::int64_t n = 0; n < d.n; ++n) {
    for (int q = 0; q < 4; ++q) {
      const std::int64_t oy = (q / 2) * d.h, ox = (q % 2) * d.w;
      const T* src = quads[q]->data() + n * d.h * row;
      T* dst = out.data() + n * 4 * d.h * row;
      for (std::int64_t y = 0; y < d.h; ++y) {
        std::memcpy(dst + ((oy + y) * 2 * d.w + ox) * d.c, src + y * row, sizeof(T) * row);
      }
    }
  }
  return out;
}

template <typename T>
std::vector<BasicTensor<T>> unpack2x2(const BasicTensor<T>& packed) {
  const auto d = image_dims(packed, "unpack2x2");
  if (d.h % 2 || d.w % 2) throw ShapeError("unpack2x2: odd spatial extent " + shape_string(packed.shape()));
  const std::int64_t h = d.h / 2, w = d.w / 2, row = w * d.c;
  std::vector<BasicTensor<T>> quads(4, BasicTensor<T>(with_spatial(packed.shape(), h, w)));
  for (std::int64_t n = 0; n < d.n; ++n) {
    for (int q = 0; q < 4; ++q) {
      const std::int64_t oy = (q / 2) * h, ox = (q % 2) * w;
      const T* src = packed.data() + n * d.h * d.w * d.c;
      T* dst = quads[q].data() + n * h * row;
      for (std::int64_t y = 0; y < h; ++y) {
        std::memcpy(dst + y * row, src + ((oy + y) * d.w + ox) * d.c, sizeof(T) * row);
      }
    }
  }
  return quads;
}

template <typename T>
BasicTensor<T> slice_leading(const BasicTensor<T>& t, std::int64_t begin, std::int64_t end) {
  if (t.rank() < 1 || begin < 0 || end > t.dim(0) || begin >= end) {
    throw ShapeError("slice_leading: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") out of " + shape_string(t.shape()));
  }
  const std::int64_t inner = t.dim(0) ? t.size() / t.dim(0) : 0;
  Shape s = t.shape();
  s[0] = end - begin;
  std::vector<T> v(t.storage().begin() + begin * inner, t.storage().begin() + end * inner);
  return BasicTensor<T>(std::move(s), std::move(v));
}

template <typename T>
BasicTensor<T> stack(std::span<const BasicTensor<T>> items) {
  if (items.empty()) throw ShapeError("stack: no tensors");
  Shape s{static_cast<std::int64_t>(items.size())};
  s.insert(s.end(), items[0].shape().begin(), items[0].shape().end());
  std::vector<T> v;
  v.reserve(static_cast<std::size_t>(shape_size(s)));
  for (const auto& t : items) {
    if (t.shape() != items[0].shape()) {
      throw ShapeError("stack: shape " + shape_string(t.shape()) + " differs from " +
                       shape_string(items[0].shape()));
    }
    v.insert(v.end(), t.storage().begin(), t.storage().end());
  }
  return BasicTensor<T>(std::move(s), std::move(v));
}

#define DUALGAN_INSTANTIATE(T)                                                                     \
  template bool all_finite<T>(const BasicTensor<T>&);                                              \
  template BasicTensor<T> pack2x2<T>(const BasicTensor<T>&, const BasicTensor<T>&,                 \
                                     const BasicTensor<T>&, const BasicTensor<T>&);                \
  template std::vector<BasicTensor<T>> unpack2x2<T>(const BasicTensor<T>&);                        \
  template BasicTensor<T> slice_leading<T>(const BasicTensor<T>&, std::int64_t, std::int64_t);     \
  template BasicTensor<T> stack<T>(std::span<const BasicTensor<T>>);

DUALGAN_INSTANTIATE(float)
DUALGAN_INSTANTIATE(double)
#undef DUALGAN_INSTANTIATE

}  // namespace dualgan
