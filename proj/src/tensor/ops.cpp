#include <algorithm>
#include <cmath>

#include "detail.hpp"
#include "t2d/ops.hpp"

namespace t2d::ops {

namespace detail {
namespace {
thread_local std::uint64_t g_macs = 0;
thread_local bool g_track_relu = false;
thread_local std::uint64_t g_relu_hash = 0;
}  // namespace
void add_macs(std::uint64_t n) { g_macs += n; }
}  // namespace detail

std::uint64_t mac_counter() { return detail::g_macs; }
void reset_mac_counter() { detail::g_macs = 0; }

std::uint64_t relu_pattern() { return detail::g_relu_hash; }
void reset_relu_pattern() {
  detail::g_track_relu = true;
  detail::g_relu_hash = 1469598103934665603ull;
}
void stop_relu_pattern() { detail::g_track_relu = false; }

namespace {

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  std::vector<Real> out(a.size());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& n) {
    for (std::size_t j = 0; j < 2; ++j) {
      if (!n.wants_grad(j)) continue;
      auto& g = n.input(j)->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same(a, b, "sub");
  std::vector<Real> out(a.size());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& n) {
    if (n.wants_grad(0)) {
      auto& g = n.input(0)->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
    if (n.wants_grad(1)) {
      auto& g = n.input(1)->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= n.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mul");
  std::vector<Real> out(a.size());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& n) {
    const auto& x = n.input(0)->value;
    const auto& y = n.input(1)->value;
    if (n.wants_grad(0)) {
      auto& g = n.input(0)->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * y[i];
    }
    if (n.wants_grad(1)) {
      auto& g = n.input(1)->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * x[i];
    }
  });
}

Tensor scale(const Tensor& a, Real s) {
  std::vector<Real> out(a.size());
  auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * s;
  return Tensor::make_result(a.shape(), std::move(out), {a}, [s](Node& n) {
    auto& g = n.input(0)->grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * s;
  });
}

Tensor relu(const Tensor& x) {
  std::vector<Real> out(x.size());
  auto v = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] > 0 ? v[i] : Real(0);
  if (detail::g_track_relu) {
    std::uint64_t h = detail::g_relu_hash;
    for (std::size_t i = 0; i < out.size(); ++i) {
      h = (h ^ static_cast<std::uint64_t>(v[i] > 0)) * 1099511628211ull;
    }
    detail::g_relu_hash = h;
  }
  return Tensor::make_result(x.shape(), std::move(out), {x}, [](Node& n) {
    const auto& v = n.input(0)->value;
    auto& g = n.input(0)->grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (v[i] > 0) g[i] += n.grad[i];
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<Real> out(x.size());
  auto v = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    // Branching keeps exp() from overflowing for large |v|.
    if (v[i] >= 0) {
      out[i] = Real(1) / (Real(1) + std::exp(-v[i]));
    } else {
      Real e = std::exp(v[i]);
      out[i] = e / (Real(1) + e);
    }
  }
  return Tensor::make_result(x.shape(), std::move(out), {x}, [](Node& n) {
    auto& g = n.input(0)->grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      Real s = n.value[i];
      g[i] += n.grad[i] * s * (Real(1) - s);
    }
  });
}

Tensor sum(const Tensor& x) {
  Real s = 0;
  for (Real v : x.data()) s += v;
  return Tensor::make_result({1}, {s}, {x}, [](Node& n) {
    auto& g = n.input(0)->grad;
    for (auto& gi : g) gi += n.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  Real s = 0;
  for (Real v : x.data()) s += v;
  const Real inv = Real(1) / static_cast<Real>(x.size());
  return Tensor::make_result({1}, {s * inv}, {x}, [inv](Node& n) {
    auto& g = n.input(0)->grad;
    for (auto& gi : g) gi += n.grad[0] * inv;
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size()) {
    throw ShapeError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  std::vector<Real> out(x.data().begin(), x.data().end());
  return Tensor::make_result(std::move(shape), std::move(out), {x}, [](Node& n) {
    auto& g = n.input(0)->grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
  });
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  int h = 0, w = 0, c = 0;
  for (const auto& p : parts) {
    detail::require_rank(p, 3, "concat_channels");
    if (c == 0) {
      h = p.dim(1);
      w = p.dim(2);
    } else if (p.dim(1) != h || p.dim(2) != w) {
      throw ShapeError("concat_channels: spatial mismatch " + shape_str(parts.front().shape()) +
                       " vs " + shape_str(p.shape()));
    }
    c += p.dim(0);
  }
  std::vector<Real> out;
  out.reserve(static_cast<std::size_t>(c) * h * w);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return Tensor::make_result({c, h, w}, std::move(out), parts, [](Node& n) {
    std::size_t offset = 0;
    for (std::size_t j = 0; j < n.inputs.size(); ++j) {
      const std::size_t len = n.input(j)->value.size();
      if (n.wants_grad(j)) {
        auto& g = n.input(j)->grad;
        for (std::size_t i = 0; i < len; ++i) g[i] += n.grad[offset + i];
      }
      offset += len;
    }
  });
}

Tensor slice_channels(const Tensor& x, int begin, int count) {
  detail::require_rank(x, 3, "slice_channels");
  return slice_leading(x, begin, count);
}

Tensor slice_leading(const Tensor& x, int begin, int count) {
  if (x.rank() == 0 || begin < 0 || count <= 0 || begin + count > x.dim(0)) {
    throw ShapeError("slice: [" + std::to_string(begin) + ", +" + std::to_string(count) +
                     ") outside " + shape_str(x.shape()));
  }
  const std::size_t plane = x.size() / static_cast<std::size_t>(x.dim(0));
  const std::size_t off = plane * begin;
  std::vector<Real> out(x.data().begin() + off, x.data().begin() + off + plane * count);
  Shape shape = x.shape();
  shape[0] = count;
  return Tensor::make_result(std::move(shape), std::move(out), {x}, [off](Node& n) {
    auto& g = n.input(0)->grad;
    for (std::size_t i = 0; i < n.grad.size(); ++i) g[off + i] += n.grad[i];
  });
}

Tensor adaptive_avg_pool(const Tensor& x, int out_h, int out_w) {
  detail::require_rank(x, 3, "adaptive_avg_pool");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (out_h <= 0 || out_w <= 0 || out_h > h || out_w > w) {
    throw ShapeError("adaptive_avg_pool: target " + std::to_string(out_h) + "x" +
                     std::to_string(out_w) + " exceeds input " + shape_str(x.shape()));
  }
  auto cell = [](int i, int in, int out) {
    int lo = (i * in) / out;
    int hi = ((i + 1) * in + out - 1) / out;
    return std::pair{lo, hi};
  };
  std::vector<Real> out(static_cast<std::size_t>(c) * out_h * out_w);
  auto v = x.data();
  for (int ch = 0; ch < c; ++ch) {
    for (int i = 0; i < out_h; ++i) {
      auto [y0, y1] = cell(i, h, out_h);
      for (int j = 0; j < out_w; ++j) {
        auto [x0, x1] = cell(j, w, out_w);
        Real s = 0;
        for (int y = y0; y < y1; ++y)
          for (int xx = x0; xx < x1; ++xx) s += v[(static_cast<std::size_t>(ch) * h + y) * w + xx];
        out[(static_cast<std::size_t>(ch) * out_h + i) * out_w + j] =
            s / static_cast<Real>((y1 - y0) * (x1 - x0));
      }
    }
  }
  return Tensor::make_result({c, out_h, out_w}, std::move(out), {x},
                             [c, h, w, out_h, out_w, cell](Node& n) {
                               auto& g = n.input(0)->grad;
                               for (int ch = 0; ch < c; ++ch) {
                                 for (int i = 0; i < out_h; ++i) {
                                   auto [y0, y1] = cell(i, h, out_h);
                                   for (int j = 0; j < out_w; ++j) {
                                     auto [x0, x1] = cell(j, w, out_w);
                                     Real go = n.grad[(static_cast<std::size_t>(ch) * out_h + i) * out_w + j] /
                                               static_cast<Real>((y1 - y0) * (x1 - x0));
                                     for (int y = y0; y < y1; ++y)
                                       for (int xx = x0; xx < x1; ++xx)
                                         g[(static_cast<std::size_t>(ch) * h + y) * w + xx] += go;
                                   }
                                 }
                               }
                             });
}

namespace {

struct Tap {
  int i0, i1;
  Real w0, w1;  // weights of i0 and i1
};

std::vector<Tap> bilinear_taps(int in, int out) {
  std::vector<Tap> taps(out);
  const Real ratio = static_cast<Real>(in) / static_cast<Real>(out);
  for (int o = 0; o < out; ++o) {
    Real src = (static_cast<Real>(o) + Real(0.5)) * ratio - Real(0.5);
    if (src < 0) src = 0;
    int i0 = static_cast<int>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    int i1 = std::min(i0 + 1, in - 1);
    Real frac = src - static_cast<Real>(i0);
    taps[o] = {i0, i1, Real(1) - frac, frac};
  }
  return taps;
}

}  // namespace

Tensor resize_bilinear(const Tensor& x, int out_h, int out_w) {
  detail::require_rank(x, 3, "resize_bilinear");
  if (out_h <= 0 || out_w <= 0) throw ShapeError("resize_bilinear: non-positive target");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  auto ty = bilinear_taps(h, out_h);
  auto tx = bilinear_taps(w, out_w);
  std::vector<Real> out(static_cast<std::size_t>(c) * out_h * out_w);
  auto v = x.data();
  for (int ch = 0; ch < c; ++ch) {
    const Real* src = v.data() + static_cast<std::size_t>(ch) * h * w;
    Real* dst = out.data() + static_cast<std::size_t>(ch) * out_h * out_w;
    for (int i = 0; i < out_h; ++i) {
      const Tap& a = ty[i];
      const Real* r0 = src + static_cast<std::size_t>(a.i0) * w;
      const Real* r1 = src + static_cast<std::size_t>(a.i1) * w;
      for (int j = 0; j < out_w; ++j) {
        const Tap& b = tx[j];
        Real top = b.w0 * r0[b.i0] + b.w1 * r0[b.i1];
        Real bot = b.w0 * r1[b.i0] + b.w1 * r1[b.i1];
        dst[static_cast<std::size_t>(i) * out_w + j] = a.w0 * top + a.w1 * bot;
      }
    }
  }
  return Tensor::make_result(
      {c, out_h, out_w}, std::move(out), {x},
      [c, h, w, out_h, out_w, ty = std::move(ty), tx = std::move(tx)](Node& n) {
        auto& g = n.input(0)->grad;
        for (int ch = 0; ch < c; ++ch) {
          Real* gsrc = g.data() + static_cast<std::size_t>(ch) * h * w;
          const Real* gdst = n.grad.data() + static_cast<std::size_t>(ch) * out_h * out_w;
          for (int i = 0; i < out_h; ++i) {
            const Tap& a = ty[i];
            Real* r0 = gsrc + static_cast<std::size_t>(a.i0) * w;
            Real* r1 = gsrc + static_cast<std::size_t>(a.i1) * w;
            for (int j = 0; j < out_w; ++j) {
              const Tap& b = tx[j];
              Real go = gdst[static_cast<std::size_t>(i) * out_w + j];
              Real top = a.w0 * go, bot = a.w1 * go;
              r0[b.i0] += b.w0 * top;
              r0[b.i1] += b.w1 * top;
              r1[b.i0] += b.w0 * bot;
              r1[b.i1] += b.w1 * bot;
            }
          }
        }
      });
}

Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_b) {
  detail::require_rank(a, 2, "matmul");
  detail::require_rank(b, 2, "matmul");
  const int m = a.dim(0), kk = a.dim(1);
  const int bk = transpose_b ? b.dim(1) : b.dim(0);
  const int nn = transpose_b ? b.dim(0) : b.dim(1);
  if (kk != bk) {
    throw ShapeError("matmul: inner extent mismatch " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()) + (transpose_b ? "^T" : ""));
  }
  detail::add_macs(static_cast<std::uint64_t>(m) * kk * nn);
  std::vector<Real> out(static_cast<std::size_t>(m) * nn, Real(0));
  auto A = a.data(), B = b.data();
  for (int i = 0; i < m; ++i) {
    Real* row = out.data() + static_cast<std::size_t>(i) * nn;
    for (int p = 0; p < kk; ++p) {
      const Real av = A[static_cast<std::size_t>(i) * kk + p];
      if (transpose_b) {
        for (int j = 0; j < nn; ++j) row[j] += av * B[static_cast<std::size_t>(j) * kk + p];
      } else {
        const Real* brow = B.data() + static_cast<std::size_t>(p) * nn;
        for (int j = 0; j < nn; ++j) row[j] += av * brow[j];
      }
    }
  }
  return Tensor::make_result({m, nn}, std::move(out), {a, b}, [m, kk, nn, transpose_b](Node& n) {
    const auto& A = n.input(0)->value;
    const auto& B = n.input(1)->value;
    const auto& G = n.grad;
    if (n.wants_grad(0)) {
      // dA[i,p] = Σ_j G[i,j] · B(p,j)
      auto& gA = n.input(0)->grad;
      for (int i = 0; i < m; ++i)
        for (int p = 0; p < kk; ++p) {
          Real s = 0;
          for (int j = 0; j < nn; ++j) {
            Real bv = transpose_b ? B[static_cast<std::size_t>(j) * kk + p]
                                  : B[static_cast<std::size_t>(p) * nn + j];
            s += G[static_cast<std::size_t>(i) * nn + j] * bv;
          }
          gA[static_cast<std::size_t>(i) * kk + p] += s;
        }
    }
    if (n.wants_grad(1)) {
      auto& gB = n.input(1)->grad;
      for (int i = 0; i < m; ++i)
        for (int p = 0; p < kk; ++p) {
          const Real av = A[static_cast<std::size_t>(i) * kk + p];
          const Real* grow = G.data() + static_cast<std::size_t>(i) * nn;
          if (transpose_b) {
            for (int j = 0; j < nn; ++j) gB[static_cast<std::size_t>(j) * kk + p] += av * grow[j];
          } else {
            Real* brow = gB.data() + static_cast<std::size_t>(p) * nn;
            for (int j = 0; j < nn; ++j) brow[j] += av * grow[j];
          }
        }
    }
  });
}

Tensor softmax_rows(const Tensor& x) {
  detail::require_rank(x, 2, "softmax_rows");
  const int rows = x.dim(0), cols = x.dim(1);
  std::vector<Real> out(x.size());
  auto v = x.data();
  for (int r = 0; r < rows; ++r) {
    const Real* in = v.data() + static_cast<std::size_t>(r) * cols;
    Real* o = out.data() + static_cast<std::size_t>(r) * cols;
    Real mx = *std::max_element(in, in + cols);
    Real z = 0;
    for (int c = 0; c < cols; ++c) z += (o[c] = std::exp(in[c] - mx));
    for (int c = 0; c < cols; ++c) o[c] /= z;
  }
  return Tensor::make_result(x.shape(), std::move(out), {x}, [rows, cols](Node& n) {
    auto& g = n.input(0)->grad;
    for (int r = 0; r < rows; ++r) {
      const std::size_t base = static_cast<std::size_t>(r) * cols;
      Real dot = 0;
      for (int c = 0; c < cols; ++c) dot += n.grad[base + c] * n.value[base + c];
      for (int c = 0; c < cols; ++c) g[base + c] += n.value[base + c] * (n.grad[base + c] - dot);
    }
  });
}

}  // namespace t2d::ops
