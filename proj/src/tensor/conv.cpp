#include <algorithm>

#include "detail.hpp"
#include "t2d/ops.hpp"

namespace t2d::ops {

namespace {

// Output index range [lo, hi) whose input coordinate o·stride − pad + k lies in [0, in).
std::pair<int, int> valid_range(int out, int in, int stride, int pad, int k) {
  int lo = 0;
  while (lo < out && lo * stride - pad + k < 0) ++lo;
  int hi = out;
  while (hi > lo && (hi - 1) * stride - pad + k >= in) --hi;
  return {lo, hi};
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias, Conv2dOptions opt) {
  detail::require_rank(x, 3, "conv2d input");
  detail::require_rank(kernel, 4, "conv2d kernel");
  const int cin = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int cout = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  const int stride = opt.stride, pad = opt.pad;
  if (kernel.dim(1) != cin) {
    throw ShapeError("conv2d: input has " + std::to_string(cin) + " channels but kernel " +
                     shape_str(kernel.shape()) + " expects " + std::to_string(kernel.dim(1)));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != cout)) {
    throw ShapeError("conv2d: bias " + shape_str(bias.shape()) + " does not match " +
                     std::to_string(cout) + " output channels");
  }
  if (stride < 1 || pad < 0) throw ShapeError("conv2d: stride must be >= 1 and pad >= 0");
  if (kh > h + 2 * pad || kw > w + 2 * pad) {
    throw ShapeError("conv2d: kernel " + shape_str(kernel.shape()) + " larger than padded input " +
                     shape_str(x.shape()));
  }
  const int ho = (h + 2 * pad - kh) / stride + 1;
  const int wo = (w + 2 * pad - kw) / stride + 1;
  const std::size_t oplane = static_cast<std::size_t>(ho) * wo;
  const std::size_t iplane = static_cast<std::size_t>(h) * w;
  detail::add_macs(static_cast<std::uint64_t>(cout) * cin * kh * kw * oplane);

  std::vector<Real> out(static_cast<std::size_t>(cout) * oplane, Real(0));
  auto X = x.data();
  auto K = kernel.data();
  for (int co = 0; co < cout; ++co) {
    Real* o = out.data() + co * oplane;
    for (int ci = 0; ci < cin; ++ci) {
      const Real* in = X.data() + ci * iplane;
      for (int a = 0; a < kh; ++a) {
        auto [y0, y1] = valid_range(ho, h, stride, pad, a);
        for (int b = 0; b < kw; ++b) {
          auto [x0, x1] = valid_range(wo, w, stride, pad, b);
          const Real wv = K[((static_cast<std::size_t>(co) * cin + ci) * kh + a) * kw + b];
          for (int oy = y0; oy < y1; ++oy) {
            Real* orow = o + static_cast<std::size_t>(oy) * wo;
            const Real* irow = in + (static_cast<std::ptrdiff_t>(oy * stride - pad + a) * w - pad + b);
            if (stride == 1) {
              for (int ox = x0; ox < x1; ++ox) orow[ox] += wv * irow[ox];
            } else {
              for (int ox = x0; ox < x1; ++ox) orow[ox] += wv * irow[ox * stride];
            }
          }
        }
      }
    }
    if (bias.defined()) {
      const Real bv = bias.data()[co];
      for (std::size_t i = 0; i < oplane; ++i) o[i] += bv;
    }
  }

  std::vector<Tensor> inputs{x, kernel};
  if (bias.defined()) inputs.push_back(bias);
  return Tensor::make_result(
      {cout, ho, wo}, std::move(out), std::move(inputs),
      [=](Node& n) {
        const auto& X = n.input(0)->value;
        const auto& K = n.input(1)->value;
        const auto& G = n.grad;
        const bool gx = n.wants_grad(0);
        const bool gk = n.wants_grad(1);
        detail::add_macs(static_cast<std::uint64_t>(cout) * cin * kh * kw * oplane *
                         ((gx ? 1 : 0) + (gk ? 1 : 0)));
        for (int co = 0; co < cout; ++co) {
          const Real* go = G.data() + co * oplane;
          for (int ci = 0; ci < cin; ++ci) {
            const Real* in = X.data() + ci * iplane;
            Real* gin = gx ? n.input(0)->grad.data() + ci * iplane : nullptr;
            for (int a = 0; a < kh; ++a) {
              auto [y0, y1] = valid_range(ho, h, stride, pad, a);
              for (int b = 0; b < kw; ++b) {
                auto [x0, x1] = valid_range(wo, w, stride, pad, b);
                const std::size_t kidx = ((static_cast<std::size_t>(co) * cin + ci) * kh + a) * kw + b;
                const Real wv = K[kidx];
                Real acc = 0;
                for (int oy = y0; oy < y1; ++oy) {
                  const Real* grow = go + static_cast<std::size_t>(oy) * wo;
                  const std::ptrdiff_t ioff = static_cast<std::ptrdiff_t>(oy * stride - pad + a) * w - pad + b;
                  const Real* irow = in + ioff;
                  if (gk) {
                    Real s = 0;
                    if (stride == 1) {
#pragma omp simd reduction(+ : s)
                      for (int ox = x0; ox < x1; ++ox) s += grow[ox] * irow[ox];
                    } else {
#pragma omp simd reduction(+ : s)
                      for (int ox = x0; ox < x1; ++ox) s += grow[ox] * irow[ox * stride];
                    }
                    acc += s;
                  }
                  if (gx) {
                    Real* girow = gin + ioff;
                    if (stride == 1) {
                      for (int ox = x0; ox < x1; ++ox) girow[ox] += wv * grow[ox];
                    } else {
                      for (int ox = x0; ox < x1; ++ox) girow[ox * stride] += wv * grow[ox];
                    }
                  }
                }
                if (gk) n.input(1)->grad[kidx] += acc;
              }
            }
          }
          if (n.inputs.size() > 2 && n.wants_grad(2)) {
            Real s = 0;
            for (std::size_t i = 0; i < oplane; ++i) s += go[i];
            n.input(2)->grad[co] += s;
          }
        }
      });
}

}  // namespace t2d::ops
