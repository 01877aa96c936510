#include <cmath>

#include "detail.hpp"
#include "t2d/ops.hpp"

namespace t2d::ops {

// y = γ_c · (x − μ_c) / sqrt(σ²_c + eps) + β_c with
//   μ_c  = a0 · m_c + a1 · M,   σ²_c = a0 · v_c + a1 · V,   a = softmax(mix)
// where (m_c, v_c) are per-channel statistics and (M, V) whole-map ones.
Tensor switch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, const Tensor& mix,
                   Real eps) {
  detail::require_rank(x, 3, "switch_norm");
  const int c = x.dim(0);
  const std::size_t plane = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  if (gamma.size() != static_cast<std::size_t>(c) || beta.size() != static_cast<std::size_t>(c)) {
    throw ShapeError("switch_norm: affine parameters " + shape_str(gamma.shape()) + "/" +
                     shape_str(beta.shape()) + " do not match " + std::to_string(c) + " channels");
  }
  if (mix.size() != 2) throw ShapeError("switch_norm: mix must hold two logits");

  auto X = x.data();
  const Real np = static_cast<Real>(plane);
  const Real nall = np * static_cast<Real>(c);

  std::vector<Real> m(c), v(c);
  Real M = 0;
  for (int ch = 0; ch < c; ++ch) {
    const Real* p = X.data() + ch * plane;
    Real s = 0;
    for (std::size_t i = 0; i < plane; ++i) s += p[i];
    m[ch] = s / np;
    M += s;
  }
  M /= nall;
  Real V = 0;
  for (int ch = 0; ch < c; ++ch) {
    const Real* p = X.data() + ch * plane;
    Real s = 0, sl = 0;
    for (std::size_t i = 0; i < plane; ++i) {
      Real d = p[i] - m[ch];
      s += d * d;
      Real e = p[i] - M;
      sl += e * e;
    }
    v[ch] = s / np;
    V += sl;
  }
  V /= nall;

  const Real l0 = mix.data()[0], l1 = mix.data()[1];
  const Real mx = std::max(l0, l1);
  const Real e0 = std::exp(l0 - mx), e1 = std::exp(l1 - mx);
  const Real a0 = e0 / (e0 + e1), a1 = e1 / (e0 + e1);

  std::vector<Real> mu(c), inv_s(c);
  std::vector<Real> out(x.size());
  for (int ch = 0; ch < c; ++ch) {
    mu[ch] = a0 * m[ch] + a1 * M;
    inv_s[ch] = Real(1) / std::sqrt(a0 * v[ch] + a1 * V + eps);
    const Real g = gamma.data()[ch], b = beta.data()[ch];
    const Real* p = X.data() + ch * plane;
    Real* o = out.data() + ch * plane;
    for (std::size_t i = 0; i < plane; ++i) o[i] = g * ((p[i] - mu[ch]) * inv_s[ch]) + b;
  }

  return Tensor::make_result(
      x.shape(), std::move(out), {x, gamma, beta, mix},
      [=, m = std::move(m), v = std::move(v), mu = std::move(mu), inv_s = std::move(inv_s)](Node& n) {
        const auto& X = n.input(0)->value;
        const auto& G = gamma.data();
        std::vector<Real> dmu(c), dvar(c);
        Real dM = 0, dV = 0;
        for (int ch = 0; ch < c; ++ch) {
          const Real* p = X.data() + ch * plane;
          const Real* go = n.grad.data() + ch * plane;
          Real sg = 0, sgx = 0, sh = 0, shd = 0;
          for (std::size_t i = 0; i < plane; ++i) {
            const Real d = p[i] - mu[ch];
            const Real xh = d * inv_s[ch];
            sg += go[i];
            sgx += go[i] * xh;
            const Real h = go[i] * G[ch];
            sh += h;
            shd += h * d;
          }
          if (n.wants_grad(1)) n.input(1)->grad[ch] += sgx;
          if (n.wants_grad(2)) n.input(2)->grad[ch] += sg;
          dmu[ch] = -sh * inv_s[ch];
          dvar[ch] = Real(-0.5) * shd * inv_s[ch] * inv_s[ch] * inv_s[ch];
          dM += a1 * dmu[ch];
          dV += a1 * dvar[ch];
        }
        if (n.wants_grad(3)) {
          Real da0 = 0, da1 = 0;
          for (int ch = 0; ch < c; ++ch) {
            da0 += dmu[ch] * m[ch] + dvar[ch] * v[ch];
            da1 += dmu[ch] * M + dvar[ch] * V;
          }
          const Real dot = a0 * da0 + a1 * da1;
          n.input(3)->grad[0] += a0 * (da0 - dot);
          n.input(3)->grad[1] += a1 * (da1 - dot);
        }
        if (n.wants_grad(0)) {
          auto& gx = n.input(0)->grad;
          for (int ch = 0; ch < c; ++ch) {
            const Real* p = X.data() + ch * plane;
            const Real* go = n.grad.data() + ch * plane;
            Real* gi = gx.data() + ch * plane;
            const Real dm = a0 * dmu[ch];
            const Real dv = a0 * dvar[ch];
            for (std::size_t i = 0; i < plane; ++i) {
              gi[i] += go[i] * G[ch] * inv_s[ch] + dm / np + dv * Real(2) * (p[i] - m[ch]) / np +
                       dM / nall + dV * Real(2) * (p[i] - M) / nall;
            }
          }
        }
      });
}

}  // namespace t2d::ops
