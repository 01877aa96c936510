#include "t2d/model.hpp"

#include <cmath>

namespace t2d {

std::string to_string(FusionMode mode) {
  switch (mode) {
    case FusionMode::Plain: return "plain";
    case FusionMode::Esm: return "esm";
    case FusionMode::EsmConcat: return "esm_concat";
    case FusionMode::EsmDot: return "esm_dot";
    case FusionMode::EsmSsa: return "esm_ssa";
  }
  return "?";
}

FusionMode parse_fusion_mode(const std::string& s) {
  if (s == "plain") return FusionMode::Plain;
  if (s == "esm") return FusionMode::Esm;
  if (s == "esm_concat") return FusionMode::EsmConcat;
  if (s == "esm_dot") return FusionMode::EsmDot;
  if (s == "esm_ssa") return FusionMode::EsmSsa;
  throw ConfigError("model.fusion_mode",
                    "unknown mode \"" + s + "\" (expected plain|esm|esm_concat|esm_dot|esm_ssa)");
}

void ModelConfig::validate() const {
  if (k < 1) throw ConfigError("model.k", "must be >= 1");
  if (g < 1) throw ConfigError("model.g", "must be >= 1");
  if (fusion_mode != FusionMode::Plain && k % g != 0) {
    throw ConfigError("model.k", "mini-group size g=" + std::to_string(g) + " does not divide k=" +
                                     std::to_string(k));
  }
  if (base_width < 1) throw ConfigError("model.base_width", "must be positive");
  if (trunk_width < 1) throw ConfigError("model.trunk_width", "must be positive");
  if (ssa_channels < 1) throw ConfigError("model.ssa_channels", "must be positive");
  if (input_size < 4 || input_size % 4 != 0) {
    throw ConfigError("model.input_size", "must be a positive multiple of 4, got " +
                                              std::to_string(input_size));
  }
  if (ssa_pool_size < 1 || ssa_pool_size > input_size) {
    throw ConfigError("model.ssa_pool_size", "must lie in [1, input_size]");
  }
  // The query side of the attention is pooled from the S/4 stem output.
  if (fusion_mode == FusionMode::EsmSsa && ssa_pool_size > input_size / 4) {
    throw ConfigError("model.ssa_pool_size", "exceeds the stem feature extent " +
                                                 std::to_string(input_size / 4));
  }
}

void ModelConfig::to_kv(KvConfig& kv, const std::string& p) const {
  kv.set(p + "k", std::to_string(k));
  kv.set(p + "g", std::to_string(g));
  kv.set(p + "base_width", std::to_string(base_width));
  kv.set(p + "trunk_width", std::to_string(trunk_width));
  kv.set(p + "fusion_mode", to_string(fusion_mode));
  kv.set(p + "ssa_pool_size", std::to_string(ssa_pool_size));
  kv.set(p + "ssa_channels", std::to_string(ssa_channels));
  kv.set(p + "ssa_zero_init", ssa_zero_init ? "true" : "false");
  kv.set(p + "input_size", std::to_string(input_size));
  kv.set(p + "seed", std::to_string(seed));
}

ModelConfig ModelConfig::from_kv(const KvConfig& kv, const std::string& p) {
  ModelConfig c;
  c.k = static_cast<int>(kv.get_int(p + "k", c.k));
  c.g = static_cast<int>(kv.get_int(p + "g", c.g));
  c.base_width = static_cast<int>(kv.get_int(p + "base_width", c.base_width));
  c.trunk_width = static_cast<int>(kv.get_int(p + "trunk_width", c.trunk_width));
  c.fusion_mode = parse_fusion_mode(kv.get_string(p + "fusion_mode", to_string(c.fusion_mode)));
  c.ssa_pool_size = static_cast<int>(kv.get_int(p + "ssa_pool_size", c.ssa_pool_size));
  c.ssa_channels = static_cast<int>(kv.get_int(p + "ssa_channels", c.ssa_channels));
  c.ssa_zero_init = kv.get_bool(p + "ssa_zero_init", c.ssa_zero_init);
  c.input_size = static_cast<int>(kv.get_int(p + "input_size", c.input_size));
  c.seed = static_cast<std::uint64_t>(kv.get_int(p + "seed", static_cast<long long>(c.seed)));
  return c;
}

T2DNet T2DNet::build(const ModelConfig& cfg) {
  cfg.validate();
  T2DNet net(cfg);
  auto& ps = net.params_;
  const int b = cfg.base_width, t = cfg.trunk_width, a = cfg.ssa_channels;
  const int o = cfg.stem_out();
  const bool plain = cfg.fusion_mode == FusionMode::Plain;

  // θ1: one instance, reused for every mini-group.
  net.stem_conv_ = nn::Conv::make(ps, "stem.conv", cfg.stem_in(), b, 3, 2);
  net.stem_norm_ = nn::Norm::make(ps, "stem.norm", b);
  net.stem_block_ = nn::ResBlock::make(ps, "stem.block", b, o, 2);

  if (!plain) {
    const int cat = o * cfg.groups();
    net.fuse_a_ = nn::Conv::make(ps, "fuse.a", cat, cat / 2, 1);
    net.fuse_a_norm_ = nn::Norm::make(ps, "fuse.a_norm", cat / 2);
    net.fuse_b_ = nn::Conv::make(ps, "fuse.b", cat / 2, t, 1);
    net.fuse_b_norm_ = nn::Norm::make(ps, "fuse.b_norm", t);
  }

  // θ2
  const int trunk_in = plain ? o : t;
  net.trunk_stage1_ = nn::ResBlock::make(ps, "trunk.stage1", trunk_in, t, 2);
  net.trunk_stage2_ = nn::ResBlock::make(ps, "trunk.stage2", t, t, 1);
  net.decoder_conv_ = nn::Conv::make(ps, "trunk.decoder", t + trunk_in, t, 3);
  net.decoder_norm_ = nn::Norm::make(ps, "trunk.decoder_norm", t);

  switch (cfg.fusion_mode) {
    case FusionMode::EsmSsa:
      net.ssa_pre_q_ = nn::Conv::make(ps, "ssa.pre_q", o, a, 1);
      net.ssa_pre_k_ = nn::Conv::make(ps, "ssa.pre_k", t, a, 1);
      net.ssa_phi_ = nn::Conv::make(ps, "ssa.phi", a, a, 1);
      net.ssa_psi_ = nn::Conv::make(ps, "ssa.psi", a, a, 1);
      net.ssa_value_ = nn::Conv::make(ps, "ssa.value", t, a, 1);
      net.ssa_out_ = nn::Conv::make(ps, "ssa.out", a, t, 1);
      net.ssa_out_norm_ = nn::Norm::make(ps, "ssa.out_norm", t, cfg.ssa_zero_init ? Real(0) : Real(1));
      break;
    case FusionMode::EsmConcat:
      net.mix_ = nn::Conv::make(ps, "mix.concat", t + o, t, 1);
      break;
    case FusionMode::EsmDot:
      net.mix_ = nn::Conv::make(ps, "mix.dot", o, t, 1);
      break;
    default:
      break;
  }

  net.head_ = nn::Conv::make(ps, "head", t, cfg.k, 1);
  return net;
}

void T2DNet::zero_grad() {
  for (auto& p : params_.tensors()) p.zero_grad();
}

Tensor T2DNet::forward_stem(const Tensor& mini_group) const {
  if (mini_group.rank() != 3 || mini_group.dim(0) != cfg_.stem_in()) {
    throw ShapeError("forward_stem: expected " + std::to_string(cfg_.stem_in()) +
                     "-channel input, got " + shape_str(mini_group.shape()));
  }
  Tensor h = ops::relu(stem_norm_(stem_conv_(mini_group)));
  return stem_block_(h);
}

Tensor T2DNet::fuse_groups(const std::vector<Tensor>& features) const {
  if (cfg_.fusion_mode == FusionMode::Plain) throw std::logic_error("fuse_groups: plain mode has no fusion block");
  if (features.size() != static_cast<std::size_t>(cfg_.groups())) {
    throw ShapeError("fuse_groups: expected " + std::to_string(cfg_.groups()) + " feature maps, got " +
                     std::to_string(features.size()));
  }
  for (const auto& f : features) {
    if (f.shape() != features.front().shape()) {
      throw ShapeError("fuse_groups: feature shapes differ: " + shape_str(features.front().shape()) +
                       " vs " + shape_str(f.shape()));
    }
  }
  Tensor cat = features.size() == 1 ? features.front() : ops::concat_channels(features);
  Tensor x = ops::relu(fuse_a_norm_(fuse_a_(cat)));
  return ops::relu(fuse_b_norm_(fuse_b_(x)));
}

Tensor T2DNet::trunk(const Tensor& fused) const {
  const int s = cfg_.input_size;
  Tensor s1 = trunk_stage1_(fused);
  Tensor s2 = trunk_stage2_(s1);
  Tensor up = ops::resize_bilinear(s2, fused.dim(1), fused.dim(2));
  Tensor dec = ops::relu(decoder_norm_(decoder_conv_(ops::concat_channels({up, fused}))));
  return ops::resize_bilinear(dec, s, s);
}

Tensor channel_affinity(const Tensor& q, const Tensor& k) {
  if (q.rank() != 2 || q.shape() != k.shape()) {
    throw ShapeError("channel_affinity: queries " + shape_str(q.shape()) + " vs keys " + shape_str(k.shape()));
  }
  const Real scale = Real(1) / std::sqrt(static_cast<Real>(q.dim(1)));
  return ops::softmax_rows(ops::scale(ops::matmul(q, k, true), scale));
}

Tensor channel_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  return ops::matmul(channel_affinity(q, k), v);
}

// One reading of the channel-wise non-local block:
//   Q = φ(pre_q(pool(O_d))), K = ψ(pre_k(pool(U)))      a × p²
//   A = softmax_q(Q Kᵀ / sqrt(p²))                       a × a
//   Y = A · value(U)                                     a × S²
//   out = U + norm(proj(Y))
namespace {
void check_pool(int p, const Tensor& u, const Tensor& o) {
  if (p > o.dim(1) || p > o.dim(2) || p > u.dim(1) || p > u.dim(2)) {
    throw ShapeError("ssa: pool size " + std::to_string(p) + " exceeds feature extent " + shape_str(o.shape()));
  }
}
}  // namespace

Tensor T2DNet::ssa_affinity(const Tensor& u, const Tensor& o) const {
  const int p = cfg_.ssa_pool_size;
  check_pool(p, u, o);
  const Shape flat{cfg_.ssa_channels, p * p};
  Tensor q = ssa_phi_(ssa_pre_q_(ops::adaptive_avg_pool(o, p, p)));
  Tensor k = ssa_psi_(ssa_pre_k_(ops::adaptive_avg_pool(u, p, p)));
  return channel_affinity(ops::reshape(q, flat), ops::reshape(k, flat));
}

Tensor T2DNet::ssa(const Tensor& u, const Tensor& o) const {
  const int a = cfg_.ssa_channels;
  const int h = u.dim(1), w = u.dim(2);
  Tensor v = ops::reshape(ssa_value_(u), {a, h * w});
  Tensor y = ops::reshape(ops::matmul(ssa_affinity(u, o), v), {a, h, w});
  return ops::add(u, ssa_out_norm_(ssa_out_(y)));
}

Tensor T2DNet::attend(const Tensor& u, const Tensor& o) const {
  switch (cfg_.fusion_mode) {
    case FusionMode::EsmSsa:
      return ssa(u, o);
    case FusionMode::EsmConcat:
      return mix_(ops::concat_channels({u, ops::resize_bilinear(o, u.dim(1), u.dim(2))}));
    case FusionMode::EsmDot:
      return ops::mul(u, ops::resize_bilinear(mix_(o), u.dim(1), u.dim(2)));
    default:
      return u;
  }
}

Tensor T2DNet::head(const std::vector<Tensor>& attended) const {
  if (attended.empty() || cfg_.k % static_cast<int>(attended.size()) != 0) {
    throw ShapeError("head: " + std::to_string(attended.size()) + " feature maps for k=" +
                     std::to_string(cfg_.k));
  }
  const int chunk = cfg_.k / static_cast<int>(attended.size());
  std::vector<Tensor> logits;
  logits.reserve(attended.size());
  for (std::size_t j = 0; j < attended.size(); ++j) {
    const int begin = static_cast<int>(j) * chunk;
    logits.push_back(ops::conv2d(attended[j], ops::slice_leading(head_.weight, begin, chunk),
                                 ops::slice_leading(head_.bias, begin, chunk)));
  }
  Tensor all = logits.size() == 1 ? logits.front() : ops::concat_channels(logits);
  return ops::sigmoid(all);
}

Tensor T2DNet::forward(const Tensor& group, ForwardTrace* trace) const {
  const int s = cfg_.input_size;
  if (group.rank() != 3 || group.dim(0) != cfg_.k || group.dim(1) != s || group.dim(2) != s) {
    throw ShapeError("forward: expected input [" + std::to_string(cfg_.k) + "x" + std::to_string(s) +
                     "x" + std::to_string(s) + "], got " + shape_str(group.shape()));
  }
  auto stem = [&](const Tensor& x) {
    if (trace) {
      ++trace->stem_calls;
      trace->stem_kernels.push_back(stem_conv_.weight.node());
    }
    return forward_stem(x);
  };

  if (cfg_.fusion_mode == FusionMode::Plain) {
    Tensor u = trunk(stem(group));
    return head({u});
  }

  const int n = cfg_.groups();
  std::vector<Tensor> pre_fusion;
  pre_fusion.reserve(n);
  for (int j = 0; j < n; ++j) {
    Tensor mini = n == 1 ? group : ops::slice_channels(group, j * cfg_.g, cfg_.g);
    pre_fusion.push_back(stem(mini));
  }
  Tensor u = trunk(fuse_groups(pre_fusion));
  std::vector<Tensor> attended;
  attended.reserve(n);
  for (int j = 0; j < n; ++j) {
    if (trace && cfg_.fusion_mode == FusionMode::EsmSsa) ++trace->ssa_calls;
    attended.push_back(attend(u, pre_fusion[j]));
  }
  return head(attended);
}

std::vector<LayerCost> T2DNet::layer_costs(int size) const {
  std::vector<LayerCost> out;
  struct Grid {
    int h, w, ds;
  };
  auto conv = [&](const std::string& name, const nn::Conv& c, Grid in) {
    const Grid g{(in.h - 1) / c.stride + 1, (in.w - 1) / c.stride + 1, in.ds * c.stride};
    out.push_back(LayerCost{name, c.in_channels(), c.out_channels(), c.kernel(), g.h, g.w, g.ds, 0});
    return g;
  };
  auto block = [&](const std::string& name, const nn::ResBlock& b, Grid in) {
    const Grid g = conv(name + ".conv1", b.conv1, in);
    conv(name + ".conv2", b.conv2, g);
    if (b.shortcut) conv(name + ".shortcut", *b.shortcut, in);
    return g;
  };

  const Grid full{size, size, 1};
  const bool plain = cfg_.fusion_mode == FusionMode::Plain;
  const int n = cfg_.groups();
  Grid f{};
  for (int j = 0; j < n; ++j) f = block("stem.block", stem_block_, conv("stem.conv", stem_conv_, full));
  if (!plain) {
    conv("fuse.a", fuse_a_, f);
    conv("fuse.b", fuse_b_, f);
  }
  block("trunk.stage2", trunk_stage2_, block("trunk.stage1", trunk_stage1_, f));
  conv("trunk.decoder", decoder_conv_, f);

  for (int j = 0; j < n; ++j) {
    switch (cfg_.fusion_mode) {
      case FusionMode::EsmSsa: {
        const int p = cfg_.ssa_pool_size;
        const std::uint64_t a = static_cast<std::uint64_t>(cfg_.ssa_channels);
        const Grid pooled{p, p, 0};
        conv("ssa.pre_q", ssa_pre_q_, pooled);
        conv("ssa.phi", ssa_phi_, pooled);
        conv("ssa.pre_k", ssa_pre_k_, pooled);
        conv("ssa.psi", ssa_psi_, pooled);
        conv("ssa.value", ssa_value_, full);
        out.push_back(LayerCost{"ssa.affinity", 0, 0, 1, 0, 0, 1, a * a * p * p});
        out.push_back(LayerCost{"ssa.aggregate", 0, 0, 1, 0, 0, 1,
                                a * a * static_cast<std::uint64_t>(size) * size});
        conv("ssa.out", ssa_out_, full);
        break;
      }
      case FusionMode::EsmConcat:
        conv("mix.concat", mix_, full);
        break;
      case FusionMode::EsmDot:
        conv("mix.dot", mix_, f);
        break;
      default:
        break;
    }
    out.push_back(LayerCost{"head", head_.in_channels(), head_.out_channels() / n, 1, size, size, 1, 0});
  }
  return out;
}

}  // namespace t2d
