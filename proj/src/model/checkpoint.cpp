#include "t2d/checkpoint.hpp"

#include "t2d/binary_io.hpp"

namespace t2d {

std::vector<std::uint8_t> encode_checkpoint(const T2DNet& net) {
  io::Writer w;
  w.bytes("T2DC");
  w.u16(kCheckpointFormatVersion);
  KvConfig kv;
  net.config().to_kv(kv);
  w.str(kv.to_text());
  for (const auto& [name, t] : net.params().entries()) {
    w.str(name);
    w.u8(static_cast<std::uint8_t>(t.rank()));
    for (int e : t.shape()) w.u32(static_cast<std::uint32_t>(e));
    for (Real v : t.data()) w.f32(static_cast<float>(v));
  }
  w.seal();
  return w.buffer();
}

T2DNet decode_checkpoint(std::span<const std::uint8_t> bytes) {
  io::Reader r(io::verify_sealed(bytes));
  r.expect_magic("T2DC");
  const auto version = r.u16();
  if (version != kCheckpointFormatVersion) {
    throw io::FormatError("checkpoint version " + std::to_string(version) + " is not supported");
  }
  T2DNet net = T2DNet::build(ModelConfig::from_kv(KvConfig::parse(r.str())));
  std::size_t loaded = 0;
  while (r.remaining() > 0) {
    const std::string name = r.str();
    Tensor* target = nullptr;
    try {
      target = &net.params().get(name);
    } catch (const std::out_of_range&) {
      throw io::FormatError("checkpoint parameter " + name + " does not exist in the configured model");
    }
    const int rank = r.u8();
    Shape shape(rank);
    for (auto& e : shape) e = static_cast<int>(r.u32());
    if (shape != target->shape()) {
      throw io::FormatError("checkpoint parameter " + name + " has shape " + shape_str(shape) +
                            ", model expects " + shape_str(target->shape()));
    }
    auto dst = target->mutable_data();
    for (auto& v : dst) v = static_cast<Real>(r.f32());
    ++loaded;
  }
  if (loaded != net.params().entries().size()) {
    throw io::FormatError("checkpoint holds " + std::to_string(loaded) + " of " +
                          std::to_string(net.params().entries().size()) + " parameters");
  }
  return net;
}

void save_checkpoint(const std::filesystem::path& path, const T2DNet& net) {
  io::write_file(path, encode_checkpoint(net));
}

T2DNet load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path));
}

}  // namespace t2d
