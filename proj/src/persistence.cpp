#include "sgim/persistence.hpp"

#include <algorithm>
#include <cmath>

#include "sgim/binary_io.hpp"
#include "sgim/errors.hpp"

namespace sgim {

namespace {
constexpr std::string_view kMagic = "SGIM1";
}

void Checkpoint::put(std::string name, ad::Array value) {
  for (auto& [k, v] : arrays) {
    if (k == name) {
      v = std::move(value);
      return;
    }
  }
  arrays.emplace_back(std::move(name), std::move(value));
}

const ad::Array& Checkpoint::get(const std::string& name) const {
  for (const auto& [k, v] : arrays)
    if (k == name) return v;
  throw IoError("checkpoint has no array '" + name + "'");
}

bool Checkpoint::has(const std::string& name) const {
  return std::any_of(arrays.begin(), arrays.end(), [&](const auto& kv) { return kv.first == name; });
}

std::string Checkpoint::encode() const {
  io::ByteWriter w;
  w.bytes(kMagic);
  w.u64(seed);
  w.u32(static_cast<std::uint32_t>(config_text.size()));
  w.bytes(config_text);
  w.u32(static_cast<std::uint32_t>(arrays.size()));
  for (const auto& [name, a] : arrays) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name);
    w.u32(static_cast<std::uint32_t>(a.rank()));
    for (auto d : a.shape()) w.u64(d);
    for (double v : a.data()) w.f64(v);
  }
  return w.buffer();
}

Checkpoint Checkpoint::decode(std::string bytes, const std::string& source) {
  io::ByteReader r(std::move(bytes), source);
  r.expect_magic(kMagic);
  Checkpoint c;
  c.seed = r.u64();
  c.config_text = r.bytes(r.u32());
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.bytes(r.u32());
    const std::uint32_t rank = r.u32();
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = r.u64();
      n *= d;
    }
    std::vector<double> data(n);
    for (double& v : data) v = r.f64();
    try {
      c.arrays.emplace_back(std::move(name), ad::Array(std::move(shape), std::move(data)));
    } catch (const Error& e) {
      throw IoError(source + ": corrupt array: " + e.what());
    }
  }
  r.expect_end();
  return c;
}

void Checkpoint::save(const std::string& path) const { io::write_file(path, encode()); }

Checkpoint Checkpoint::load(const std::string& path) { return decode(io::read_file(path), path); }

void put_encoder(Checkpoint& ckpt, const std::string& prefix, const EncoderParams& params) {
  for (std::size_t i = 0; i < params.tensors.size(); ++i)
    ckpt.put(prefix + "." + std::to_string(i), params.tensors[i]);
}

EncoderParams get_encoder(const Checkpoint& ckpt, const std::string& prefix) {
  EncoderParams p;
  for (std::size_t i = 0; i < 6; ++i) p.tensors.push_back(ckpt.get(prefix + "." + std::to_string(i)));
  return p;
}

void put_generator(Checkpoint& ckpt, const GeneratorParams& g) {
  for (std::size_t l = 0; l < g.layers(); ++l) {
    ckpt.put("generator.modulation." + std::to_string(l), g.modulation[l]);
    ckpt.put("generator.bias." + std::to_string(l), g.bias[l]);
  }
}

GeneratorParams get_generator(const Checkpoint& ckpt) {
  std::vector<ad::Array> mod, bias;
  std::size_t pixels = 0;
  for (std::size_t l = 0; ckpt.has("generator.modulation." + std::to_string(l)); ++l) {
    mod.push_back(ckpt.get("generator.modulation." + std::to_string(l)));
    bias.push_back(ckpt.get("generator.bias." + std::to_string(l)));
    pixels += mod.back().cols();
  }
  if (mod.empty()) throw IoError("checkpoint holds no generator");
  return GeneratorParams::from_tensors(pixels, std::move(mod), std::move(bias));
}

void put_identity(Checkpoint& ckpt, const IdentityExtractor& r) {
  ckpt.put("identity.w1", r.w1);
  ckpt.put("identity.w2", r.w2);
}

IdentityExtractor get_identity(const Checkpoint& ckpt) { return {ckpt.get("identity.w1"), ckpt.get("identity.w2")}; }

std::string format_pgm(const ImageArray& image, std::size_t side) {
  if (side * side != image.size()) throw DimensionError("format_pgm: image is not side x side");
  const auto [lo, hi] = std::minmax_element(image.begin(), image.end());
  const double span = *hi - *lo;
  std::string out = "P2\n" + std::to_string(side) + " " + std::to_string(side) + "\n255\n";
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t c = 0; c < side; ++c) {
      const double v = span > 0.0 ? (image[r * side + c] - *lo) / span : 0.0;
      out += std::to_string(static_cast<int>(std::lround(255.0 * v)));
      out += c + 1 < side ? ' ' : '\n';
    }
  }
  return out;
}

}  // namespace sgim
