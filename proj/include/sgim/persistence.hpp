#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sgim/autodiff.hpp"
#include "sgim/encoders.hpp"
#include "sgim/generator.hpp"
#include "sgim/manipulation.hpp"

namespace sgim {

/// Named arrays plus the config text and master seed that produced them.
///
/// On disk: "SGIM1", u64 seed, u32 config length + bytes, u32 array count,
/// then per array u32 name length + bytes, u32 rank, u64 dims, f64 payload.
/// All integers and floats little-endian.
struct Checkpoint {
  std::uint64_t seed = 0;
  std::string config_text;
  std::vector<std::pair<std::string, ad::Array>> arrays;

  void put(std::string name, ad::Array value);
  const ad::Array& get(const std::string& name) const;
  bool has(const std::string& name) const;

  std::string encode() const;
  static Checkpoint decode(std::string bytes, const std::string& source);
  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  bool operator==(const Checkpoint&) const = default;
};

void put_encoder(Checkpoint& ckpt, const std::string& prefix, const EncoderParams& params);
EncoderParams get_encoder(const Checkpoint& ckpt, const std::string& prefix);

void put_generator(Checkpoint& ckpt, const GeneratorParams& g);
GeneratorParams get_generator(const Checkpoint& ckpt);

void put_identity(Checkpoint& ckpt, const IdentityExtractor& r);
IdentityExtractor get_identity(const Checkpoint& ckpt);

/// Plain (P2) greyscale PGM, linearly rescaled so min -> 0 and max -> 255.
std::string format_pgm(const ImageArray& image, std::size_t side);

}  // namespace sgim
