#include "sgim/encoders.hpp"

#include <bit>
#include <cmath>

#include "sgim/errors.hpp"

namespace sgim {

namespace {

ad::Array uniform_matrix(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
  std::vector<double> v(rows * cols);
  for (double& x : v) x = rng.uniform(-bound, bound);
  return ad::Array({rows, cols}, std::move(v));
}

Embedding single_row(const ad::Array& rows) {
  auto r = rows.row_span(0);
  return Embedding{{r.begin(), r.end()}};
}

}  // namespace

EncoderParams EncoderParams::init(std::size_t input_dim, std::size_t hidden, std::size_t output,
                                  Rng& rng) {
  if (input_dim == 0 || hidden == 0 || output == 0) throw UsageError("encoder dims must be positive");
  EncoderParams p;
  const std::size_t fan_in[] = {input_dim, hidden, hidden};
  const std::size_t fan_out[] = {hidden, hidden, output};
  for (int layer = 0; layer < 3; ++layer) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in[layer]));
    p.tensors.push_back(uniform_matrix(fan_in[layer], fan_out[layer], bound, rng));
    p.tensors.push_back(uniform_matrix(1, fan_out[layer], bound, rng));
  }
  return p;
}

std::uint64_t EncoderParams::fingerprint() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xFF;
      h *= 1099511628211ULL;
    }
  };
  for (const auto& t : tensors) {
    for (auto d : t.shape()) mix(d);
    for (double v : t.data()) mix(std::bit_cast<std::uint64_t>(v));
  }
  return h;
}

BoundEncoder BoundEncoder::bind(const EncoderParams& params, bool trainable) {
  if (params.tensors.size() != 6) throw UsageError("encoder expects 6 tensors");
  BoundEncoder b;
  for (const auto& t : params.tensors) b.leaves.push_back(trainable ? ad::parameter(t) : ad::constant(t));
  return b;
}

ad::Var BoundEncoder::forward(const ad::Var& x) const {
  if (x.value().cols() != leaves[0].value().rows()) {
    throw DimensionError("encoder input width " + std::to_string(x.value().cols()) +
                         " != expected " + std::to_string(leaves[0].value().rows()));
  }
  ad::Var h = ad::tanh(ad::add_row(ad::matmul(x, leaves[0]), leaves[1]));
  h = ad::tanh(ad::add_row(ad::matmul(h, leaves[2]), leaves[3]));
  ad::Var out = ad::add_row(ad::matmul(h, leaves[4]), leaves[5]);
  return ad::l2_normalize_rows(out);
}

std::vector<ad::Array> BoundEncoder::grads() const {
  std::vector<ad::Array> g;
  for (const auto& l : leaves) g.push_back(l.grad());
  return g;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("cosine: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw DegenerateInputError("cosine of a zero vector");
  return dot / std::sqrt(na * nb);
}

ad::Array audio_matrix(std::span<const MelGrid> mels) {
  if (mels.empty()) throw UsageError("audio_matrix: empty batch");
  const std::size_t width = mels[0].values.size();
  std::vector<double> data;
  data.reserve(mels.size() * width);
  for (const auto& m : mels) {
    if (m.values.size() != width) throw DimensionError("audio batch has mixed grid shapes");
    data.insert(data.end(), m.values.begin(), m.values.end());
  }
  return ad::Array({mels.size(), width}, std::move(data));
}

std::vector<double> token_counts(const TokenSeq& seq, std::size_t vocab_size) {
  if (seq.ids.empty()) throw DegenerateInputError("empty token sequence has an all-zero bag of tokens");
  std::vector<double> counts(vocab_size, 0.0);
  for (auto id : seq.ids) {
    if (id >= vocab_size) throw DimensionError("token id " + std::to_string(id) + " >= vocabulary size");
    counts[id] += 1.0;
  }
  return counts;
}

ad::Array text_matrix(std::span<const TokenSeq> seqs, std::size_t vocab_size) {
  if (seqs.empty()) throw UsageError("text_matrix: empty batch");
  std::vector<double> data;
  data.reserve(seqs.size() * vocab_size);
  for (const auto& s : seqs) {
    auto c = token_counts(s, vocab_size);
    data.insert(data.end(), c.begin(), c.end());
  }
  return ad::Array({seqs.size(), vocab_size}, std::move(data));
}

ad::Array image_matrix(std::span<const ImageArray> images) {
  if (images.empty()) throw UsageError("image_matrix: empty batch");
  const std::size_t width = images[0].size();
  std::vector<double> data;
  data.reserve(images.size() * width);
  for (const auto& im : images) {
    if (im.size() != width) throw DimensionError("image batch has mixed sizes");
    data.insert(data.end(), im.begin(), im.end());
  }
  return ad::Array({images.size(), width}, std::move(data));
}

ad::Array embed_rows(const ad::Array& inputs, const EncoderParams& params) {
  return BoundEncoder::bind(params, false).forward(ad::constant(inputs)).value();
}

Embedding encode_audio(const MelGrid& mel, const EncoderParams& params) {
  if (mel.values.size() != params.input_dim()) {
    throw DimensionError("mel grid of " + std::to_string(mel.values.size()) +
                         " cells does not match encoder input " + std::to_string(params.input_dim()));
  }
  return single_row(embed_rows(audio_matrix(std::span(&mel, 1)), params));
}

Embedding encode_text(const TokenSeq& tokens, std::size_t vocab_size, const EncoderParams& params) {
  return single_row(embed_rows(text_matrix(std::span(&tokens, 1), vocab_size), params));
}

Embedding encode_image(const ImageArray& image, const EncoderParams& params) {
  if (image.size() != params.input_dim()) throw DimensionError("image size does not match encoder input");
  return single_row(embed_rows(image_matrix(std::span(&image, 1)), params));
}

}  // namespace sgim
