#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sgim/augmentation.hpp"
#include "sgim/autodiff.hpp"
#include "sgim/rng.hpp"
#include "sgim/synth_data.hpp"

namespace sgim {

/// Weights of an input -> hidden -> hidden -> output perceptron with tanh
/// hidden activations. Layout: {w1, b1, w2, b2, w3, b3}, with wK of shape
/// fan_in x fan_out and bK of shape 1 x fan_out.
struct EncoderParams {
  std::vector<ad::Array> tensors;

  static EncoderParams init(std::size_t input_dim, std::size_t hidden, std::size_t output, Rng& rng);

  std::size_t input_dim() const { return tensors.at(0).rows(); }
  std::size_t output_dim() const { return tensors.at(4).cols(); }
  /// FNV-1a over shapes and the exact bit patterns of every entry.
  std::uint64_t fingerprint() const;
  bool operator==(const EncoderParams&) const = default;
};

/// Encoder parameters entered into a graph, either as trainable parameters
/// or as frozen constants.
struct BoundEncoder {
  std::vector<ad::Var> leaves;

  static BoundEncoder bind(const EncoderParams& params, bool trainable);
  /// Rows of x (N x input_dim) to unit-norm embeddings (N x d).
  ad::Var forward(const ad::Var& x) const;
  /// Gradients of the leaves after backward(), in tensor order.
  std::vector<ad::Array> grads() const;
};

/// Unit-norm vector in the joint embedding space.
struct Embedding {
  std::vector<double> values;
};

double cosine(std::span<const double> a, std::span<const double> b);

/// Batch inputs: one row per item.
ad::Array audio_matrix(std::span<const MelGrid> mels);
ad::Array text_matrix(std::span<const TokenSeq> seqs, std::size_t vocab_size);
ad::Array image_matrix(std::span<const ImageArray> images);

/// Bag-of-tokens count vector; an empty sequence is a degenerate input.
std::vector<double> token_counts(const TokenSeq& seq, std::size_t vocab_size);

Embedding encode_audio(const MelGrid& mel, const EncoderParams& params);
Embedding encode_text(const TokenSeq& tokens, std::size_t vocab_size, const EncoderParams& params);
Embedding encode_image(const ImageArray& image, const EncoderParams& params);

/// Inference over many rows at once; returns N x d unit rows.
ad::Array embed_rows(const ad::Array& inputs, const EncoderParams& params);

/// The frozen text/image pair standing in for a pretrained CLIP.
struct Teacher {
  EncoderParams text;
  EncoderParams image;
};

}  // namespace sgim
