#pragma once

#include <cstdint>
#include <vector>

#include "sgim/autodiff.hpp"
#include "sgim/rng.hpp"
#include "sgim/synth_data.hpp"

namespace sgim {

/// Point in the extended latent space: one D-dimensional row per layer.
struct LatentCode {
  ad::Array w;  // L x D

  std::size_t layers() const { return w.rows(); }
  std::size_t dim() const { return w.cols(); }
  bool operator==(const LatentCode&) const = default;
};

/// Layered linear synthesis over a 2-D cosine basis.
///
/// The orthonormal DCT-II basis of the side x side image is ordered from
/// coarse to fine (by u + v, then u) and cut into L contiguous bands. Layer l
/// maps its latent row through modulation[l] (D x band) plus bias[l] to
/// coefficients of band l only, so early layers steer coarse structure and
/// late layers fine detail.
struct GeneratorParams {
  std::size_t side = 0;
  std::vector<ad::Array> modulation;  // L entries, D x band_l
  std::vector<ad::Array> bias;        // L entries, 1 x band_l
  std::vector<ad::Array> basis;       // L entries, band_l x P; fixed

  static GeneratorParams create(std::size_t layers, std::size_t latent_dim, std::size_t pixels, Rng& rng);
  /// Rebuilds the fixed basis around loaded modulation/bias tensors.
  static GeneratorParams from_tensors(std::size_t pixels, std::vector<ad::Array> modulation,
                                      std::vector<ad::Array> bias);

  std::size_t layers() const { return modulation.size(); }
  std::size_t latent_dim() const { return modulation.at(0).rows(); }
  std::size_t pixels() const { return side * side; }
  bool operator==(const GeneratorParams&) const = default;
};

/// Coarse-to-fine DCT basis (P x P, one basis image per row) and the band
/// boundaries for L layers.
ad::Array cosine_basis(std::size_t side);
std::vector<std::size_t> band_sizes(std::size_t pixels, std::size_t layers);

/// Differentiable synthesis of one code (L x D) into a 1 x P image row.
ad::Var synthesize(const ad::Var& w, const GeneratorParams& g);
ImageArray synthesize(const LatentCode& w, const GeneratorParams& g);

/// Coefficients of `image` along band `layer` of the basis.
std::vector<double> band_coefficients(const ImageArray& image, const GeneratorParams& g,
                                      std::size_t layer);

/// Seeded standard-normal code.
LatentCode sample_source_latent(std::size_t layers, std::size_t latent_dim, std::uint64_t seed);

/// Upper bound on ||G(w1) - G(w2)|| / ||w1 - w2||_F: the largest spectral
/// norm among the modulation matrices (bands are orthonormal and disjoint).
double lipschitz_bound(const GeneratorParams& g);

struct GeneratorFit {
  GeneratorParams params;
  std::vector<LatentCode> latents;  // one per input image
  std::vector<double> mse_log;      // mse before training, then after each epoch
};

/// Jointly fits generator params and one latent per image by gradient
/// descent on the mean squared reconstruction error.
GeneratorFit fit_generator_to_dataset(const std::vector<ImageArray>& images, std::size_t layers,
                                      std::size_t latent_dim, std::size_t epochs, double lr,
                                      std::uint64_t seed);

}  // namespace sgim
