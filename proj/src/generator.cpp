#include "sgim/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "sgim/errors.hpp"
#include "sgim/training.hpp"

namespace sgim {

namespace {

std::size_t side_of(std::size_t pixels) {
  const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(pixels))));
  if (side * side != pixels) throw DimensionError("generator needs a square pixel count, got " + std::to_string(pixels));
  return side;
}

std::vector<ad::Array> split_basis(std::size_t side, std::size_t layers) {
  const ad::Array full = cosine_basis(side);
  const std::size_t p = side * side;
  std::vector<ad::Array> out;
  std::size_t row = 0;
  for (auto n : band_sizes(p, layers)) {
    auto span = full.data().subspan(row * p, n * p);
    out.emplace_back(std::vector<std::size_t>{n, p}, std::vector<double>(span.begin(), span.end()));
    row += n;
  }
  return out;
}

}  // namespace

ad::Array cosine_basis(std::size_t side) {
  const std::size_t p = side * side;
  std::vector<std::pair<std::size_t, std::size_t>> freqs;
  for (std::size_t u = 0; u < side; ++u)
    for (std::size_t v = 0; v < side; ++v) freqs.emplace_back(u, v);
  std::stable_sort(freqs.begin(), freqs.end(), [](auto a, auto b) {
    return std::pair(a.first + a.second, a.first) < std::pair(b.first + b.second, b.first);
  });
  auto alpha = [side](std::size_t k) {
    return k == 0 ? std::sqrt(1.0 / side) : std::sqrt(2.0 / side);
  };
  std::vector<double> data(p * p);
  for (std::size_t k = 0; k < p; ++k) {
    const auto [u, v] = freqs[k];
    for (std::size_t x = 0; x < side; ++x) {
      for (std::size_t y = 0; y < side; ++y) {
        data[k * p + x * side + y] =
            alpha(u) * alpha(v) * std::cos(std::numbers::pi * (2.0 * x + 1.0) * u / (2.0 * side)) *
            std::cos(std::numbers::pi * (2.0 * y + 1.0) * v / (2.0 * side));
      }
    }
  }
  return ad::Array({p, p}, std::move(data));
}

std::vector<std::size_t> band_sizes(std::size_t pixels, std::size_t layers) {
  if (layers == 0 || layers > pixels) throw UsageError("layer count must lie in [1, pixels]");
  std::vector<std::size_t> sizes(layers, pixels / layers);
  for (std::size_t i = 0; i < pixels % layers; ++i) ++sizes[i];
  return sizes;
}

GeneratorParams GeneratorParams::create(std::size_t layers, std::size_t latent_dim, std::size_t pixels,
                                        Rng& rng) {
  if (latent_dim == 0) throw UsageError("latent dimension must be positive");
  GeneratorParams g;
  g.side = side_of(pixels);
  g.basis = split_basis(g.side, layers);
  const double s = 1.0 / std::sqrt(static_cast<double>(latent_dim));
  for (const auto& b : g.basis) {
    const std::size_t n = b.rows();
    std::vector<double> m(latent_dim * n), bias(n);
    for (double& x : m) x = s * rng.normal();
    for (double& x : bias) x = 0.1 * rng.normal();
    g.modulation.emplace_back(std::vector<std::size_t>{latent_dim, n}, std::move(m));
    g.bias.emplace_back(std::vector<std::size_t>{1, n}, std::move(bias));
  }
  return g;
}

GeneratorParams GeneratorParams::from_tensors(std::size_t pixels, std::vector<ad::Array> modulation,
                                              std::vector<ad::Array> bias) {
  GeneratorParams g;
  g.side = side_of(pixels);
  g.basis = split_basis(g.side, modulation.size());
  if (bias.size() != modulation.size()) throw DimensionError("generator bias/modulation count mismatch");
  for (std::size_t l = 0; l < modulation.size(); ++l) {
    if (modulation[l].cols() != g.basis[l].rows() || bias[l].cols() != g.basis[l].rows() ||
        modulation[l].rows() != modulation[0].rows()) {
      throw DimensionError("generator tensors disagree with the band layout");
    }
  }
  g.modulation = std::move(modulation);
  g.bias = std::move(bias);
  return g;
}

ad::Var synthesize(const ad::Var& w, const GeneratorParams& g) {
  const std::size_t layers = g.layers();
  if (w.value().rank() != 2 || w.value().rows() != layers || w.value().cols() != g.latent_dim()) {
    throw DimensionError("latent code " + ad::shape_string(w.value().shape()) + " does not match generator " +
                         std::to_string(layers) + "x" + std::to_string(g.latent_dim()));
  }
  ad::Var image;
  for (std::size_t l = 0; l < layers; ++l) {
    ad::Var coeff = ad::add_row(ad::matmul(ad::slice_rows(w, l, 1), ad::constant(g.modulation[l])),
                                ad::constant(g.bias[l]));
    ad::Var part = ad::matmul(coeff, ad::constant(g.basis[l]));
    image = l == 0 ? part : ad::add(image, part);
  }
  return image;
}

ImageArray synthesize(const LatentCode& w, const GeneratorParams& g) {
  const auto img = synthesize(ad::constant(w.w), g).value();
  return {img.data().begin(), img.data().end()};
}

std::vector<double> band_coefficients(const ImageArray& image, const GeneratorParams& g, std::size_t layer) {
  const ad::Array& b = g.basis.at(layer);
  if (image.size() != b.cols()) throw DimensionError("image size does not match generator");
  std::vector<double> c(b.rows(), 0.0);
  for (std::size_t k = 0; k < b.rows(); ++k)
    for (std::size_t i = 0; i < b.cols(); ++i) c[k] += b.at(k, i) * image[i];
  return c;
}

LatentCode sample_source_latent(std::size_t layers, std::size_t latent_dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(layers * latent_dim);
  for (double& x : v) x = rng.normal();
  return LatentCode{ad::Array({layers, latent_dim}, std::move(v))};
}

double lipschitz_bound(const GeneratorParams& g) {
  double best = 0.0;
  for (const auto& m : g.modulation) {
    // Power iteration on M M^T (D x D) from a fixed start.
    const std::size_t d = m.rows(), n = m.cols();
    std::vector<double> x(d, 1.0), y(d);
    double lambda = 0.0;
    for (int it = 0; it < 500; ++it) {
      std::vector<double> t(n, 0.0);
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < n; ++j) t[j] += m.at(i, j) * x[i];
      for (std::size_t i = 0; i < d; ++i) {
        y[i] = 0.0;
        for (std::size_t j = 0; j < n; ++j) y[i] += m.at(i, j) * t[j];
      }
      double norm = 0.0;
      for (double v : y) norm += v * v;
      norm = std::sqrt(norm);
      if (norm == 0.0) break;
      lambda = norm / std::sqrt(std::inner_product(x.begin(), x.end(), x.begin(), 0.0));
      for (std::size_t i = 0; i < d; ++i) x[i] = y[i] / norm;
    }
    best = std::max(best, std::sqrt(lambda));
  }
  return best;
}

GeneratorFit fit_generator_to_dataset(const std::vector<ImageArray>& images, std::size_t layers,
                                      std::size_t latent_dim, std::size_t epochs, double lr,
                                      std::uint64_t seed) {
  if (images.empty()) throw UsageError("fit_generator_to_dataset: no images");
  Rng rng(seed);
  const std::size_t pixels = images[0].size();
  GeneratorFit fit;
  fit.params = GeneratorParams::create(layers, latent_dim, pixels, rng);
  const std::size_t n = images.size();

  // Latents are stored layer-major for the batched forward: per layer N x D.
  std::vector<ad::Array> codes;
  for (std::size_t l = 0; l < layers; ++l) {
    std::vector<double> v(n * latent_dim);
    for (double& x : v) x = rng.normal();
    codes.emplace_back(std::vector<std::size_t>{n, latent_dim}, std::move(v));
  }
  const ad::Array target = image_matrix(images);

  auto evaluate = [&](bool trainable, std::vector<ad::Var>* leaves) {
    std::vector<ad::Var> mods, biases, lat;
    for (std::size_t l = 0; l < layers; ++l) {
      mods.push_back(trainable ? ad::parameter(fit.params.modulation[l]) : ad::constant(fit.params.modulation[l]));
      biases.push_back(trainable ? ad::parameter(fit.params.bias[l]) : ad::constant(fit.params.bias[l]));
      lat.push_back(trainable ? ad::parameter(codes[l]) : ad::constant(codes[l]));
    }
    ad::Var recon;
    for (std::size_t l = 0; l < layers; ++l) {
      ad::Var part = ad::matmul(ad::add_row(ad::matmul(lat[l], mods[l]), biases[l]),
                                ad::constant(fit.params.basis[l]));
      recon = l == 0 ? part : ad::add(recon, part);
    }
    ad::Var diff = ad::sub(recon, ad::constant(target));
    ad::Var mse = ad::mean(ad::mul(diff, diff));
    if (leaves) {
      leaves->insert(leaves->end(), mods.begin(), mods.end());
      leaves->insert(leaves->end(), biases.begin(), biases.end());
      leaves->insert(leaves->end(), lat.begin(), lat.end());
    }
    return mse;
  };

  fit.mse_log.push_back(evaluate(false, nullptr).item());
  SgdMomentum opt(0.9, 0.0);
  for (std::size_t e = 0; e < epochs; ++e) {
    std::vector<ad::Var> leaves;
    ad::Var mse = evaluate(true, &leaves);
    ad::backward(mse);
    std::vector<ad::Array> params, grads;
    for (const auto& v : leaves) grads.push_back(v.grad());
    params.insert(params.end(), fit.params.modulation.begin(), fit.params.modulation.end());
    params.insert(params.end(), fit.params.bias.begin(), fit.params.bias.end());
    params.insert(params.end(), codes.begin(), codes.end());
    // Per-image gradients are diluted by 1/N in the mean; rescale the latent
    // block so each code moves at the same rate as the shared weights.
    for (std::size_t l = 0; l < layers; ++l) {
      auto g = grads[2 * layers + l].mutable_data();
      for (double& x : g) x *= static_cast<double>(n);
    }
    opt.step(params, grads, lr);
    for (std::size_t l = 0; l < layers; ++l) {
      fit.params.modulation[l] = params[l];
      fit.params.bias[l] = params[layers + l];
      codes[l] = params[2 * layers + l];
    }
    fit.mse_log.push_back(evaluate(false, nullptr).item());
  }

  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> w(layers * latent_dim);
    for (std::size_t l = 0; l < layers; ++l)
      for (std::size_t k = 0; k < latent_dim; ++k) w[l * latent_dim + k] = codes[l].at(i, k);
    fit.latents.push_back(LatentCode{ad::Array({layers, latent_dim}, std::move(w))});
  }
  return fit;
}

}  // namespace sgim
