#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgim/autodiff.hpp"
#include "sgim/encoders.hpp"
#include "sgim/generator.hpp"

namespace sgim {

/// Layer gate logits; softmax(g) weights the per-layer drift penalty.
struct GateVector {
  std::vector<double> logits;

  static GateVector uniform(std::size_t layers) { return {std::vector<double>(layers, 0.0)}; }
  std::vector<double> weights() const;
};

struct ManipConfig {
  double lambda_reg = 0.008;
  double lambda_id = 0.004;
  std::size_t steps = 300;
  double step_size = 0.1;
  std::uint64_t seed = 1;
  bool adaptive_masking = true;
  bool identity_enabled = true;
  // Move g uphill on the objective instead of downhill.
  bool gate_ascent = false;

  void validate() const;
};

/// Frozen random two-layer projection: image -> unit k-vector.
struct IdentityExtractor {
  ad::Array w1;  // P x hidden
  ad::Array w2;  // hidden x k

  static IdentityExtractor create(std::size_t pixels, std::size_t hidden, std::size_t k, std::uint64_t seed);
  ad::Var forward(const ad::Var& image) const;
  std::vector<double> features(const ImageArray& image) const;
};

/// Everything the optimizer reads but never writes.
struct ManipModels {
  const GeneratorParams& generator;
  const EncoderParams& image_encoder;
  const IdentityExtractor& identity;
};

/// max(d(G(w_a), a) - d(G(w_s), a) + 1, 0) with d(u, v) = 1 - u.v on unit
/// vectors. Below 1 exactly when the edited image is closer to `a` than the
/// source.
ad::Var hinge_loss(const ad::Var& w_s, const ad::Var& w_a, const Embedding& a, const GeneratorParams& g,
                   const EncoderParams& f_v);

/// (1/L) sum_l softmax(g)_l ||w_a,l - w_s,l|| when `gate` is given, else the
/// plain Frobenius norm ||w_a - w_s||.
ad::Var masked_regularization(const ad::Var& w_a, const ad::Var& w_s, const ad::Var* gate);

/// 1 - <R(G(w_s)), R(G(w_a))>.
ad::Var identity_loss(const ad::Var& w_s, const ad::Var& w_a, const GeneratorParams& g,
                      const IdentityExtractor& r);

struct ObjectiveTerms {
  double hinge = 0.0;
  double reg = 0.0;
  double id = 0.0;
  double total = 0.0;
};

struct Objective {
  ad::Var total;
  ad::Var hinge;
  ad::Var reg;
  ad::Var id;  // unset when the identity term is off
};

/// hinge + lambda_reg * reg + lambda_id * id for the code `w_a`. `gate` is
/// read only when config.adaptive_masking is set.
Objective manipulation_objective(const ad::Var& w_s, const ad::Var& w_a, const ad::Var& gate,
                                 const Embedding& guidance, const ManipConfig& config, const ManipModels& models);

struct TrajectoryStep {
  std::size_t step = 0;
  ObjectiveTerms terms;
  std::vector<double> gate_weights;
};

struct ManipResult {
  LatentCode w;
  GateVector gate;
  // Entry k is the objective after k updates, k = 0..steps.
  std::vector<TrajectoryStep> trajectory;
};

/// Gradient descent on hinge + lambda_reg * reg + lambda_id * id over w_a
/// (started at w_s) and g (started at zeros). A non-finite objective aborts
/// with NumericError naming the step.
ManipResult optimize_latent(const LatentCode& w_s, const Embedding& guidance, const ManipConfig& config,
                            const ManipModels& models);

/// Same optimizer guided by the teacher text embedding of `tokens`.
ManipResult text_guided_latent(const LatentCode& w_s, const TokenSeq& tokens, std::size_t vocab_size,
                               const EncoderParams& text_encoder, const ManipConfig& config,
                               const ManipModels& models);

/// Cosine between identity features of G(w_s) and G(w_a).
double identity_cosine(const LatentCode& w_s, const LatentCode& w_a, const ManipModels& models);

/// (1 - alpha) w_a + alpha w_t; the endpoints return the inputs unchanged.
LatentCode interpolate(const LatentCode& w_a, const LatentCode& w_t, double alpha);

/// Layers [0, split) from w_a and [split, L) from w_t.
LatentCode style_mix(const LatentCode& w_a, const LatentCode& w_t, std::size_t split);

std::string trajectory_csv_header();
std::string trajectory_csv_row(const TrajectoryStep& s);

}  // namespace sgim
