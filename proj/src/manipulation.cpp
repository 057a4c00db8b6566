#include "sgim/manipulation.hpp"

#include <cmath>

#include "sgim/errors.hpp"
#include "sgim/key_value.hpp"

namespace sgim {

std::vector<double> GateVector::weights() const {
  if (logits.empty()) return {};
  const auto w = ad::row_softmax(ad::constant(ad::Array::row(logits)), 1.0).value();
  return {w.data().begin(), w.data().end()};
}

void ManipConfig::validate() const {
  if (steps < 1) throw ParameterError("manipulation steps must be at least 1");
  if (!(lambda_reg >= 0.0) || !(lambda_id >= 0.0)) throw ParameterError("lambda_reg and lambda_id must be non-negative");
  if (!(step_size >= 0.0)) throw ParameterError("step size must be non-negative");
}

IdentityExtractor IdentityExtractor::create(std::size_t pixels, std::size_t hidden, std::size_t k,
                                            std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> a(pixels * hidden), b(hidden * k);
  for (double& x : a) x = rng.normal() / std::sqrt(static_cast<double>(pixels));
  for (double& x : b) x = rng.normal() / std::sqrt(static_cast<double>(hidden));
  return {ad::Array({pixels, hidden}, std::move(a)), ad::Array({hidden, k}, std::move(b))};
}

ad::Var IdentityExtractor::forward(const ad::Var& image) const {
  return ad::l2_normalize_rows(
      ad::matmul(ad::tanh(ad::matmul(image, ad::constant(w1))), ad::constant(w2)));
}

std::vector<double> IdentityExtractor::features(const ImageArray& image) const {
  auto v = forward(ad::constant(ad::Array::row(image))).value();
  return {v.data().begin(), v.data().end()};
}

namespace {

void require_code_shapes(const ad::Var& a, const ad::Var& b, const char* op) {
  if (!a.value().same_shape(b.value())) {
    throw DimensionError(std::string(op) + ": latent shapes " + ad::shape_string(a.value().shape()) + " and " +
                         ad::shape_string(b.value().shape()) + " differ");
  }
}

// u . a for the image encoder output of G(w); 1 x 1.
ad::Var guidance_cosine(const ad::Var& w, const ad::Var& a_col, const GeneratorParams& g,
                        const BoundEncoder& f_v) {
  return ad::matmul(f_v.forward(synthesize(w, g)), a_col);
}

}  // namespace

ad::Var hinge_loss(const ad::Var& w_s, const ad::Var& w_a, const Embedding& a, const GeneratorParams& g,
                   const EncoderParams& f_v) {
  require_code_shapes(w_s, w_a, "hinge_loss");
  if (a.values.size() != f_v.output_dim()) throw DimensionError("hinge_loss: guidance dimension mismatch");
  const auto enc = BoundEncoder::bind(f_v, false);
  const ad::Var a_col = ad::constant(ad::Array({a.values.size(), 1}, a.values));
  const ad::Var c_src = guidance_cosine(w_s, a_col, g, enc);
  const ad::Var c_edit = guidance_cosine(w_a, a_col, g, enc);
  // (1 - c_edit) - (1 - c_src) + 1
  return ad::max_with_zero(ad::add_scalar(ad::sub(c_src, c_edit), 1.0));
}

ad::Var masked_regularization(const ad::Var& w_a, const ad::Var& w_s, const ad::Var* gate) {
  require_code_shapes(w_a, w_s, "masked_regularization");
  const ad::Var diff = ad::sub(w_a, w_s);
  const std::size_t layers = diff.value().rows();
  if (!gate) return ad::row_norms(ad::reshape(diff, 1, diff.value().size()));
  if (gate->value().size() != layers) throw DimensionError("masked_regularization: gate length != layer count");
  const ad::Var weights = ad::row_softmax(ad::reshape(*gate, 1, layers), 1.0);
  return ad::scale(ad::matmul(weights, ad::row_norms(diff)), 1.0 / static_cast<double>(layers));
}

ad::Var identity_loss(const ad::Var& w_s, const ad::Var& w_a, const GeneratorParams& g,
                      const IdentityExtractor& r) {
  require_code_shapes(w_s, w_a, "identity_loss");
  const ad::Var src = r.forward(synthesize(w_s, g));
  const ad::Var edit = r.forward(synthesize(w_a, g));
  return ad::add_scalar(ad::scale(ad::matmul(src, ad::transpose(edit)), -1.0), 1.0);
}

Objective manipulation_objective(const ad::Var& w_s, const ad::Var& w_a, const ad::Var& gate,
                                 const Embedding& guidance, const ManipConfig& config, const ManipModels& models) {
  Objective o;
  o.hinge = hinge_loss(w_s, w_a, guidance, models.generator, models.image_encoder);
  o.reg = masked_regularization(w_a, w_s, config.adaptive_masking ? &gate : nullptr);
  o.total = ad::add(o.hinge, ad::scale(o.reg, config.lambda_reg));
  if (config.identity_enabled && config.lambda_id > 0.0) {
    o.id = identity_loss(w_s, w_a, models.generator, models.identity);
    o.total = ad::add(o.total, ad::scale(o.id, config.lambda_id));
  }
  return o;
}

ManipResult optimize_latent(const LatentCode& w_s, const Embedding& guidance, const ManipConfig& config,
                            const ManipModels& models) {
  config.validate();
  const ad::Var source = ad::constant(w_s.w);

  ManipResult out;
  out.w = w_s;
  out.gate = GateVector::uniform(w_s.layers());

  for (std::size_t k = 0;; ++k) {
    try {
      const ad::Var w = ad::parameter(out.w.w);
      const ad::Var g = ad::parameter(ad::Array::row(out.gate.logits));
      const Objective obj = manipulation_objective(source, w, g, guidance, config, models);
      out.trajectory.push_back(
          {k, {obj.hinge.item(), obj.reg.item(), obj.id.node() ? obj.id.item() : 0.0, obj.total.item()},
           out.gate.weights()});
      if (k == config.steps) break;

      ad::backward(obj.total);
      auto wv = out.w.w.mutable_data();
      auto gw = w.grad().data();
      for (std::size_t i = 0; i < wv.size(); ++i) wv[i] -= config.step_size * gw[i];
      if (config.adaptive_masking) {
        const double dir = config.gate_ascent ? 1.0 : -1.0;
        auto gg = g.grad().data();
        for (std::size_t i = 0; i < out.gate.logits.size(); ++i)
          out.gate.logits[i] += dir * config.step_size * gg[i];
      }
      for (double v : wv)
        if (!std::isfinite(v)) throw NumericError("latent left the finite range");
    } catch (const NumericError& e) {
      throw NumericError("optimize_latent: non-finite objective at step " + std::to_string(k) + ": " + e.what());
    }
  }
  return out;
}

ManipResult text_guided_latent(const LatentCode& w_s, const TokenSeq& tokens, std::size_t vocab_size,
                               const EncoderParams& text_encoder, const ManipConfig& config,
                               const ManipModels& models) {
  return optimize_latent(w_s, encode_text(tokens, vocab_size, text_encoder), config, models);
}

double identity_cosine(const LatentCode& w_s, const LatentCode& w_a, const ManipModels& models) {
  const auto a = models.identity.features(synthesize(w_s, models.generator));
  const auto b = models.identity.features(synthesize(w_a, models.generator));
  return cosine(a, b);
}

LatentCode interpolate(const LatentCode& w_a, const LatentCode& w_t, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ParameterError("interpolate: alpha must lie in [0, 1]");
  if (!w_a.w.same_shape(w_t.w)) throw DimensionError("interpolate: latent shapes differ");
  if (alpha == 0.0) return w_a;
  if (alpha == 1.0) return w_t;
  std::vector<double> v(w_a.w.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (1.0 - alpha) * w_a.w[i] + alpha * w_t.w[i];
  return LatentCode{ad::Array(w_a.w.shape(), std::move(v))};
}

LatentCode style_mix(const LatentCode& w_a, const LatentCode& w_t, std::size_t split) {
  if (!w_a.w.same_shape(w_t.w)) throw DimensionError("style_mix: latent shapes differ");
  const std::size_t layers = w_a.layers();
  if (split < 1 || split >= layers) {
    throw ParameterError("style_mix: split " + std::to_string(split) + " outside [1, " + std::to_string(layers) + ")");
  }
  const std::size_t d = w_a.dim();
  std::vector<double> v(w_a.w.data().begin(), w_a.w.data().end());
  for (std::size_t i = split * d; i < v.size(); ++i) v[i] = w_t.w[i];
  return LatentCode{ad::Array(w_a.w.shape(), std::move(v))};
}

std::string trajectory_csv_header() { return "step,hinge,reg,id,total"; }

std::string trajectory_csv_row(const TrajectoryStep& s) {
  return std::to_string(s.step) + "," + format_double(s.terms.hinge) + "," + format_double(s.terms.reg) + "," +
         format_double(s.terms.id) + "," + format_double(s.terms.total);
}

}  // namespace sgim
