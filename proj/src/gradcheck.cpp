#include "sgim/gradcheck.hpp"

#include <algorithm>
#include <functional>
#include <map>

#include "sgim/autodiff.hpp"
#include "sgim/encoders.hpp"
#include "sgim/errors.hpp"
#include "sgim/generator.hpp"
#include "sgim/losses.hpp"
#include "sgim/manipulation.hpp"
#include "sgim/rng.hpp"

namespace sgim {

namespace {

using ad::Array;
using ad::Var;

struct Case {
  Array x;
  std::function<Var(const Var&)> f;
};
using Builder = std::function<Case(Rng&)>;

constexpr double kTau = 0.07;
constexpr double kEps = 1e-6;

Array normal(Rng& rng, std::size_t r, std::size_t c, double s = 1.0) {
  std::vector<double> v(r * c);
  for (double& x : v) x = s * rng.normal();
  return Array({r, c}, std::move(v));
}

// Entries bounded away from zero so kinked ops stay differentiable.
Array away_from_zero(Rng& rng, std::size_t r, std::size_t c) {
  std::vector<double> v(r * c);
  for (double& x : v) x = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.2, 1.5);
  return Array({r, c}, std::move(v));
}

Array positive(Rng& rng, std::size_t r, std::size_t c) {
  std::vector<double> v(r * c);
  for (double& x : v) x = rng.uniform(0.5, 2.0);
  return Array({r, c}, std::move(v));
}

// Wraps a unary map so the projection weights are drawn once per point.
Case unary(Rng& rng, Array x, std::function<Var(const Var&)> op) {
  const Var probe = op(ad::constant(x));
  const Array w = normal(rng, probe.value().rows(), probe.value().cols());
  return {std::move(x), [op, w](const Var& v) { return ad::sum(ad::mul(op(v), ad::constant(w))); }};
}

EncoderParams small_encoder(Rng& rng, std::size_t in, std::size_t out) { return EncoderParams::init(in, 6, out, rng); }

// Audio encoder with tensor `slot` replaced by the checked variable.
BoundEncoder bind_with(const EncoderParams& p, std::size_t slot, const Var& x) {
  BoundEncoder b = BoundEncoder::bind(p, false);
  b.leaves[slot] = x;
  return b;
}

struct ManipFixture {
  GeneratorParams generator;
  EncoderParams image_encoder;
  IdentityExtractor identity;
  Array w_s;
  Embedding guidance;
  ManipConfig config;
};

std::shared_ptr<ManipFixture> manip_fixture(Rng& rng) {
  auto fx = std::make_shared<ManipFixture>();
  fx->generator = GeneratorParams::create(4, 3, 16, rng);
  fx->image_encoder = small_encoder(rng, 16, 4);
  fx->identity = IdentityExtractor::create(16, 5, 3, rng.next_u64());
  fx->w_s = normal(rng, 4, 3);
  const Array g = normal(rng, 1, 4);
  const Array a = ad::l2_normalize_rows(ad::constant(g)).value();
  fx->guidance.values.assign(a.data().begin(), a.data().end());
  return fx;
}

TrainingBatch small_batch(Rng& rng, std::size_t n, std::size_t audio_dim, std::size_t text_dim,
                          std::size_t image_dim) {
  return {normal(rng, n, audio_dim), normal(rng, n, audio_dim), positive(rng, n, text_dim),
          normal(rng, n, image_dim), normal(rng, n, image_dim)};
}

const std::map<std::string, Builder>& registry() {
  static const std::map<std::string, Builder> r = [] {
    std::map<std::string, Builder> m;
    m["matmul_lhs"] = [](Rng& g) {
      const Array b = normal(g, 4, 3);
      return unary(g, normal(g, 2, 4), [b](const Var& x) { return ad::matmul(x, ad::constant(b)); });
    };
    m["matmul_rhs"] = [](Rng& g) {
      const Array a = normal(g, 2, 4);
      return unary(g, normal(g, 4, 3), [a](const Var& x) { return ad::matmul(ad::constant(a), x); });
    };
    m["add"] = [](Rng& g) {
      const Array b = normal(g, 3, 3);
      return unary(g, normal(g, 3, 3), [b](const Var& x) { return ad::add(x, ad::constant(b)); });
    };
    m["sub_rhs"] = [](Rng& g) {
      const Array a = normal(g, 3, 3);
      return unary(g, normal(g, 3, 3), [a](const Var& x) { return ad::sub(ad::constant(a), x); });
    };
    m["mul"] = [](Rng& g) {
      const Array b = normal(g, 3, 2);
      return unary(g, normal(g, 3, 2), [b](const Var& x) { return ad::mul(ad::mul(x, ad::constant(b)), x); });
    };
    m["add_row"] = [](Rng& g) {
      const Array a = normal(g, 3, 4);
      return unary(g, normal(g, 1, 4), [a](const Var& x) { return ad::add_row(ad::constant(a), x); });
    };
    m["scale"] = [](Rng& g) {
      return unary(g, normal(g, 2, 3), [](const Var& x) { return ad::scale(x, -1.7); });
    };
    m["add_scalar"] = [](Rng& g) {
      return unary(g, normal(g, 2, 3), [](const Var& x) { return ad::mul(ad::add_scalar(x, 0.3), x); });
    };
    m["exp"] = [](Rng& g) { return unary(g, normal(g, 2, 3), [](const Var& x) { return ad::exp(x); }); };
    m["log"] = [](Rng& g) { return unary(g, positive(g, 2, 3), [](const Var& x) { return ad::log(x); }); };
    m["tanh"] = [](Rng& g) { return unary(g, normal(g, 2, 3), [](const Var& x) { return ad::tanh(x); }); };
    m["relu"] = [](Rng& g) { return unary(g, away_from_zero(g, 3, 3), [](const Var& x) { return ad::relu(x); }); };
    m["max_with_zero"] = [](Rng& g) {
      return unary(g, away_from_zero(g, 3, 3), [](const Var& x) { return ad::max_with_zero(x); });
    };
    m["sum"] = [](Rng& g) {
      return unary(g, normal(g, 2, 3), [](const Var& x) { return ad::sum(ad::mul(x, x)); });
    };
    m["mean"] = [](Rng& g) {
      return unary(g, normal(g, 2, 3), [](const Var& x) { return ad::mean(ad::mul(x, x)); });
    };
    m["row_sums"] = [](Rng& g) {
      return unary(g, normal(g, 3, 4), [](const Var& x) { return ad::row_sums(ad::mul(x, x)); });
    };
    m["transpose"] = [](Rng& g) {
      return unary(g, normal(g, 2, 5), [](const Var& x) { return ad::transpose(x); });
    };
    m["reshape"] = [](Rng& g) {
      return unary(g, normal(g, 2, 6), [](const Var& x) { return ad::reshape(x, 3, 4); });
    };
    m["slice_rows"] = [](Rng& g) {
      return unary(g, normal(g, 5, 2), [](const Var& x) { return ad::slice_rows(x, 1, 3); });
    };
    m["concat_rows"] = [](Rng& g) {
      const Array b = normal(g, 2, 3);
      return unary(g, normal(g, 3, 3), [b](const Var& x) {
        const std::vector<Var> parts{x, ad::constant(b), ad::mul(x, x)};
        return ad::concat_rows(parts);
      });
    };
    m["diagonal"] = [](Rng& g) {
      return unary(g, normal(g, 4, 4), [](const Var& x) { return ad::diagonal(x); });
    };
    m["row_softmax"] = [](Rng& g) {
      return unary(g, normal(g, 3, 4), [](const Var& x) { return ad::row_softmax(x, 0.5); });
    };
    m["row_norms"] = [](Rng& g) {
      return unary(g, normal(g, 3, 4), [](const Var& x) { return ad::row_norms(x); });
    };
    m["l2_normalize_rows"] = [](Rng& g) {
      return unary(g, normal(g, 3, 4), [](const Var& x) { return ad::l2_normalize_rows(x); });
    };
    m["similarity_matrix"] = [](Rng& g) {
      const Array c = ad::l2_normalize_rows(ad::constant(normal(g, 4, 3))).value();
      return unary(g, normal(g, 4, 3), [c](const Var& x) {
        return ad::log(similarity_matrix(ad::l2_normalize_rows(x), ad::constant(c), kTau));
      });
    };
    m["encoder_forward"] = [](Rng& g) {
      const EncoderParams p = small_encoder(g, 5, 4);
      const Array in = normal(g, 3, 5);
      return unary(g, p.tensors[0], [p, in](const Var& x) { return bind_with(p, 0, x).forward(ad::constant(in)); });
    };
    m["encoder_forward_input"] = [](Rng& g) {
      const EncoderParams p = small_encoder(g, 5, 4);
      return unary(g, normal(g, 3, 5), [p](const Var& x) { return BoundEncoder::bind(p, false).forward(x); });
    };
    m["info_nce_audio_text"] = [](Rng& g) {
      const EncoderParams audio = small_encoder(g, 6, 4), text = small_encoder(g, 5, 4);
      const Array xa = normal(g, 4, 6), xt = positive(g, 4, 5);
      const Array t = embed_rows(xt, text);
      return Case{audio.tensors[2], [=](const Var& x) {
                    return info_nce_pair(bind_with(audio, 2, x).forward(ad::constant(xa)), ad::constant(t), kTau);
                  }};
    };
    m["info_nce_audio_image"] = [](Rng& g) {
      const EncoderParams audio = small_encoder(g, 6, 4), image = small_encoder(g, 5, 4);
      const Array xa = normal(g, 4, 6);
      const Array v = embed_rows(normal(g, 4, 5), image);
      return Case{audio.tensors[4], [=](const Var& x) {
                    return info_nce_pair(bind_with(audio, 4, x).forward(ad::constant(xa)), ad::constant(v), kTau);
                  }};
    };
    m["self_supervised"] = [](Rng& g) {
      const EncoderParams audio = small_encoder(g, 6, 4);
      const Array xa = normal(g, 4, 6), xh = normal(g, 4, 6);
      return Case{audio.tensors[0], [=](const Var& x) {
                    const auto enc = bind_with(audio, 0, x);
                    return self_supervised_loss(enc.forward(ad::constant(xa)), enc.forward(ad::constant(xh)), kTau);
                  }};
    };
    for (bool full : {false, true}) {
      m[full ? "weak_kl_full_rows" : "weak_kl"] = [full](Rng& g) {
        const EncoderParams audio = small_encoder(g, 6, 4);
        const Array xa = normal(g, 4, 6);
        const Array v = ad::l2_normalize_rows(ad::constant(normal(g, 4, 4))).value();
        const Array t = ad::l2_normalize_rows(ad::constant(normal(g, 4, 4))).value();
        return Case{audio.tensors[2], [=](const Var& x) {
                      return weak_kl_loss(bind_with(audio, 2, x).forward(ad::constant(xa)), ad::constant(v),
                                          ad::constant(t), kTau, full);
                    }};
      };
    }
    m["total_loss"] = [](Rng& g) {
      const EncoderParams audio = small_encoder(g, 6, 4);
      const Teacher teacher{small_encoder(g, 5, 4), small_encoder(g, 7, 4)};
      const TrainingBatch batch = small_batch(g, 4, 6, 5, 7);
      return Case{audio.tensors[0], [=](const Var& x) {
                    return total_loss(batch, bind_with(audio, 0, x), teacher, kTau).total;
                  }};
    };
    m["synthesize"] = [](Rng& g) {
      auto fx = manip_fixture(g);
      return unary(g, fx->w_s, [fx](const Var& x) { return synthesize(x, fx->generator); });
    };
    m["hinge"] = [](Rng& g) {
      auto fx = manip_fixture(g);
      return Case{normal(g, 4, 3), [fx](const Var& x) {
                    return hinge_loss(ad::constant(fx->w_s), x, fx->guidance, fx->generator, fx->image_encoder);
                  }};
    };
    m["masked_reg_code"] = [](Rng& g) {
      auto fx = manip_fixture(g);
      const Var gate = ad::constant(normal(g, 1, 4));
      return Case{normal(g, 4, 3), [fx, gate](const Var& x) {
                    return masked_regularization(x, ad::constant(fx->w_s), &gate);
                  }};
    };
    m["masked_reg_gate"] = [](Rng& g) {
      auto fx = manip_fixture(g);
      const Array w_a = normal(g, 4, 3);
      return Case{normal(g, 1, 4), [fx, w_a](const Var& x) {
                    return masked_regularization(ad::constant(w_a), ad::constant(fx->w_s), &x);
                  }};
    };
    m["unmasked_reg"] = [](Rng& g) {
      auto fx = manip_fixture(g);
      return Case{normal(g, 4, 3), [fx](const Var& x) {
                    return masked_regularization(x, ad::constant(fx->w_s), nullptr);
                  }};
    };
    m["identity_loss"] = [](Rng& g) {
      auto fx = manip_fixture(g);
      return Case{normal(g, 4, 3), [fx](const Var& x) {
                    return identity_loss(ad::constant(fx->w_s), x, fx->generator, fx->identity);
                  }};
    };
    m["manipulation_objective_code"] = [](Rng& g) {
      auto fx = manip_fixture(g);
      const Var gate = ad::constant(normal(g, 1, 4));
      return Case{normal(g, 4, 3), [fx, gate](const Var& x) {
                    const ManipModels models{fx->generator, fx->image_encoder, fx->identity};
                    return manipulation_objective(ad::constant(fx->w_s), x, gate, fx->guidance, fx->config, models)
                        .total;
                  }};
    };
    m["manipulation_objective_gate"] = [](Rng& g) {
      auto fx = manip_fixture(g);
      const Array w_a = normal(g, 4, 3);
      return Case{normal(g, 1, 4), [fx, w_a](const Var& x) {
                    const ManipModels models{fx->generator, fx->image_encoder, fx->identity};
                    return manipulation_objective(ad::constant(fx->w_s), ad::constant(w_a), x, fx->guidance,
                                                  fx->config, models)
                        .total;
                  }};
    };
    return m;
  }();
  return r;
}

// FNV-1a, so point seeds do not depend on the standard library's hash.
std::uint64_t name_offset(const std::string& name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}

}  // namespace

std::vector<std::string> gradcheck_names() {
  std::vector<std::string> names;
  for (const auto& [k, _] : registry()) names.push_back(k);
  return names;
}

GradCheckResult run_gradcheck(const std::string& name, std::size_t points, std::uint64_t seed, double tolerance) {
  const auto it = registry().find(name);
  if (it == registry().end()) throw UsageError("no gradcheck registered under '" + name + "'");
  GradCheckResult res{name, points, 0.0, false};
  for (std::size_t p = 0; p < points; ++p) {
    Rng rng(stage_seed(seed, name_offset(name) + p));
    const Case c = it->second(rng);
    res.worst = std::max(res.worst, ad::finite_difference_check(c.f, c.x, kEps));
  }
  res.pass = res.worst < tolerance;
  return res;
}

std::vector<GradCheckResult> run_all_gradchecks(std::size_t points, std::uint64_t seed, double tolerance) {
  std::vector<GradCheckResult> out;
  for (const auto& name : gradcheck_names()) out.push_back(run_gradcheck(name, points, seed, tolerance));
  return out;
}

}  // namespace sgim
