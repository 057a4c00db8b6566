#include "sgim/training.hpp"

#include <cmath>
#include <numbers>

#include "sgim/errors.hpp"

namespace sgim {

double cyclic_cosine_lr(double base, double floor_ratio, double cycle_epochs, double epoch) {
  if (!(cycle_epochs > 0.0)) throw ParameterError("cycle length must be positive");
  const double floor = base * floor_ratio;
  const double phase = std::fmod(epoch, cycle_epochs) / cycle_epochs;
  return floor + (base - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * phase));
}

void SgdMomentum::step(std::vector<ad::Array>& params, const std::vector<ad::Array>& grads, double lr) {
  if (params.size() != grads.size()) throw UsageError("optimizer: parameter/gradient count mismatch");
  if (velocity_.empty()) {
    for (const auto& p : params) velocity_.emplace_back(p.size(), 0.0);
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto w = params[k].mutable_data();
    auto g = grads[k].data();
    auto& v = velocity_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = momentum_ * v[i] + g[i] + weight_decay_ * w[i];
      w[i] -= lr * v[i];
    }
  }
}

namespace {

// Independent streams so that toggling one loss never shifts another's draws.
enum Stream : std::uint64_t { kInit = 1, kBatches = 2, kText = 3, kWeak = 4 };

void check_config(const TrainConfig& c, std::size_t pool_size) {
  if (c.batch < 2) throw UsageError("batch size must be at least 2 (InfoNCE needs negatives)");
  if (c.batch > pool_size) throw UsageError("batch size exceeds the training pool");
  if (!(c.lr >= 0.0)) throw ParameterError("learning rate must be non-negative");
  if (!(c.temperature > 0.0)) throw ParameterError("temperature must be positive");
}

std::vector<TokenSeq> batch_texts(const Dataset& data, const std::vector<std::size_t>& idx,
                                  const SynonymTable& synonyms, bool augment, Rng& rng) {
  std::vector<TokenSeq> out;
  for (auto i : idx) {
    const auto& t = data.records[i].text;
    out.push_back(augment ? augment_text(t, data.vocab, synonyms, rng) : t);
  }
  return out;
}

std::vector<ImageArray> batch_images(const Dataset& data, const std::vector<std::size_t>& idx) {
  std::vector<ImageArray> out;
  for (auto i : idx) out.push_back(data.records[i].image);
  return out;
}

}  // namespace

TeacherTraining pretrain_teacher(const Dataset& data, const std::vector<std::size_t>& pool,
                                 std::size_t hidden, std::size_t embed_dim, const TrainConfig& config) {
  if (pool.empty()) throw UsageError("pretrain_teacher: empty dataset");
  check_config(config, pool.size());
  Rng init_rng(stage_seed(config.seed, kInit));
  Rng batch_rng(stage_seed(config.seed, kBatches));
  Rng text_rng(stage_seed(config.seed, kText));
  const auto synonyms = SynonymTable::builtin();

  TeacherTraining out;
  out.teacher.text = EncoderParams::init(data.vocab.size(), hidden, embed_dim, init_rng);
  out.teacher.image = EncoderParams::init(data.image_dim(), hidden, embed_dim, init_rng);
  SgdMomentum opt_text(config.momentum, config.weight_decay);
  SgdMomentum opt_image(config.momentum, config.weight_decay);

  const std::size_t steps = pool.size() / config.batch;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double acc = 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
      std::vector<std::size_t> idx = pool;
      for (std::size_t i = 0; i < config.batch; ++i)
        std::swap(idx[i], idx[i + batch_rng.below(idx.size() - i)]);
      idx.resize(config.batch);

      const auto texts = batch_texts(data, idx, synonyms, config.augment_text, text_rng);
      const auto images = batch_images(data, idx);
      const auto text_enc = BoundEncoder::bind(out.teacher.text, true);
      const auto image_enc = BoundEncoder::bind(out.teacher.image, true);
      const ad::Var t = text_enc.forward(ad::constant(text_matrix(texts, data.vocab.size())));
      const ad::Var v = image_enc.forward(ad::constant(image_matrix(images)));
      const ad::Var loss = info_nce_pair(t, v, config.temperature);
      ad::backward(loss);
      acc += loss.item();

      const double lr = cyclic_cosine_lr(config.lr, config.lr_floor_ratio, config.cycle_epochs,
                                         static_cast<double>(epoch) + static_cast<double>(s) / steps);
      opt_text.step(out.teacher.text.tensors, text_enc.grads(), lr);
      opt_image.step(out.teacher.image.tensors, image_enc.grads(), lr);
    }
    out.epoch_loss.push_back(acc / static_cast<double>(steps));
  }
  return out;
}

TrainingBatch build_training_batch(const Dataset& data, const std::vector<std::size_t>& pool,
                                   const Minibatch& mb, const SynonymTable& synonyms, bool augment,
                                   Rng& text_rng, Rng& weak_rng) {
  TrainingBatch b;
  b.audio = audio_matrix(mb.audio);
  b.audio_augmented = audio_matrix(mb.audio_augmented);
  b.text = text_matrix(batch_texts(data, mb.indices, synonyms, augment, text_rng), data.vocab.size());
  b.image = image_matrix(batch_images(data, mb.indices));
  std::vector<std::size_t> weak;
  for (auto i : mb.indices) weak.push_back(sample_weak_pair(data, pool, i, weak_rng));
  b.weak_image = image_matrix(batch_images(data, weak));
  return b;
}

EncoderParams init_audio_encoder(const Dataset& data, std::size_t hidden, std::size_t embed_dim,
                                 std::uint64_t seed) {
  Rng rng(stage_seed(seed, kInit));
  return EncoderParams::init(data.audio_dim(), hidden, embed_dim, rng);
}

AudioTraining train_audio_encoder(const Dataset& data, const std::vector<std::size_t>& pool,
                                  const Teacher& teacher, std::size_t hidden,
                                  const TrainConfig& config, const EncoderParams* init) {
  check_config(config, pool.size());
  Rng batch_rng(stage_seed(config.seed, kBatches));
  Rng text_rng(stage_seed(config.seed, kText));
  Rng weak_rng(stage_seed(config.seed, kWeak));
  const auto synonyms = SynonymTable::builtin();

  AudioTraining out;
  out.audio = init ? *init : init_audio_encoder(data, hidden, teacher.text.output_dim(), config.seed);
  SgdMomentum opt(config.momentum, config.weight_decay);

  const std::size_t steps = pool.size() / config.batch;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    LossBreakdown mean;
    for (std::size_t s = 0; s < steps; ++s) {
      const Minibatch mb = sample_minibatch(data, pool, config.batch, batch_rng,
                                            config.freq_mask_ratio, config.time_mask_ratio);
      const TrainingBatch batch =
          build_training_batch(data, pool, mb, synonyms, config.augment_text, text_rng, weak_rng);

      const auto audio_enc = BoundEncoder::bind(out.audio, true);
      const TotalLoss loss = total_loss(batch, audio_enc, teacher, config.temperature, config.flags);
      ad::backward(loss.total);
      const double lr = cyclic_cosine_lr(config.lr, config.lr_floor_ratio, config.cycle_epochs,
                                         static_cast<double>(epoch) + static_cast<double>(s) / steps);
      opt.step(out.audio.tensors, audio_enc.grads(), lr);

      mean.nce_at += loss.breakdown.nce_at / steps;
      mean.nce_av += loss.breakdown.nce_av / steps;
      mean.self_aa += loss.breakdown.self_aa / steps;
      mean.kl_weak += loss.breakdown.kl_weak / steps;
      mean.total += loss.breakdown.total / steps;
    }
    out.epoch_log.push_back(mean);
  }
  return out;
}

}  // namespace sgim
