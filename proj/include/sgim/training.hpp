#pragma once

#include <cstdint>
#include <vector>

#include "sgim/encoders.hpp"
#include "sgim/losses.hpp"
#include "sgim/synth_data.hpp"

namespace sgim {

/// Cosine cyclic schedule: within each cycle the rate falls from `base` to
/// `base * floor_ratio` along a half cosine, then restarts.
double cyclic_cosine_lr(double base, double floor_ratio, double cycle_epochs, double epoch);

/// SGD with heavy-ball momentum and L2 weight decay.
class SgdMomentum {
 public:
  SgdMomentum(double momentum, double weight_decay) : momentum_(momentum), weight_decay_(weight_decay) {}
  void step(std::vector<ad::Array>& params, const std::vector<ad::Array>& grads, double lr);

 private:
  double momentum_;
  double weight_decay_;
  std::vector<std::vector<double>> velocity_;
};

struct TrainConfig {
  double lr = 0.05;
  std::size_t epochs = 40;
  std::size_t batch = 64;
  double temperature = 0.07;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double cycle_epochs = 10.0;
  double lr_floor_ratio = 0.1;
  double freq_mask_ratio = 0.15;
  double time_mask_ratio = 0.3;
  bool augment_text = true;
  std::uint64_t seed = 1;
  LossFlags flags;
};

struct TeacherTraining {
  Teacher teacher;
  std::vector<double> epoch_loss;
};

/// Symmetric text-image InfoNCE over the records in `pool`. The returned
/// teacher is treated as frozen by every later stage.
TeacherTraining pretrain_teacher(const Dataset& data, const std::vector<std::size_t>& pool,
                                 std::size_t hidden, std::size_t embed_dim, const TrainConfig& config);

/// Assembles x_a, x^_a, x_t, x_v and the weak images x~_v for one minibatch.
TrainingBatch build_training_batch(const Dataset& data, const std::vector<std::size_t>& pool,
                                   const Minibatch& mb, const SynonymTable& synonyms, bool augment,
                                   Rng& text_rng, Rng& weak_rng);

struct AudioTraining {
  EncoderParams audio;
  std::vector<LossBreakdown> epoch_log;  // mean over the epoch's steps
};

/// Minimizes the total loss over the audio encoder only. `init` seeds the
/// parameters when given; otherwise they are drawn from config.seed.
AudioTraining train_audio_encoder(const Dataset& data, const std::vector<std::size_t>& pool,
                                  const Teacher& teacher, std::size_t hidden,
                                  const TrainConfig& config, const EncoderParams* init = nullptr);

/// Fresh audio encoder initialized from `seed` (the untrained baseline).
EncoderParams init_audio_encoder(const Dataset& data, std::size_t hidden, std::size_t embed_dim,
                                 std::uint64_t seed);

}  // namespace sgim
