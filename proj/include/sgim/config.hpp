#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "sgim/evaluation.hpp"
#include "sgim/generator.hpp"
#include "sgim/manipulation.hpp"
#include "sgim/synth_data.hpp"
#include "sgim/training.hpp"

namespace sgim {

/// Every tunable of the pipeline, flat and keyed by name.
struct RunConfig {
  std::uint64_t seed = 7;

  // dataset
  std::uint64_t classes = 8;
  std::uint64_t videos_per_class = 6;
  std::uint64_t records_per_video = 8;
  std::uint64_t freq_bins = 20;
  std::uint64_t time_frames = 10;
  std::uint64_t pixels = 64;
  std::string bias_spec = "2:1,3:1";
  double bias_cooccurrence = 0.5;
  std::uint64_t heldout_videos = 2;

  // encoders and training
  std::uint64_t hidden = 64;
  std::uint64_t embed_dim = 32;
  double temperature = 0.07;
  std::uint64_t batch = 8;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double lr_cycle = 10.0;
  double lr_floor = 0.1;
  double freq_mask = 0.15;
  double time_mask = 0.3;
  bool augment_text = true;
  double teacher_lr = 0.05;
  std::uint64_t teacher_epochs = 40;
  double audio_lr = 0.03;
  std::uint64_t audio_epochs = 400;
  bool loss_nce_at = true;
  bool loss_nce_av = true;
  bool loss_self = true;
  bool loss_kl = true;
  bool kl_full_rows = false;

  // generator
  std::uint64_t gen_layers = 8;
  std::uint64_t gen_latent_dim = 32;
  std::uint64_t gen_epochs = 200;
  double gen_lr = 0.05;

  // manipulation
  double lambda_reg = 0.008;
  double lambda_id = 0.004;
  std::uint64_t manip_steps = 300;
  double step_size = 0.1;
  bool adaptive_masking = true;
  bool identity_enabled = true;
  bool gate_ascent = false;
  std::uint64_t id_hidden = 32;
  std::uint64_t id_dim = 16;
  std::string manip_guidance = "audio";
  std::uint64_t manip_record = 0;  // index into the held-out records
  std::uint64_t mix_split = 4;
  double interp_alpha = 0.5;

  // evaluation
  std::uint64_t probe_epochs = 200;
  double probe_lr = 0.1;
  std::uint64_t leak_steps = 100;
  std::uint64_t direction_seeds = 20;
  std::uint64_t gradcheck_points = 10;

  /// `key = value` lines in registry order; parse(to_text()) round-trips.
  std::string to_text() const;
  /// Starts from `base` and applies every key in `text`. Unknown or
  /// malformed keys raise one ValidationError naming all of them.
  static RunConfig parse(const std::string& text, const RunConfig& base);
  static RunConfig parse(const std::string& text);
  /// Applies (key, value) pairs; same error contract as parse().
  void apply(const std::vector<std::pair<std::string, std::string>>& overrides);
  /// Range checks; raises ValidationError listing every offending key.
  void validate() const;
  std::uint64_t hash() const;

  DatasetManifest manifest() const;
  TrainConfig teacher_training() const;
  TrainConfig audio_training() const;
  ManipConfig manipulation() const;
  ProbeConfig probe() const;

  bool operator==(const RunConfig&) const = default;
};

/// Registered config keys in canonical order.
std::vector<std::string> config_keys();

/// Per-stage seeds fanned out from the master seed.
enum class Stage : std::uint64_t {
  data = 1,
  teacher = 2,
  generator = 3,
  audio = 4,
  identity = 5,
  source = 6,
  direction = 8,
};
std::uint64_t stage_seed(const RunConfig& config, Stage stage);

}  // namespace sgim
