#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgim/encoders.hpp"
#include "sgim/manipulation.hpp"
#include "sgim/synth_data.hpp"
#include "sgim/training.hpp"

namespace sgim {

/// One reported statistic. Accuracies leave `std_dev` at 0.
struct EvalEntry {
  std::string name;
  double mean = 0.0;
  double std_dev = 0.0;
  std::size_t count = 0;
};

struct EvalReport {
  std::string protocol;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::vector<EvalEntry> entries;

  const EvalEntry& entry(const std::string& name) const;
  /// `protocol,name,mean,std,count`, one line per entry.
  std::string to_csv() const;
  std::string to_text() const;
};

/// Index of the class embedding with the highest cosine for each row;
/// ties go to the lowest class id.
std::vector<std::size_t> zero_shot_predict(const ad::Array& audio_embeddings, const ad::Array& class_embeddings);

/// Per-class and overall accuracy of zero-shot prediction on `records`.
EvalReport zero_shot_classify(const Dataset& data, const std::vector<std::size_t>& records,
                              const EncoderParams& audio, const EncoderParams& text);

struct ProbeConfig {
  std::size_t epochs = 200;
  double lr = 0.1;
  // Weight samples so every label carries the same total mass.
  bool balanced = false;
};

/// Trains a softmax classifier (zero init, full-batch gradient descent) on
/// the train rows and returns its predictions on the test rows.
std::vector<std::size_t> probe_predict(const ad::Array& train_x, const std::vector<std::size_t>& train_y,
                                       const ad::Array& test_x, std::size_t classes, const ProbeConfig& config = {});

/// Held-out accuracy of a softmax probe on frozen embeddings.
EvalReport linear_probe(const ad::Array& train_x, const std::vector<std::size_t>& train_y,
                        const ad::Array& test_x, const std::vector<std::size_t>& test_y, std::size_t classes,
                        const ProbeConfig& config = {});

/// Mean audio-image cosine over pairs of records that share a class but come
/// from different videos.
double cross_video_alignment(const Dataset& data, const std::vector<std::size_t>& records,
                             const EncoderParams& audio, const EncoderParams& image);

struct LeakageSetup {
  const ManipModels& models;
  LatentCode source;
  ManipConfig config;
  ProbeConfig probe;
};

/// Balanced accuracy of a leave-one-video-out probe that predicts whether a
/// clip's video carries a nuisance pattern from the image delta
/// G(w_a) - G(w_s) of an audio-guided manipulation. Only records of classes
/// listed in the manifest's bias_spec are used.
double nuisance_leakage(const Dataset& data, const std::vector<std::size_t>& records,
                        const EncoderParams& audio, const LeakageSetup& setup);

struct AblationArms {
  EncoderParams with_kl;
  EncoderParams without_kl;
};

/// Trains the audio encoder twice from the same initialization and seed,
/// toggling only the weak loss.
AblationArms train_ablation_arms(const Dataset& data, const std::vector<std::size_t>& pool,
                                 const Teacher& teacher, std::size_t hidden, const TrainConfig& config);

/// Per arm: zero-shot accuracy on `heldout`, plus cross-video alignment and
/// nuisance leakage over `paired`. Held-out splits keep few videos per class,
/// so the pairwise statistics are taken over a wider record set.
EvalReport ablation_report(const Dataset& data, const std::vector<std::size_t>& heldout,
                           const std::vector<std::size_t>& paired, const Teacher& teacher, const AblationArms& arms,
                           const LeakageSetup& leakage);

struct DirectionSample {
  double cos_s_a = 0.0;
  double cos_s_t = 0.0;
  double cos_a_t = 0.0;
};

/// Cosines between flattened codes for one (w_s, w_a, w_t) triple.
DirectionSample direction_sample(const LatentCode& w_s, const LatentCode& w_a, const LatentCode& w_t);

/// Mean/std of the three cosines per attribute (class) over `seeds` source
/// latents, each edited by audio guidance (the class's clips in `records`,
/// taken in turn) and by its text label under identical optimizer settings.
EvalReport direction_stats(const Dataset& data, const std::vector<std::size_t>& records,
                           const std::vector<std::size_t>& attributes, std::size_t seeds, std::uint64_t seed,
                           const EncoderParams& audio, const EncoderParams& text, const ManipModels& models,
                           const ManipConfig& config);

}  // namespace sgim
