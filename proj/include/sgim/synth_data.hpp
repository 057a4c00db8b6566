#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sgim/augmentation.hpp"
#include "sgim/rng.hpp"

namespace sgim {

/// Flattened grayscale image, row-major over a square side x side grid.
using ImageArray = std::vector<double>;

struct TriModalRecord {
  MelGrid audio;
  TokenSeq text;
  ImageArray image;
  std::uint32_t class_id = 0;
  std::uint32_t video_id = 0;  // unique across the dataset
  double intensity = 1.0;      // in [0.2, 1.0]
  std::uint32_t nuisance = 0;  // injected pattern id, 0 = none

  bool operator==(const TriModalRecord&) const = default;
};

struct DatasetManifest {
  std::size_t classes = 8;
  std::size_t videos_per_class = 6;
  std::size_t records_per_video = 8;
  std::size_t freq_bins = 20;
  std::size_t time_frames = 10;
  std::size_t pixels = 64;
  std::uint64_t seed = 7;
  /// class id -> nuisance pattern id (>= 1) shown in that class's videos.
  std::map<std::uint32_t, std::uint32_t> bias_spec{{2, 1}, {3, 1}};
  /// Fraction of a biased class's videos that carry its pattern.
  double bias_cooccurrence = 0.5;

  void validate() const;
  std::string to_text() const;
  static DatasetManifest parse(const std::string& text);
  bool operator==(const DatasetManifest&) const = default;
};

struct Dataset {
  DatasetManifest manifest;
  Vocabulary vocab;
  std::vector<TriModalRecord> records;

  std::size_t audio_dim() const { return manifest.freq_bins * manifest.time_frames; }
  std::size_t image_dim() const { return manifest.pixels; }
};

/// Human-readable label of a class ("ocean wave", ...).
std::string class_label(std::size_t class_id);
TokenSeq class_label_tokens(const Vocabulary& vocab, std::size_t class_id);

/// Label words of the first `classes` classes, their built-in synonyms, then
/// a few filler words.
Vocabulary build_vocabulary(std::size_t classes);

Dataset generate_dataset(const DatasetManifest& manifest);

/// Record indices of whole videos split into (train, held-out). The last
/// `heldout_videos_per_class` videos of every class are held out.
struct VideoSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> heldout;
};
VideoSplit split_by_video(const Dataset& data, std::size_t heldout_videos_per_class);

struct Minibatch {
  std::vector<std::size_t> indices;
  std::vector<MelGrid> audio;
  std::vector<MelGrid> audio_augmented;
};

/// Draws n distinct records from `pool` without replacement and builds their
/// SpecAugment views.
Minibatch sample_minibatch(const Dataset& data, const std::vector<std::size_t>& pool, std::size_t n,
                           Rng& rng, double freq_ratio, double time_ratio);

/// Index of a record with the same class but a different video, uniform over
/// all such records in `pool`. Falls back to a same-video record (with a
/// warning on stderr) when the class has a single video in the pool.
std::size_t sample_weak_pair(const Dataset& data, const std::vector<std::size_t>& pool,
                             std::size_t record, Rng& rng);

/// Writes manifest.txt plus audio.tmd, text.tmd, image.tmd and meta.tmd.
void save_dataset(const Dataset& data, const std::string& dir);
Dataset load_dataset(const std::string& dir);

}  // namespace sgim
