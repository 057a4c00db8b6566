#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "sgim/rng.hpp"

namespace sgim {

/// Mel-like spectrogram grid, frequency-major: values[f * time_frames + t].
struct MelGrid {
  std::size_t freq_bins = 0;
  std::size_t time_frames = 0;
  std::vector<double> values;

  double at(std::size_t f, std::size_t t) const { return values[f * time_frames + t]; }
  bool operator==(const MelGrid&) const = default;
};

MelGrid make_mel_grid(std::size_t freq_bins, std::size_t time_frames, std::vector<double> values);

/// Fixed word <-> id map.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> words);

  std::size_t size() const { return words_.size(); }
  std::uint32_t id(std::string_view word) const;
  bool contains(std::string_view word) const { return ids_.contains(std::string(word)); }
  const std::string& word(std::uint32_t id) const;
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::map<std::string, std::uint32_t> ids_;
};

struct TokenSeq {
  std::vector<std::uint32_t> ids;
  bool operator==(const TokenSeq&) const = default;
};

TokenSeq tokenize(const Vocabulary& vocab, std::string_view text);
std::string detokenize(const Vocabulary& vocab, const TokenSeq& seq);

/// word -> synonyms. Stands in for a thesaurus.
class SynonymTable {
 public:
  SynonymTable() = default;
  explicit SynonymTable(std::map<std::string, std::vector<std::string>> entries)
      : entries_(std::move(entries)) {}

  /// Parses lines of the form `word: syn1, syn2`. Blank lines and lines
  /// starting with '#' are skipped.
  static SynonymTable parse(std::string_view text);
  static SynonymTable load(const std::string& path);
  static SynonymTable builtin();

  const std::vector<std::string>* find(std::string_view word) const;
  const std::map<std::string, std::vector<std::string>>& entries() const { return entries_; }
  bool operator==(const SynonymTable&) const = default;

 private:
  std::map<std::string, std::vector<std::string>> entries_;
};

/// Text of the default table; identical to resources/synonyms.txt.
std::string_view builtin_synonym_text();

/// Zeroes one contiguous band of floor(freq_ratio * F) frequency rows and one
/// band of floor(time_ratio * T) time columns. Ratios must lie in [0, 1).
MelGrid spec_augment(const MelGrid& mel, double freq_ratio, double time_ratio, Rng& rng);

struct TextAugmentProbabilities {
  double synonym = 0.5;
  double permute = 0.5;
  double insert = 0.5;
};

/// Applies, each with its own probability and in this order: insert a synonym
/// of one token, permute the sequence, insert a random vocabulary token. The
/// original tokens are always kept.
TokenSeq augment_text(const TokenSeq& seq, const Vocabulary& vocab, const SynonymTable& synonyms,
                      Rng& rng, const TextAugmentProbabilities& probs = {});

}  // namespace sgim
