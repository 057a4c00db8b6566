#include "sgim/augmentation.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "sgim/errors.hpp"

namespace sgim {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

constexpr std::string_view kBuiltinSynonyms =
    "# word: synonym, synonym\n"
    "ocean: sea\n"
    "wave: surf, breaker\n"
    "heavy: strong\n"
    "rain: shower, drizzle\n"
    "people: crowd\n"
    "laughing: giggling, chuckling\n"
    "baby: infant\n"
    "crying: sobbing, wailing\n"
    "fire: flame, blaze\n"
    "crackling: popping\n"
    "thunder: rumble\n"
    "storm: tempest\n"
    "car: vehicle\n"
    "engine: motor\n"
    "bird: songbird\n"
    "singing: chirping, tweeting\n";

}  // namespace

MelGrid make_mel_grid(std::size_t freq_bins, std::size_t time_frames, std::vector<double> values) {
  if (values.size() != freq_bins * time_frames) {
    throw DimensionError("mel grid expects " + std::to_string(freq_bins * time_frames) +
                         " values, got " + std::to_string(values.size()));
  }
  return MelGrid{freq_bins, time_frames, std::move(values)};
}

// ---------------------------------------------------------------------------

Vocabulary::Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!ids_.emplace(words_[i], static_cast<std::uint32_t>(i)).second) {
      throw UsageError("duplicate vocabulary word '" + words_[i] + "'");
    }
  }
}

std::uint32_t Vocabulary::id(std::string_view word) const {
  auto it = ids_.find(std::string(word));
  if (it == ids_.end()) throw UsageError("unknown word '" + std::string(word) + "'");
  return it->second;
}

const std::string& Vocabulary::word(std::uint32_t id) const {
  if (id >= words_.size()) throw UsageError("token id " + std::to_string(id) + " out of range");
  return words_[id];
}

TokenSeq tokenize(const Vocabulary& vocab, std::string_view text) {
  TokenSeq seq;
  std::istringstream is{std::string(text)};
  std::string w;
  while (is >> w) seq.ids.push_back(vocab.id(w));
  return seq;
}

std::string detokenize(const Vocabulary& vocab, const TokenSeq& seq) {
  std::string out;
  for (auto id : seq.ids) {
    if (!out.empty()) out += ' ';
    out += vocab.word(id);
  }
  return out;
}

// ---------------------------------------------------------------------------

SynonymTable SynonymTable::parse(std::string_view text) {
  std::map<std::string, std::vector<std::string>> entries;
  std::istringstream is{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto colon = t.find(':');
    if (colon == std::string::npos) {
      throw ValidationError("synonym table line " + std::to_string(lineno) + ": missing ':'");
    }
    const std::string word = trim(std::string_view(t).substr(0, colon));
    if (word.empty()) {
      throw ValidationError("synonym table line " + std::to_string(lineno) + ": empty word");
    }
    std::vector<std::string> syns;
    std::istringstream rest(t.substr(colon + 1));
    std::string item;
    while (std::getline(rest, item, ',')) {
      std::string s = trim(item);
      if (!s.empty()) syns.push_back(std::move(s));
    }
    auto& slot = entries[word];
    slot.insert(slot.end(), syns.begin(), syns.end());
  }
  return SynonymTable(std::move(entries));
}

SynonymTable SynonymTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open synonym table '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

SynonymTable SynonymTable::builtin() { return parse(kBuiltinSynonyms); }

std::string_view builtin_synonym_text() { return kBuiltinSynonyms; }

const std::vector<std::string>* SynonymTable::find(std::string_view word) const {
  auto it = entries_.find(std::string(word));
  if (it == entries_.end() || it->second.empty()) return nullptr;
  return &it->second;
}

// ---------------------------------------------------------------------------

MelGrid spec_augment(const MelGrid& mel, double freq_ratio, double time_ratio, Rng& rng) {
  if (!(freq_ratio >= 0.0 && freq_ratio < 1.0) || !(time_ratio >= 0.0 && time_ratio < 1.0)) {
    throw ParameterError("spec_augment: mask ratios must lie in [0, 1)");
  }
  MelGrid out = mel;
  const auto fband = static_cast<std::size_t>(freq_ratio * static_cast<double>(mel.freq_bins));
  const auto tband = static_cast<std::size_t>(time_ratio * static_cast<double>(mel.time_frames));
  if (fband > 0) {
    const std::size_t f0 = rng.below(mel.freq_bins - fband + 1);
    for (std::size_t f = f0; f < f0 + fband; ++f)
      for (std::size_t t = 0; t < mel.time_frames; ++t) out.values[f * mel.time_frames + t] = 0.0;
  }
  if (tband > 0) {
    const std::size_t t0 = rng.below(mel.time_frames - tband + 1);
    for (std::size_t f = 0; f < mel.freq_bins; ++f)
      for (std::size_t t = t0; t < t0 + tband; ++t) out.values[f * mel.time_frames + t] = 0.0;
  }
  return out;
}

TokenSeq augment_text(const TokenSeq& seq, const Vocabulary& vocab, const SynonymTable& synonyms,
                      Rng& rng, const TextAugmentProbabilities& probs) {
  if (seq.ids.empty()) throw UsageError("augment_text: empty token sequence");
  TokenSeq out = seq;

  if (rng.bernoulli(probs.synonym)) {
    std::vector<std::uint32_t> candidates;
    for (auto id : seq.ids) {
      if (const auto* syns = synonyms.find(vocab.word(id))) {
        for (const auto& s : *syns)
          if (vocab.contains(s)) {
            candidates.push_back(id);
            break;
          }
      }
    }
    if (!candidates.empty()) {
      const auto src = candidates[rng.below(candidates.size())];
      std::vector<std::uint32_t> known;
      for (const auto& s : *synonyms.find(vocab.word(src)))
        if (vocab.contains(s)) known.push_back(vocab.id(s));
      const auto syn = known[rng.below(known.size())];
      const auto pos = rng.below(out.ids.size() + 1);
      out.ids.insert(out.ids.begin() + static_cast<std::ptrdiff_t>(pos), syn);
    }
  }
  if (rng.bernoulli(probs.permute)) {
    rng.shuffle(out.ids);
  }
  if (rng.bernoulli(probs.insert)) {
    const auto tok = static_cast<std::uint32_t>(rng.below(vocab.size()));
    const auto pos = rng.below(out.ids.size() + 1);
    out.ids.insert(out.ids.begin() + static_cast<std::ptrdiff_t>(pos), tok);
  }
  return out;
}

}  // namespace sgim
