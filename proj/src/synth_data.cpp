#include "sgim/synth_data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>

#include "sgim/binary_io.hpp"
#include "sgim/errors.hpp"
#include "sgim/key_value.hpp"

namespace sgim {

namespace {

constexpr const char* kLabels[] = {"ocean wave",   "heavy rain",     "people laughing",
                                   "baby crying",  "fire crackling", "thunder storm",
                                   "car engine",   "bird singing"};
constexpr std::size_t kNumLabels = std::size(kLabels);
constexpr const char* kFillers[] = {"sound", "noise", "loud", "soft", "distant", "outdoor"};

// Generation amplitudes.
constexpr double kAudioTemplateScale = 1.0;
constexpr double kAudioVideoOffset = 0.5;
constexpr double kAudioSignature = 0.6;
constexpr double kAudioNoise = 0.3;
constexpr double kImageVideoOffset = 1.0;
constexpr double kImageNuisance = 3.0;
constexpr double kImageNoise = 0.2;
constexpr double kIntensityLo = 0.2;
constexpr double kIntensityHi = 1.0;

constexpr char kMagic[] = "TMD1";
constexpr std::uint32_t kPad = 0xFFFFFFFFu;

std::vector<double> normal_vector(Rng& rng, std::size_t n, double scale) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

// A localized bar pattern (the "eyeglasses" of the desk dataset).
std::vector<double> nuisance_image(std::uint32_t pattern, std::size_t pixels) {
  const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(pixels))));
  std::vector<double> img(pixels, 0.0);
  const std::size_t row = (pattern * 2) % side;
  for (std::size_t c = 0; c < side; ++c) {
    if (side * side == pixels) {
      img[row * side + c] = (c % 3 == 1) ? -1.0 : 1.0;
    } else {
      img[(row * side + c) % pixels] = 1.0;
    }
  }
  return img;
}

}  // namespace

// ---------------------------------------------------------------------------
// Manifest

void DatasetManifest::validate() const {
  std::vector<std::string> bad;
  if (classes < 1) bad.push_back("classes");
  if (videos_per_class < 1) bad.push_back("videos_per_class");
  if (records_per_video < 1) bad.push_back("records_per_video");
  if (freq_bins < 1) bad.push_back("freq_bins");
  if (time_frames < 1) bad.push_back("time_frames");
  if (pixels < 1) bad.push_back("pixels");
  if (!(bias_cooccurrence >= 0.0 && bias_cooccurrence <= 1.0)) bad.push_back("bias_cooccurrence");
  for (auto [c, p] : bias_spec) {
    if (c >= classes || p == 0) {
      bad.push_back("bias_spec");
      break;
    }
  }
  if (!bad.empty()) {
    std::string msg = "invalid manifest keys:";
    for (const auto& k : bad) msg += " " + k;
    throw ValidationError(msg);
  }
}

std::string DatasetManifest::to_text() const {
  std::ostringstream os;
  os << "classes = " << classes << "\n"
     << "videos_per_class = " << videos_per_class << "\n"
     << "records_per_video = " << records_per_video << "\n"
     << "freq_bins = " << freq_bins << "\n"
     << "time_frames = " << time_frames << "\n"
     << "pixels = " << pixels << "\n"
     << "seed = " << seed << "\n"
     << "bias_cooccurrence = " << format_double(bias_cooccurrence) << "\n"
     << "bias_spec = ";
  bool first = true;
  for (auto [c, p] : bias_spec) {
    os << (first ? "" : ",") << c << ":" << p;
    first = false;
  }
  os << "\n";
  return os.str();
}

DatasetManifest DatasetManifest::parse(const std::string& text) {
  DatasetManifest m;
  m.bias_spec.clear();
  for (const auto& [k, v] : parse_key_values(text, "manifest")) {
    if (k == "classes") m.classes = static_cast<std::size_t>(parse_int(k, v));
    else if (k == "videos_per_class") m.videos_per_class = static_cast<std::size_t>(parse_int(k, v));
    else if (k == "records_per_video") m.records_per_video = static_cast<std::size_t>(parse_int(k, v));
    else if (k == "freq_bins") m.freq_bins = static_cast<std::size_t>(parse_int(k, v));
    else if (k == "time_frames") m.time_frames = static_cast<std::size_t>(parse_int(k, v));
    else if (k == "pixels") m.pixels = static_cast<std::size_t>(parse_int(k, v));
    else if (k == "seed") m.seed = static_cast<std::uint64_t>(parse_int(k, v));
    else if (k == "bias_cooccurrence") m.bias_cooccurrence = parse_double(k, v);
    else if (k == "bias_spec") {
      std::istringstream is(v);
      std::string item;
      while (std::getline(is, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw ValidationError("bias_spec entry '" + item + "' lacks ':'");
        m.bias_spec[static_cast<std::uint32_t>(parse_int(k, item.substr(0, colon)))] =
            static_cast<std::uint32_t>(parse_int(k, item.substr(colon + 1)));
      }
    } else {
      throw ValidationError("unknown manifest key '" + k + "'");
    }
  }
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Labels and vocabulary

std::string class_label(std::size_t class_id) {
  if (class_id < kNumLabels) return kLabels[class_id];
  return "tone" + std::to_string(class_id) + " sound";
}

TokenSeq class_label_tokens(const Vocabulary& vocab, std::size_t class_id) {
  return tokenize(vocab, class_label(class_id));
}

Vocabulary build_vocabulary(std::size_t classes) {
  std::vector<std::string> words;
  std::set<std::string> seen;
  auto push = [&](const std::string& w) {
    if (seen.insert(w).second) words.push_back(w);
  };
  for (std::size_t c = 0; c < classes; ++c) {
    std::istringstream is(class_label(c));
    std::string w;
    while (is >> w) push(w);
  }
  const auto table = SynonymTable::builtin();
  for (std::size_t c = 0; c < classes; ++c) {
    std::istringstream is(class_label(c));
    std::string w;
    while (is >> w)
      if (const auto* syns = table.find(w))
        for (const auto& s : *syns) push(s);
  }
  for (const char* f : kFillers) push(f);
  return Vocabulary(std::move(words));
}

// ---------------------------------------------------------------------------
// Generation

Dataset generate_dataset(const DatasetManifest& manifest) {
  manifest.validate();
  Rng rng(manifest.seed);
  const std::size_t adim = manifest.freq_bins * manifest.time_frames;
  const std::size_t pdim = manifest.pixels;

  Dataset data;
  data.manifest = manifest;
  data.vocab = build_vocabulary(manifest.classes);

  std::vector<std::vector<double>> audio_tpl, image_tpl;
  for (std::size_t c = 0; c < manifest.classes; ++c) {
    audio_tpl.push_back(normal_vector(rng, adim, kAudioTemplateScale));
    image_tpl.push_back(normal_vector(rng, pdim, 1.0));
  }
  // Audio signature per nuisance pattern: the audible trace of the recording
  // condition that also produces the visual pattern.
  std::map<std::uint32_t, std::vector<double>> signature;
  for (auto [c, p] : manifest.bias_spec) {
    if (!signature.contains(p)) signature[p] = normal_vector(rng, adim, 1.0);
  }

  std::uint32_t video_id = 0;
  for (std::size_t c = 0; c < manifest.classes; ++c) {
    // Exactly round(cooccurrence * V) of a biased class's videos carry the pattern.
    std::vector<std::uint32_t> flags(manifest.videos_per_class, 0);
    if (auto it = manifest.bias_spec.find(static_cast<std::uint32_t>(c)); it != manifest.bias_spec.end()) {
      const auto n_flag = static_cast<std::size_t>(
          std::lround(manifest.bias_cooccurrence * static_cast<double>(manifest.videos_per_class)));
      for (std::size_t v = 0; v < n_flag; ++v) flags[v] = it->second;
      rng.shuffle(flags);
    }
    const TokenSeq label = class_label_tokens(data.vocab, c);
    for (std::size_t v = 0; v < manifest.videos_per_class; ++v, ++video_id) {
      const auto audio_off = normal_vector(rng, adim, kAudioVideoOffset);
      const auto image_off = normal_vector(rng, pdim, kImageVideoOffset);
      const std::uint32_t flag = flags[v];
      const auto pattern = flag ? nuisance_image(flag, pdim) : std::vector<double>(pdim, 0.0);
      for (std::size_t r = 0; r < manifest.records_per_video; ++r) {
        TriModalRecord rec;
        rec.class_id = static_cast<std::uint32_t>(c);
        rec.video_id = video_id;
        rec.nuisance = flag;
        rec.intensity = rng.uniform(kIntensityLo, kIntensityHi);
        std::vector<double> audio(adim);
        for (std::size_t i = 0; i < adim; ++i) {
          audio[i] = rec.intensity * audio_tpl[c][i] + audio_off[i] + kAudioNoise * rng.normal();
          if (flag) audio[i] += kAudioSignature * signature[flag][i];
        }
        rec.audio = make_mel_grid(manifest.freq_bins, manifest.time_frames, std::move(audio));
        rec.image.resize(pdim);
        for (std::size_t i = 0; i < pdim; ++i) {
          rec.image[i] = image_tpl[c][i] + image_off[i] + kImageNuisance * pattern[i] +
                         kImageNoise * rng.normal();
        }
        rec.text = label;
        data.records.push_back(std::move(rec));
      }
    }
  }
  return data;
}

VideoSplit split_by_video(const Dataset& data, std::size_t heldout_videos_per_class) {
  const auto& m = data.manifest;
  if (heldout_videos_per_class >= m.videos_per_class) {
    throw UsageError("held-out videos per class must leave at least one training video");
  }
  VideoSplit split;
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const std::size_t local = data.records[i].video_id % m.videos_per_class;
    (local + heldout_videos_per_class >= m.videos_per_class ? split.heldout : split.train).push_back(i);
  }
  return split;
}

Minibatch sample_minibatch(const Dataset& data, const std::vector<std::size_t>& pool, std::size_t n,
                           Rng& rng, double freq_ratio, double time_ratio) {
  if (n < 2) throw UsageError("minibatch size must be at least 2");
  if (n > pool.size()) {
    throw UsageError("minibatch size " + std::to_string(n) + " exceeds pool of " +
                     std::to_string(pool.size()));
  }
  // Partial Fisher-Yates over a copy of the pool.
  std::vector<std::size_t> idx = pool;
  for (std::size_t i = 0; i < n; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
  idx.resize(n);

  Minibatch batch;
  batch.indices = idx;
  for (auto i : idx) {
    batch.audio.push_back(data.records[i].audio);
    batch.audio_augmented.push_back(spec_augment(data.records[i].audio, freq_ratio, time_ratio, rng));
  }
  return batch;
}

std::size_t sample_weak_pair(const Dataset& data, const std::vector<std::size_t>& pool,
                             std::size_t record, Rng& rng) {
  const auto& anchor = data.records.at(record);
  std::vector<std::size_t> candidates;
  std::vector<std::size_t> same_video;
  for (auto i : pool) {
    const auto& r = data.records[i];
    if (r.class_id != anchor.class_id) continue;
    (r.video_id != anchor.video_id ? candidates : same_video).push_back(i);
  }
  if (candidates.empty()) {
    std::cerr << "warning: class " << anchor.class_id
              << " has a single video; weak pair falls back to the same video\n";
    if (same_video.empty()) return record;
    return same_video[rng.below(same_video.size())];
  }
  return candidates[rng.below(candidates.size())];
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

void write_header(io::ByteWriter& w, std::size_t count, std::initializer_list<std::size_t> dims) {
  w.bytes(std::string_view(kMagic, 4));
  w.u32(static_cast<std::uint32_t>(count));
  w.u32(static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) w.u32(static_cast<std::uint32_t>(d));
}

std::vector<std::size_t> read_header(io::ByteReader& r, std::size_t expect_count, std::size_t ndims) {
  r.expect_magic(std::string_view(kMagic, 4));
  const std::size_t count = r.u32();
  if (count != expect_count) throw IoError("record count mismatch between dataset files");
  const std::size_t nd = r.u32();
  if (nd != ndims) throw IoError("unexpected dimension count in dataset file");
  std::vector<std::size_t> dims(nd);
  for (auto& d : dims) d = r.u32();
  return dims;
}

}  // namespace

void save_dataset(const Dataset& data, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const auto& m = data.manifest;
  const std::size_t n = data.records.size();
  io::write_file(dir + "/manifest.txt", m.to_text() + "records = " + std::to_string(n) + "\n");

  io::ByteWriter audio;
  write_header(audio, n, {m.freq_bins, m.time_frames});
  for (const auto& r : data.records)
    for (double v : r.audio.values) audio.f64(v);
  io::write_file(dir + "/audio.tmd", audio.buffer());

  std::size_t max_len = 0;
  for (const auto& r : data.records) max_len = std::max(max_len, r.text.ids.size());
  io::ByteWriter text;
  write_header(text, n, {max_len});
  for (const auto& r : data.records) {
    for (std::size_t i = 0; i < max_len; ++i) text.u32(i < r.text.ids.size() ? r.text.ids[i] : kPad);
  }
  io::write_file(dir + "/text.tmd", text.buffer());

  io::ByteWriter image;
  write_header(image, n, {m.pixels});
  for (const auto& r : data.records)
    for (double v : r.image) image.f64(v);
  io::write_file(dir + "/image.tmd", image.buffer());

  // Per record: class id, video id, nuisance id (u32) and intensity (f64).
  io::ByteWriter meta;
  write_header(meta, n, {4});
  for (const auto& r : data.records) {
    meta.u32(r.class_id);
    meta.u32(r.video_id);
    meta.u32(r.nuisance);
    meta.f64(r.intensity);
  }
  io::write_file(dir + "/meta.tmd", meta.buffer());
}

Dataset load_dataset(const std::string& dir) {
  std::string manifest_text = io::read_file(dir + "/manifest.txt");
  // "records" is informational; strip it before manifest parsing.
  std::size_t count = 0;
  std::string filtered;
  for (const auto& [k, v] : parse_key_values(manifest_text, dir + "/manifest.txt")) {
    if (k == "records") count = static_cast<std::size_t>(parse_int(k, v));
    else filtered += k + " = " + v + "\n";
  }
  Dataset data;
  data.manifest = DatasetManifest::parse(filtered);
  data.vocab = build_vocabulary(data.manifest.classes);
  const auto& m = data.manifest;
  data.records.resize(count);

  io::ByteReader audio(io::read_file(dir + "/audio.tmd"), dir + "/audio.tmd");
  auto adims = read_header(audio, count, 2);
  if (adims[0] != m.freq_bins || adims[1] != m.time_frames) throw IoError("audio dims disagree with manifest");
  for (auto& r : data.records) {
    std::vector<double> v(m.freq_bins * m.time_frames);
    for (double& x : v) x = audio.f64();
    r.audio = make_mel_grid(m.freq_bins, m.time_frames, std::move(v));
  }
  audio.expect_end();

  io::ByteReader text(io::read_file(dir + "/text.tmd"), dir + "/text.tmd");
  const std::size_t max_len = read_header(text, count, 1)[0];
  for (auto& r : data.records) {
    for (std::size_t i = 0; i < max_len; ++i) {
      const auto id = text.u32();
      if (id == kPad) continue;
      if (id >= data.vocab.size()) throw IoError("token id out of vocabulary range");
      r.text.ids.push_back(id);
    }
  }
  text.expect_end();

  io::ByteReader image(io::read_file(dir + "/image.tmd"), dir + "/image.tmd");
  if (read_header(image, count, 1)[0] != m.pixels) throw IoError("image dims disagree with manifest");
  for (auto& r : data.records) {
    r.image.resize(m.pixels);
    for (double& x : r.image) x = image.f64();
  }
  image.expect_end();

  io::ByteReader meta(io::read_file(dir + "/meta.tmd"), dir + "/meta.tmd");
  read_header(meta, count, 1);
  for (auto& r : data.records) {
    r.class_id = meta.u32();
    r.video_id = meta.u32();
    r.nuisance = meta.u32();
    r.intensity = meta.f64();
    if (r.class_id >= m.classes) throw IoError("class id out of range");
  }
  meta.expect_end();
  return data;
}

}  // namespace sgim
