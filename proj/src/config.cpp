#include "sgim/config.hpp"

#include <sstream>

#include "sgim/errors.hpp"
#include "sgim/key_value.hpp"

namespace sgim {

namespace {

using Field = std::variant<std::uint64_t RunConfig::*, double RunConfig::*, bool RunConfig::*,
                           std::string RunConfig::*>;

struct Key {
  const char* name;
  Field field;
};

#define SGIM_KEY(k) Key{#k, &RunConfig::k}

const std::vector<Key>& registry() {
  static const std::vector<Key> keys{
      SGIM_KEY(seed),
      SGIM_KEY(classes), SGIM_KEY(videos_per_class), SGIM_KEY(records_per_video), SGIM_KEY(freq_bins),
      SGIM_KEY(time_frames), SGIM_KEY(pixels), SGIM_KEY(bias_spec), SGIM_KEY(bias_cooccurrence),
      SGIM_KEY(heldout_videos),
      SGIM_KEY(hidden), SGIM_KEY(embed_dim), SGIM_KEY(temperature), SGIM_KEY(batch), SGIM_KEY(momentum),
      SGIM_KEY(weight_decay), SGIM_KEY(lr_cycle), SGIM_KEY(lr_floor), SGIM_KEY(freq_mask), SGIM_KEY(time_mask),
      SGIM_KEY(augment_text), SGIM_KEY(teacher_lr), SGIM_KEY(teacher_epochs), SGIM_KEY(audio_lr),
      SGIM_KEY(audio_epochs), SGIM_KEY(loss_nce_at), SGIM_KEY(loss_nce_av), SGIM_KEY(loss_self),
      SGIM_KEY(loss_kl), SGIM_KEY(kl_full_rows),
      SGIM_KEY(gen_layers), SGIM_KEY(gen_latent_dim), SGIM_KEY(gen_epochs), SGIM_KEY(gen_lr),
      SGIM_KEY(lambda_reg), SGIM_KEY(lambda_id), SGIM_KEY(manip_steps), SGIM_KEY(step_size),
      SGIM_KEY(adaptive_masking), SGIM_KEY(identity_enabled), SGIM_KEY(gate_ascent), SGIM_KEY(id_hidden),
      SGIM_KEY(id_dim), SGIM_KEY(manip_guidance), SGIM_KEY(manip_record), SGIM_KEY(mix_split),
      SGIM_KEY(interp_alpha),
      SGIM_KEY(probe_epochs), SGIM_KEY(probe_lr), SGIM_KEY(leak_steps), SGIM_KEY(direction_seeds),
      SGIM_KEY(gradcheck_points),
  };
  return keys;
}

#undef SGIM_KEY

const Key* find_key(const std::string& name) {
  for (const auto& k : registry())
    if (name == k.name) return &k;
  return nullptr;
}

std::string render(const RunConfig& c, const Field& f) {
  return std::visit(
      [&](auto ptr) -> std::string {
        const auto& v = c.*ptr;
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, double>) return format_double(v);
        else if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
        else if constexpr (std::is_same_v<T, std::string>) return v;
        else return std::to_string(v);
      },
      f);
}

void assign(RunConfig& c, const Key& k, const std::string& value) {
  std::visit(
      [&](auto ptr) {
        auto& v = c.*ptr;
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, double>) {
          v = parse_double(k.name, value);
        } else if constexpr (std::is_same_v<T, bool>) {
          v = parse_bool(k.name, value);
        } else if constexpr (std::is_same_v<T, std::string>) {
          v = value;
        } else {
          const long long n = parse_int(k.name, value);
          if (n < 0) throw ValidationError(std::string(k.name) + " must be non-negative");
          v = static_cast<std::uint64_t>(n);
        }
      },
      k.field);
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
  return s;
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : registry()) out.emplace_back(k.name);
  return out;
}

std::string RunConfig::to_text() const {
  std::string s;
  for (const auto& k : registry()) s += std::string(k.name) + " = " + render(*this, k.field) + "\n";
  return s;
}

void RunConfig::apply(const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::vector<std::string> bad;
  std::string detail;
  for (const auto& [name, value] : overrides) {
    const Key* k = find_key(name);
    if (!k) {
      bad.push_back(name);
      detail += "; unknown key '" + name + "'";
      continue;
    }
    try {
      assign(*this, *k, value);
    } catch (const Error& e) {
      bad.push_back(name);
      detail += std::string("; ") + e.what();
    }
  }
  if (!bad.empty()) throw ValidationError("invalid config keys: " + join(bad) + detail);
}

RunConfig RunConfig::parse(const std::string& text, const RunConfig& base) {
  RunConfig c = base;
  c.apply(parse_key_values(text, "config"));
  return c;
}

RunConfig RunConfig::parse(const std::string& text) { return parse(text, RunConfig{}); }

void RunConfig::validate() const {
  std::vector<std::string> bad;
  auto need = [&](bool ok, const char* key) {
    if (!ok) bad.emplace_back(key);
  };
  auto unit_open = [](double v) { return v >= 0.0 && v < 1.0; };
  need(classes >= 2, "classes");
  need(videos_per_class >= 2, "videos_per_class");
  need(records_per_video >= 1, "records_per_video");
  need(freq_bins >= 1, "freq_bins");
  need(time_frames >= 1, "time_frames");
  need(pixels >= 1, "pixels");
  need(bias_cooccurrence >= 0.0 && bias_cooccurrence <= 1.0, "bias_cooccurrence");
  need(heldout_videos >= 1 && heldout_videos < videos_per_class, "heldout_videos");
  need(hidden >= 1, "hidden");
  need(embed_dim >= 1, "embed_dim");
  need(temperature > 0.0, "temperature");
  need(batch >= 2, "batch");
  need(unit_open(momentum), "momentum");
  need(weight_decay >= 0.0, "weight_decay");
  need(lr_cycle > 0.0, "lr_cycle");
  need(lr_floor > 0.0 && lr_floor <= 1.0, "lr_floor");
  need(unit_open(freq_mask), "freq_mask");
  need(unit_open(time_mask), "time_mask");
  need(teacher_lr > 0.0, "teacher_lr");
  need(audio_lr > 0.0, "audio_lr");
  need(loss_nce_at || loss_nce_av || loss_self || loss_kl, "loss_kl");
  need(gen_layers >= 2 && gen_layers <= pixels, "gen_layers");
  need(gen_latent_dim >= 1, "gen_latent_dim");
  need(gen_lr > 0.0, "gen_lr");
  need(lambda_reg >= 0.0, "lambda_reg");
  need(lambda_id >= 0.0, "lambda_id");
  need(manip_steps >= 1, "manip_steps");
  need(step_size >= 0.0, "step_size");
  need(id_hidden >= 1, "id_hidden");
  need(id_dim >= 1, "id_dim");
  need(manip_guidance == "audio" || manip_guidance == "text", "manip_guidance");
  need(manip_record < classes * heldout_videos * records_per_video, "manip_record");
  need(mix_split >= 1 && mix_split < gen_layers, "mix_split");
  need(interp_alpha >= 0.0 && interp_alpha <= 1.0, "interp_alpha");
  need(probe_epochs >= 1, "probe_epochs");
  need(probe_lr > 0.0, "probe_lr");
  need(leak_steps >= 1, "leak_steps");
  need(direction_seeds >= 2, "direction_seeds");
  need(gradcheck_points >= 1, "gradcheck_points");
  try {
    manifest();
  } catch (const Error&) {
    bad.emplace_back("bias_spec");
  }
  if (!bad.empty()) throw ValidationError("config violations in keys: " + join(bad));
}

std::uint64_t RunConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_text()) h = (h ^ ch) * 0x100000001b3ULL;
  return h;
}

DatasetManifest RunConfig::manifest() const {
  std::ostringstream os;
  os << "classes = " << classes << "\nvideos_per_class = " << videos_per_class
     << "\nrecords_per_video = " << records_per_video << "\nfreq_bins = " << freq_bins
     << "\ntime_frames = " << time_frames << "\npixels = " << pixels
     << "\nseed = " << stage_seed(*this, Stage::data)
     << "\nbias_cooccurrence = " << format_double(bias_cooccurrence) << "\nbias_spec = " << bias_spec << "\n";
  return DatasetManifest::parse(os.str());
}

namespace {

TrainConfig shared_training(const RunConfig& c) {
  TrainConfig t;
  t.batch = c.batch;
  t.temperature = c.temperature;
  t.momentum = c.momentum;
  t.weight_decay = c.weight_decay;
  t.cycle_epochs = c.lr_cycle;
  t.lr_floor_ratio = c.lr_floor;
  t.freq_mask_ratio = c.freq_mask;
  t.time_mask_ratio = c.time_mask;
  t.augment_text = c.augment_text;
  return t;
}

}  // namespace

TrainConfig RunConfig::teacher_training() const {
  TrainConfig t = shared_training(*this);
  t.lr = teacher_lr;
  t.epochs = teacher_epochs;
  t.seed = stage_seed(*this, Stage::teacher);
  return t;
}

TrainConfig RunConfig::audio_training() const {
  TrainConfig t = shared_training(*this);
  t.lr = audio_lr;
  t.epochs = audio_epochs;
  t.seed = stage_seed(*this, Stage::audio);
  t.flags = {loss_nce_at, loss_nce_av, loss_self, loss_kl, kl_full_rows};
  return t;
}

ManipConfig RunConfig::manipulation() const {
  ManipConfig m;
  m.lambda_reg = lambda_reg;
  m.lambda_id = lambda_id;
  m.steps = manip_steps;
  m.step_size = step_size;
  m.seed = stage_seed(*this, Stage::source);
  m.adaptive_masking = adaptive_masking;
  m.identity_enabled = identity_enabled;
  m.gate_ascent = gate_ascent;
  return m;
}

ProbeConfig RunConfig::probe() const { return {probe_epochs, probe_lr, false}; }

std::uint64_t stage_seed(const RunConfig& config, Stage stage) {
  return stage_seed(config.seed, static_cast<std::uint64_t>(stage));
}

}  // namespace sgim
