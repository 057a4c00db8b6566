#include "sgim/pipeline.hpp"

#include <filesystem>

#include "sgim/binary_io.hpp"
#include "sgim/errors.hpp"
#include "sgim/key_value.hpp"

namespace sgim {

namespace fs = std::filesystem;

namespace {

std::vector<MelGrid> mels_of(const Dataset& data, const std::vector<std::size_t>& idx) {
  std::vector<MelGrid> out;
  for (auto i : idx) out.push_back(data.records.at(i).audio);
  return out;
}

std::vector<std::size_t> labels_of(const Dataset& data, const std::vector<std::size_t>& idx) {
  std::vector<std::size_t> out;
  for (auto i : idx) out.push_back(data.records.at(i).class_id);
  return out;
}

std::vector<std::size_t> all_records(const Dataset& data) {
  std::vector<std::size_t> out(data.records.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
  return out;
}

void save_latent(const std::string& path, const Checkpoint& base, const LatentCode& w,
                 const GateVector* gate = nullptr) {
  Checkpoint c = base;
  c.put("latent", w.w);
  if (gate) c.put("gate_logits", ad::Array::row(gate->logits));
  c.save(path);
}

}  // namespace

LatentCode load_latent(const std::string& path) { return LatentCode{Checkpoint::load(path).get("latent")}; }

Pipeline::Pipeline(RunConfig config, std::string run_dir) : config_(std::move(config)), dir_(std::move(run_dir)) {
  config_.validate();
}

std::string Pipeline::path(const std::string& relative) const { return (fs::path(dir_) / relative).string(); }

std::string Pipeline::stage_dir(const std::string& name) const {
  const std::string d = path(name);
  std::error_code ec;
  fs::create_directories(d, ec);
  if (ec) throw IoError("cannot create '" + d + "': " + ec.message());
  io::write_file(d + "/config.txt", config_.to_text());
  return d;
}

Dataset Pipeline::load_data() const {
  if (!fs::exists(path("data/manifest.txt"))) throw IoError("missing dataset at '" + path("data") + "'");
  return load_dataset(path("data"));
}

Checkpoint Pipeline::load_checkpoint(const std::string& relative) const { return Checkpoint::load(path(relative)); }

Checkpoint Pipeline::new_checkpoint() const {
  Checkpoint c;
  c.seed = config_.seed;
  c.config_text = config_.to_text();
  return c;
}

Teacher Pipeline::load_teacher() const {
  const Checkpoint c = load_checkpoint("teacher/teacher.ckpt");
  return {get_encoder(c, "text"), get_encoder(c, "image")};
}

void Pipeline::write_report(const std::string& dir, const EvalReport& r) const {
  io::write_file(dir + "/report.csv", r.to_csv());
  io::write_file(dir + "/report.txt", r.to_text());
}

void Pipeline::gen_data() const {
  const std::string d = stage_dir("data");
  save_dataset(generate_dataset(config_.manifest()), d);
}

void Pipeline::pretrain_teacher() const {
  const Dataset data = load_data();
  const auto split = split_by_video(data, config_.heldout_videos);
  const auto t = sgim::pretrain_teacher(data, split.train, config_.hidden, config_.embed_dim,
                                        config_.teacher_training());
  const std::string d = stage_dir("teacher");
  Checkpoint c = new_checkpoint();
  put_encoder(c, "text", t.teacher.text);
  put_encoder(c, "image", t.teacher.image);
  c.save(d + "/teacher.ckpt");
  std::string log = "epoch,loss\n";
  for (std::size_t e = 0; e < t.epoch_loss.size(); ++e) log += std::to_string(e) + "," + format_double(t.epoch_loss[e]) + "\n";
  io::write_file(d + "/teacher_log.csv", log);
}

void Pipeline::fit_generator() const {
  const Dataset data = load_data();
  const auto split = split_by_video(data, config_.heldout_videos);
  std::vector<ImageArray> images;
  for (auto i : split.train) images.push_back(data.records[i].image);
  const auto fit = fit_generator_to_dataset(images, config_.gen_layers, config_.gen_latent_dim, config_.gen_epochs,
                                            config_.gen_lr, stage_seed(config_, Stage::generator));
  const auto identity =
      IdentityExtractor::create(data.image_dim(), config_.id_hidden, config_.id_dim, stage_seed(config_, Stage::identity));
  const std::string d = stage_dir("generator");
  Checkpoint c = new_checkpoint();
  put_generator(c, fit.params);
  put_identity(c, identity);
  c.save(d + "/generator.ckpt");
  std::string log = "epoch,mse\n";
  for (std::size_t e = 0; e < fit.mse_log.size(); ++e) log += std::to_string(e) + "," + format_double(fit.mse_log[e]) + "\n";
  io::write_file(d + "/fit_log.csv", log);
  io::write_file(d + "/reconstruction.pgm", format_pgm(synthesize(fit.latents.front(), fit.params), fit.params.side));
  io::write_file(d + "/target.pgm", format_pgm(images.front(), fit.params.side));
}

void Pipeline::train_audio() const {
  const Dataset data = load_data();
  const Teacher teacher = load_teacher();
  const auto split = split_by_video(data, config_.heldout_videos);
  const auto run = train_audio_encoder(data, split.train, teacher, config_.hidden, config_.audio_training());
  const std::string d = stage_dir("audio");
  Checkpoint c = new_checkpoint();
  put_encoder(c, "audio", run.audio);
  c.save(d + "/audio.ckpt");
  std::string log = loss_csv_header() + "\n";
  for (std::size_t e = 0; e < run.epoch_log.size(); ++e) log += loss_csv_row(e, run.epoch_log[e]) + "\n";
  io::write_file(d + "/train_log.csv", log);
}

ManipResult Pipeline::manipulate() const {
  const Dataset data = load_data();
  const Teacher teacher = load_teacher();
  const Checkpoint gen = load_checkpoint("generator/generator.ckpt");
  const GeneratorParams g = get_generator(gen);
  const IdentityExtractor identity = get_identity(gen);
  const ManipModels models{g, teacher.image, identity};
  const auto split = split_by_video(data, config_.heldout_videos);
  const auto& rec = data.records.at(split.heldout.at(config_.manip_record));
  const ManipConfig mc = config_.manipulation();
  const LatentCode source = sample_source_latent(g.layers(), g.latent_dim(), mc.seed);

  ManipResult res;
  if (config_.manip_guidance == "audio") {
    const EncoderParams audio = get_encoder(load_checkpoint("audio/audio.ckpt"), "audio");
    res = optimize_latent(source, encode_audio(rec.audio, audio), mc, models);
  } else {
    res = text_guided_latent(source, class_label_tokens(data.vocab, rec.class_id), data.vocab.size(), teacher.text,
                             mc, models);
  }

  const std::string d = stage_dir("manipulate-" + config_.manip_guidance);
  save_latent(d + "/latent.ckpt", new_checkpoint(), res.w, &res.gate);
  save_latent(d + "/source.ckpt", new_checkpoint(), source);
  std::string csv = trajectory_csv_header() + "\n";
  for (const auto& s : res.trajectory) csv += trajectory_csv_row(s) + "\n";
  io::write_file(d + "/trajectory.csv", csv);
  io::write_file(d + "/before.pgm", format_pgm(synthesize(source, g), g.side));
  io::write_file(d + "/after.pgm", format_pgm(synthesize(res.w, g), g.side));
  const auto& last = res.trajectory.back().terms;
  std::string summary = "guidance = " + config_.manip_guidance + "\nclass = " + class_label(rec.class_id) +
                        "\nhinge = " + format_double(last.hinge) + "\nreg = " + format_double(last.reg) +
                        "\nid = " + format_double(last.id) + "\ntotal = " + format_double(last.total) +
                        "\nidentity_cosine = " + format_double(identity_cosine(source, res.w, models)) + "\n";
  io::write_file(d + "/summary.txt", summary);
  return res;
}

LatentCode Pipeline::interpolate(const std::string& a_path, const std::string& b_path) const {
  const LatentCode a = load_latent(a_path.empty() ? path("manipulate-audio/latent.ckpt") : a_path);
  const LatentCode b = load_latent(b_path.empty() ? path("manipulate-text/latent.ckpt") : b_path);
  const GeneratorParams g = get_generator(load_checkpoint("generator/generator.ckpt"));
  const LatentCode w = sgim::interpolate(a, b, config_.interp_alpha);
  const std::string d = stage_dir("interpolate");
  save_latent(d + "/latent.ckpt", new_checkpoint(), w);
  io::write_file(d + "/image.pgm", format_pgm(synthesize(w, g), g.side));
  return w;
}

LatentCode Pipeline::mix(const std::string& a_path, const std::string& b_path) const {
  const LatentCode a = load_latent(a_path.empty() ? path("manipulate-audio/latent.ckpt") : a_path);
  const LatentCode b = load_latent(b_path.empty() ? path("manipulate-text/latent.ckpt") : b_path);
  const GeneratorParams g = get_generator(load_checkpoint("generator/generator.ckpt"));
  const LatentCode w = style_mix(a, b, config_.mix_split);
  const std::string d = stage_dir("mix");
  save_latent(d + "/latent.ckpt", new_checkpoint(), w);
  io::write_file(d + "/image.pgm", format_pgm(synthesize(w, g), g.side));
  return w;
}

EvalReport Pipeline::eval_zeroshot() const {
  const Dataset data = load_data();
  const Teacher teacher = load_teacher();
  const EncoderParams audio = get_encoder(load_checkpoint("audio/audio.ckpt"), "audio");
  const auto split = split_by_video(data, config_.heldout_videos);
  EvalReport r = zero_shot_classify(data, split.heldout, audio, teacher.text);
  const EncoderParams init =
      init_audio_encoder(data, config_.hidden, config_.embed_dim, config_.audio_training().seed);
  EvalEntry base = zero_shot_classify(data, split.heldout, init, teacher.text).entry("overall");
  base.name = "seed_init:overall";
  r.entries.push_back(base);
  r.seed = config_.seed;
  r.config_hash = config_.hash();
  write_report(stage_dir("eval-zeroshot"), r);
  return r;
}

EvalReport Pipeline::eval_probe() const {
  const Dataset data = load_data();
  const Teacher teacher = load_teacher();
  const EncoderParams audio = get_encoder(load_checkpoint("audio/audio.ckpt"), "audio");
  const auto split = split_by_video(data, config_.heldout_videos);
  const auto train_x = embed_rows(audio_matrix(mels_of(data, split.train)), audio);
  const auto test_x = embed_rows(audio_matrix(mels_of(data, split.heldout)), audio);
  EvalReport r = linear_probe(train_x, labels_of(data, split.train), test_x, labels_of(data, split.heldout),
                              data.manifest.classes, config_.probe());
  EvalEntry zs = zero_shot_classify(data, split.heldout, audio, teacher.text).entry("overall");
  zs.name = "zero_shot:overall";
  r.entries.push_back(zs);
  r.seed = config_.seed;
  r.config_hash = config_.hash();
  write_report(stage_dir("eval-probe"), r);
  return r;
}

EvalReport Pipeline::ablate() const {
  const Dataset data = load_data();
  const Teacher teacher = load_teacher();
  const Checkpoint gen = load_checkpoint("generator/generator.ckpt");
  const GeneratorParams g = get_generator(gen);
  const IdentityExtractor identity = get_identity(gen);
  const ManipModels models{g, teacher.image, identity};
  const auto split = split_by_video(data, config_.heldout_videos);

  const AblationArms arms = train_ablation_arms(data, split.train, teacher, config_.hidden, config_.audio_training());
  ManipConfig mc = config_.manipulation();
  mc.steps = config_.leak_steps;
  const LeakageSetup leak{models, sample_source_latent(g.layers(), g.latent_dim(), mc.seed), mc, config_.probe()};
  EvalReport r = ablation_report(data, split.heldout, all_records(data), teacher, arms, leak);
  r.seed = config_.seed;
  r.config_hash = config_.hash();

  const std::string d = stage_dir("ablate");
  Checkpoint c = new_checkpoint();
  put_encoder(c, "with_kl", arms.with_kl);
  put_encoder(c, "without_kl", arms.without_kl);
  c.save(d + "/arms.ckpt");
  write_report(d, r);
  return r;
}

EvalReport Pipeline::direction_stats() const {
  const Dataset data = load_data();
  const Teacher teacher = load_teacher();
  const Checkpoint gen = load_checkpoint("generator/generator.ckpt");
  const GeneratorParams g = get_generator(gen);
  const IdentityExtractor identity = get_identity(gen);
  const EncoderParams audio = get_encoder(load_checkpoint("audio/audio.ckpt"), "audio");
  const ManipModels models{g, teacher.image, identity};
  const auto split = split_by_video(data, config_.heldout_videos);
  std::vector<std::size_t> classes(data.manifest.classes);
  for (std::size_t c = 0; c < classes.size(); ++c) classes[c] = c;
  EvalReport r = sgim::direction_stats(data, split.heldout, classes, config_.direction_seeds,
                                       stage_seed(config_, Stage::direction), audio, teacher.text, models,
                                       config_.manipulation());
  r.config_hash = config_.hash();
  write_report(stage_dir("direction-stats"), r);
  return r;
}

std::vector<GradCheckResult> Pipeline::gradcheck() const {
  const auto results = run_all_gradchecks(config_.gradcheck_points, config_.seed);
  std::string csv = "name,points,worst_relative_error,pass\n";
  for (const auto& r : results)
    csv += r.name + "," + std::to_string(r.points) + "," + format_double(r.worst) + "," + (r.pass ? "1" : "0") + "\n";
  io::write_file(stage_dir("gradcheck") + "/report.csv", csv);
  return results;
}

void Pipeline::run_core() const {
  gen_data();
  pretrain_teacher();
  fit_generator();
  train_audio();
  manipulate();
  eval_zeroshot();
}

}  // namespace sgim
