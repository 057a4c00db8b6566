#include "sgim/evaluation.hpp"

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "sgim/errors.hpp"
#include "sgim/key_value.hpp"

namespace sgim {

const EvalEntry& EvalReport::entry(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return e;
  throw UsageError("report '" + protocol + "' has no entry '" + name + "'");
}

std::string EvalReport::to_csv() const {
  std::ostringstream os;
  os << "protocol,name,mean,std,count\n";
  for (const auto& e : entries) {
    os << protocol << "," << e.name << "," << format_double(e.mean) << "," << format_double(e.std_dev) << ","
       << e.count << "\n";
  }
  return os.str();
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  os << protocol << " (seed " << seed << ", config " << std::hex << config_hash << std::dec << ")\n";
  for (const auto& e : entries) {
    os << "  " << e.name << ": " << format_double(e.mean);
    if (e.std_dev != 0.0) os << " +/- " << format_double(e.std_dev);
    os << "  [n=" << e.count << "]\n";
  }
  return os.str();
}

namespace {

ad::Array select_rows(const ad::Array& x, const std::vector<std::size_t>& rows) {
  const std::size_t c = x.cols();
  std::vector<double> out;
  out.reserve(rows.size() * c);
  for (auto r : rows) {
    auto s = x.row_span(r);
    out.insert(out.end(), s.begin(), s.end());
  }
  return ad::Array({rows.size(), c}, std::move(out));
}

ad::Array audio_inputs(const Dataset& data, const std::vector<std::size_t>& records) {
  std::vector<MelGrid> mels;
  for (auto i : records) mels.push_back(data.records.at(i).audio);
  return audio_matrix(mels);
}

ad::Array image_inputs(const Dataset& data, const std::vector<std::size_t>& records) {
  std::vector<ImageArray> imgs;
  for (auto i : records) imgs.push_back(data.records.at(i).image);
  return image_matrix(imgs);
}

double accuracy(const std::vector<std::size_t>& pred, const std::vector<std::size_t>& truth) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == truth[i];
  return pred.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(pred.size());
}

EvalEntry mean_std(std::string name, const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  s = v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0;
  return {std::move(name), m, s, v.size()};
}

}  // namespace

std::vector<std::size_t> zero_shot_predict(const ad::Array& audio_embeddings, const ad::Array& class_embeddings) {
  if (class_embeddings.rows() == 0) throw UsageError("zero-shot: empty class set");
  if (audio_embeddings.cols() != class_embeddings.cols()) throw DimensionError("zero-shot: embedding widths differ");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < audio_embeddings.rows(); ++i) {
    std::size_t best = 0;
    double best_score = -2.0;
    for (std::size_t c = 0; c < class_embeddings.rows(); ++c) {
      const double s = cosine(audio_embeddings.row_span(i), class_embeddings.row_span(c));
      if (s > best_score) best = c, best_score = s;
    }
    out.push_back(best);
  }
  return out;
}

EvalReport zero_shot_classify(const Dataset& data, const std::vector<std::size_t>& records,
                              const EncoderParams& audio, const EncoderParams& text) {
  const std::size_t classes = data.manifest.classes;
  if (classes == 0) throw UsageError("zero-shot: empty class set");
  std::vector<TokenSeq> labels;
  for (std::size_t c = 0; c < classes; ++c) labels.push_back(class_label_tokens(data.vocab, c));
  const ad::Array class_emb = embed_rows(text_matrix(labels, data.vocab.size()), text);
  const ad::Array audio_emb = embed_rows(audio_inputs(data, records), audio);
  const auto pred = zero_shot_predict(audio_emb, class_emb);

  EvalReport r;
  r.protocol = "zero-shot";
  std::vector<std::size_t> hit(classes, 0), total(classes, 0);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto c = data.records[records[i]].class_id;
    ++total[c];
    hit[c] += pred[i] == c;
  }
  std::size_t all_hit = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    all_hit += hit[c];
    const double acc = total[c] ? static_cast<double>(hit[c]) / static_cast<double>(total[c]) : 0.0;
    r.entries.push_back({"class:" + class_label(c), acc, 0.0, total[c]});
  }
  r.entries.push_back({"overall", records.empty() ? 0.0 : static_cast<double>(all_hit) / records.size(), 0.0,
                       records.size()});
  return r;
}

std::vector<std::size_t> probe_predict(const ad::Array& train_x, const std::vector<std::size_t>& train_y,
                                       const ad::Array& test_x, std::size_t classes, const ProbeConfig& config) {
  if (classes < 2) throw UsageError("linear probe needs at least 2 classes");
  if (train_x.rows() != train_y.size() || train_x.rows() == 0) throw DimensionError("probe: rows/labels mismatch");
  const std::size_t n = train_x.rows(), d = train_x.cols();
  std::vector<double> onehot(n * classes, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (train_y[i] >= classes) throw UsageError("probe: label out of range");
    onehot[i * classes + train_y[i]] = 1.0;
  }
  std::vector<double> weight(n, 1.0 / static_cast<double>(n));
  if (config.balanced) {
    std::vector<std::size_t> count(classes, 0);
    for (auto c : train_y) ++count[c];
    std::size_t present = 0;
    for (auto c : count) present += c > 0;
    for (std::size_t i = 0; i < n; ++i) weight[i] = 1.0 / static_cast<double>(present * count[train_y[i]]);
  }
  const ad::Var x = ad::constant(train_x);
  const ad::Var y = ad::constant(ad::Array({n, classes}, std::move(onehot)));
  const ad::Var sample_w = ad::constant(ad::Array({1, n}, std::move(weight)));
  ad::Array w = ad::Array::zeros(d, classes), b = ad::Array::zeros(1, classes);
  for (std::size_t e = 0; e < config.epochs; ++e) {
    const ad::Var wv = ad::parameter(w), bv = ad::parameter(b);
    const ad::Var p = ad::row_softmax(ad::add_row(ad::matmul(x, wv), bv), 1.0);
    const ad::Var loss = ad::scale(ad::matmul(sample_w, ad::log(ad::row_sums(ad::mul(p, y)))), -1.0);
    ad::backward(loss);
    auto wd = w.mutable_data();
    auto bd = b.mutable_data();
    for (std::size_t i = 0; i < wd.size(); ++i) wd[i] -= config.lr * wv.grad()[i];
    for (std::size_t i = 0; i < bd.size(); ++i) bd[i] -= config.lr * bv.grad()[i];
  }
  const ad::Array logits = ad::add_row(ad::matmul(ad::constant(test_x), ad::constant(w)), ad::constant(b)).value();
  std::vector<std::size_t> pred;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes; ++c)
      if (logits.at(i, c) > logits.at(i, best)) best = c;
    pred.push_back(best);
  }
  return pred;
}

EvalReport linear_probe(const ad::Array& train_x, const std::vector<std::size_t>& train_y,
                        const ad::Array& test_x, const std::vector<std::size_t>& test_y, std::size_t classes,
                        const ProbeConfig& config) {
  const auto pred = probe_predict(train_x, train_y, test_x, classes, config);
  EvalReport r;
  r.protocol = "linear-probe";
  r.entries.push_back({"overall", accuracy(pred, test_y), 0.0, test_y.size()});
  return r;
}

double cross_video_alignment(const Dataset& data, const std::vector<std::size_t>& records,
                             const EncoderParams& audio, const EncoderParams& image) {
  const ad::Array a = embed_rows(audio_inputs(data, records), audio);
  const ad::Array v = embed_rows(image_inputs(data, records), image);
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (std::size_t j = 0; j < records.size(); ++j) {
      const auto& ri = data.records[records[i]];
      const auto& rj = data.records[records[j]];
      if (ri.class_id != rj.class_id || ri.video_id == rj.video_id) continue;
      acc += cosine(a.row_span(i), v.row_span(j));
      ++n;
    }
  }
  if (n == 0) throw UsageError("cross-video alignment: no same-class cross-video pairs");
  return acc / static_cast<double>(n);
}

double nuisance_leakage(const Dataset& data, const std::vector<std::size_t>& records,
                        const EncoderParams& audio, const LeakageSetup& setup) {
  std::vector<std::size_t> used;
  for (auto i : records)
    if (data.manifest.bias_spec.contains(data.records.at(i).class_id)) used.push_back(i);
  if (used.empty()) throw UsageError("nuisance leakage: no records from biased classes");

  const ImageArray base = synthesize(setup.source, setup.models.generator);
  std::vector<double> deltas;
  std::vector<std::size_t> labels, videos;
  for (auto i : used) {
    const auto& rec = data.records[i];
    const auto res = optimize_latent(setup.source, encode_audio(rec.audio, audio), setup.config, setup.models);
    const ImageArray edit = synthesize(res.w, setup.models.generator);
    for (std::size_t p = 0; p < edit.size(); ++p) deltas.push_back(edit[p] - base[p]);
    labels.push_back(rec.nuisance != 0 ? 1 : 0);
    videos.push_back(rec.video_id);
  }
  const ad::Array x({used.size(), base.size()}, std::move(deltas));
  if (std::set<std::size_t>(labels.begin(), labels.end()).size() < 2) {
    throw UsageError("nuisance leakage: biased classes need both flagged and clean videos");
  }

  std::size_t hit[2] = {0, 0}, total[2] = {0, 0};
  for (auto held : std::set<std::size_t>(videos.begin(), videos.end())) {
    std::vector<std::size_t> tr, te;
    for (std::size_t k = 0; k < used.size(); ++k) (videos[k] == held ? te : tr).push_back(k);
    std::vector<std::size_t> tr_y;
    for (auto k : tr) tr_y.push_back(labels[k]);
    ProbeConfig probe = setup.probe;
    probe.balanced = true;
    const auto pred = probe_predict(select_rows(x, tr), tr_y, select_rows(x, te), 2, probe);
    for (std::size_t m = 0; m < te.size(); ++m) {
      const auto y = labels[te[m]];
      ++total[y];
      hit[y] += pred[m] == y;
    }
  }
  return 0.5 * (static_cast<double>(hit[0]) / total[0] + static_cast<double>(hit[1]) / total[1]);
}

AblationArms train_ablation_arms(const Dataset& data, const std::vector<std::size_t>& pool,
                                 const Teacher& teacher, std::size_t hidden, const TrainConfig& config) {
  const EncoderParams init = init_audio_encoder(data, hidden, teacher.text.output_dim(), config.seed);
  TrainConfig with = config, without = config;
  with.flags.kl_weak = true;
  without.flags.kl_weak = false;
  return {train_audio_encoder(data, pool, teacher, hidden, with, &init).audio,
          train_audio_encoder(data, pool, teacher, hidden, without, &init).audio};
}

EvalReport ablation_report(const Dataset& data, const std::vector<std::size_t>& heldout,
                           const std::vector<std::size_t>& paired, const Teacher& teacher, const AblationArms& arms,
                           const LeakageSetup& leakage) {
  EvalReport r;
  r.protocol = "ablate-weak-loss";
  const std::pair<const char*, const EncoderParams*> each[] = {{"with_kl", &arms.with_kl},
                                                               {"without_kl", &arms.without_kl}};
  for (const auto& [tag, params] : each) {
    const std::string t = tag;
    r.entries.push_back({t + ":zero_shot", zero_shot_classify(data, heldout, *params, teacher.text).entry("overall").mean,
                         0.0, heldout.size()});
    r.entries.push_back({t + ":cross_video_cosine", cross_video_alignment(data, paired, *params, teacher.image), 0.0,
                         paired.size()});
    r.entries.push_back({t + ":nuisance_leakage", nuisance_leakage(data, paired, *params, leakage), 0.0,
                         paired.size()});
  }
  return r;
}

DirectionSample direction_sample(const LatentCode& w_s, const LatentCode& w_a, const LatentCode& w_t) {
  return {cosine(w_s.w.data(), w_a.w.data()), cosine(w_s.w.data(), w_t.w.data()),
          cosine(w_a.w.data(), w_t.w.data())};
}

EvalReport direction_stats(const Dataset& data, const std::vector<std::size_t>& records,
                           const std::vector<std::size_t>& attributes, std::size_t seeds, std::uint64_t seed,
                           const EncoderParams& audio, const EncoderParams& text, const ManipModels& models,
                           const ManipConfig& config) {
  if (seeds < 2) throw UsageError("direction statistics need at least 2 seeds");
  EvalReport r;
  r.protocol = "direction-stats";
  r.seed = seed;
  const std::size_t layers = models.generator.layers(), dim = models.generator.latent_dim();
  for (auto c : attributes) {
    std::vector<std::size_t> clips;
    for (auto i : records)
      if (data.records.at(i).class_id == c) clips.push_back(i);
    if (clips.empty()) throw UsageError("direction statistics: no clip for class " + std::to_string(c));
    const TokenSeq label = class_label_tokens(data.vocab, c);
    std::vector<double> sa, st, at;
    for (std::size_t s = 0; s < seeds; ++s) {
      const LatentCode w_s = sample_source_latent(layers, dim, stage_seed(seed, s));
      const auto& clip = data.records[clips[s % clips.size()]];
      const auto w_a = optimize_latent(w_s, encode_audio(clip.audio, audio), config, models).w;
      const auto w_t = text_guided_latent(w_s, label, data.vocab.size(), text, config, models).w;
      const auto d = direction_sample(w_s, w_a, w_t);
      sa.push_back(d.cos_s_a);
      st.push_back(d.cos_s_t);
      at.push_back(d.cos_a_t);
    }
    const std::string name = class_label(c);
    r.entries.push_back(mean_std(name + ":cos(w_s,w_a)", sa));
    r.entries.push_back(mean_std(name + ":cos(w_s,w_t)", st));
    r.entries.push_back(mean_std(name + ":cos(w_a,w_t)", at));
  }
  return r;
}

}  // namespace sgim
