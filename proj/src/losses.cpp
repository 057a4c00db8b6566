#include "sgim/losses.hpp"

#include "sgim/errors.hpp"
#include "sgim/key_value.hpp"

namespace sgim {

namespace {

void require_pairs(const ad::Var& a, const ad::Var& b, std::size_t min_rows, const char* op) {
  if (a.value().rows() < min_rows) {
    throw UsageError(std::string(op) + ": needs at least " + std::to_string(min_rows) +
                     " rows, got " + std::to_string(a.value().rows()));
  }
  if (!a.value().same_shape(b.value())) {
    throw DimensionError(std::string(op) + ": embedding sets differ in shape " +
                         ad::shape_string(a.value().shape()) + " vs " +
                         ad::shape_string(b.value().shape()));
  }
}

// -(1/N) sum_i log M_ii
ad::Var mean_neg_log_diag(const ad::Var& m) {
  return ad::scale(ad::mean(ad::log(ad::diagonal(m))), -1.0);
}

}  // namespace

ad::Var similarity_matrix(const ad::Var& rows, const ad::Var& cols, double temperature) {
  if (rows.value().rows() == 0) throw UsageError("similarity_matrix: empty embedding set");
  if (!(temperature > 0.0)) throw ParameterError("similarity_matrix: temperature must be positive");
  return ad::row_softmax(ad::matmul(rows, ad::transpose(cols)), temperature);
}

SimilarityMatrix similarity_matrix(const ad::Array& rows, const ad::Array& cols, double temperature) {
  return {similarity_matrix(ad::constant(rows), ad::constant(cols), temperature).value(), temperature};
}

ad::Var info_nce_pair(const ad::Var& a, const ad::Var& b, double temperature) {
  require_pairs(a, b, 2, "info_nce_pair");
  return ad::add(mean_neg_log_diag(similarity_matrix(a, b, temperature)),
                 mean_neg_log_diag(similarity_matrix(b, a, temperature)));
}

ad::Var self_supervised_loss(const ad::Var& audio, const ad::Var& augmented, double temperature) {
  require_pairs(audio, augmented, 2, "self_supervised_loss");
  return ad::add(mean_neg_log_diag(similarity_matrix(audio, augmented, temperature)),
                 mean_neg_log_diag(similarity_matrix(augmented, audio, temperature)));
}

ad::Var weak_kl_loss(const ad::Var& audio, const ad::Var& weak_images, const ad::Var& texts,
                     double temperature, bool full_rows) {
  require_pairs(audio, weak_images, 2, "weak_kl_loss");
  require_pairs(texts, weak_images, 2, "weak_kl_loss");
  // Detach the teacher side: targets are plain values.
  const ad::Var teacher = ad::constant(
      similarity_matrix(ad::constant(texts.value()), ad::constant(weak_images.value()), temperature)
          .value());
  const ad::Var student = similarity_matrix(audio, weak_images, temperature);
  if (!full_rows) {
    return ad::scale(ad::mean(ad::mul(ad::diagonal(teacher), ad::log(ad::diagonal(student)))), -1.0);
  }
  // sum_j p_ij (log p_ij - log q_ij), averaged over rows.
  const std::size_t n = teacher.value().rows();
  const ad::Var log_p = ad::log(teacher);
  const ad::Var kl = ad::mul(teacher, ad::sub(log_p, ad::log(student)));
  return ad::scale(ad::sum(kl), 1.0 / static_cast<double>(n));
}

TotalLoss total_loss(const TrainingBatch& batch, const BoundEncoder& audio, const Teacher& teacher,
                     double temperature, const LossFlags& flags) {
  const auto text_enc = BoundEncoder::bind(teacher.text, false);
  const auto image_enc = BoundEncoder::bind(teacher.image, false);

  const ad::Var a = audio.forward(ad::constant(batch.audio));
  const ad::Var t = text_enc.forward(ad::constant(batch.text));

  std::vector<ad::Var> terms;
  TotalLoss out;
  if (flags.nce_at) {
    auto l = info_nce_pair(a, t, temperature);
    out.breakdown.nce_at = l.item();
    terms.push_back(l);
  }
  if (flags.nce_av) {
    const ad::Var v = image_enc.forward(ad::constant(batch.image));
    auto l = info_nce_pair(a, v, temperature);
    out.breakdown.nce_av = l.item();
    terms.push_back(l);
  }
  if (flags.self_aa) {
    const ad::Var a_hat = audio.forward(ad::constant(batch.audio_augmented));
    auto l = self_supervised_loss(a, a_hat, temperature);
    out.breakdown.self_aa = l.item();
    terms.push_back(l);
  }
  if (flags.kl_weak) {
    const ad::Var v_weak = image_enc.forward(ad::constant(batch.weak_image));
    auto l = weak_kl_loss(a, v_weak, t, temperature, flags.kl_full_rows);
    out.breakdown.kl_weak = l.item();
    terms.push_back(l);
  }
  if (terms.empty()) throw UsageError("total_loss: every component is disabled");
  out.total = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) out.total = ad::add(out.total, terms[i]);
  out.breakdown.total = out.total.item();
  return out;
}

std::string loss_csv_header() { return "epoch,nce_at,nce_av,self_aa,kl_weak,total"; }

std::string loss_csv_row(std::size_t epoch, const LossBreakdown& b) {
  return std::to_string(epoch) + "," + format_double(b.nce_at) + "," + format_double(b.nce_av) + "," +
         format_double(b.self_aa) + "," + format_double(b.kl_weak) + "," + format_double(b.total);
}

}  // namespace sgim
