#pragma once

#include <string>

#include "sgim/autodiff.hpp"
#include "sgim/encoders.hpp"

namespace sgim {

/// Row-stochastic matrix of temperature-scaled softmaxed dot products.
struct SimilarityMatrix {
  ad::Array values;
  double temperature = 0.0;
};

/// Entry (i, j) = exp(r_i . c_j / tau) / sum_k exp(r_i . c_k / tau).
ad::Var similarity_matrix(const ad::Var& rows, const ad::Var& cols, double temperature);
SimilarityMatrix similarity_matrix(const ad::Array& rows, const ad::Array& cols, double temperature);

/// Symmetric InfoNCE: (1/N) sum_i [-log M^{A->B}_ii - log M^{B->A}_ii].
ad::Var info_nce_pair(const ad::Var& a, const ad::Var& b, double temperature);

/// InfoNCE between audio and its augmented view. Same form as info_nce_pair,
/// kept separate so logs report it on its own.
ad::Var self_supervised_loss(const ad::Var& audio, const ad::Var& augmented, double temperature);

/// Distillation onto diagonals: (1/N) sum_i -M^{t->v~}_ii log M^{a->v~}_ii.
/// The teacher matrix is computed from constants and never receives a
/// gradient. With full_rows set, the row-wise KL(M^{t->v~}_i || M^{a->v~}_i)
/// averaged over rows is used instead.
ad::Var weak_kl_loss(const ad::Var& audio, const ad::Var& weak_images, const ad::Var& texts,
                     double temperature, bool full_rows = false);

struct LossBreakdown {
  double nce_at = 0.0;
  double nce_av = 0.0;
  double self_aa = 0.0;
  double kl_weak = 0.0;
  double total = 0.0;
};

/// Which components enter the total; disabling one is an ablation.
struct LossFlags {
  bool nce_at = true;
  bool nce_av = true;
  bool self_aa = true;
  bool kl_weak = true;
  bool kl_full_rows = false;
};

/// Inputs of one training step: N rows per modality.
struct TrainingBatch {
  ad::Array audio;            // x_a
  ad::Array audio_augmented;  // x^_a
  ad::Array text;             // x_t (bag of tokens)
  ad::Array image;            // x_v
  ad::Array weak_image;       // x~_v
};

struct TotalLoss {
  ad::Var total;
  LossBreakdown breakdown;
};

/// Unweighted sum of the enabled components. The audio encoder is whatever
/// `audio` is bound as; the teacher is always frozen.
TotalLoss total_loss(const TrainingBatch& batch, const BoundEncoder& audio, const Teacher& teacher,
                     double temperature, const LossFlags& flags = {});

/// `epoch,nce_at,nce_av,self_aa,kl_weak,total`
std::string loss_csv_header();
std::string loss_csv_row(std::size_t epoch, const LossBreakdown& b);

}  // namespace sgim
