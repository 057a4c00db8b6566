#pragma once

#include <string>
#include <vector>

#include "sgim/config.hpp"
#include "sgim/evaluation.hpp"
#include "sgim/gradcheck.hpp"
#include "sgim/manipulation.hpp"
#include "sgim/persistence.hpp"

namespace sgim {

/// Stage runner over one run directory. Every stage reads its inputs from
/// earlier stages' outputs, writes into its own subdirectory, and echoes the
/// effective config there as config.txt.
///
///   data/            gen_data
///   teacher/         pretrain_teacher
///   generator/       fit_generator (generator + identity extractor)
///   audio/           train_audio
///   manipulate-<g>/  manipulate, g = audio | text
///   interpolate/     interpolate
///   mix/             mix
///   eval-zeroshot/, eval-probe/, ablate/, direction-stats/, gradcheck/
class Pipeline {
 public:
  Pipeline(RunConfig config, std::string run_dir);

  const RunConfig& config() const { return config_; }
  std::string path(const std::string& relative) const;

  void gen_data() const;
  void pretrain_teacher() const;
  void fit_generator() const;
  void train_audio() const;
  ManipResult manipulate() const;
  /// Defaults read the audio and text manipulation latents.
  LatentCode interpolate(const std::string& a_path = "", const std::string& b_path = "") const;
  LatentCode mix(const std::string& a_path = "", const std::string& b_path = "") const;
  EvalReport eval_zeroshot() const;
  EvalReport eval_probe() const;
  EvalReport ablate() const;
  EvalReport direction_stats() const;
  std::vector<GradCheckResult> gradcheck() const;

  /// gen_data through eval_zeroshot in order.
  void run_core() const;

 private:
  std::string stage_dir(const std::string& name) const;
  Dataset load_data() const;
  Teacher load_teacher() const;
  Checkpoint load_checkpoint(const std::string& relative) const;
  Checkpoint new_checkpoint() const;
  void write_report(const std::string& dir, const EvalReport& r) const;

  RunConfig config_;
  std::string dir_;
};

LatentCode load_latent(const std::string& path);

}  // namespace sgim
