// Command-line front end: one subcommand per pipeline stage.
#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <map>

#include "sgim/binary_io.hpp"
#include "sgim/errors.hpp"
#include "sgim/pipeline.hpp"

namespace {

std::string dashed(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

// One line on stderr: `error kind=<kind> message=<text>`.
int fail(const std::string& kind, std::string message) {
  std::replace(message.begin(), message.end(), '\n', ' ');
  std::cerr << "error kind=" << kind << " message=" << message << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sgim: sound-guided latent manipulation pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_help_all_flag("--help-all");

  std::string run_dir = "run";
  std::string config_file;
  app.add_option("--run-dir", run_dir, "run directory")->capture_default_str();
  app.add_option("--config", config_file, "key = value config file");

  // Every config key is overridable as --key-with-dashes.
  std::map<std::string, std::string> overrides;
  for (const auto& key : sgim::config_keys()) {
    app.add_option_function<std::string>(
           "--" + dashed(key), [&overrides, key](const std::string& v) { overrides[key] = v; }, "config key " + key)
        ->group("Config overrides");
  }

  std::string path_a, path_b;
  auto* gen = app.add_subcommand("gen-data", "generate the synthetic tri-modal dataset");
  auto* teacher = app.add_subcommand("pretrain-teacher", "train the frozen text/image teacher");
  auto* fit = app.add_subcommand("fit-generator", "fit the layered generator to training images");
  auto* audio = app.add_subcommand("train-audio", "train the audio encoder");
  auto* manip = app.add_subcommand("manipulate", "optimize a latent code toward audio or text guidance");
  auto* interp = app.add_subcommand("interpolate", "blend two latent codes");
  auto* mix = app.add_subcommand("mix", "style-mix two latent codes by layer");
  auto* zeroshot = app.add_subcommand("eval-zeroshot", "zero-shot audio classification");
  auto* probe = app.add_subcommand("eval-probe", "linear probe on frozen audio embeddings");
  auto* ablate = app.add_subcommand("ablate", "weak-loss ablation");
  auto* direction = app.add_subcommand("direction-stats", "latent direction cosines");
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  for (auto* sub : {interp, mix}) {
    sub->add_option("--a", path_a, "first latent checkpoint");
    sub->add_option("--b", path_b, "second latent checkpoint");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what());
  }

  try {
    sgim::RunConfig config;
    if (!config_file.empty()) config = sgim::RunConfig::parse(sgim::io::read_file(config_file), config);
    config.apply({overrides.begin(), overrides.end()});
    const sgim::Pipeline p(config, run_dir);

    if (gen->parsed()) p.gen_data();
    if (teacher->parsed()) p.pretrain_teacher();
    if (fit->parsed()) p.fit_generator();
    if (audio->parsed()) p.train_audio();
    if (manip->parsed()) {
      const auto r = p.manipulate();
      const auto& first = r.trajectory.front().terms;
      const auto& last = r.trajectory.back().terms;
      std::cout << "hinge " << first.hinge << " -> " << last.hinge << " over " << r.trajectory.size() - 1
                << " steps\n";
    }
    if (interp->parsed()) p.interpolate(path_a, path_b);
    if (mix->parsed()) p.mix(path_a, path_b);
    for (auto [sub, fn] : {std::pair{zeroshot, &sgim::Pipeline::eval_zeroshot},
                           std::pair{probe, &sgim::Pipeline::eval_probe}, std::pair{ablate, &sgim::Pipeline::ablate},
                           std::pair{direction, &sgim::Pipeline::direction_stats}}) {
      if (sub->parsed()) std::cout << (p.*fn)().to_text();
    }
    if (gradcheck->parsed()) {
      bool ok = true;
      for (const auto& r : p.gradcheck()) {
        std::cout << (r.pass ? "pass " : "FAIL ") << r.name << " worst=" << r.worst << "\n";
        ok = ok && r.pass;
      }
      if (!ok) return fail("gradcheck", "one or more gradient checks exceeded the tolerance");
    }
  } catch (const sgim::Error& e) {
    return fail(e.kind(), e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return 0;
}
