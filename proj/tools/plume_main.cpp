// Command-line entry point: corpus generation, training, prediction and
// evaluation over the container formats documented in the README.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "plume/pipeline.hpp"
#include "plume/storage.hpp"

namespace {

enum LogLevel { kQuiet = 0, kInfo = 1, kDebug = 2 };

LogLevel log_level() {
  const char* env = std::getenv("PLUME_LOG");
  if (!env) return kInfo;
  const std::string v(env);
  if (v == "quiet") return kQuiet;
  if (v == "debug") return kDebug;
  return kInfo;
}

struct CommonFlags {
  std::string config_path;
  std::string out_dir = "out";
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string variant;
  bool with_wind = false;
  bool with_wind_set = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON config file");
  cmd->add_option("--out", flags.out_dir, "output directory");
  cmd->add_option("--set", flags.overrides,
                  "override 'section.key=value', highest precedence")
      ->take_all();
  cmd->add_option("--seed", flags.seed, "master seed")->each([&flags](const std::string&) {
    flags.seed_set = true;
  });
  cmd->add_option("--variant", flags.variant, "st_gasnet or pred_rnn");
  cmd->add_flag("--with-wind,!--no-wind", flags.with_wind, "attach wind channels")
      ->each([&flags](const std::string&) { flags.with_wind_set = true; });
}

plume::cli::RunConfig build_config(const CommonFlags& flags) {
  plume::cli::RunConfig cfg;
  if (!flags.config_path.empty())
    cfg = plume::cli::load_run_config_file(flags.config_path);
  // precedence: command line > config file > defaults
  if (flags.seed_set) {
    cfg.seed = flags.seed;
    cfg.train.seed = flags.seed;
  }
  if (!flags.variant.empty())
    cfg.model.variant = plume::net::variant_from_name(flags.variant);
  if (flags.with_wind_set) {
    cfg.train.with_wind = flags.with_wind;
    cfg.model.input_channels = flags.with_wind ? 4 : 1;
  }
  for (const auto& kv : flags.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw plume::ConfigError("--set expects section.key=value, got '" + kv + "'");
    plume::cli::apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (log_level() >= kDebug)
    std::cerr << "effective config:\n" << plume::cli::dump_run_config(cfg) << "\n";
  return cfg;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"urban plume spatiotemporal prediction pipeline"};
  app.require_subcommand(1);

  CommonFlags gen_flags, train_flags, predict_flags, eval_flags;

  auto* gen = app.add_subcommand("generate", "simulate a corpus of plume sequences");
  add_common(gen, gen_flags);

  auto* tr = app.add_subcommand("train", "train a model on sequence files");
  add_common(tr, train_flags);
  std::string train_data;
  tr->add_option("--data", train_data, "directory of .plseq files")->required();

  auto* pr = app.add_subcommand("predict", "roll out predictions from a checkpoint");
  add_common(pr, predict_flags);
  std::string predict_ckpt, predict_seq;
  int predict_t0 = 0;
  bool predict_images = false;
  pr->add_option("--checkpoint", predict_ckpt, "checkpoint file")->required();
  pr->add_option("--input", predict_seq, "sequence file supplying input frames")->required();
  pr->add_option("--t0", predict_t0, "input window start frame");
  pr->add_flag("--images", predict_images, "also write PGM frames");

  auto* ev = app.add_subcommand("evaluate", "score predictions against truth");
  add_common(ev, eval_flags);
  std::string eval_ckpt, eval_data, eval_preds, eval_seq;
  ev->add_option("--checkpoint", eval_ckpt, "checkpoint file (rollout mode)");
  ev->add_option("--data", eval_data, "directory of test .plseq files (rollout mode)");
  ev->add_option("--predictions", eval_preds, "stored predictions file");
  ev->add_option("--sequence", eval_seq, "truth sequence for --predictions");

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) {
    auto cfg = build_config(gen_flags);
    auto outcome = plume::cli::run_generate(cfg, gen_flags.out_dir);
    if (log_level() >= kInfo)
      for (const auto& line : outcome.manifest) std::cout << line << "\n";
    return 0;
  }
  if (tr->parsed()) {
    auto cfg = build_config(train_flags);
    auto files = plume::cli::list_sequence_files(train_data);
    auto outcome = plume::cli::run_train(cfg, files, train_flags.out_dir);
    if (log_level() >= kInfo) {
      std::cout << "checkpoint: " << outcome.checkpoint_path << "\n";
      std::cout << "log: " << outcome.log_path << "\n";
      if (!outcome.history.total.empty())
        std::cout << "final loss: " << outcome.history.total.back()
                  << " (prediction " << outcome.history.prediction.back() << ")\n";
    }
    return 0;
  }
  if (pr->parsed()) {
    auto cfg = build_config(predict_flags);
    if (predict_images) cfg.generate.export_images = true;
    auto outcome = plume::cli::run_predict(cfg, predict_ckpt, predict_seq, predict_t0,
                                           predict_flags.out_dir);
    if (log_level() >= kInfo)
      std::cout << "predictions: " << outcome.predictions_path << "\n";
    return 0;
  }
  if (ev->parsed()) {
    auto cfg = build_config(eval_flags);
    plume::cli::EvaluateOutcome outcome;
    if (!eval_preds.empty()) {
      if (eval_seq.empty())
        throw plume::ConfigError("evaluate --predictions also needs --sequence");
      outcome = plume::cli::run_evaluate_predictions(cfg, eval_preds, eval_seq,
                                                     eval_flags.out_dir);
    } else {
      if (eval_ckpt.empty() || eval_data.empty())
        throw plume::ConfigError(
            "evaluate needs --checkpoint and --data (or --predictions/--sequence)");
      auto files = plume::cli::list_sequence_files(eval_data);
      outcome = plume::cli::run_evaluate(cfg, eval_ckpt, files, eval_flags.out_dir);
    }
    for (const auto& id : outcome.report.skipped)
      std::cerr << "warning: skipped " << id << " (shorter than the evaluation window)\n";
    if (log_level() >= kInfo) {
      std::cout << "report: " << outcome.csv_path << "\n";
      std::cout << "mean modified accuracy: " << outcome.report.overall_mean_accuracy()
                << "\n";
    }
    return 0;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const plume::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const plume::StorageError& e) {
    std::cerr << "storage error: " << e.what() << "\n";
    return 2;
  } catch (const plume::GenerationError& e) {
    std::cerr << "generation error: " << e.what() << "\n";
    return 3;
  } catch (const plume::TrainingDivergedError& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  }
}
