#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "plume/pipeline.hpp"
#include "plume/storage.hpp"

namespace cli = plume::cli;
namespace data = plume::data;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("plume_pipe_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& sub = "") const {
    return sub.empty() ? path.string() : (path / sub).string();
  }
};

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

// small enough that generate/train/evaluate all run in seconds
cli::RunConfig tiny_config() {
  cli::RunConfig cfg;
  cfg.seed = 11;
  cfg.sim.rows = 16;
  cfg.sim.cols = 16;
  cfg.sim.cell_size_m = 2000.0 / 16;
  cfg.sim.frames = 16;
  cfg.city.count = 2;
  cfg.city.min_size = 2;
  cfg.city.max_size = 3;
  cfg.city.downstream_radius = 5;
  cfg.model.layers = 1;
  cfg.model.hidden_channels = 3;
  cfg.model.rows = 16;
  cfg.model.cols = 16;
  cfg.train.iterations = 3;
  cfg.train.batch_size = 2;
  cfg.train.input_steps = 3;
  cfg.train.horizon = 4;
  cfg.train.stride = 4;
  cfg.train.seed = 11;
  cfg.generate.count = 3;
  cfg.evaluate.input_steps = 3;
  cfg.evaluate.horizon = 4;
  return cfg;
}

}  // namespace

TEST_CASE("default sweep is 9 angles by 5 speeds") {
  cli::GenerateConfig gen;
  const auto sweep = gen.sweep();
  CHECK(sweep.size() == 45);
  CHECK(sweep.front().first == 180.0);
  CHECK(sweep.front().second == 1.0);
  CHECK(sweep.back().first == 260.0);
  CHECK(sweep.back().second == 5.0);

  gen.count = 2;
  CHECK(gen.sweep().size() == 2);
}

TEST_CASE("config parsing: defaults, nesting, unknown keys, overrides") {
  auto cfg = cli::parse_run_config("");
  CHECK(cfg.sim.rows == 32);
  CHECK(cfg.model.hidden_channels == 16);

  cfg = cli::parse_run_config(R"({"sim": {"rows": 20, "cols": 24}, "train": {"lr": 0.01}})");
  CHECK(cfg.sim.rows == 20);
  CHECK(cfg.sim.cols == 24);
  CHECK(cfg.train.adam.lr == 0.01);

  CHECK_THROWS_AS(cli::parse_run_config(R"({"simulation": {}})"), plume::ConfigError);
  CHECK_THROWS_AS(cli::parse_run_config(R"({"sim": {"rowz": 3}})"), plume::ConfigError);
  CHECK_THROWS_AS(cli::parse_run_config("not json"), plume::ConfigError);

  cli::apply_override(cfg, "sim.diffusivity", "22.5");
  CHECK(cfg.sim.diffusivity == 22.5);
  cli::apply_override(cfg, "model.variant", "pred_rnn");
  CHECK(cfg.model.variant == plume::net::Variant::pred_rnn);
  CHECK_THROWS_AS(cli::apply_override(cfg, "sim.bogus", "1"), plume::ConfigError);

  const auto echoed = cli::dump_run_config(cfg);
  CHECK(echoed.find("\"diffusivity\": 22.5") != std::string::npos);
}

TEST_CASE("invalid configurations are rejected before any work") {
  auto cfg = tiny_config();
  cfg.train.adam.lr = 0.0;
  CHECK_THROWS_AS(cfg.validate(), plume::ConfigError);

  cfg = tiny_config();
  cfg.evaluate.threshold = 1.5;
  CHECK_THROWS_AS(cfg.validate(), plume::ConfigError);
}

TEST_CASE("generate writes a deterministic corpus with manifest") {
  auto cfg = tiny_config();
  TempDir a("gen_a"), b("gen_b");

  auto out_a = cli::run_generate(cfg, a.str());
  CHECK(out_a.files.size() == 3);
  CHECK(out_a.manifest.size() == 3);

  auto out_b = cli::run_generate(cfg, b.str());
  REQUIRE(out_a.files.size() == out_b.files.size());
  for (std::size_t i = 0; i < out_a.files.size(); ++i) {
    CHECK(fs::path(out_a.files[i]).filename() == fs::path(out_b.files[i]).filename());
    CHECK(slurp(out_a.files[i]) == slurp(out_b.files[i]));  // byte-identical
  }

  // sequences load back and carry provenance
  auto seq = data::load_sequence(out_a.files[0]);
  CHECK(seq.rows == 16);
  CHECK(seq.frame_count() == 16);
  CHECK(!seq.config_hash.empty());
  CHECK(seq.frames[4] != std::vector<std::uint8_t>(256, 0));  // plume visible

  auto listed = cli::list_sequence_files(a.str());
  CHECK(listed == out_a.files);
}

TEST_CASE("image export writes valid PGM frames") {
  auto cfg = tiny_config();
  cfg.generate.count = 1;
  cfg.generate.export_images = true;
  TempDir dir("img");
  auto out = cli::run_generate(cfg, dir.str());
  const auto img0 = fs::path(out.files[0]).parent_path() /
                    (data::load_sequence(out.files[0]).id + "_frames") / "frame_000.pgm";
  REQUIRE(fs::exists(img0));
  const auto bytes = slurp(img0.string());
  CHECK(bytes.rfind("P5\n16 16\n255\n", 0) == 0);
  CHECK(bytes.size() == std::string("P5\n16 16\n255\n").size() + 256);
}

TEST_CASE("train, predict and evaluate round-trip through files") {
  auto cfg = tiny_config();
  TempDir dir("flow");

  auto corpus = cli::run_generate(cfg, dir.str("data"));
  REQUIRE(corpus.files.size() == 3);

  auto trained = cli::run_train(cfg, corpus.files, dir.str("run"));
  CHECK(fs::exists(trained.checkpoint_path));
  CHECK(fs::exists(trained.log_path));
  CHECK(trained.history.total.size() == 3);

  // rollout-mode evaluation over the corpus
  auto eval = cli::run_evaluate(cfg, trained.checkpoint_path, corpus.files, dir.str("eval"));
  CHECK(fs::exists(eval.csv_path));
  CHECK(fs::exists(eval.json_path));
  CHECK(eval.report.timesteps.size() == 4);

  // predict-then-evaluate must match evaluate's internal rollout
  auto predicted = cli::run_predict(cfg, trained.checkpoint_path, corpus.files[0], 0,
                                    dir.str("pred"));
  auto eval_pred = cli::run_evaluate_predictions(cfg, predicted.predictions_path,
                                                 corpus.files[0], dir.str("eval_pred"));
  auto eval_single = cli::run_evaluate(cfg, trained.checkpoint_path,
                                       {corpus.files[0]}, dir.str("eval_single"));
  REQUIRE(eval_pred.report.mean_accuracy.size() ==
          eval_single.report.mean_accuracy.size());
  for (std::size_t i = 0; i < eval_pred.report.mean_accuracy.size(); ++i) {
    CHECK(eval_pred.report.mean_accuracy[i] ==
          doctest::Approx(eval_single.report.mean_accuracy[i]).epsilon(1e-12));
    CHECK(eval_pred.report.mean_precision[i] ==
          doctest::Approx(eval_single.report.mean_precision[i]).epsilon(1e-12));
  }
}

TEST_CASE("repeated train and evaluate runs are byte-identical") {
  auto cfg = tiny_config();
  TempDir dir("det");
  auto corpus = cli::run_generate(cfg, dir.str("data"));

  auto t1 = cli::run_train(cfg, corpus.files, dir.str("run1"));
  auto t2 = cli::run_train(cfg, corpus.files, dir.str("run2"));
  CHECK(slurp(t1.checkpoint_path) == slurp(t2.checkpoint_path));
  CHECK(t1.history.final_param_crc == t2.history.final_param_crc);

  auto e1 = cli::run_evaluate(cfg, t1.checkpoint_path, corpus.files, dir.str("eval1"));
  auto e2 = cli::run_evaluate(cfg, t2.checkpoint_path, corpus.files, dir.str("eval2"));
  CHECK(slurp(e1.csv_path) == slurp(e2.csv_path));
  CHECK(slurp(e1.json_path) == slurp(e2.json_path));
}

TEST_CASE("the baseline variant runs end-to-end") {
  auto cfg = tiny_config();
  cfg.model.variant = plume::net::Variant::pred_rnn;
  TempDir dir("base");
  auto corpus = cli::run_generate(cfg, dir.str("data"));
  auto trained = cli::run_train(cfg, corpus.files, dir.str("run"));
  auto ckpt = data::load_checkpoint(trained.checkpoint_path);
  CHECK(ckpt.model.variant == plume::net::Variant::pred_rnn);
  CHECK_FALSE(ckpt.params.contains("l0.w_m2g"));
  auto eval = cli::run_evaluate(cfg, trained.checkpoint_path, corpus.files, dir.str("eval"));
  CHECK(eval.report.timesteps.size() == 4);
}

TEST_CASE("wind-augmented training stores a 4-channel model") {
  auto cfg = tiny_config();
  cfg.train.with_wind = true;
  TempDir dir("wind");
  auto corpus = cli::run_generate(cfg, dir.str("data"));
  auto trained = cli::run_train(cfg, corpus.files, dir.str("run"));
  auto ckpt = data::load_checkpoint(trained.checkpoint_path);
  CHECK(ckpt.model.input_channels == 4);
  auto eval = cli::run_evaluate(cfg, trained.checkpoint_path, corpus.files, dir.str("eval"));
  CHECK(eval.report.timesteps.size() == 4);
}
