#include "plume/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "plume/storage.hpp"

namespace plume::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr double kPi = 3.14159265358979323846;

void reject_unknown(const json& obj, std::initializer_list<const char*> known,
                    const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("unknown config key '" + where + "." + key + "'");
  }
}

template <typename T>
void read_if(const json& obj, const char* key, T& into) {
  if (obj.contains(key)) into = obj.at(key).get<T>();
}

void parse_sim(const json& obj, sim::SimConfig& cfg) {
  reject_unknown(obj,
                 {"rows", "cols", "cell_size_m", "dt_s", "diffusivity",
                  "frame_interval_s", "frames", "binarize_threshold", "boundary"},
                 "sim");
  read_if(obj, "rows", cfg.rows);
  read_if(obj, "cols", cfg.cols);
  read_if(obj, "cell_size_m", cfg.cell_size_m);
  read_if(obj, "dt_s", cfg.dt_s);
  read_if(obj, "diffusivity", cfg.diffusivity);
  read_if(obj, "frame_interval_s", cfg.frame_interval_s);
  read_if(obj, "frames", cfg.frames);
  read_if(obj, "binarize_threshold", cfg.binarize_threshold);
  if (obj.contains("boundary")) {
    const auto b = obj.at("boundary").get<std::string>();
    if (b == "outflow")
      cfg.boundary = sim::BoundaryMode::outflow;
    else if (b == "no_flux")
      cfg.boundary = sim::BoundaryMode::no_flux;
    else
      throw ConfigError("sim.boundary must be 'outflow' or 'no_flux'");
  }
}

void parse_city(const json& obj, sim::CityConfig& cfg) {
  reject_unknown(obj,
                 {"count", "min_size", "max_size", "downstream_radius", "clearance",
                  "max_retries"},
                 "city");
  read_if(obj, "count", cfg.count);
  read_if(obj, "min_size", cfg.min_size);
  read_if(obj, "max_size", cfg.max_size);
  read_if(obj, "downstream_radius", cfg.downstream_radius);
  read_if(obj, "clearance", cfg.clearance);
  read_if(obj, "max_retries", cfg.max_retries);
}

void parse_source(const json& obj, sim::SourceSpec& cfg) {
  reject_unknown(obj, {"cells", "rate", "duration_s"}, "source");
  if (obj.contains("cells")) {
    cfg.cells.clear();
    for (const auto& cell : obj.at("cells")) {
      if (!cell.is_array() || cell.size() != 2)
        throw ConfigError("source.cells entries must be [row, col]");
      cfg.cells.emplace_back(cell[0].get<int>(), cell[1].get<int>());
    }
  }
  read_if(obj, "rate", cfg.rate);
  read_if(obj, "duration_s", cfg.duration_s);
}

void parse_model(const json& obj, net::ModelConfig& cfg) {
  reject_unknown(obj,
                 {"variant", "layers", "hidden_channels", "kernel_size",
                  "input_channels", "rows", "cols", "use_bias",
                  "share_m_input_kernels"},
                 "model");
  if (obj.contains("variant"))
    cfg.variant = net::variant_from_name(obj.at("variant").get<std::string>());
  read_if(obj, "layers", cfg.layers);
  read_if(obj, "hidden_channels", cfg.hidden_channels);
  read_if(obj, "kernel_size", cfg.kernel_size);
  read_if(obj, "input_channels", cfg.input_channels);
  read_if(obj, "rows", cfg.rows);
  read_if(obj, "cols", cfg.cols);
  read_if(obj, "use_bias", cfg.use_bias);
  read_if(obj, "share_m_input_kernels", cfg.share_m_input_kernels);
}

void parse_train(const json& obj, train::TrainConfig& cfg) {
  reject_unknown(obj,
                 {"lr", "beta1", "beta2", "epsilon", "batch_size", "iterations",
                  "grad_clip_norm", "seed", "input_steps", "horizon", "stride",
                  "with_wind", "log_every", "loss_per_pixel", "loss_epsilon",
                  "weight_prediction", "weight_decouple_m", "weight_decouple_m2"},
                 "train");
  read_if(obj, "lr", cfg.adam.lr);
  read_if(obj, "beta1", cfg.adam.beta1);
  read_if(obj, "beta2", cfg.adam.beta2);
  read_if(obj, "epsilon", cfg.adam.epsilon);
  read_if(obj, "batch_size", cfg.batch_size);
  read_if(obj, "iterations", cfg.iterations);
  read_if(obj, "grad_clip_norm", cfg.grad_clip_norm);
  read_if(obj, "seed", cfg.seed);
  read_if(obj, "input_steps", cfg.input_steps);
  read_if(obj, "horizon", cfg.horizon);
  read_if(obj, "stride", cfg.stride);
  read_if(obj, "with_wind", cfg.with_wind);
  read_if(obj, "log_every", cfg.log_every);
  read_if(obj, "loss_per_pixel", cfg.loss.per_pixel);
  read_if(obj, "loss_epsilon", cfg.loss.epsilon);
  read_if(obj, "weight_prediction", cfg.loss.weight_prediction);
  read_if(obj, "weight_decouple_m", cfg.loss.weight_decouple_m);
  read_if(obj, "weight_decouple_m2", cfg.loss.weight_decouple_m2);
}

void parse_generate(const json& obj, GenerateConfig& cfg) {
  reject_unknown(obj,
                 {"angle_start_deg", "angle_stop_deg", "angle_step_deg", "speed_start",
                  "speed_stop", "speed_step", "count", "shared_city", "export_images"},
                 "generate");
  read_if(obj, "angle_start_deg", cfg.angle_start_deg);
  read_if(obj, "angle_stop_deg", cfg.angle_stop_deg);
  read_if(obj, "angle_step_deg", cfg.angle_step_deg);
  read_if(obj, "speed_start", cfg.speed_start);
  read_if(obj, "speed_stop", cfg.speed_stop);
  read_if(obj, "speed_step", cfg.speed_step);
  read_if(obj, "count", cfg.count);
  read_if(obj, "shared_city", cfg.shared_city);
  read_if(obj, "export_images", cfg.export_images);
}

void parse_evaluate(const json& obj, EvaluateConfig& cfg) {
  reject_unknown(obj, {"input_steps", "horizon", "threshold"}, "evaluate");
  read_if(obj, "input_steps", cfg.input_steps);
  read_if(obj, "horizon", cfg.horizon);
  read_if(obj, "threshold", cfg.threshold);
}

json dump_json(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["sim"] = {{"rows", cfg.sim.rows},
              {"cols", cfg.sim.cols},
              {"cell_size_m", cfg.sim.cell_size_m},
              {"dt_s", cfg.sim.dt_s},
              {"diffusivity", cfg.sim.diffusivity},
              {"frame_interval_s", cfg.sim.frame_interval_s},
              {"frames", cfg.sim.frames},
              {"binarize_threshold", cfg.sim.binarize_threshold},
              {"boundary", cfg.sim.boundary == sim::BoundaryMode::outflow ? "outflow"
                                                                          : "no_flux"}};
  j["city"] = {{"count", cfg.city.count},
               {"min_size", cfg.city.min_size},
               {"max_size", cfg.city.max_size},
               {"downstream_radius", cfg.city.downstream_radius},
               {"clearance", cfg.city.clearance},
               {"max_retries", cfg.city.max_retries}};
  json cells = json::array();
  for (auto [r, c] : cfg.source.cells) cells.push_back(json::array({r, c}));
  j["source"] = {{"cells", cells}, {"rate", cfg.source.rate},
                 {"duration_s", cfg.source.duration_s}};
  j["model"] = {{"variant", net::variant_name(cfg.model.variant)},
                {"layers", cfg.model.layers},
                {"hidden_channels", cfg.model.hidden_channels},
                {"kernel_size", cfg.model.kernel_size},
                {"input_channels", cfg.model.input_channels},
                {"rows", cfg.model.rows},
                {"cols", cfg.model.cols},
                {"use_bias", cfg.model.use_bias},
                {"share_m_input_kernels", cfg.model.share_m_input_kernels}};
  j["train"] = {{"lr", cfg.train.adam.lr},
                {"beta1", cfg.train.adam.beta1},
                {"beta2", cfg.train.adam.beta2},
                {"epsilon", cfg.train.adam.epsilon},
                {"batch_size", cfg.train.batch_size},
                {"iterations", cfg.train.iterations},
                {"grad_clip_norm", cfg.train.grad_clip_norm},
                {"seed", cfg.train.seed},
                {"input_steps", cfg.train.input_steps},
                {"horizon", cfg.train.horizon},
                {"stride", cfg.train.stride},
                {"with_wind", cfg.train.with_wind},
                {"log_every", cfg.train.log_every},
                {"loss_per_pixel", cfg.train.loss.per_pixel},
                {"loss_epsilon", cfg.train.loss.epsilon},
                {"weight_prediction", cfg.train.loss.weight_prediction},
                {"weight_decouple_m", cfg.train.loss.weight_decouple_m},
                {"weight_decouple_m2", cfg.train.loss.weight_decouple_m2}};
  j["generate"] = {{"angle_start_deg", cfg.generate.angle_start_deg},
                   {"angle_stop_deg", cfg.generate.angle_stop_deg},
                   {"angle_step_deg", cfg.generate.angle_step_deg},
                   {"speed_start", cfg.generate.speed_start},
                   {"speed_stop", cfg.generate.speed_stop},
                   {"speed_step", cfg.generate.speed_step},
                   {"count", cfg.generate.count},
                   {"shared_city", cfg.generate.shared_city},
                   {"export_images", cfg.generate.export_images}};
  j["evaluate"] = {{"input_steps", cfg.evaluate.input_steps},
                   {"horizon", cfg.evaluate.horizon},
                   {"threshold", cfg.evaluate.threshold}};
  return j;
}

std::string sequence_file_name(int index, double phi_deg, double speed) {
  std::ostringstream os;
  os << "seq_";
  os.width(3);
  os.fill('0');
  os << index;
  os << "_phi" << static_cast<int>(std::lround(phi_deg)) << "_v"
     << static_cast<int>(std::lround(speed)) << ".plseq";
  return os.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw StorageError("cannot open for writing: " + path);
  f << text;
  if (!f) throw StorageError("write failed: " + path);
}

}  // namespace

void GenerateConfig::validate() const {
  if (angle_step_deg <= 0) throw ConfigError("generate.angle_step_deg must be positive");
  if (speed_step <= 0) throw ConfigError("generate.speed_step must be positive");
  if (angle_stop_deg < angle_start_deg)
    throw ConfigError("generate angle range is empty");
  if (speed_stop < speed_start) throw ConfigError("generate speed range is empty");
}

std::vector<std::pair<double, double>> GenerateConfig::sweep() const {
  validate();
  std::vector<std::pair<double, double>> out;
  for (double phi = angle_start_deg; phi < angle_stop_deg - 1e-9; phi += angle_step_deg)
    for (double v = speed_start; v <= speed_stop + 1e-9; v += speed_step)
      out.emplace_back(phi, v);
  if (count >= 0 && static_cast<int>(out.size()) > count)
    out.resize(static_cast<std::size_t>(count));
  return out;
}

void EvaluateConfig::validate() const {
  if (input_steps < 1) throw ConfigError("evaluate.input_steps must be >= 1");
  if (horizon < 0) throw ConfigError("evaluate.horizon must be >= 0");
  if (threshold <= 0 || threshold >= 1)
    throw ConfigError("evaluate.threshold must lie in (0,1)");
}

void RunConfig::validate() const {
  sim.validate();
  model.validate();
  train.validate();
  generate.validate();
  evaluate.validate();
  if (train.adam.lr <= 0) throw ConfigError("train.lr must be positive");
}

RunConfig parse_run_config(const std::string& json_text) {
  RunConfig cfg;
  if (json_text.empty()) return cfg;
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config root must be an object");
  reject_unknown(root, {"seed", "sim", "city", "source", "model", "train", "generate",
                        "evaluate"},
                 "config");
  read_if(root, "seed", cfg.seed);
  if (root.contains("sim")) parse_sim(root.at("sim"), cfg.sim);
  if (root.contains("city")) parse_city(root.at("city"), cfg.city);
  if (root.contains("source")) parse_source(root.at("source"), cfg.source);
  if (root.contains("model")) parse_model(root.at("model"), cfg.model);
  if (root.contains("train")) parse_train(root.at("train"), cfg.train);
  if (root.contains("generate")) parse_generate(root.at("generate"), cfg.generate);
  if (root.contains("evaluate")) parse_evaluate(root.at("evaluate"), cfg.evaluate);
  return cfg;
}

RunConfig load_run_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw StorageError("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_run_config(text);
}

void apply_override(RunConfig& cfg, const std::string& dotted_key,
                    const std::string& value) {
  const auto dot = dotted_key.find('.');
  json root;
  json leaf;
  try {
    leaf = json::parse(value);
  } catch (const json::exception&) {
    leaf = value;  // bare strings stay strings
  }
  if (dot == std::string::npos) {
    root[dotted_key] = leaf;
  } else {
    root[dotted_key.substr(0, dot)][dotted_key.substr(dot + 1)] = leaf;
  }
  // reuse the block parsers so overrides face the same validation
  const std::string text = root.dump();
  json parsed = json::parse(text);
  reject_unknown(parsed, {"seed", "sim", "city", "source", "model", "train", "generate",
                          "evaluate"},
                 "config");
  read_if(parsed, "seed", cfg.seed);
  if (parsed.contains("sim")) parse_sim(parsed.at("sim"), cfg.sim);
  if (parsed.contains("city")) parse_city(parsed.at("city"), cfg.city);
  if (parsed.contains("source")) parse_source(parsed.at("source"), cfg.source);
  if (parsed.contains("model")) parse_model(parsed.at("model"), cfg.model);
  if (parsed.contains("train")) parse_train(parsed.at("train"), cfg.train);
  if (parsed.contains("generate")) parse_generate(parsed.at("generate"), cfg.generate);
  if (parsed.contains("evaluate")) parse_evaluate(parsed.at("evaluate"), cfg.evaluate);
}

std::string dump_run_config(const RunConfig& cfg) { return dump_json(cfg).dump(2); }

std::string config_fingerprint(const RunConfig& cfg) {
  std::ostringstream os;
  os << std::hex << data::fnv1a64(dump_json(cfg).dump());
  return os.str();
}

GenerateOutcome run_generate(const RunConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  fs::create_directories(out_dir);

  GenerateOutcome outcome;
  const auto sweep = cfg.generate.sweep();
  int index = 0;
  for (const auto& [phi_deg, speed] : sweep) {
    sim::WindField wind;
    wind.phi_rad = phi_deg * kPi / 180.0;
    wind.speed = speed;

    const std::uint64_t city_seed =
        cfg.generate.shared_city ? cfg.seed
                                 : cfg.seed + 0x9e3779b97f4a7c15ull * (index + 1);
    const auto buildings = sim::build_city(city_seed, cfg.city, cfg.sim, wind, cfg.source);
    const auto result = sim::simulate(cfg.sim, wind, buildings, cfg.source);
    const auto binary = sim::binarize(result.frames, cfg.sim.binarize_threshold);

    data::PlumeSequence seq;
    seq.id = sequence_file_name(index, phi_deg, speed);
    seq.id = seq.id.substr(0, seq.id.size() - 6);  // drop ".plseq"
    seq.rows = cfg.sim.rows;
    seq.cols = cfg.sim.cols;
    seq.frames = binary;
    seq.phi_rad = wind.phi_rad;
    seq.speed = wind.speed;
    seq.building_mask = buildings.mask;
    seq.seed = city_seed;
    seq.config_hash = config_fingerprint(cfg);

    const std::string file = (fs::path(out_dir) / sequence_file_name(index, phi_deg, speed)).string();
    data::save_sequence(seq, file);
    outcome.files.push_back(file);
    {
      std::ostringstream line;
      line << file << " phi_deg=" << phi_deg << " speed=" << speed
           << " buildings=" << buildings.building_cells()
           << " frames=" << cfg.sim.frames;
      outcome.manifest.push_back(line.str());
    }

    if (cfg.generate.export_images) {
      const fs::path img_dir = fs::path(out_dir) / (seq.id + "_frames");
      fs::create_directories(img_dir);
      for (std::size_t f = 0; f < binary.size(); ++f) {
        std::ostringstream name;
        name << "frame_";
        name.width(3);
        name.fill('0');
        name << f << ".pgm";
        write_text((img_dir / name.str()).string(), sim::render_pgm(binary[f], buildings));
      }
    }
    ++index;
  }
  return outcome;
}

std::vector<std::string> list_sequence_files(const std::string& dir) {
  if (!fs::is_directory(dir)) throw StorageError("not a directory: " + dir);
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".plseq")
      files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  return files;
}

TrainOutcome run_train(const RunConfig& cfg, const std::vector<std::string>& data_files,
                       const std::string& out_dir) {
  cfg.validate();
  if (data_files.empty()) throw ConfigError("train: no sequence files given");
  fs::create_directories(out_dir);

  std::vector<data::PlumeSequence> sequences;
  for (const auto& path : data_files) sequences.push_back(data::load_sequence(path));

  net::ModelConfig model = cfg.model;
  model.rows = sequences[0].rows;
  model.cols = sequences[0].cols;
  model.input_channels = cfg.train.with_wind ? 4 : 1;

  auto clips = data::make_clips(sequences, cfg.train.input_steps, cfg.train.horizon,
                                cfg.train.stride);
  auto params = net::init_parameters<float>(model, cfg.seed);

  std::ostringstream log;
  auto history = train::train(params, model, sequences, clips, cfg.train, &log);

  TrainOutcome outcome;
  outcome.history = history;
  outcome.checkpoint_path = (fs::path(out_dir) / "checkpoint.plckpt").string();
  outcome.log_path = (fs::path(out_dir) / "train_log.txt").string();
  data::save_checkpoint({model, params.clone(false)}, outcome.checkpoint_path);
  write_text(outcome.log_path, log.str());
  return outcome;
}

PredictOutcome run_predict(const RunConfig& cfg, const std::string& checkpoint_path,
                           const std::string& sequence_path, int t0,
                           const std::string& out_dir) {
  cfg.evaluate.validate();
  fs::create_directories(out_dir);
  auto ckpt = data::load_checkpoint(checkpoint_path);
  auto seq = data::load_sequence(sequence_path);

  const int T = cfg.evaluate.input_steps;
  const int k = cfg.evaluate.horizon;
  auto probs = train::predict_sequence(ckpt.params, ckpt.model, seq, t0, T, k);

  data::PredictionsFile preds;
  preds.sequence_id = seq.id;
  preds.rows = seq.rows;
  preds.cols = seq.cols;
  preds.t0 = t0;
  preds.input_steps = T;
  preds.frames = probs;

  PredictOutcome outcome;
  outcome.predictions_path = (fs::path(out_dir) / "predictions.plpred").string();
  data::save_predictions(preds, outcome.predictions_path);

  if (cfg.generate.export_images) {
    sim::BuildingMask mask;
    mask.rows = seq.rows;
    mask.cols = seq.cols;
    mask.mask = seq.building_mask;
    for (std::size_t f = 0; f < probs.size(); ++f) {
      const auto bin = metrics::binarize_prediction(probs[f],
                                                    static_cast<float>(cfg.evaluate.threshold));
      std::ostringstream name;
      name << "pred_";
      name.width(3);
      name.fill('0');
      name << f << ".pgm";
      const std::string path = (fs::path(out_dir) / name.str()).string();
      write_text(path, sim::render_pgm(bin, mask));
      outcome.image_paths.push_back(path);
    }
  }
  return outcome;
}

namespace {

EvaluateOutcome write_report(const metrics::MetricReport& report,
                             const std::string& out_dir) {
  EvaluateOutcome outcome;
  outcome.report = report;
  outcome.csv_path = (fs::path(out_dir) / "metrics.csv").string();
  outcome.json_path = (fs::path(out_dir) / "metrics.json").string();
  write_text(outcome.csv_path, metrics::report_csv(report));
  write_text(outcome.json_path, metrics::report_json(report));
  return outcome;
}

}  // namespace

EvaluateOutcome run_evaluate(const RunConfig& cfg, const std::string& checkpoint_path,
                             const std::vector<std::string>& data_files,
                             const std::string& out_dir) {
  cfg.evaluate.validate();
  if (data_files.empty()) throw ConfigError("evaluate: no sequence files given");
  fs::create_directories(out_dir);

  auto ckpt = data::load_checkpoint(checkpoint_path);
  std::vector<data::PlumeSequence> sequences;
  for (const auto& path : data_files) sequences.push_back(data::load_sequence(path));

  auto report = train::evaluate(ckpt.params, ckpt.model, sequences,
                                cfg.evaluate.input_steps, cfg.evaluate.horizon,
                                static_cast<float>(cfg.evaluate.threshold));
  return write_report(report, out_dir);
}

EvaluateOutcome run_evaluate_predictions(const RunConfig& cfg,
                                         const std::string& predictions_path,
                                         const std::string& sequence_path,
                                         const std::string& out_dir) {
  cfg.evaluate.validate();
  fs::create_directories(out_dir);

  const auto preds = data::load_predictions(predictions_path);
  const auto seq = data::load_sequence(sequence_path);
  if (preds.rows != seq.rows || preds.cols != seq.cols)
    throw ContractError("predictions extent does not match sequence");

  metrics::MetricReport report;
  report.threshold = cfg.evaluate.threshold;
  train::score_sequence(report, seq.id, preds.frames, seq, preds.t0, preds.input_steps,
                        static_cast<float>(cfg.evaluate.threshold));
  metrics::finalize_report(report);
  return write_report(report, out_dir);
}

}  // namespace plume::cli
