#include "plume/trainer.hpp"

#include <chrono>
#include <ostream>
#include <sstream>

#include "plume/rng.hpp"
#include "plume/sim.hpp"
#include "plume/storage.hpp"

namespace plume::train {

namespace {

// [B,1,N,M] tensor from one frame index of each clip's sequence.
Tensor<float> stack_frames(const std::vector<data::PlumeSequence>& sequences,
                           const std::vector<data::Clip>& clips, int frame_index) {
  const int batch = static_cast<int>(clips.size());
  const auto& first = sequences.at(static_cast<std::size_t>(clips[0].sequence));
  const int rows = first.rows, cols = first.cols;
  const std::size_t cells = static_cast<std::size_t>(rows) * cols;
  std::vector<float> values(static_cast<std::size_t>(batch) * cells);
  for (int b = 0; b < batch; ++b) {
    const auto& clip = clips[static_cast<std::size_t>(b)];
    const auto& seq = sequences.at(static_cast<std::size_t>(clip.sequence));
    const auto& frame = seq.frames.at(static_cast<std::size_t>(clip.t0 + frame_index));
    for (std::size_t i = 0; i < cells; ++i)
      values[static_cast<std::size_t>(b) * cells + i] = static_cast<float>(frame[i]);
  }
  return Tensor<float>::from({batch, 1, rows, cols}, std::move(values));
}

net::WindTensors<float> stack_wind(const std::vector<data::PlumeSequence>& sequences,
                                   const std::vector<data::Clip>& clips) {
  const int batch = static_cast<int>(clips.size());
  const auto& first = sequences.at(static_cast<std::size_t>(clips[0].sequence));
  const int rows = first.rows, cols = first.cols;
  const std::size_t plane = static_cast<std::size_t>(rows) * cols;
  std::vector<float> dir(static_cast<std::size_t>(batch) * 2 * plane);
  std::vector<float> spd(static_cast<std::size_t>(batch) * plane);
  for (int b = 0; b < batch; ++b) {
    const auto& seq = sequences.at(static_cast<std::size_t>(clips[static_cast<std::size_t>(b)].sequence));
    const auto wc = sim::wind_channels(seq.phi_rad, seq.speed, rows, cols);
    for (std::size_t i = 0; i < plane; ++i) {
      dir[(static_cast<std::size_t>(b) * 2 + 0) * plane + i] = static_cast<float>(wc.d0);
      dir[(static_cast<std::size_t>(b) * 2 + 1) * plane + i] = static_cast<float>(wc.d1);
      spd[static_cast<std::size_t>(b) * plane + i] = static_cast<float>(seq.speed);
    }
  }
  net::WindTensors<float> out;
  out.direction = Tensor<float>::from({batch, 2, rows, cols}, std::move(dir));
  out.speed = Tensor<float>::from({batch, 1, rows, cols}, std::move(spd));
  return out;
}

}  // namespace

Batch assemble_batch(const std::vector<data::PlumeSequence>& sequences,
                     const std::vector<data::Clip>& clips, bool with_wind) {
  if (clips.empty()) throw ContractError("assemble_batch: empty batch");
  const int T = clips[0].input_steps;
  const int k = clips[0].horizon;
  for (const auto& c : clips)
    if (c.input_steps != T || c.horizon != k)
      throw ContractError("assemble_batch: mixed clip windows");

  Batch batch;
  for (int t = 0; t < T; ++t) batch.inputs.push_back(stack_frames(sequences, clips, t));
  for (int t = 1; t < T + k; ++t) batch.targets.push_back(stack_frames(sequences, clips, t));
  if (with_wind) batch.wind = stack_wind(sequences, clips);
  return batch;
}

TrainHistory train(ParameterSet<float>& params, const net::ModelConfig& model,
                   const std::vector<data::PlumeSequence>& sequences,
                   const std::vector<data::Clip>& clips, const TrainConfig& cfg,
                   std::ostream* log) {
  cfg.validate();
  model.validate();
  if (clips.empty()) throw ContractError("train: no clips");
  if (cfg.with_wind != (model.input_channels == 4))
    throw ConfigError("train.with_wind does not match model.input_channels");

  const auto start = std::chrono::steady_clock::now();
  TrainHistory history;
  Adam<float> optimizer(cfg.adam);
  Rng shuffle_rng(cfg.seed);

  std::vector<data::Clip> order = clips;
  std::size_t cursor = order.size();  // trigger shuffle on first use

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    std::vector<data::Clip> batch_clips;
    for (int b = 0; b < cfg.batch_size; ++b) {
      if (cursor >= order.size()) {
        shuffle_rng.shuffle(order);
        cursor = 0;
      }
      batch_clips.push_back(order[cursor++]);
    }

    const Batch batch = assemble_batch(sequences, batch_clips, cfg.with_wind);
    params.zero_grad();
    auto rollout = net::rollout(batch.inputs, batch_clips[0].horizon, batch.wind,
                                params, model);
    auto losses = loss::total_loss(rollout.predictions, batch.targets, rollout.deltas,
                                   cfg.loss);

    const double total = losses.total.values()[0];
    const double pred = losses.prediction.values()[0];
    const double dec_m = losses.decouple_m.values()[0];
    const double dec_m2 = losses.decouple_m2.values()[0];
    if (!std::isfinite(total)) {
      std::ostringstream os;
      os << "non-finite loss at iteration " << iter << ": total=" << total
         << " prediction=" << pred << " decouple_m=" << dec_m
         << " decouple_m2=" << dec_m2;
      throw TrainingDivergedError(os.str());
    }

    backward(losses.total);
    const double norm = clip_gradients(params, cfg.grad_clip_norm);
    optimizer.step(params);

    history.total.push_back(total);
    history.prediction.push_back(pred);
    history.decouple_m.push_back(dec_m);
    history.decouple_m2.push_back(dec_m2);
    history.grad_norm.push_back(norm);

    if (log && (iter % cfg.log_every == 0 || iter + 1 == cfg.iterations))
      (*log) << "iter=" << iter << " total=" << total << " prediction=" << pred
             << " decouple_m=" << dec_m << " decouple_m2=" << dec_m2
             << " grad_norm=" << norm << "\n";
  }

  history.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  history.final_param_crc = parameter_crc(params);
  return history;
}

void score_sequence(metrics::MetricReport& report, const std::string& id,
                    const std::vector<std::vector<float>>& prob_frames,
                    const data::PlumeSequence& truth, int t0, int input_steps,
                    float threshold) {
  const int k = static_cast<int>(prob_frames.size());
  if (t0 + input_steps + k > truth.frame_count())
    throw ContractError("score_sequence: window exceeds sequence length");

  if (report.timesteps.empty())
    for (int t = input_steps + 1; t <= input_steps + k; ++t)
      report.timesteps.push_back(t0 + t);

  std::vector<double> prec, acc;
  std::vector<metrics::ConfusionCounts> counts;
  for (int j = 0; j < k; ++j) {
    const auto pred = metrics::binarize_prediction(prob_frames[static_cast<std::size_t>(j)],
                                                   threshold);
    const auto& target = truth.frames.at(static_cast<std::size_t>(t0 + input_steps + j));
    const auto c = metrics::confusion(pred, target);
    prec.push_back(metrics::precision(c));
    acc.push_back(metrics::modified_accuracy(c));
    counts.push_back(c);
  }
  report.sequence_ids.push_back(id);
  report.precision_by_sequence.push_back(std::move(prec));
  report.accuracy_by_sequence.push_back(std::move(acc));
  report.counts_by_sequence.push_back(std::move(counts));
}

std::vector<std::vector<float>> predict_sequence(const ParameterSet<float>& params,
                                                 const net::ModelConfig& model,
                                                 const data::PlumeSequence& seq,
                                                 int t0, int input_steps, int horizon) {
  model.validate();
  if (t0 < 0 || t0 + input_steps > seq.frame_count())
    throw ContractError("predict_sequence: input window out of range");

  const std::size_t cells = static_cast<std::size_t>(seq.rows) * seq.cols;
  std::vector<Tensor<float>> inputs;
  for (int t = 0; t < input_steps; ++t) {
    std::vector<float> values(cells);
    const auto& frame = seq.frames.at(static_cast<std::size_t>(t0 + t));
    for (std::size_t i = 0; i < cells; ++i) values[i] = static_cast<float>(frame[i]);
    inputs.push_back(Tensor<float>::from({1, 1, seq.rows, seq.cols}, std::move(values)));
  }

  std::optional<net::WindTensors<float>> wind;
  if (model.input_channels == 4) {
    const auto wc = sim::wind_channels(seq.phi_rad, seq.speed, seq.rows, seq.cols);
    std::vector<float> dir(wc.direction.begin(), wc.direction.end());
    std::vector<float> spd(wc.speed.begin(), wc.speed.end());
    net::WindTensors<float> wt;
    wt.direction = Tensor<float>::from({1, 2, seq.rows, seq.cols}, std::move(dir));
    wt.speed = Tensor<float>::from({1, 1, seq.rows, seq.cols}, std::move(spd));
    wind = std::move(wt);
  }

  auto rollout = net::rollout(inputs, horizon, wind, params, model);

  // predictions for t = t0+T+1 .. t0+T+k are the last k entries
  std::vector<std::vector<float>> out;
  const std::size_t first = rollout.predictions.size() - static_cast<std::size_t>(horizon);
  for (std::size_t j = 0; j < static_cast<std::size_t>(horizon); ++j)
    out.push_back(rollout.predictions[first + j].values());
  return out;
}

metrics::MetricReport evaluate(const ParameterSet<float>& params,
                               const net::ModelConfig& model,
                               const std::vector<data::PlumeSequence>& test,
                               int input_steps, int horizon, float threshold) {
  metrics::MetricReport report;
  report.threshold = threshold;
  for (const auto& seq : test) {
    if (seq.frame_count() < input_steps + horizon) {
      report.skipped.push_back(seq.id);
      continue;
    }
    const auto probs = predict_sequence(params, model, seq, 0, input_steps, horizon);
    score_sequence(report, seq.id, probs, seq, 0, input_steps, threshold);
  }
  metrics::finalize_report(report);
  return report;
}

std::uint32_t parameter_crc(const ParameterSet<float>& params) {
  std::uint32_t crc = 0;
  for (const auto& [name, tensor] : params) {
    crc = data::crc32(name.data(), name.size(), crc);
    crc = data::crc32(tensor.values().data(), tensor.values().size() * sizeof(float), crc);
  }
  return crc;
}

}  // namespace plume::train
