#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "plume/dataset.hpp"
#include "plume/loss.hpp"
#include "plume/metrics.hpp"
#include "plume/network.hpp"
#include "plume/params.hpp"

namespace plume::train {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adaptive-moment estimation over a ParameterSet. Moments are keyed by
// parameter name; update order follows the set's deterministic iteration.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(ParameterSet<T>& params) {
    ++t_;
    const T b1 = static_cast<T>(cfg_.beta1);
    const T b2 = static_cast<T>(cfg_.beta2);
    const T m_corr = static_cast<T>(1.0 - std::pow(cfg_.beta1, static_cast<double>(t_)));
    const T v_corr = static_cast<T>(1.0 - std::pow(cfg_.beta2, static_cast<double>(t_)));
    const T lr = static_cast<T>(cfg_.lr);
    const T eps = static_cast<T>(cfg_.epsilon);
    for (auto& [name, p] : params) {
      auto& [m, v] = moments_[name];
      const auto& g = p.grad();
      if (m.size() != g.size()) {
        m.assign(g.size(), T(0));
        v.assign(g.size(), T(0));
      }
      auto& x = p.mutable_values();
      for (std::size_t i = 0; i < g.size(); ++i) {
        m[i] = b1 * m[i] + (T(1) - b1) * g[i];
        v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
        const T mhat = m[i] / m_corr;
        const T vhat = v[i] / v_corr;
        x[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }

  long long steps_taken() const { return t_; }

 private:
  AdamConfig cfg_;
  long long t_ = 0;
  std::map<std::string, std::pair<std::vector<T>, std::vector<T>>> moments_;
};

// Global-norm gradient clipping; returns the pre-clip norm.
template <typename T>
double clip_gradients(ParameterSet<T>& params, double max_norm) {
  double sq = 0;
  for (const auto& [name, p] : params)
    for (const T& g : p.grad()) sq += static_cast<double>(g) * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const T factor = static_cast<T>(max_norm / norm);
    for (auto& [name, p] : params) {
      auto& g = const_cast<std::vector<T>&>(p.grad());
      for (T& gi : g) gi *= factor;
    }
  }
  return norm;
}

struct TrainConfig {
  AdamConfig adam;
  int batch_size = 4;
  int iterations = 500;
  double grad_clip_norm = 5.0;  // <= 0 disables clipping
  std::uint64_t seed = 0;
  int input_steps = 5;  // T
  int horizon = 15;     // k
  int stride = 2;       // s, for clip construction
  bool with_wind = false;
  loss::LossOptions loss;
  int log_every = 10;

  void validate() const {
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (iterations < 1) throw ConfigError("train.iterations must be >= 1");
    if (adam.lr < 0) throw ConfigError("train.lr must be non-negative");
    if (input_steps < 1) throw ConfigError("train.input_steps must be >= 1");
    if (horizon < 0) throw ConfigError("train.horizon must be >= 0");
    if (stride < 1) throw ConfigError("train.stride must be >= 1");
  }
};

struct TrainHistory {
  std::vector<double> total, prediction, decouple_m, decouple_m2, grad_norm;
  double wall_clock_s = 0;
  std::uint32_t final_param_crc = 0;
};

// Assembles a batch of clips into rollout inputs, the aligned targets
// (frames 2 .. T+k of each window) and, when requested, wind tensors.
struct Batch {
  std::vector<Tensor<float>> inputs;   // T frames, [B,1,N,M]
  std::vector<Tensor<float>> targets;  // T+k-1 frames, [B,1,N,M]
  std::optional<net::WindTensors<float>> wind;
};

Batch assemble_batch(const std::vector<data::PlumeSequence>& sequences,
                     const std::vector<data::Clip>& clips, bool with_wind);

// Seeded mini-batch gradient descent on the combined objective.
TrainHistory train(ParameterSet<float>& params, const net::ModelConfig& model,
                   const std::vector<data::PlumeSequence>& sequences,
                   const std::vector<data::Clip>& clips, const TrainConfig& cfg,
                   std::ostream* log = nullptr);

// Scores k predicted probability frames against truth frames
// t0+T .. t0+T+k-1 of `truth`, appending one per-sequence row to the report.
void score_sequence(metrics::MetricReport& report, const std::string& id,
                    const std::vector<std::vector<float>>& prob_frames,
                    const data::PlumeSequence& truth, int t0, int input_steps,
                    float threshold);

// First-clip evaluation protocol: for each test sequence roll out `horizon`
// steps from the first `input_steps` frames and score per predicted step.
metrics::MetricReport evaluate(const ParameterSet<float>& params,
                               const net::ModelConfig& model,
                               const std::vector<data::PlumeSequence>& test,
                               int input_steps, int horizon, float threshold);

// The rollout underlying both `evaluate` and the predict command: probability
// frames for steps t0+T+1 .. t0+T+k of one sequence.
std::vector<std::vector<float>> predict_sequence(const ParameterSet<float>& params,
                                                 const net::ModelConfig& model,
                                                 const data::PlumeSequence& seq,
                                                 int t0, int input_steps, int horizon);

std::uint32_t parameter_crc(const ParameterSet<float>& params);

}  // namespace plume::train
