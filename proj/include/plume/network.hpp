#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "plume/cells.hpp"
#include "plume/params.hpp"
#include "plume/tensor.hpp"

namespace plume::net {

enum class Variant { st_gasnet, pred_rnn };

inline const char* variant_name(Variant v) {
  return v == Variant::st_gasnet ? "st_gasnet" : "pred_rnn";
}

inline Variant variant_from_name(const std::string& s) {
  if (s == "st_gasnet") return Variant::st_gasnet;
  if (s == "pred_rnn") return Variant::pred_rnn;
  throw ConfigError("unknown variant: " + s);
}

struct ModelConfig {
  Variant variant = Variant::st_gasnet;
  int layers = 4;
  int hidden_channels = 16;
  int kernel_size = 3;
  int input_channels = 1;  // 4 when wind channels are attached
  int rows = 32;
  int cols = 32;
  bool use_bias = false;
  bool share_m_input_kernels = true;

  void validate() const {
    if (layers < 1) throw ConfigError("model.layers must be >= 1");
    if (hidden_channels < 1) throw ConfigError("model.hidden_channels must be >= 1");
    if (kernel_size < 1 || kernel_size % 2 == 0)
      throw ConfigError("model.kernel_size must be odd and positive");
    if (input_channels != 1 && input_channels != 4)
      throw ConfigError("model.input_channels must be 1 or 4");
    if (rows < 1 || cols < 1) throw ConfigError("model frame extent must be positive");
  }

  cells::CellOptions cell_options() const {
    return {use_bias, share_m_input_kernels};
  }

  std::string layer_prefix(int layer) const { return "l" + std::to_string(layer) + "."; }

  int layer_input_channels(int layer) const {
    return layer == 0 ? input_channels : hidden_channels;
  }
};

namespace detail {

template <typename T>
void add_conv_param(ParameterSet<T>& p, const std::string& name, int cout, int cin,
                    int k, Rng& rng) {
  const T bound = static_cast<T>(1.0 / std::sqrt(static_cast<double>(cin) * k * k));
  p.add(name, Tensor<T>::uniform({cout, cin, k, k}, bound, rng));
}

}  // namespace detail

// Kernels (and optional biases) for one recurrent cell, uniform in
// +/-1/sqrt(fan_in), drawn in fixed order from the supplied stream.
template <typename T>
void add_cell_parameters(ParameterSet<T>& p, const std::string& pre, int input_channels,
                         int hidden_channels, int kernel_size, bool second_order,
                         bool share_m_input_kernels, bool use_bias, Rng& rng) {
  const int ch = hidden_channels;
  const int cx = input_channels;
  const int k = kernel_size;

  for (const char* g : {"w_xg", "w_xi", "w_xf", "w_xo"})
    detail::add_conv_param(p, pre + g, ch, cx, k, rng);
  for (const char* g : {"w_hg", "w_hi", "w_hf", "w_ho"})
    detail::add_conv_param(p, pre + g, ch, ch, k, rng);
  for (const char* g : {"w_xg_m", "w_xi_m", "w_xf_m"})
    detail::add_conv_param(p, pre + g, ch, cx, k, rng);
  for (const char* g : {"w_mg", "w_mi", "w_mf", "w_mo"})
    detail::add_conv_param(p, pre + g, ch, ch, k, rng);
  detail::add_conv_param(p, pre + "w_co", ch, ch, k, rng);

  if (second_order) {
    for (const char* g : {"w_hg_lag", "w_hi_lag", "w_hf_lag", "w_ho_lag"})
      detail::add_conv_param(p, pre + g, ch, ch, k, rng);
    for (const char* g : {"w_m2g", "w_m2i", "w_m2f", "w_m2o"})
      detail::add_conv_param(p, pre + g, ch, ch, k, rng);
    if (!share_m_input_kernels)
      for (const char* g : {"w_xg_m2", "w_xi_m2", "w_xf_m2"})
        detail::add_conv_param(p, pre + g, ch, cx, k, rng);
  }

  const int fuse_in = second_order ? 3 * ch : 2 * ch;
  detail::add_conv_param(p, pre + "w_fuse", ch, fuse_in, 1, rng);

  if (use_bias) {
    std::vector<const char*> biases = {"b_g", "b_i", "b_f", "b_o", "b_gm", "b_im", "b_fm"};
    if (second_order) {
      biases.push_back("b_gm2");
      biases.push_back("b_im2");
      biases.push_back("b_fm2");
    }
    for (const char* b : biases) p.add(pre + b, Tensor<T>::zeros({ch}));
  }
}

// Builds every parameter the configured variant consumes, in deterministic
// layer order.
template <typename T>
ParameterSet<T> init_parameters(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ParameterSet<T> p;
  Rng rng(seed);
  const bool second_order = cfg.variant == Variant::st_gasnet;

  for (int l = 0; l < cfg.layers; ++l)
    add_cell_parameters(p, cfg.layer_prefix(l), cfg.layer_input_channels(l),
                        cfg.hidden_channels, cfg.kernel_size, second_order,
                        cfg.share_m_input_kernels, cfg.use_bias, rng);

  detail::add_conv_param(p, "head.w", 1, cfg.hidden_channels, 1, rng);
  if (cfg.use_bias) p.add("head.b", Tensor<T>::zeros({1}));
  return p;
}

// Recurrent state across steps. All entries zero until populated: the lagged
// hidden states exist from step 2, the twice-lagged zigzag input from step 3.
template <typename T>
struct NetworkState {
  std::vector<Tensor<T>> h;      // per layer, from t-1
  std::vector<Tensor<T>> h_lag;  // per layer, from t-2
  std::vector<Tensor<T>> c;      // per layer, from t-1
  Tensor<T> m_top;               // top-layer first-order zigzag from t-1
  Tensor<T> m2_top_prev;         // top-layer second-order zigzag from t-1
  Tensor<T> m2_top_lag2;         // top-layer second-order zigzag from t-2
  int t = 0;                     // steps executed so far
  // fingerprint of the owning configuration
  int layers = 0, hidden_channels = 0, rows = 0, cols = 0, batch = 0;
};

template <typename T>
NetworkState<T> init_state(const ModelConfig& cfg, int batch) {
  cfg.validate();
  if (batch < 1) throw ContractError("batch must be >= 1");
  NetworkState<T> s;
  const Shape state_shape{batch, cfg.hidden_channels, cfg.rows, cfg.cols};
  for (int l = 0; l < cfg.layers; ++l) {
    s.h.push_back(Tensor<T>::zeros(state_shape));
    s.h_lag.push_back(Tensor<T>::zeros(state_shape));
    s.c.push_back(Tensor<T>::zeros(state_shape));
  }
  s.m_top = Tensor<T>::zeros(state_shape);
  s.m2_top_prev = Tensor<T>::zeros(state_shape);
  s.m2_top_lag2 = Tensor<T>::zeros(state_shape);
  s.layers = cfg.layers;
  s.hidden_channels = cfg.hidden_channels;
  s.rows = cfg.rows;
  s.cols = cfg.cols;
  s.batch = batch;
  return s;
}

// Memory-update increments of one step, per layer; delta_m2 stays empty for
// the baseline variant.
template <typename T>
struct StepDeltas {
  std::vector<Tensor<T>> delta_c, delta_m, delta_m2;
};

// Optional instrumentation: records the zigzag tensors each layer consumed
// and produced within one step.
template <typename T>
struct StepTrace {
  std::vector<Tensor<T>> m_in, m_out, m2_in, m2_out;
};

template <typename T>
struct StepResult {
  Tensor<T> prediction;
  NetworkState<T> state;
  StepDeltas<T> deltas;
};

// 1x1 convolution to one channel plus sigmoid; output in (0,1) is read as
// contamination probability.
template <typename T>
Tensor<T> output_head(const Tensor<T>& h_top, const ParameterSet<T>& p,
                      const ModelConfig& cfg) {
  auto z = conv2d(h_top, p.at("head.w"));
  if (cfg.use_bias) z = add_bias(z, p.at("head.b"));
  return sigmoid(z);
}

// Advances the stack by one time step. Layer 0 consumes the frame plus the
// top-layer zigzag memories recorded one (and, for the second-order variant,
// two) steps ago; higher layers consume the hidden state below and the
// zigzag memories thread upward within the step.
template <typename T>
StepResult<T> step(const Tensor<T>& frame, const NetworkState<T>& state,
                   const ParameterSet<T>& params, const ModelConfig& cfg,
                   StepTrace<T>* trace = nullptr) {
  cfg.validate();
  plume::detail::check_rank4(frame, "step frame");
  if (frame.dim(1) != cfg.input_channels)
    throw ShapeError("step: frame has " + std::to_string(frame.dim(1)) +
                     " channels, model expects " + std::to_string(cfg.input_channels));
  if (state.layers != cfg.layers || state.hidden_channels != cfg.hidden_channels ||
      state.rows != cfg.rows || state.cols != cfg.cols)
    throw ContractError("step: state belongs to a different model configuration");
  if (frame.dim(0) != state.batch || frame.dim(2) != cfg.rows || frame.dim(3) != cfg.cols)
    throw ShapeError("step: frame shape " + shape_str(frame.shape()) +
                     " does not match state batch/extent");

  const bool second_order = cfg.variant == Variant::st_gasnet;
  const auto opt = cfg.cell_options();

  StepResult<T> out;
  out.state = state;  // copies the tensor handles; replaced below
  out.state.t = state.t + 1;

  Tensor<T> x = frame;
  Tensor<T> m = state.m_top;        // zigzag entering layer 0
  Tensor<T> m2 = state.m2_top_lag2; // second-order zigzag entering layer 0

  for (int l = 0; l < cfg.layers; ++l) {
    cells::CellInputs<T> ci;
    ci.x = x;
    ci.h1 = state.h[l];
    ci.c_prev = state.c[l];
    ci.m_in = m;
    if (second_order) {
      ci.h2 = state.h_lag[l];
      ci.m2_in = m2;
    }
    if (trace) {
      trace->m_in.push_back(m);
      if (second_order) trace->m2_in.push_back(m2);
    }

    cells::CellOutputs<T> co = second_order
        ? cells::st_lstm_pp_forward(ci, params, cfg.layer_prefix(l), opt)
        : cells::st_lstm_forward(ci, params, cfg.layer_prefix(l), opt);

    out.state.h_lag[l] = state.h[l];
    out.state.h[l] = co.h;
    out.state.c[l] = co.c;
    out.deltas.delta_c.push_back(co.delta_c);
    out.deltas.delta_m.push_back(co.delta_m);
    if (second_order) out.deltas.delta_m2.push_back(co.delta_m2);
    if (trace) {
      trace->m_out.push_back(co.m);
      if (second_order) trace->m2_out.push_back(co.m2);
    }

    x = co.h;
    m = co.m;
    if (second_order) m2 = co.m2;
  }

  out.state.m_top = m;
  if (second_order) {
    out.state.m2_top_lag2 = state.m2_top_prev;
    out.state.m2_top_prev = m2;
  }

  out.prediction = output_head(x, params, cfg);
  return out;
}

// Constant per-sequence wind fields, broadcast to the batch.
template <typename T>
struct WindTensors {
  Tensor<T> direction;  // [B,2,N,M]
  Tensor<T> speed;      // [B,1,N,M]
};

template <typename T>
struct RolloutResult {
  std::vector<Tensor<T>> predictions;   // aligned to targets t = 2 .. T+k
  std::vector<StepDeltas<T>> deltas;    // one entry per executed step
};

namespace detail {

template <typename T>
Tensor<T> attach_wind(const Tensor<T>& frame, const WindTensors<T>& wind) {
  return concat_channels<T>({frame, wind.direction, wind.speed});
}

}  // namespace detail

// Runs the model over T observed frames then feeds its own predictions back
// for the remaining horizon. Inputs are raw one-channel frames; when the
// model takes wind the constant channels are attached here, both to observed
// frames and to fed-back predictions. Returns T+k-1 predictions.
template <typename T>
RolloutResult<T> rollout(const std::vector<Tensor<T>>& inputs, int horizon,
                         const std::optional<WindTensors<T>>& wind,
                         const ParameterSet<T>& params, const ModelConfig& cfg) {
  cfg.validate();
  if (inputs.empty()) throw ContractError("rollout: no input frames");
  if (horizon < 0) throw ContractError("rollout: horizon must be >= 0");
  const bool with_wind = cfg.input_channels == 4;
  if (with_wind && !wind)
    throw ContractError("rollout: model expects wind channels but none supplied");

  const int input_steps = static_cast<int>(inputs.size());
  const int batch = inputs[0].dim(0);
  auto state = init_state<T>(cfg, batch);

  RolloutResult<T> out;
  const int total_steps = input_steps + horizon - 1;
  for (int t = 1; t <= total_steps; ++t) {
    Tensor<T> frame;
    if (t <= input_steps) {
      frame = inputs[static_cast<std::size_t>(t - 1)];
      if (frame.dim(1) != 1)
        throw ShapeError("rollout: input frames must have one channel");
      if (with_wind) frame = detail::attach_wind(frame, *wind);
    } else {
      // feed back the continuous probability map
      frame = out.predictions.back();
      if (with_wind) frame = detail::attach_wind(frame, *wind);
    }
    auto res = step(frame, state, params, cfg);
    state = std::move(res.state);
    out.predictions.push_back(std::move(res.prediction));
    out.deltas.push_back(std::move(res.deltas));
  }
  return out;
}

template <typename T>
RolloutResult<T> rollout(const std::vector<Tensor<T>>& inputs, int horizon,
                         const ParameterSet<T>& params, const ModelConfig& cfg) {
  return rollout(inputs, horizon, std::optional<WindTensors<T>>{}, params, cfg);
}

}  // namespace plume::net
