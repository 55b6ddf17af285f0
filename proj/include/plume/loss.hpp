#pragma once

#include <vector>

#include "plume/network.hpp"
#include "plume/tensor.hpp"

namespace plume::loss {

struct LossOptions {
  // Divide each frame's squared error by its element count so hyperparameters
  // transfer across grid sizes; false restores the plain squared l2 norm.
  bool per_pixel = true;
  double epsilon = 1e-8;  // added to each cosine norm product
  double weight_prediction = 1.0;
  double weight_decouple_m = 1.0;
  double weight_decouple_m2 = 1.0;
};

// Mean over aligned steps of the squared l2 norm of the per-frame difference,
// averaged over the batch.
template <typename T>
Tensor<T> prediction_term(const std::vector<Tensor<T>>& preds,
                          const std::vector<Tensor<T>>& targets,
                          const LossOptions& opts = {}) {
  if (preds.size() != targets.size())
    throw ContractError("prediction_term: " + std::to_string(preds.size()) +
                        " predictions vs " + std::to_string(targets.size()) + " targets");
  if (preds.empty()) throw ContractError("prediction_term: empty inputs");

  Tensor<T> acc;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    auto s = sum(square(sub(preds[i], targets[i])));
    acc = acc.defined() ? add(acc, s) : s;
  }
  const int batch = preds[0].dim(0);
  double denom = static_cast<double>(preds.size()) * batch;
  if (opts.per_pixel) denom *= static_cast<double>(preds[0].dim(2)) * preds[0].dim(3);
  return scale(acc, static_cast<T>(1.0 / denom));
}

template <typename T>
struct DecouplingTerms {
  Tensor<T> first_order;   // sum of cos(delta_c, delta_m) over (t, l, n)
  Tensor<T> second_order;  // sum of cos(delta_c, delta_m2); zero scalar if absent
};

namespace detail {

template <typename T>
double sum_squares(const Tensor<T>& t) {
  double acc = 0;
  for (const T& v : t.values()) acc += static_cast<double>(v) * v;
  return acc;
}

// Channel-n cosine between two delta tensors, slices flattened over batch and
// space. Exactly-zero slices contribute nothing: the epsilon already pins the
// value at 0 and skipping avoids the sqrt singularity in the reverse pass.
template <typename T>
void accumulate_channel_cosines(const Tensor<T>& a, const Tensor<T>& b, T epsilon,
                                Tensor<T>& acc) {
  const int channels = a.dim(1);
  for (int n = 0; n < channels; ++n) {
    auto an = slice_channels(a, n, n + 1);
    auto bn = slice_channels(b, n, n + 1);
    if (sum_squares(an) == 0.0 || sum_squares(bn) == 0.0) continue;
    auto dot = sum(hadamard(an, bn));
    auto na = sqrt(sum(square(an)));
    auto nb = sqrt(sum(square(bn)));
    auto cosine = div(dot, shift(hadamard(na, nb), epsilon));
    acc = acc.defined() ? add(acc, cosine) : cosine;
  }
}

}  // namespace detail

// Cosine-similarity decoupling terms over every recorded (step, layer,
// channel). Summed, not averaged.
template <typename T>
DecouplingTerms<T> decoupling_terms(const std::vector<net::StepDeltas<T>>& deltas,
                                    const LossOptions& opts = {}) {
  const T eps = static_cast<T>(opts.epsilon);
  Tensor<T> first, second;
  bool any_second = false;
  for (const auto& step : deltas) {
    for (std::size_t l = 0; l < step.delta_c.size(); ++l) {
      detail::accumulate_channel_cosines(step.delta_c[l], step.delta_m[l], eps, first);
      if (l < step.delta_m2.size() && step.delta_m2[l].defined()) {
        any_second = true;
        detail::accumulate_channel_cosines(step.delta_c[l], step.delta_m2[l], eps, second);
      }
    }
  }
  DecouplingTerms<T> out;
  out.first_order = first.defined() ? first : Tensor<T>::scalar(T(0));
  out.second_order = (any_second && second.defined()) ? second : Tensor<T>::scalar(T(0));
  return out;
}

template <typename T>
struct TotalLoss {
  Tensor<T> total;
  Tensor<T> prediction;
  Tensor<T> decouple_m;
  Tensor<T> decouple_m2;
};

// Prediction error plus the memory-decoupling cosines. The baseline variant
// carries no second-order deltas, so its loss reduces to the first two terms.
template <typename T>
TotalLoss<T> total_loss(const std::vector<Tensor<T>>& preds,
                        const std::vector<Tensor<T>>& targets,
                        const std::vector<net::StepDeltas<T>>& deltas,
                        const LossOptions& opts = {}) {
  TotalLoss<T> out;
  out.prediction = prediction_term(preds, targets, opts);
  auto dec = decoupling_terms(deltas, opts);
  out.decouple_m = dec.first_order;
  out.decouple_m2 = dec.second_order;
  out.total = add(add(scale(out.prediction, static_cast<T>(opts.weight_prediction)),
                      scale(out.decouple_m, static_cast<T>(opts.weight_decouple_m))),
                  scale(out.decouple_m2, static_cast<T>(opts.weight_decouple_m2)));
  return out;
}

}  // namespace plume::loss
