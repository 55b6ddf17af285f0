#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "plume/loss.hpp"

#include "support/gradcheck.hpp"

using plume::ParameterSet;
using plume::Rng;
using plume::Tensor;
namespace loss = plume::loss;
namespace net = plume::net;

namespace {

template <typename T>
Tensor<T> random_tensor(plume::Shape shape, Rng& rng, double lo = -1, double hi = 1) {
  auto t = Tensor<T>::zeros(shape);
  for (auto& v : t.mutable_values()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

template <typename T>
std::vector<net::StepDeltas<T>> single_delta(Tensor<T> dc, Tensor<T> dm,
                                             Tensor<T> dm2 = {}) {
  net::StepDeltas<T> step;
  step.delta_c.push_back(dc);
  step.delta_m.push_back(dm);
  if (dm2.defined()) step.delta_m2.push_back(dm2);
  return {step};
}

}  // namespace

TEST_CASE("prediction term is zero for perfect predictions") {
  Rng rng(1);
  std::vector<Tensor<double>> preds, targets;
  for (int t = 0; t < 3; ++t) {
    auto f = random_tensor<double>({2, 1, 4, 4}, rng, 0, 1);
    preds.push_back(f);
    targets.push_back(f.detached_clone());
  }
  CHECK(loss::prediction_term(preds, targets).values()[0] == 0.0);
}

TEST_CASE("prediction term worked example: all-ones vs all-zeros on a 2x2 frame") {
  std::vector<Tensor<double>> preds{Tensor<double>::full({1, 1, 2, 2}, 1.0)};
  std::vector<Tensor<double>> targets{Tensor<double>::zeros({1, 1, 2, 2})};
  // each pixel error is 1; pixel-normalized mean is exactly 1
  CHECK(loss::prediction_term(preds, targets).values()[0] == doctest::Approx(1.0));

  loss::LossOptions raw;
  raw.per_pixel = false;
  CHECK(loss::prediction_term(preds, targets, raw).values()[0] == doctest::Approx(4.0));
}

TEST_CASE("prediction term matches an elementwise accumulation oracle") {
  Rng rng(2);
  const int steps = 4, b = 2, n = 3, m = 5;
  std::vector<Tensor<double>> preds, targets;
  double expected = 0;
  for (int t = 0; t < steps; ++t) {
    auto p = random_tensor<double>({b, 1, n, m}, rng, 0, 1);
    auto q = random_tensor<double>({b, 1, n, m}, rng, 0, 1);
    for (std::size_t i = 0; i < p.numel(); ++i) {
      const double d = p.values()[i] - q.values()[i];
      expected += d * d;
    }
    preds.push_back(p);
    targets.push_back(q);
  }
  expected /= static_cast<double>(steps) * b * n * m;
  CHECK(loss::prediction_term(preds, targets).values()[0] ==
        doctest::Approx(expected).epsilon(1e-12));

  preds.pop_back();
  CHECK_THROWS_AS(loss::prediction_term(preds, targets), plume::ContractError);
}

TEST_CASE("decoupling term vanishes for per-channel orthogonal deltas") {
  // channel slices [1,0] vs [0,1] are orthogonal once flattened
  auto dc = Tensor<double>::zeros({1, 2, 1, 2});
  auto dm = Tensor<double>::zeros({1, 2, 1, 2});
  for (int c = 0; c < 2; ++c) {
    dc.set({0, c, 0, 0}, 1.0);
    dm.set({0, c, 0, 1}, 1.0);
  }
  auto terms = loss::decoupling_terms(single_delta(dc, dm));
  CHECK(terms.first_order.values()[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(terms.second_order.values()[0] == 0.0);
}

TEST_CASE("identical nonzero deltas give cosine 1 per (t,l,n): total 2*(T+k)*L*Ch") {
  Rng rng(3);
  const int steps = 3, layers = 2, ch = 4;
  std::vector<net::StepDeltas<double>> deltas;
  for (int t = 0; t < steps; ++t) {
    net::StepDeltas<double> sd;
    for (int l = 0; l < layers; ++l) {
      auto d = random_tensor<double>({1, ch, 3, 3}, rng, 0.1, 1.0);
      sd.delta_c.push_back(d);
      sd.delta_m.push_back(d.detached_clone());
      sd.delta_m2.push_back(d.detached_clone());
    }
    deltas.push_back(sd);
  }
  auto terms = loss::decoupling_terms(deltas);
  const double expected = static_cast<double>(steps) * layers * ch;
  CHECK(terms.first_order.values()[0] == doctest::Approx(expected).epsilon(1e-6));
  CHECK(terms.second_order.values()[0] == doctest::Approx(expected).epsilon(1e-6));

  loss::LossOptions opts;
  std::vector<Tensor<double>> preds{Tensor<double>::zeros({1, 1, 3, 3})};
  std::vector<Tensor<double>> targets{Tensor<double>::zeros({1, 1, 3, 3})};
  auto total = loss::total_loss(preds, targets, deltas, opts);
  CHECK(total.total.values()[0] == doctest::Approx(2 * expected).epsilon(1e-6));
}

TEST_CASE("hand-sized decoupling case matches manual cosine arithmetic") {
  // T+k = 1, L = 1, Ch = 2, 2 pixels, batch 1
  auto dc = Tensor<double>::from({1, 2, 1, 2}, {1.0, 2.0, -1.0, 0.5});
  auto dm = Tensor<double>::from({1, 2, 1, 2}, {3.0, -1.0, 2.0, 4.0});

  // channel 0: <(1,2),(3,-1)> / (|(1,2)||(3,-1)|) = 1/(sqrt(5)sqrt(10))
  // channel 1: <(-1,.5),(2,4)> / (|(-1,.5)||(2,4)|) = 0/(...) = 0
  const double c0 = 1.0 / (std::sqrt(5.0) * std::sqrt(10.0) + 1e-8);
  const double c1 = 0.0 / (std::sqrt(1.25) * std::sqrt(20.0) + 1e-8);
  auto terms = loss::decoupling_terms(single_delta(dc, dm));
  CHECK(terms.first_order.values()[0] == doctest::Approx(c0 + c1).epsilon(1e-12));
}

TEST_CASE("cosine contribution is invariant to positive scaling of a delta slice") {
  Rng rng(4);
  auto dc = random_tensor<double>({2, 3, 4, 4}, rng);
  auto dm = random_tensor<double>({2, 3, 4, 4}, rng);
  auto base = loss::decoupling_terms(single_delta(dc, dm));
  auto scaled = loss::decoupling_terms(single_delta(scale(dc, 7.5), dm));
  CHECK(base.first_order.values()[0] ==
        doctest::Approx(scaled.first_order.values()[0]).epsilon(1e-6));
}

TEST_CASE("zero-norm slices contribute nothing and stay differentiable") {
  auto dc = Tensor<double>::zeros({1, 2, 2, 2});
  auto dm = Tensor<double>::full({1, 2, 2, 2}, 0.3);
  dm.set_requires_grad(true);
  auto terms = loss::decoupling_terms(single_delta(dc, dm));
  CHECK(terms.first_order.values()[0] == 0.0);
}

TEST_CASE("baseline deltas omit the second-order cosine") {
  Rng rng(5);
  auto dc = random_tensor<double>({1, 2, 3, 3}, rng);
  auto dm = random_tensor<double>({1, 2, 3, 3}, rng);
  std::vector<Tensor<double>> preds{random_tensor<double>({1, 1, 3, 3}, rng, 0, 1)};
  std::vector<Tensor<double>> targets{random_tensor<double>({1, 1, 3, 3}, rng, 0, 1)};
  auto total = loss::total_loss(preds, targets, single_delta(dc, dm));
  CHECK(total.decouple_m2.values()[0] == 0.0);
  CHECK(total.decouple_m.values()[0] != 0.0);
}

TEST_CASE("total loss respects the lower bound from cosine and norm ranges") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const int steps = 1 + rng.below_int(3);
    const int layers = 1 + rng.below_int(2);
    const int ch = 1 + rng.below_int(3);
    std::vector<net::StepDeltas<double>> deltas;
    for (int t = 0; t < steps; ++t) {
      net::StepDeltas<double> sd;
      for (int l = 0; l < layers; ++l) {
        sd.delta_c.push_back(random_tensor<double>({1, ch, 3, 3}, rng));
        sd.delta_m.push_back(random_tensor<double>({1, ch, 3, 3}, rng));
        sd.delta_m2.push_back(random_tensor<double>({1, ch, 3, 3}, rng));
      }
      deltas.push_back(sd);
    }
    std::vector<Tensor<double>> preds{random_tensor<double>({1, 1, 3, 3}, rng, 0, 1)};
    std::vector<Tensor<double>> targets{random_tensor<double>({1, 1, 3, 3}, rng, 0, 1)};
    auto total = loss::total_loss(preds, targets, deltas);
    CHECK(total.total.values()[0] >= -2.0 * steps * layers * ch);
    // every per-(t,l,n) cosine lies in [-1, 1]
    CHECK(std::abs(total.decouple_m.values()[0]) <=
          static_cast<double>(steps) * layers * ch + 1e-9);
  }
}

TEST_CASE("term weights rescale the components") {
  Rng rng(7);
  auto dc = random_tensor<double>({1, 1, 2, 2}, rng);
  auto dm = random_tensor<double>({1, 1, 2, 2}, rng);
  std::vector<Tensor<double>> preds{random_tensor<double>({1, 1, 2, 2}, rng, 0, 1)};
  std::vector<Tensor<double>> targets{random_tensor<double>({1, 1, 2, 2}, rng, 0, 1)};

  loss::LossOptions opts;
  auto base = loss::total_loss(preds, targets, single_delta(dc, dm), opts);
  opts.weight_decouple_m = 0.0;
  opts.weight_prediction = 2.0;
  auto reweighted = loss::total_loss(preds, targets, single_delta(dc, dm), opts);
  CHECK(reweighted.total.values()[0] ==
        doctest::Approx(2.0 * base.prediction.values()[0]).epsilon(1e-12));
}

TEST_CASE("decoupling gradients match finite differences") {
  Rng rng(8);
  ParameterSet<double> params;
  params.add("dc", random_tensor<double>({1, 2, 3, 3}, rng));
  params.add("dm", random_tensor<double>({1, 2, 3, 3}, rng));
  params.add("dm2", random_tensor<double>({1, 2, 3, 3}, rng));

  auto objective = [&](const ParameterSet<double>& p) {
    auto terms = loss::decoupling_terms(
        single_delta(p.at("dc"), p.at("dm"), p.at("dm2")));
    return add(terms.first_order, terms.second_order);
  };

  params.zero_grad();
  plume::backward(objective(params));
  auto result = oracle::gradcheck(params, [&](const ParameterSet<double>& p) {
    return objective(p).values()[0];
  });
  INFO("worst=", result.worst_name, " rel=", result.worst_rel);
  CHECK(result.ok);
}
