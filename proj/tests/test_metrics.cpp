#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "plume/metrics.hpp"
#include "plume/rng.hpp"

namespace metrics = plume::metrics;
using metrics::ConfusionCounts;

TEST_CASE("binarization boundary is inclusive") {
  std::vector<float> all_half(16, 0.5f);
  auto ones = metrics::binarize_prediction(all_half, 0.5f);
  for (auto v : ones) CHECK(v == 1);

  std::vector<float> below(16, 0.49f);
  auto zeros = metrics::binarize_prediction(below, 0.5f);
  for (auto v : zeros) CHECK(v == 0);
}

TEST_CASE("binarization equals the elementwise comparison oracle") {
  plume::Rng rng(1);
  std::vector<float> frame(64);
  for (auto& v : frame) v = static_cast<float>(rng.uniform());
  const float threshold = 0.37f;
  auto got = metrics::binarize_prediction(frame, threshold);
  for (std::size_t i = 0; i < frame.size(); ++i)
    CHECK(got[i] == (frame[i] >= threshold ? 1 : 0));
}

TEST_CASE("confusion counts on hand cases") {
  // pred == truth with 7 ones and 9 zeros
  std::vector<std::uint8_t> truth(16, 0);
  std::fill(truth.begin(), truth.begin() + 7, 1);
  auto c = metrics::confusion(truth, truth);
  CHECK(c.tp == 7);
  CHECK(c.tn == 9);
  CHECK(c.fp == 0);
  CHECK(c.fn == 0);

  std::vector<std::uint8_t> inverted(16);
  for (std::size_t i = 0; i < 16; ++i) inverted[i] = 1 - truth[i];
  auto c2 = metrics::confusion(inverted, truth);
  CHECK(c2.tp == 0);
  CHECK(c2.tn == 0);
  CHECK(c2.fp == 9);
  CHECK(c2.fn == 7);

  std::vector<std::uint8_t> bad(16, 2);
  CHECK_THROWS_AS(metrics::confusion(bad, truth), plume::ContractError);
}

TEST_CASE("confusion matches brute-force enumeration on random 8x8 pairs") {
  plume::Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::uint8_t> pred(64), truth(64);
    for (auto& v : pred) v = static_cast<std::uint8_t>(rng.below(2));
    for (auto& v : truth) v = static_cast<std::uint8_t>(rng.below(2));
    auto c = metrics::confusion(pred, truth);

    long long tp = 0, fp = 0, tn = 0, fn = 0;
    for (int i = 0; i < 64; ++i) {
      if (pred[i] == 1 && truth[i] == 1) ++tp;
      if (pred[i] == 1 && truth[i] == 0) ++fp;
      if (pred[i] == 0 && truth[i] == 0) ++tn;
      if (pred[i] == 0 && truth[i] == 1) ++fn;
    }
    CHECK(c.tp == tp);
    CHECK(c.fp == fp);
    CHECK(c.tn == tn);
    CHECK(c.fn == fn);
    CHECK(c.total() == 64);
  }
}

TEST_CASE("precision and modified accuracy on worked cases") {
  CHECK(metrics::precision({10, 5, 0, 0}) == doctest::Approx(2.0 / 3.0).epsilon(1e-4));

  // tp=10 fp=2 fn=3 tn=100 -> (10 + 25) / (10 + 2 + 3 + 25) = 0.875
  ConfusionCounts c;
  c.tp = 10;
  c.fp = 2;
  c.fn = 3;
  c.tn = 100;
  CHECK(metrics::modified_accuracy(c) == doctest::Approx(0.875).epsilon(1e-12));

  ConfusionCounts perfect;
  perfect.tp = 7;
  perfect.tn = 57;
  CHECK(metrics::precision(perfect) == 1.0);
  CHECK(metrics::modified_accuracy(perfect) == 1.0);
}

TEST_CASE("degenerate precision follows the stated convention") {
  ConfusionCounts empty_on_empty;  // nothing predicted, nothing to find
  empty_on_empty.tn = 64;
  CHECK(metrics::precision(empty_on_empty) == 1.0);

  ConfusionCounts empty_on_nonempty;  // nothing predicted, plume present
  empty_on_nonempty.tn = 60;
  empty_on_nonempty.fn = 4;
  CHECK(metrics::precision(empty_on_nonempty) == 0.0);
}

TEST_CASE("both metrics stay in [0,1] over exhaustive small counts") {
  for (long long tp = 0; tp <= 4; ++tp)
    for (long long fp = 0; fp <= 4; ++fp)
      for (long long tn = 0; tn <= 4; ++tn)
        for (long long fn = 0; fn <= 4; ++fn) {
          ConfusionCounts c{tp, fp, tn, fn};
          const double p = metrics::precision(c);
          const double a = metrics::modified_accuracy(c);
          CHECK(p >= 0.0);
          CHECK(p <= 1.0);
          CHECK(a >= 0.0);
          CHECK(a <= 1.0);
        }
}

TEST_CASE("TN weight 1 recovers standard accuracy") {
  plume::Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    ConfusionCounts c;
    c.tp = static_cast<long long>(rng.below(50));
    c.fp = static_cast<long long>(rng.below(50));
    c.tn = static_cast<long long>(rng.below(50));
    c.fn = static_cast<long long>(rng.below(50));
    if (c.total() == 0) continue;
    const double standard =
        static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
    CHECK(metrics::modified_accuracy(c, 1.0) == doctest::Approx(standard).epsilon(1e-12));
  }
}

TEST_CASE("metrics are invariant under a shared cell permutation") {
  plume::Rng rng(4);
  std::vector<std::uint8_t> pred(64), truth(64);
  for (auto& v : pred) v = static_cast<std::uint8_t>(rng.below(2));
  for (auto& v : truth) v = static_cast<std::uint8_t>(rng.below(2));

  std::vector<int> perm(64);
  for (int i = 0; i < 64; ++i) perm[static_cast<std::size_t>(i)] = i;
  rng.shuffle(perm);
  std::vector<std::uint8_t> pred_p(64), truth_p(64);
  for (int i = 0; i < 64; ++i) {
    pred_p[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = pred[static_cast<std::size_t>(i)];
    truth_p[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = truth[static_cast<std::size_t>(i)];
  }
  auto a = metrics::confusion(pred, truth);
  auto b = metrics::confusion(pred_p, truth_p);
  CHECK(metrics::precision(a) == metrics::precision(b));
  CHECK(metrics::modified_accuracy(a) == metrics::modified_accuracy(b));
}

TEST_CASE("report export has one row per timestep") {
  metrics::MetricReport report;
  report.timesteps = {6, 7, 8};
  report.sequence_ids = {"a", "b"};
  report.precision_by_sequence = {{1.0, 0.5, 0.25}, {0.5, 0.5, 0.75}};
  report.accuracy_by_sequence = {{1.0, 0.9, 0.8}, {0.8, 0.9, 1.0}};
  report.counts_by_sequence = {{{1, 0, 1, 0}, {1, 0, 1, 0}, {1, 0, 1, 0}},
                               {{1, 0, 1, 0}, {1, 0, 1, 0}, {1, 0, 1, 0}}};
  metrics::finalize_report(report);

  CHECK(report.mean_precision[0] == doctest::Approx(0.75));
  CHECK(report.mean_accuracy[2] == doctest::Approx(0.9));
  CHECK(report.overall_mean_accuracy() == doctest::Approx((0.9 + 0.9 + 0.9) / 3.0));

  const auto csv = metrics::report_csv(report);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);  // header + 3 rows
  CHECK(csv.find("t,precision,modified_accuracy") == 0);

  const auto json = metrics::report_json(report);
  CHECK(json.find("\"timesteps\": [6,7,8]") != std::string::npos);
}
