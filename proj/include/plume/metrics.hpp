#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plume/errors.hpp"

namespace plume::metrics {

struct ConfusionCounts {
  long long tp = 0, fp = 0, tn = 0, fn = 0;
  long long total() const { return tp + fp + tn + fn; }
};

// 1 where prob >= threshold (boundary inclusive), else 0.
std::vector<std::uint8_t> binarize_prediction(const std::vector<float>& probs,
                                              float threshold);

// Exact counts; inputs must be 0/1.
ConfusionCounts confusion(const std::vector<std::uint8_t>& pred,
                          const std::vector<std::uint8_t>& truth);

// TP/(TP+FP). When TP+FP = 0 the value is 1 if there was nothing to detect
// (FN = 0) and 0 otherwise.
double precision(const ConfusionCounts& c);

// (TP + w*TN) / (TP + FP + FN + w*TN); the default weight 1/4 counters the
// class imbalance of mostly-empty grids. Weight 1 recovers plain accuracy.
double modified_accuracy(const ConfusionCounts& c, double tn_weight = 0.25);

// Per-timestep metrics averaged over sequences with equal weight.
struct MetricReport {
  std::vector<int> timesteps;            // 1-based frame indices (t = T+1 .. T+k)
  std::vector<double> mean_precision;    // per timestep
  std::vector<double> mean_accuracy;     // per timestep
  std::vector<std::string> sequence_ids;
  // per sequence x per timestep detail
  std::vector<std::vector<double>> precision_by_sequence;
  std::vector<std::vector<double>> accuracy_by_sequence;
  std::vector<std::vector<ConfusionCounts>> counts_by_sequence;
  std::vector<std::string> skipped;      // sequences too short to evaluate
  double threshold = 0.5;

  double overall_mean_accuracy() const;
  double overall_mean_precision() const;
};

// Builds the per-timestep averages from the per-sequence detail already
// stored in the report.
void finalize_report(MetricReport& report);

std::string report_csv(const MetricReport& report);
std::string report_json(const MetricReport& report);

}  // namespace plume::metrics
