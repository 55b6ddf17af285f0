#include "plume/metrics.hpp"

#include <cmath>
#include <sstream>

namespace plume::metrics {

std::vector<std::uint8_t> binarize_prediction(const std::vector<float>& probs,
                                              float threshold) {
  std::vector<std::uint8_t> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i)
    out[i] = probs[i] >= threshold ? 1 : 0;
  return out;
}

ConfusionCounts confusion(const std::vector<std::uint8_t>& pred,
                          const std::vector<std::uint8_t>& truth) {
  if (pred.size() != truth.size())
    throw ContractError("confusion: size mismatch");
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const std::uint8_t p = pred[i], t = truth[i];
    if (p > 1 || t > 1) throw ContractError("confusion: inputs must be binary");
    if (p && t)
      ++c.tp;
    else if (p && !t)
      ++c.fp;
    else if (!p && t)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

double precision(const ConfusionCounts& c) {
  if (c.tp + c.fp == 0) return c.fn == 0 ? 1.0 : 0.0;
  return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
}

double modified_accuracy(const ConfusionCounts& c, double tn_weight) {
  const double num = static_cast<double>(c.tp) + tn_weight * static_cast<double>(c.tn);
  const double den = static_cast<double>(c.tp + c.fp + c.fn) +
                     tn_weight * static_cast<double>(c.tn);
  if (den == 0.0) return 1.0;  // empty grid, nothing to get wrong
  return num / den;
}

double MetricReport::overall_mean_accuracy() const {
  if (mean_accuracy.empty()) return 0.0;
  double acc = 0;
  for (double v : mean_accuracy) acc += v;
  return acc / static_cast<double>(mean_accuracy.size());
}

double MetricReport::overall_mean_precision() const {
  if (mean_precision.empty()) return 0.0;
  double acc = 0;
  for (double v : mean_precision) acc += v;
  return acc / static_cast<double>(mean_precision.size());
}

void finalize_report(MetricReport& report) {
  const std::size_t steps = report.timesteps.size();
  report.mean_precision.assign(steps, 0.0);
  report.mean_accuracy.assign(steps, 0.0);
  const std::size_t nseq = report.precision_by_sequence.size();
  if (nseq == 0) return;
  for (std::size_t s = 0; s < steps; ++s) {
    double p = 0, a = 0;
    for (std::size_t q = 0; q < nseq; ++q) {
      p += report.precision_by_sequence[q][s];
      a += report.accuracy_by_sequence[q][s];
    }
    report.mean_precision[s] = p / static_cast<double>(nseq);
    report.mean_accuracy[s] = a / static_cast<double>(nseq);
  }
}

std::string report_csv(const MetricReport& report) {
  std::ostringstream os;
  os.precision(6);
  os << "t,precision,modified_accuracy\n";
  for (std::size_t i = 0; i < report.timesteps.size(); ++i)
    os << report.timesteps[i] << ',' << report.mean_precision[i] << ','
       << report.mean_accuracy[i] << '\n';
  return os.str();
}

std::string report_json(const MetricReport& report) {
  std::ostringstream os;
  os.precision(12);
  auto list = [&os](const std::vector<double>& v) {
    os << '[';
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    os << ']';
  };
  os << "{\n  \"threshold\": " << report.threshold << ",\n  \"timesteps\": [";
  for (std::size_t i = 0; i < report.timesteps.size(); ++i)
    os << (i ? "," : "") << report.timesteps[i];
  os << "],\n  \"mean_precision\": ";
  list(report.mean_precision);
  os << ",\n  \"mean_modified_accuracy\": ";
  list(report.mean_accuracy);
  os << ",\n  \"sequences\": [";
  for (std::size_t q = 0; q < report.sequence_ids.size(); ++q) {
    os << (q ? "," : "") << "\n    {\"id\": \"" << report.sequence_ids[q]
       << "\", \"precision\": ";
    list(report.precision_by_sequence[q]);
    os << ", \"modified_accuracy\": ";
    list(report.accuracy_by_sequence[q]);
    os << ", \"counts\": [";
    const auto& counts = report.counts_by_sequence[q];
    for (std::size_t s = 0; s < counts.size(); ++s) {
      const auto& c = counts[s];
      os << (s ? "," : "") << "{\"tp\": " << c.tp << ", \"fp\": " << c.fp
         << ", \"tn\": " << c.tn << ", \"fn\": " << c.fn << '}';
    }
    os << "]}";
  }
  os << "\n  ],\n  \"skipped\": [";
  for (std::size_t i = 0; i < report.skipped.size(); ++i)
    os << (i ? "," : "") << '"' << report.skipped[i] << '"';
  os << "]\n}\n";
  return os.str();
}

}  // namespace plume::metrics
