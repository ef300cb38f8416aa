#pragma once

#include <cstddef>
#include <string>

namespace lsf::eval {

// Which class counts as "positive" for FPR / recall / precision.
enum class Polarity { unsafe_positive, safe_positive };

const char* polarity_name(Polarity p);
Polarity parse_polarity(const std::string& s);

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  // Same predictions scored with the other class as positive.
  ConfusionCounts flipped() const { return {tn, fn, tp, fp}; }
  ConfusionCounts& operator+=(const ConfusionCounts& o);
};

struct Metrics {
  double fpr = 0.0;
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  double balanced_accuracy = 0.0;
};

// Empty denominators give 0 for the affected ratio.
Metrics metrics_from_counts(const ConfusionCounts& c);

// Adds one prediction.
void tally(ConfusionCounts& c, bool truth_positive, bool predicted_positive);

}  // namespace lsf::eval
