#include "lsf/eval/metrics.hpp"

#include <stdexcept>

namespace lsf::eval {

const char* polarity_name(Polarity p) { return p == Polarity::safe_positive ? "safe" : "unsafe"; }

Polarity parse_polarity(const std::string& s) {
  if (s == "unsafe") return Polarity::unsafe_positive;
  if (s == "safe") return Polarity::safe_positive;
  throw std::invalid_argument("polarity must be 'unsafe' or 'safe', got " + s);
}

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
  tp += o.tp;
  fp += o.fp;
  tn += o.tn;
  fn += o.fn;
  return *this;
}

namespace {
double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}
}  // namespace

Metrics metrics_from_counts(const ConfusionCounts& c) {
  Metrics m;
  m.fpr = ratio(c.fp, c.fp + c.tn);
  m.recall = ratio(c.tp, c.tp + c.fn);
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  m.balanced_accuracy = 0.5 * (m.recall + ratio(c.tn, c.tn + c.fp));
  return m;
}

void tally(ConfusionCounts& c, bool truth_positive, bool predicted_positive) {
  if (truth_positive) {
    predicted_positive ? ++c.tp : ++c.fn;
  } else {
    predicted_positive ? ++c.fp : ++c.tn;
  }
}

}  // namespace lsf::eval
