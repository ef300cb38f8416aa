#include "lsf/conformal/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "lsf/common/kv_config.hpp"
#include "lsf/common/log.hpp"
#include "lsf/common/rng.hpp"
#include "lsf/nn/cosine.hpp"

namespace lsf::conformal {

namespace {

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << v;
  return s.str();
}

std::uint64_t parse_hex64(const std::string& s) { return std::stoull(s, nullptr, 16); }

long long epsilon_key(double epsilon) { return std::llround(epsilon * 1e6); }

}  // namespace

std::string threshold_to_text(const Threshold& t) {
  KeyValueConfig c;
  c.set("delta", t.delta);
  c.set("alpha", t.alpha);
  c.set("epsilon", t.epsilon);
  c.set("n_positive", static_cast<long long>(t.n_positive));
  c.set("runtime_margin", t.runtime_margin);
  c.set("projector_checksum", hex64(t.projector_checksum));
  return c.to_string();
}

Threshold threshold_from_text(const std::string& text) {
  const auto c = KeyValueConfig::parse(text);
  Threshold t;
  t.delta = parse_double(c.require("delta"));
  t.alpha = parse_double(c.require("alpha"));
  t.epsilon = parse_double(c.require("epsilon"));
  t.n_positive = static_cast<std::size_t>(std::stoull(c.require("n_positive")));
  t.runtime_margin = c.get_double("runtime_margin", 0.1);
  t.projector_checksum = parse_hex64(c.get_string("projector_checksum", "0"));
  return t;
}

void save_threshold(const std::string& path, const Threshold& t) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << threshold_to_text(t);
}

Threshold load_threshold(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return threshold_from_text(buf.str());
}

std::vector<sim::PrivilegedState> sample_heldout_states(const sim::Dataset& data, std::size_t n_states,
                                                        std::uint64_t seed) {
  const sim::StateIndex index(data);
  if (index.size() == 0) throw std::invalid_argument("sample_heldout_states: empty dataset");
  Rng rng(seed);
  std::vector<sim::PrivilegedState> pool;
  pool.reserve(n_states);
  for (std::size_t i = 0; i < n_states; ++i) pool.push_back(index.at(uniform_index(rng, index.size())));
  return pool;
}

std::vector<CalibrationPair> build_calibration_set(const std::vector<sim::PrivilegedState>& pool,
                                                   const latent::Encoder& encoder, std::size_t n_pairs,
                                                   double epsilon, std::uint64_t seed, std::size_t min_positive) {
  if (pool.empty()) throw std::invalid_argument("build_calibration_set: empty state pool");
  if (!(epsilon > 0.0)) throw std::invalid_argument("build_calibration_set: epsilon must be positive");
  std::vector<latent::LatentVec> codes;
  codes.reserve(pool.size());
  for (const auto& s : pool) codes.push_back(encoder.encode(s));
  Rng rng(seed);
  std::vector<CalibrationPair> pairs;
  pairs.reserve(n_pairs);
  for (std::size_t n = 0; n < n_pairs; ++n) {
    const std::size_t i = uniform_index(rng, pool.size());
    const std::size_t j = uniform_index(rng, pool.size());
    CalibrationPair pr{codes[i], codes[j], false, pool[i].position(), pool[j].position()};
    pairs.push_back(std::move(pr));
  }
  pairs = relabel(std::move(pairs), epsilon);
  const auto positives = static_cast<std::size_t>(std::count_if(pairs.begin(), pairs.end(), [](const auto& p) { return p.positive; }));
  if (positives < min_positive) {
    throw InsufficientPositives("build_calibration_set: only " + std::to_string(positives) +
                                " positive pairs (need " + std::to_string(min_positive) +
                                "); increase the number of pairs");
  }
  return pairs;
}

std::vector<CalibrationPair> relabel(std::vector<CalibrationPair> pairs, double epsilon) {
  const double e2 = epsilon * epsilon;
  for (auto& p : pairs) p.positive = p.squared_distance() < e2;
  return pairs;
}

PairScorer ideal_scorer() {
  return [](const CalibrationPair& p) { return -sim::ground_truth_similarity(p.p, p.p_prime); };
}

PairScorer projector_scorer(const latent::FailureProjector& proj) {
  return [&proj](const CalibrationPair& p) { return latent::latent_margin(proj, p.z, p.z_prime); };
}

PairScorer raw_latent_scorer() {
  return [](const CalibrationPair& p) { return latent::raw_latent_margin(p.z, p.z_prime); };
}

PairScorer scorer_for(latent::MarginKind kind, const latent::FailureProjector* proj) {
  if (kind == latent::MarginKind::raw) return raw_latent_scorer();
  if (!proj) throw std::invalid_argument("scorer_for: projected scorer needs a projector");
  return projector_scorer(*proj);
}

std::size_t quantile_index(std::size_t n, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  const long double x = (1.0L - static_cast<long double>(alpha)) * (static_cast<long double>(n) + 1.0L);
  // Guard against products that are integral in exact arithmetic but land a
  // hair above the integer in floating point.
  const long double k = std::ceil(x - 1e-9L);
  return static_cast<std::size_t>(std::max<long double>(k, 1.0L));
}

double quantile_threshold(const std::vector<double>& sorted_scores, double alpha) {
  if (sorted_scores.empty()) throw std::invalid_argument("calibrate: no positive pairs");
  const std::size_t k = quantile_index(sorted_scores.size(), alpha);
  if (k > sorted_scores.size()) {
    warn("conformal quantile index " + std::to_string(k) + " exceeds N = " + std::to_string(sorted_scores.size()) +
         "; threshold set to +inf, every state will be flagged");
    return kSentinelDelta;
  }
  return sorted_scores[k - 1];
}

std::vector<double> positive_scores(const std::vector<CalibrationPair>& pairs, const PairScorer& scorer) {
  std::vector<double> scores;
  for (const auto& p : pairs) {
    if (p.positive) scores.push_back(scorer(p));
  }
  std::sort(scores.begin(), scores.end());
  return scores;
}

Threshold calibrate(const std::vector<CalibrationPair>& pairs, const PairScorer& scorer, double alpha,
                    double epsilon, std::uint64_t projector_checksum, double runtime_margin) {
  const auto scores = positive_scores(pairs, scorer);
  Threshold t;
  t.alpha = alpha;
  t.epsilon = epsilon;
  t.n_positive = scores.size();
  t.runtime_margin = runtime_margin;
  t.projector_checksum = projector_checksum;
  t.delta = quantile_threshold(scores, alpha);
  return t;
}

void wilson_interval(std::size_t successes, std::size_t trials, double z, double& low, double& high) {
  if (trials == 0) {
    low = 0.0;
    high = 1.0;
    return;
  }
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double center = (p + z2 / (2 * n)) / (1 + z2 / n);
  const double half = z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n);
  low = std::max(0.0, center - half);
  high = std::min(1.0, center + half);
}

RecallReport audit_recall(const std::vector<CalibrationPair>& pairs, const PairScorer& scorer, const Threshold& t,
                          bool in_sample) {
  RecallReport r;
  r.in_sample = in_sample;
  for (const auto& p : pairs) {
    if (!p.positive) continue;
    ++r.n_positive;
    if (t.is_sentinel() || scorer(p) <= t.delta) ++r.covered;
  }
  r.recall = r.n_positive == 0 ? 1.0 : static_cast<double>(r.covered) / static_cast<double>(r.n_positive);
  wilson_interval(r.covered, r.n_positive, 1.959963984540054, r.ci_low, r.ci_high);
  return r;
}

void CalibrationCache::add(double epsilon, std::vector<double> sorted_scores) {
  if (!std::is_sorted(sorted_scores.begin(), sorted_scores.end())) std::sort(sorted_scores.begin(), sorted_scores.end());
  by_epsilon_[epsilon_key(epsilon)] = std::move(sorted_scores);
}

bool CalibrationCache::has(double epsilon) const { return by_epsilon_.count(epsilon_key(epsilon)) > 0; }

std::vector<double> CalibrationCache::epsilons() const {
  std::vector<double> e;
  for (const auto& [k, v] : by_epsilon_) e.push_back(static_cast<double>(k) / 1e6);
  return e;
}

const std::vector<double>& CalibrationCache::scores(double epsilon) const {
  const auto it = by_epsilon_.find(epsilon_key(epsilon));
  if (it == by_epsilon_.end()) throw std::invalid_argument("no calibration scores cached for epsilon " + format_double(epsilon));
  return it->second;
}

Threshold CalibrationCache::threshold(double epsilon, double alpha, double runtime_margin) const {
  const auto& s = scores(epsilon);
  Threshold t;
  t.alpha = alpha;
  t.epsilon = epsilon;
  t.n_positive = s.size();
  t.runtime_margin = runtime_margin;
  t.projector_checksum = projector_checksum;
  t.delta = quantile_threshold(s, alpha);
  return t;
}

void CalibrationCache::save(const std::string& path) const {
  nlohmann::json j;
  j["projector_checksum"] = hex64(projector_checksum);
  j["margin"] = latent::margin_kind_name(margin_kind);
  j["sets"] = nlohmann::json::array();
  for (const auto& [k, v] : by_epsilon_) {
    j["sets"].push_back({{"epsilon", static_cast<double>(k) / 1e6}, {"scores", v}});
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << j.dump() << '\n';
}

CalibrationCache CalibrationCache::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  const auto j = nlohmann::json::parse(in);
  CalibrationCache c;
  c.projector_checksum = parse_hex64(j.at("projector_checksum").get<std::string>());
  c.margin_kind = latent::parse_margin_kind(j.value("margin", std::string("projected")));
  for (const auto& s : j.at("sets")) c.add(s.at("epsilon").get<double>(), s.at("scores").get<std::vector<double>>());
  return c;
}

}  // namespace lsf::conformal
