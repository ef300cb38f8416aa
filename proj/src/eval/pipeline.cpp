#include "lsf/eval/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "lsf/common/checksum.hpp"
#include "lsf/nn/checkpoint.hpp"

namespace lsf::eval {

namespace {

template <typename T>
std::string join(const std::vector<T>& v) {
  std::ostringstream s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s << ',';
    if constexpr (std::is_floating_point_v<T>) {
      s << format_double(v[i]);
    } else {
      s << v[i];
    }
  }
  return s.str();
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

PipelineConfig PipelineConfig::from_kv(const KeyValueConfig& kv) {
  PipelineConfig c;
  auto u64 = [&](const char* k, std::uint64_t d) { return static_cast<std::uint64_t>(kv.get_int(k, static_cast<long long>(d))); };
  auto sz = [&](const char* k, std::size_t d) { return static_cast<std::size_t>(kv.get_int(k, static_cast<long long>(d))); };
  auto i32 = [&](const char* k, int d) { return static_cast<int>(kv.get_int(k, d)); };
  c.encoder_seed = u64("encoder_seed", c.encoder_seed);
  c.train_episodes = sz("data.train_episodes", c.train_episodes);
  c.train_seed = u64("data.train_seed", c.train_seed);
  c.heldout_episodes = sz("data.heldout_episodes", c.heldout_episodes);
  c.heldout_seed = u64("data.heldout_seed", c.heldout_seed);
  c.calib_states = sz("calib.states", c.calib_states);
  c.calib_pairs = sz("calib.pairs", c.calib_pairs);
  c.calib_seed = u64("calib.seed", c.calib_seed);
  c.projector.pair_count = sz("projector.pairs", c.projector.pair_count);
  c.projector.heldout_pairs = sz("projector.heldout_pairs", c.projector.heldout_pairs);
  c.projector.epochs = i32("projector.epochs", c.projector.epochs);
  c.projector.batch_size = i32("projector.batch", c.projector.batch_size);
  c.projector.learning_rate = kv.get_double("projector.lr", c.projector.learning_rate);
  c.projector.weight_decay = kv.get_double("projector.weight_decay", c.projector.weight_decay);
  c.projector.seed = u64("projector.seed", c.projector.seed);
  c.grid_n = i32("grid.n", c.grid_n);
  c.grid_actions = i32("grid.actions", c.grid_actions);
  c.grid_gamma = kv.get_double("grid.gamma", c.grid_gamma);
  c.grid_tol = kv.get_double("grid.tol", c.grid_tol);
  c.grid_max_iter = i32("grid.max_iter", c.grid_max_iter);
  c.workers = i32("workers", c.workers);
  c.alpha = kv.get_double("calib.alpha", c.alpha);
  c.runtime_margin = kv.get_double("filter.runtime_margin", c.runtime_margin);
  c.epsilon = kv.get_double("epsilon", c.epsilon);
  if (kv.has("table3.epsilons")) {
    c.table3_epsilons.clear();
    for (const auto& s : split(kv.require("table3.epsilons"))) c.table3_epsilons.push_back(parse_double(s));
  }
  auto& f = c.filter;
  if (kv.has("filter.hidden")) {
    f.hidden.clear();
    for (const auto& s : split(kv.require("filter.hidden"))) f.hidden.push_back(std::stoi(s));
  }
  f.steps = kv.get_int("filter.steps", f.steps);
  f.warmup = sz("filter.warmup", f.warmup);
  f.batch = sz("filter.batch", f.batch);
  f.replay_capacity = sz("filter.replay", f.replay_capacity);
  f.max_imagination_steps = i32("filter.imagination_steps", f.max_imagination_steps);
  f.gamma_start = kv.get_double("filter.gamma_start", f.gamma_start);
  f.gamma_end = kv.get_double("filter.gamma_end", f.gamma_end);
  f.gamma_anneal_fraction = kv.get_double("filter.gamma_anneal_fraction", f.gamma_anneal_fraction);
  f.critic_lr = kv.get_double("filter.critic_lr", f.critic_lr);
  f.actor_lr = kv.get_double("filter.actor_lr", f.actor_lr);
  f.weight_decay = kv.get_double("filter.weight_decay", f.weight_decay);
  f.tau = kv.get_double("filter.tau", f.tau);
  f.exploration_sigma = kv.get_double("filter.exploration_sigma", f.exploration_sigma);
  f.prototypes = i32("filter.prototypes", f.prototypes);
  f.average_constraint_headings = kv.get_bool("constraint.average_headings", f.average_constraint_headings);
  f.seed = u64("filter.seed", f.seed);
  c.eval_constraints = i32("eval.constraints", c.eval_constraints);
  c.eval_seed = u64("eval.seed", c.eval_seed);
  c.polarity = parse_polarity(kv.get_string("eval.polarity", polarity_name(c.polarity)));
  c.band_cells = kv.get_double("eval.band_cells", c.band_cells);
  c.rollouts = i32("eval.rollouts", c.rollouts);
  c.rollout_seed = u64("eval.rollout_seed", c.rollout_seed);
  return c;
}

KeyValueConfig PipelineConfig::to_kv() const {
  KeyValueConfig kv;
  auto i = [&](const char* k, auto v) { kv.set(k, static_cast<long long>(v)); };
  i("encoder_seed", encoder_seed);
  i("data.train_episodes", train_episodes);
  i("data.train_seed", train_seed);
  i("data.heldout_episodes", heldout_episodes);
  i("data.heldout_seed", heldout_seed);
  i("calib.states", calib_states);
  i("calib.pairs", calib_pairs);
  i("calib.seed", calib_seed);
  i("projector.pairs", projector.pair_count);
  i("projector.heldout_pairs", projector.heldout_pairs);
  i("projector.epochs", projector.epochs);
  i("projector.batch", projector.batch_size);
  kv.set("projector.lr", projector.learning_rate);
  kv.set("projector.weight_decay", projector.weight_decay);
  i("projector.seed", projector.seed);
  i("grid.n", grid_n);
  i("grid.actions", grid_actions);
  kv.set("grid.gamma", grid_gamma);
  kv.set("grid.tol", grid_tol);
  i("grid.max_iter", grid_max_iter);
  i("workers", workers);
  kv.set("calib.alpha", alpha);
  kv.set("filter.runtime_margin", runtime_margin);
  kv.set("epsilon", epsilon);
  kv.set("table3.epsilons", join(table3_epsilons));
  kv.set("filter.hidden", join(filter.hidden));
  i("filter.steps", filter.steps);
  i("filter.warmup", filter.warmup);
  i("filter.batch", filter.batch);
  i("filter.replay", filter.replay_capacity);
  i("filter.imagination_steps", filter.max_imagination_steps);
  kv.set("filter.gamma_start", filter.gamma_start);
  kv.set("filter.gamma_end", filter.gamma_end);
  kv.set("filter.gamma_anneal_fraction", filter.gamma_anneal_fraction);
  kv.set("filter.critic_lr", filter.critic_lr);
  kv.set("filter.actor_lr", filter.actor_lr);
  kv.set("filter.weight_decay", filter.weight_decay);
  kv.set("filter.tau", filter.tau);
  kv.set("filter.exploration_sigma", filter.exploration_sigma);
  i("filter.prototypes", filter.prototypes);
  kv.set("constraint.average_headings", std::string(filter.average_constraint_headings ? "true" : "false"));
  i("filter.seed", filter.seed);
  i("eval.constraints", eval_constraints);
  i("eval.seed", eval_seed);
  kv.set("eval.polarity", std::string(polarity_name(polarity)));
  kv.set("eval.band_cells", band_cells);
  i("eval.rollouts", rollouts);
  i("eval.rollout_seed", rollout_seed);
  return kv;
}

Pipeline::Pipeline(PipelineConfig cfg, std::string workdir, std::ostream* log)
    : cfg_(std::move(cfg)), workdir_(std::move(workdir)), log_(log) {
  std::filesystem::create_directories(workdir_);
}

void Pipeline::note(const std::string& msg) {
  if (log_) *log_ << msg << std::endl;
}

std::string Pipeline::path(const std::string& stem, const std::string& key, const std::string& ext) const {
  return (std::filesystem::path(workdir_) / (stem + "_" + hex(fnv1a64(key)) + ext)).string();
}

latent::EncoderPtr Pipeline::encoder() {
  if (!encoder_) encoder_ = std::make_shared<const latent::Encoder>(cfg_.encoder_seed);
  return encoder_;
}

const sim::Dataset& Pipeline::train_data() {
  if (!train_) train_ = sim::generate_dataset(cfg_.train_episodes, sim::DubinsParams{}, cfg_.train_seed);
  return *train_;
}

const sim::Dataset& Pipeline::heldout_data() {
  if (!heldout_) heldout_ = sim::generate_dataset(cfg_.heldout_episodes, sim::DubinsParams{}, cfg_.heldout_seed);
  return *heldout_;
}

namespace {

std::string projector_key(const PipelineConfig& c) {
  const auto& p = c.projector;
  std::ostringstream k;
  k << "projector|" << c.encoder_seed << '|' << c.train_episodes << '|' << c.train_seed << '|' << p.pair_count << '|'
    << p.heldout_pairs << '|' << p.epochs << '|' << p.batch_size << '|' << format_double(p.learning_rate) << '|'
    << format_double(p.weight_decay) << '|' << p.seed;
  return k.str();
}

}  // namespace

std::shared_ptr<const latent::FailureProjector> Pipeline::projector() {
  if (projector_) return projector_;
  const std::string key = projector_key(cfg_);
  const std::string file = path("projector", key, ".asnn");
  const std::string stats_file = path("projector", key, ".stats");
  if (std::filesystem::exists(file) && std::filesystem::exists(stats_file)) {
    projector_ = std::make_shared<const latent::FailureProjector>(nn::load_mlp(file));
    return projector_;
  }
  note("training failure projector");
  const auto t0 = std::chrono::steady_clock::now();
  auto r = latent::train_projector(train_data(), *encoder(), cfg_.projector);
  const double secs = seconds_since(t0);
  const double inv = latent::heading_invariance_fraction(r.projector, *encoder(), 5000, 0.05, cfg_.projector.seed + 7);
  nn::save_mlp(file, r.projector.net());
  KeyValueConfig stats;
  stats.set("train_mse", r.train_mse);
  stats.set("heldout_mse", r.heldout_mse);
  stats.set("heading_invariance", inv);
  stats.set("seconds", secs);
  stats.save(stats_file);
  note("projector held-out MSE " + format_double(r.heldout_mse) + ", heading invariance " + format_double(inv));
  projector_ = std::make_shared<const latent::FailureProjector>(std::move(r.projector));
  return projector_;
}

ProjectorStats Pipeline::projector_stats() {
  projector();
  const auto kv = KeyValueConfig::load(path("projector", projector_key(cfg_), ".stats"));
  return {kv.get_double("train_mse", NAN), kv.get_double("heldout_mse", NAN), kv.get_double("heading_invariance", NAN),
          kv.get_double("seconds", NAN)};
}

std::shared_ptr<const grid::ValueGrid> Pipeline::base_grid(double epsilon) {
  const long long ek = std::llround(epsilon * 1e6);
  if (auto it = grids_.find(ek); it != grids_.end()) return it->second;
  std::ostringstream key;
  key << "grid|" << cfg_.grid_n << '|' << cfg_.grid_actions << '|' << format_double(cfg_.grid_gamma) << '|'
      << format_double(cfg_.grid_tol) << '|' << cfg_.grid_max_iter << '|' << format_double(epsilon);
  const std::string file = path("grid", key.str(), ".asvg");
  std::shared_ptr<const grid::ValueGrid> g;
  if (std::filesystem::exists(file)) {
    g = std::make_shared<const grid::ValueGrid>(grid::read_value_grid(file));
  } else {
    note("solving grid oracle for epsilon " + format_double(epsilon));
    grid::IterationOptions opt;
    opt.gamma = cfg_.grid_gamma;
    opt.tol = cfg_.grid_tol;
    opt.max_iter = cfg_.grid_max_iter;
    opt.workers = cfg_.workers;
    auto solved = grid::solve_disc_grid(grid::GridSpec::cube(cfg_.grid_n), sim::DubinsParams{}, cfg_.grid_actions,
                                        {0.0, 0.0, epsilon}, opt);
    grid::write_value_grid(file, solved);
    // Reload so cached and fresh runs see identical (f32-rounded) values.
    g = std::make_shared<const grid::ValueGrid>(grid::read_value_grid(file));
  }
  grids_[ek] = g;
  return g;
}

const std::vector<conformal::CalibrationPair>& Pipeline::calibration_pairs() {
  if (!pairs_) {
    const auto pool = conformal::sample_heldout_states(heldout_data(), cfg_.calib_states, cfg_.calib_seed);
    pairs_ = conformal::build_calibration_set(pool, *encoder(), cfg_.calib_pairs, cfg_.epsilon, cfg_.calib_seed + 1);
  }
  return *pairs_;
}

const conformal::CalibrationCache& Pipeline::calibration_cache(latent::MarginKind kind) {
  const int ck = static_cast<int>(kind);
  if (auto it = caches_.find(ck); it != caches_.end()) return it->second;
  std::ostringstream key;
  key << "calib|" << latent::margin_kind_name(kind) << '|' << cfg_.heldout_episodes << '|' << cfg_.heldout_seed << '|'
      << cfg_.calib_states << '|' << cfg_.calib_pairs << '|' << cfg_.calib_seed << '|' << join(cfg_.table3_epsilons)
      << '|' << format_double(cfg_.epsilon);
  if (kind == latent::MarginKind::projected) key << '|' << projector_key(cfg_);
  const std::string file = path("calib_" + std::string(latent::margin_kind_name(kind)), key.str(), ".json");
  conformal::CalibrationCache cache;
  if (std::filesystem::exists(file)) {
    cache = conformal::CalibrationCache::load(file);
  } else {
    note(std::string("calibrating ") + latent::margin_kind_name(kind) + " scores");
    const auto proj = kind == latent::MarginKind::projected ? projector() : nullptr;
    const auto scorer = conformal::scorer_for(kind, proj.get());
    std::vector<double> eps = cfg_.table3_epsilons;
    eps.push_back(cfg_.epsilon);
    for (double e : eps) {
      cache.add(e, conformal::positive_scores(conformal::relabel(calibration_pairs(), e), scorer));
    }
    cache.projector_checksum = proj ? proj->checksum() : 0;
    cache.margin_kind = kind;
    cache.save(file);
  }
  return caches_[ck] = std::move(cache);
}

conformal::Threshold Pipeline::threshold(latent::MarginKind kind, double epsilon) {
  return calibration_cache(kind).threshold(epsilon, cfg_.alpha, cfg_.runtime_margin);
}

namespace {

std::string filter_key(const PipelineConfig& c, hjrl::Conditioning cond, latent::MarginKind m) {
  const auto& f = c.filter;
  std::ostringstream k;
  k << "filter|" << hjrl::conditioning_name(cond) << '|' << latent::margin_kind_name(m) << '|' << join(f.hidden) << '|'
    << f.steps << '|' << f.warmup << '|' << f.batch << '|' << f.replay_capacity << '|' << f.max_imagination_steps
    << '|' << format_double(f.gamma_start) << '|' << format_double(f.gamma_end) << '|'
    << format_double(f.gamma_anneal_fraction) << '|' << format_double(f.critic_lr) << '|'
    << format_double(f.actor_lr) << '|' << format_double(f.weight_decay) << '|' << format_double(f.tau) << '|'
    << format_double(f.exploration_sigma) << '|' << f.prototypes << '|' << f.average_constraint_headings << '|'
    << f.seed << '|' << c.encoder_seed << '|' << c.train_episodes << '|' << c.train_seed;
  if (hjrl::conditioning_uses_projector(cond) || m == latent::MarginKind::projected) k << '|' << projector_key(c);
  return k.str();
}

}  // namespace

std::shared_ptr<const hjrl::FilterNets> Pipeline::filter(hjrl::Conditioning c, latent::MarginKind m) {
  const std::string tag = std::string(hjrl::conditioning_name(c)) + "_" + latent::margin_kind_name(m);
  if (auto it = filters_.find(tag); it != filters_.end()) return it->second;
  const std::string key = filter_key(cfg_, c, m);
  const std::string file = path("filter_" + tag, key, ".asfn");
  const std::string stats_file = path("filter_" + tag, key, ".stats");
  const bool needs_projector = hjrl::conditioning_uses_projector(c) || m == latent::MarginKind::projected;
  const auto proj = needs_projector ? projector() : nullptr;
  std::shared_ptr<const hjrl::FilterNets> nets;
  if (std::filesystem::exists(file) && std::filesystem::exists(stats_file)) {
    nets = std::make_shared<const hjrl::FilterNets>(hjrl::load_filter(file, proj));
  } else {
    note("training filter " + tag);
    hjrl::FilterTrainConfig fc = cfg_.filter;
    fc.conditioning = c;
    fc.margin = m;
    auto r = hjrl::train_filter(fc, train_data(), encoder(), proj, [this, &tag](long long step, double lc, double la, double g) {
      if (step % 10000 == 0) {
        note("  " + tag + " step " + std::to_string(step) + " critic " + format_double(lc) + " actor " +
             format_double(la) + " gamma " + format_double(g));
      }
    });
    hjrl::save_filter(file, r.nets);
    KeyValueConfig stats;
    stats.set("seconds", r.seconds);
    stats.set("final_critic_loss", r.critic_loss.empty() ? 0.0 : r.critic_loss.back());
    stats.save(stats_file);
    note("  trained in " + format_double(r.seconds) + " s");
    nets = std::make_shared<const hjrl::FilterNets>(hjrl::load_filter(file, proj));
  }
  filters_[tag] = nets;
  return nets;
}

FilterStats Pipeline::filter_stats(hjrl::Conditioning c, latent::MarginKind m) {
  filter(c, m);
  const std::string tag = std::string(hjrl::conditioning_name(c)) + "_" + latent::margin_kind_name(m);
  const auto kv = KeyValueConfig::load(path("filter_" + tag, filter_key(cfg_, c, m), ".stats"));
  return {kv.get_double("seconds", NAN), kv.get_double("final_critic_loss", NAN)};
}

ClassificationReport Pipeline::classify(const hjrl::FilterNets& nets, const conformal::Threshold& t) {
  ClassificationOptions opt;
  opt.n_constraints = cfg_.eval_constraints;
  opt.seed = cfg_.eval_seed;
  opt.polarity = cfg_.polarity;
  opt.band_cells = cfg_.band_cells;
  return eval_classification(filter_predictor(nets), *encoder(), base_grid(t.epsilon), t.epsilon, t.delta, opt);
}

RolloutReport Pipeline::safe_rate(const hjrl::FilterNets& nets) {
  RolloutOptions opt;
  opt.n_rollouts = cfg_.rollouts;
  opt.seed = cfg_.rollout_seed;
  opt.epsilon = cfg_.epsilon;
  return eval_safe_rate(fallback_policy(nets), encoder(), base_grid(cfg_.epsilon), sim::DubinsParams{}, opt);
}

RolloutReport Pipeline::filtered_rollouts(const hjrl::FilterNets& nets, const conformal::Threshold& t) {
  RolloutOptions opt;
  opt.n_rollouts = cfg_.rollouts;
  opt.seed = cfg_.rollout_seed + 1;
  opt.epsilon = t.epsilon;
  return eval_filtered_rollouts(nets, t, encoder(), base_grid(t.epsilon), sim::DubinsParams{}, opt);
}

namespace {

ReportRow classification_row(const std::string& label, const ClassificationReport& c, const RolloutReport& r,
                             double delta) {
  ReportRow row{label, {}};
  row.values["FPR"] = c.metrics.fpr;
  row.values["Rec"] = c.metrics.recall;
  row.values["Pre"] = c.metrics.precision;
  row.values["F1"] = c.metrics.f1;
  row.values["B.Acc"] = c.metrics.balanced_accuracy;
  row.values["SafeRate"] = r.safe_rate();
  row.values["delta"] = delta;
  const Metrics o = c.other_polarity();
  row.values["FPR'"] = o.fpr;
  row.values["Rec'"] = o.recall;
  row.values["Pre'"] = o.precision;
  row.values["F1'"] = o.f1;
  return row;
}

const std::vector<std::string> kClassColumns = {"FPR", "Rec", "Pre", "F1", "B.Acc", "SafeRate",
                                                "delta", "FPR'", "Rec'", "Pre'", "F1'"};

}  // namespace

Report run_ablation(Pipeline& p, const std::string& suite) {
  using hjrl::Conditioning;
  using latent::MarginKind;
  const double eps = p.config().epsilon;
  const std::string polarity = polarity_name(p.config().polarity);
  if (suite == "table1") {
    Report r{"table1 (positive class: " + polarity + "; primed columns use the other class)", kClassColumns, {}};
    for (auto [label, kind] : {std::pair{"AnySafe", MarginKind::projected}, std::pair{"AnySafe (w.o. Proj)", MarginKind::raw}}) {
      const auto nets = p.filter(Conditioning::zz, kind);
      const auto t = p.threshold(kind, eps);
      r.rows.push_back(classification_row(label, p.classify(*nets, t), p.safe_rate(*nets), t.delta));
    }
    return r;
  }
  if (suite == "table2") {
    Report r{"table2 (positive class: " + polarity + "; primed columns use the other class)", kClassColumns, {}};
    const auto t = p.threshold(MarginKind::projected, eps);
    for (auto [label, c] : {std::pair{"ZxZ", Conditioning::zz}, std::pair{"ZxP", Conditioning::zp},
                            std::pair{"ZxZt", Conditioning::zzt}, std::pair{"ZtxZt", Conditioning::ztzt}}) {
      const auto nets = p.filter(c, MarginKind::projected);
      r.rows.push_back(classification_row(label, p.classify(*nets, t), p.safe_rate(*nets), t.delta));
    }
    return r;
  }
  if (suite == "table3") {
    Report r{"table3", {"epsilon", "delta", "MinDist", "FracGeEps", "FracGeEpsMinusCell", "EntryFree", "Interventions"}, {}};
    const auto nets = p.filter(Conditioning::zz, MarginKind::projected);
    const double cell = grid::GridSpec::cube(p.config().grid_n).dx();
    for (double e : p.config().table3_epsilons) {
      const auto t = p.threshold(MarginKind::projected, e);
      const auto rr = p.filtered_rollouts(*nets, t);
      ReportRow row{"delta_" + format_double(e), {}};
      row.values["epsilon"] = e;
      row.values["delta"] = t.delta;
      row.values["MinDist"] = rr.mean_min_distance;
      row.values["FracGeEps"] = rr.fraction_at_least(e);
      row.values["FracGeEpsMinusCell"] = rr.fraction_at_least(e - cell);
      row.values["EntryFree"] = rr.safe_rate();
      row.values["Interventions"] = static_cast<double>(rr.interventions);
      r.rows.push_back(std::move(row));
    }
    return r;
  }
  throw std::invalid_argument("unknown ablation suite: " + suite + " (expected table1, table2 or table3)");
}

}  // namespace lsf::eval
