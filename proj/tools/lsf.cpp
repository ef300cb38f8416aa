// Command-line front end: dataset generation, training, oracle solving,
// calibration, evaluation and the teleoperation server.
#include <pthread.h>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "lsf/conformal/calibration.hpp"
#include "lsf/eval/pipeline.hpp"
#include "lsf/grid/bellman.hpp"
#include "lsf/grid/oracle.hpp"
#include "lsf/hjrl/train.hpp"
#include "lsf/nn/checkpoint.hpp"
#include "lsf/sim/dataset.hpp"
#include "lsf/teleop/service.hpp"

using namespace lsf;

namespace {

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(parse_double(item));
  }
  return out;
}

eval::PipelineConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  return eval::PipelineConfig::from_kv(KeyValueConfig::load(path));
}

std::shared_ptr<const latent::FailureProjector> maybe_projector(const std::string& path) {
  if (path.empty()) return nullptr;
  return std::make_shared<const latent::FailureProjector>(nn::load_mlp(path));
}

void print_report(const eval::Report& r, const std::string& out) {
  std::cout << eval::render_text(r);
  if (!out.empty()) {
    eval::emit_report(r, out);
    std::cout << "wrote " << out << ".txt and " << out << ".jsonl\n";
  }
}

eval::ReportRow metrics_row(const std::string& label, const eval::ClassificationReport& c) {
  eval::ReportRow row{label, {}};
  auto put = [&](const std::string& suffix, const eval::Metrics& m) {
    row.values["FPR" + suffix] = m.fpr;
    row.values["Rec" + suffix] = m.recall;
    row.values["Pre" + suffix] = m.precision;
    row.values["F1" + suffix] = m.f1;
    row.values["B.Acc" + suffix] = m.balanced_accuracy;
  };
  put("", c.metrics);
  put("'", c.other_polarity());
  row.values["delta"] = c.threshold;
  row.values["UnsafeFrac"] = c.oracle_unsafe_fraction;
  return row;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latent safety filter toolkit"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate random-action Dubins trajectories");
  std::size_t episodes = 4000;
  int horizon = 100;
  std::uint64_t seed = 1;
  std::string out;
  gen->add_option("--episodes", episodes);
  gen->add_option("--horizon", horizon);
  gen->add_option("--seed", seed);
  gen->add_option("--out", out)->required();
  gen->callback([&] {
    sim::DubinsParams p;
    p.horizon = horizon;
    const auto data = sim::generate_dataset(episodes, p, seed);
    sim::write_dataset(out, data);
    std::cout << "wrote " << data.size() << " episodes to " << out << '\n';
  });

  // train-projector
  auto* tp = app.add_subcommand("train-projector", "fit the failure projector to position similarity");
  std::string data_path;
  std::uint64_t encoder_seed = latent::kDefaultEncoderSeed;
  latent::ProjectorTrainConfig pcfg;
  tp->add_option("--data", data_path)->required();
  tp->add_option("--pairs", pcfg.pair_count);
  tp->add_option("--heldout-pairs", pcfg.heldout_pairs);
  tp->add_option("--epochs", pcfg.epochs);
  tp->add_option("--batch", pcfg.batch_size);
  tp->add_option("--lr", pcfg.learning_rate);
  tp->add_option("--seed", pcfg.seed);
  tp->add_option("--encoder-seed", encoder_seed);
  tp->add_option("--out", out)->required();
  tp->callback([&] {
    const latent::Encoder enc(encoder_seed);
    const auto r = latent::train_projector(sim::read_dataset(data_path), enc, pcfg);
    nn::save_mlp(out, r.projector.net());
    std::cout << "train MSE " << r.train_mse << "  held-out MSE " << r.heldout_mse << "  heading invariance "
              << latent::heading_invariance_fraction(r.projector, enc, 5000, 0.05, pcfg.seed + 7) << '\n';
  });

  // solve-grid
  auto* sg = app.add_subcommand("solve-grid", "solve the discounted safety Bellman equation on a grid");
  grid::GridSpec spec;
  int n_actions = 11;
  grid::IterationOptions iopt;
  double epsilon = 0.5, cx = 0.0, cy = 0.0;
  sg->add_option("--nx", spec.nx);
  sg->add_option("--ny", spec.ny);
  sg->add_option("--ntheta", spec.ntheta);
  sg->add_option("--nactions", n_actions);
  sg->add_option("--gamma", iopt.gamma);
  sg->add_option("--epsilon", epsilon);
  sg->add_option("--cx", cx);
  sg->add_option("--cy", cy);
  sg->add_option("--tol", iopt.tol);
  sg->add_option("--max-iter", iopt.max_iter);
  sg->add_option("--workers", iopt.workers);
  sg->add_option("--out", out)->required();
  sg->callback([&] {
    const auto g = grid::solve_disc_grid(spec, sim::DubinsParams{}, n_actions, {cx, cy, epsilon}, iopt);
    grid::write_value_grid(out, g);
    std::size_t unsafe = 0;
    for (double v : g.values) unsafe += v < 0.0;
    std::cout << "iterations " << g.iterations << "  residual " << g.residual << "  converged " << g.converged
              << "  unsafe fraction " << static_cast<double>(unsafe) / g.values.size() << '\n';
  });

  // verify theorem1
  auto* verify = app.add_subcommand("verify", "numerical checks");
  auto* th1 = verify->add_subcommand("theorem1", "shifting the margin by delta shifts the value by delta");
  double delta = 0.1;
  int grid_n = 41;
  th1->add_option("--delta", delta)->required();
  th1->add_option("--n", grid_n, "nodes per axis");
  th1->add_option("--nactions", n_actions);
  th1->add_option("--epsilon", epsilon);
  th1->add_option("--gamma", iopt.gamma);
  th1->add_option("--tol", iopt.tol);
  th1->add_option("--workers", iopt.workers);
  verify->require_subcommand(1);
  th1->callback([&] {
    const auto gs = grid::GridSpec::cube(grid_n, 1.5);
    const grid::DubinsGridModel model(gs, sim::DubinsParams{}, n_actions);
    const sim::FailureDisc disc{0.0, 0.0, epsilon};
    const auto margin = grid::margin_on_grid(gs, [&](const sim::PrivilegedState& s) { return sim::signed_distance_margin(s, disc); });
    const auto r = grid::verify_theorem1(model, margin, delta, iopt);
    std::cout << "delta " << r.delta << "  iterations " << r.iterations << "  base converged " << r.base_converged
              << "\nmax |V_delta - (V - delta)| " << r.max_abs_diff << "\nsymmetric difference (all nodes) "
              << r.symmetric_difference << "\nsymmetric difference (|V - delta| > " << r.band << ") "
              << r.symmetric_difference_off_band << '\n';
    if (r.symmetric_difference_off_band != 0) throw CLI::RuntimeError(1);
  });

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "conformal threshold from held-out positive pairs");
  double alpha = 0.005, runtime_margin = 0.1;
  std::string projector_path, cache_out, cache_eps, margin_name = "projected";
  std::size_t calib_states = 3000, calib_pairs = 50000;
  std::uint64_t calib_seed = 3;
  cal->add_option("--data", data_path, "held-out dataset")->required();
  cal->add_option("--epsilon", epsilon);
  cal->add_option("--alpha", alpha);
  cal->add_option("--projector", projector_path);
  cal->add_option("--margin", margin_name, "projected|raw");
  cal->add_option("--states", calib_states);
  cal->add_option("--pairs", calib_pairs);
  cal->add_option("--seed", calib_seed);
  cal->add_option("--runtime-margin", runtime_margin);
  cal->add_option("--encoder-seed", encoder_seed);
  cal->add_option("--out", out)->required();
  cal->add_option("--cache-out", cache_out, "also write a calibration cache for the server");
  cal->add_option("--cache-epsilons", cache_eps, "comma list; defaults to 0.3,0.4,0.5 plus --epsilon");
  cal->callback([&] {
    const auto kind = latent::parse_margin_kind(margin_name);
    const auto proj = maybe_projector(projector_path);
    if (kind == latent::MarginKind::projected && !proj) throw CLI::ValidationError("--projector", "required for the projected margin");
    const latent::Encoder enc(encoder_seed);
    const auto pool = conformal::sample_heldout_states(sim::read_dataset(data_path), calib_states, calib_seed);
    const auto pairs = conformal::build_calibration_set(pool, enc, calib_pairs, epsilon, calib_seed + 1);
    const auto scorer = conformal::scorer_for(kind, proj.get());
    const auto t = conformal::calibrate(pairs, scorer, alpha, epsilon, proj ? proj->checksum() : 0, runtime_margin);
    conformal::save_threshold(out, t);
    std::cout << conformal::threshold_to_text(t);
    const auto audit = conformal::audit_recall(pairs, scorer, t, true);
    std::cout << "in-sample recall " << audit.recall << " [" << audit.ci_low << ", " << audit.ci_high << "]\n";
    if (!cache_out.empty()) {
      std::vector<double> eps = cache_eps.empty() ? std::vector<double>{0.3, 0.4, 0.5} : parse_list(cache_eps);
      eps.push_back(epsilon);
      conformal::CalibrationCache cache;
      for (double e : eps) {
        if (!cache.has(e)) cache.add(e, conformal::positive_scores(conformal::relabel(pairs, e), scorer));
      }
      cache.projector_checksum = t.projector_checksum;
      cache.margin_kind = kind;
      cache.save(cache_out);
      std::cout << "wrote calibration cache " << cache_out << '\n';
    }
  });

  // train-filter
  auto* tf = app.add_subcommand("train-filter", "train the constraint-conditioned reachability filter");
  std::string config_path, conditioning = "zz";
  long long steps = -1;
  std::uint64_t filter_seed = 0;
  bool seed_given = false;
  tf->add_option("--config", config_path, "key = value config; filter.* keys set the defaults");
  tf->add_option("--conditioning", conditioning, "zz|zp|zzt|ztzt");
  tf->add_option("--margin", margin_name, "projected|raw");
  tf->add_option("--steps", steps);
  tf->add_option("--seed", filter_seed)->each([&](const std::string&) { seed_given = true; });
  tf->add_option("--projector", projector_path);
  tf->add_option("--data", data_path)->required();
  tf->add_option("--encoder-seed", encoder_seed);
  tf->add_option("--out", out)->required();
  tf->callback([&] {
    auto fc = load_config(config_path).filter;
    fc.conditioning = hjrl::parse_conditioning(conditioning);
    fc.margin = latent::parse_margin_kind(margin_name);
    if (steps >= 0) fc.steps = steps;
    if (seed_given) fc.seed = filter_seed;
    const auto encoder = std::make_shared<const latent::Encoder>(encoder_seed);
    const auto r = hjrl::train_filter(fc, sim::read_dataset(data_path), encoder, maybe_projector(projector_path),
                                      [](long long step, double lc, double la, double g) {
                                        if (step % 5000 == 0) {
                                          std::cout << "step " << step << "  critic " << lc << "  actor " << la
                                                    << "  gamma " << g << std::endl;
                                        }
                                      });
    hjrl::save_filter(out, r.nets);
    std::cout << "trained in " << r.seconds << " s, wrote " << out << '\n';
  });

  // eval
  auto* ev = app.add_subcommand("eval", "evaluation against the grid oracle");
  ev->require_subcommand(1);
  std::string workdir = "lsf_work", nets_path, threshold_path, grid_path;
  int constraints = -1, rollouts = -1;
  std::string polarity;
  auto add_common = [&](CLI::App* c) {
    c->add_option("--config", config_path);
    c->add_option("--workdir", workdir, "artifact cache directory");
    c->add_option("--out", out, "report prefix (writes .txt and .jsonl)");
  };
  auto add_checkpoints = [&](CLI::App* c) {
    c->add_option("--nets", nets_path)->required();
    c->add_option("--projector", projector_path);
    c->add_option("--threshold", threshold_path)->required();
    c->add_option("--grid", grid_path, "oracle grid at the origin; solved into --workdir when absent");
  };

  auto* ec = ev->add_subcommand("classify", "node-wise unsafe-set classification");
  add_common(ec);
  add_checkpoints(ec);
  ec->add_option("--constraints", constraints);
  ec->add_option("--seed", seed);
  ec->add_option("--polarity", polarity, "unsafe|safe positive class");
  ec->callback([&] {
    auto cfg = load_config(config_path);
    if (constraints > 0) cfg.eval_constraints = constraints;
    if (ec->count("--seed")) cfg.eval_seed = seed;
    if (!polarity.empty()) cfg.polarity = eval::parse_polarity(polarity);
    eval::Pipeline p(cfg, workdir, &std::cerr);
    const auto t = conformal::load_threshold(threshold_path);
    const auto nets = hjrl::load_filter(nets_path, maybe_projector(projector_path));
    eval::ClassificationOptions opt;
    opt.n_constraints = cfg.eval_constraints;
    opt.seed = cfg.eval_seed;
    opt.polarity = cfg.polarity;
    opt.band_cells = cfg.band_cells;
    const auto base = grid_path.empty() ? p.base_grid(t.epsilon)
                                        : std::make_shared<const grid::ValueGrid>(grid::read_value_grid(grid_path));
    const auto c = eval::eval_classification(eval::filter_predictor(nets), *p.encoder(), base, t.epsilon, t.delta, opt);
    eval::Report r{"classification (positive class: " + std::string(eval::polarity_name(c.polarity)) + ")",
                   {"FPR", "Rec", "Pre", "F1", "B.Acc", "FPR'", "Rec'", "Pre'", "F1'", "B.Acc'", "delta", "UnsafeFrac"},
                   {metrics_row(hjrl::conditioning_name(nets.conditioning), c)}};
    print_report(r, out);
  });

  auto* er = ev->add_subcommand("rollout", "fallback safe rate and filtered adversarial rollouts");
  add_common(er);
  add_checkpoints(er);
  er->add_option("--n", rollouts);
  er->add_option("--seed", seed);
  er->callback([&] {
    auto cfg = load_config(config_path);
    if (rollouts > 0) cfg.rollouts = rollouts;
    if (er->count("--seed")) cfg.rollout_seed = seed;
    eval::Pipeline p(cfg, workdir, &std::cerr);
    const auto t = conformal::load_threshold(threshold_path);
    const auto nets = hjrl::load_filter(nets_path, maybe_projector(projector_path));
    const auto base = grid_path.empty() ? p.base_grid(t.epsilon)
                                        : std::make_shared<const grid::ValueGrid>(grid::read_value_grid(grid_path));
    eval::RolloutOptions opt;
    opt.n_rollouts = cfg.rollouts;
    opt.seed = cfg.rollout_seed;
    opt.epsilon = t.epsilon;
    const auto fb = eval::eval_safe_rate(eval::fallback_policy(nets), p.encoder(), base, sim::DubinsParams{}, opt);
    opt.seed = cfg.rollout_seed + 1;
    const auto fl = eval::eval_filtered_rollouts(nets, t, p.encoder(), base, sim::DubinsParams{}, opt);
    eval::Report r{"rollouts", {"SafeRate", "MinDist", "FracGeEps", "Interventions"}, {}};
    r.rows.push_back({"fallback", {{"SafeRate", fb.safe_rate()}, {"MinDist", fb.mean_min_distance},
                                   {"FracGeEps", fb.fraction_at_least(t.epsilon)}, {"Interventions", 0.0}}});
    r.rows.push_back({"filtered_adversary", {{"SafeRate", fl.safe_rate()}, {"MinDist", fl.mean_min_distance},
                                             {"FracGeEps", fl.fraction_at_least(t.epsilon)},
                                             {"Interventions", static_cast<double>(fl.interventions)}}});
    print_report(r, out);
  });

  auto* ea = ev->add_subcommand("ablation", "regenerate an ablation table end to end (artifacts cached in --workdir)");
  add_common(ea);
  std::string suite = "table1";
  ea->add_option("--suite", suite, "table1|table2|table3")->check(CLI::IsMember({"table1", "table2", "table3"}));
  ea->callback([&] {
    eval::Pipeline p(load_config(config_path), workdir, &std::cerr);
    print_report(eval::run_ablation(p, suite), out);
  });

  auto* dump = app.add_subcommand("dump-config", "print the default configuration");
  dump->callback([] { std::cout << eval::PipelineConfig{}.to_kv().to_string(); });

  // serve
  auto* sv = app.add_subcommand("serve", "newline-delimited JSON teleoperation server over TCP");
  int port = 8765;
  std::string host = "127.0.0.1", calib_cache;
  sv->add_option("--port", port);
  sv->add_option("--host", host);
  sv->add_option("--nets", nets_path)->required();
  sv->add_option("--projector", projector_path);
  sv->add_option("--calib-cache", calib_cache)->required();
  sv->add_option("--grid", grid_path, "oracle grid at the origin, used to pick safe reset states");
  sv->add_option("--alpha", alpha);
  sv->add_option("--epsilon", epsilon);
  sv->add_option("--runtime-margin", runtime_margin);
  sv->add_option("--encoder-seed", encoder_seed);
  sv->callback([&] {
    auto res = std::make_shared<teleop::ServiceResources>();
    res->encoder = std::make_shared<const latent::Encoder>(encoder_seed);
    res->nets = std::make_shared<const hjrl::FilterNets>(hjrl::load_filter(nets_path, maybe_projector(projector_path)));
    res->calibration =
        std::make_shared<const conformal::CalibrationCache>(conformal::CalibrationCache::load(calib_cache));
    if (!grid_path.empty()) res->oracle = std::make_shared<const grid::ValueGrid>(grid::read_value_grid(grid_path));
    res->initial_alpha = alpha;
    res->initial_epsilon = epsilon;
    res->runtime_margin = runtime_margin;
    // Block the shutdown signals before any worker thread exists so that
    // only the sigwait below ever sees them.
    sigset_t stop_signals;
    sigemptyset(&stop_signals);
    sigaddset(&stop_signals, SIGINT);
    sigaddset(&stop_signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);
    teleop::TeleopServer server(res);
    const int bound = server.start(port, host);
    std::cout << "listening on " << host << ':' << bound << std::endl;
    int received = 0;
    sigwait(&stop_signals, &received);
    server.stop();
    std::cout << "stopped" << std::endl;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
