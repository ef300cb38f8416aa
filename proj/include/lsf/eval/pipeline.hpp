#pragma once

#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "lsf/common/kv_config.hpp"
#include "lsf/conformal/calibration.hpp"
#include "lsf/eval/harness.hpp"
#include "lsf/eval/report.hpp"
#include "lsf/hjrl/train.hpp"

namespace lsf::eval {

// Every knob of the reproduction runs. Keys of the key = value config file
// are listed in to_kv().
struct PipelineConfig {
  std::uint64_t encoder_seed = latent::kDefaultEncoderSeed;
  std::size_t train_episodes = 4000;
  std::uint64_t train_seed = 1;
  std::size_t heldout_episodes = 1000;
  std::uint64_t heldout_seed = 2;
  std::size_t calib_states = 3000;
  std::size_t calib_pairs = 50000;
  std::uint64_t calib_seed = 3;

  latent::ProjectorTrainConfig projector;

  int grid_n = 61;
  int grid_actions = 11;
  double grid_gamma = 0.9999;
  double grid_tol = 1e-6;
  int grid_max_iter = 5000;
  int workers = 1;

  double alpha = 0.005;
  double runtime_margin = 0.1;
  double epsilon = 0.5;
  std::vector<double> table3_epsilons = {0.3, 0.4, 0.5};

  hjrl::FilterTrainConfig filter;

  int eval_constraints = 50;
  std::uint64_t eval_seed = 11;
  Polarity polarity = Polarity::unsafe_positive;
  double band_cells = 0.0;
  int rollouts = 250;
  std::uint64_t rollout_seed = 23;

  static PipelineConfig from_kv(const KeyValueConfig& kv);
  KeyValueConfig to_kv() const;
};

struct ProjectorStats {
  double train_mse = 0.0;
  double heldout_mse = 0.0;
  double heading_invariance = 0.0;
  double seconds = 0.0;
};

struct FilterStats {
  double seconds = 0.0;
  double final_critic_loss = 0.0;
};

// Builds artifacts on demand and caches them under workdir, keyed by a hash
// of the settings that produced them.
class Pipeline {
 public:
  Pipeline(PipelineConfig cfg, std::string workdir, std::ostream* log = nullptr);

  const PipelineConfig& config() const { return cfg_; }
  const std::string& workdir() const { return workdir_; }

  latent::EncoderPtr encoder();
  const sim::Dataset& train_data();
  const sim::Dataset& heldout_data();
  std::shared_ptr<const latent::FailureProjector> projector();
  ProjectorStats projector_stats();
  std::shared_ptr<const grid::ValueGrid> base_grid(double epsilon);
  const std::vector<conformal::CalibrationPair>& calibration_pairs();
  const conformal::CalibrationCache& calibration_cache(latent::MarginKind kind);
  conformal::Threshold threshold(latent::MarginKind kind, double epsilon);
  std::shared_ptr<const hjrl::FilterNets> filter(hjrl::Conditioning c, latent::MarginKind m);
  FilterStats filter_stats(hjrl::Conditioning c, latent::MarginKind m);

  ClassificationReport classify(const hjrl::FilterNets& nets, const conformal::Threshold& t);
  RolloutReport safe_rate(const hjrl::FilterNets& nets);
  RolloutReport filtered_rollouts(const hjrl::FilterNets& nets, const conformal::Threshold& t);

 private:
  std::string path(const std::string& stem, const std::string& key, const std::string& ext) const;
  void note(const std::string& msg);

  PipelineConfig cfg_;
  std::string workdir_;
  std::ostream* log_;
  latent::EncoderPtr encoder_;
  std::optional<sim::Dataset> train_;
  std::optional<sim::Dataset> heldout_;
  std::shared_ptr<const latent::FailureProjector> projector_;
  std::map<long long, std::shared_ptr<const grid::ValueGrid>> grids_;
  std::optional<std::vector<conformal::CalibrationPair>> pairs_;
  std::map<int, conformal::CalibrationCache> caches_;
  std::map<std::string, std::shared_ptr<const hjrl::FilterNets>> filters_;
};

// table1: projector vs raw latent; table2: conditioning strategies;
// table3: thresholds calibrated at several ε.
Report run_ablation(Pipeline& p, const std::string& suite);

}  // namespace lsf::eval
