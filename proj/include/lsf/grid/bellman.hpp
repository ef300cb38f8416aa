#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "lsf/grid/value_grid.hpp"

namespace lsf::grid {

// Successor of one (node, action) as an interpolation stencil over nodes.
struct Stencil {
  std::array<std::uint32_t, 8> index{};
  std::array<double, 8> weight{};
  int count = 0;

  double apply(const std::vector<double>& v) const {
    double acc = 0.0;
    for (int n = 0; n < count; ++n) acc += weight[n] * v[index[n]];
    return acc;
  }
};

class TransitionModel {
 public:
  virtual ~TransitionModel() = default;
  virtual std::size_t node_count() const = 0;
  virtual int action_count() const = 0;
  // Writes action_count() stencils for the given node.
  virtual void successors(std::size_t node, std::span<Stencil> out) const = 0;
};

// Hand-specified transitions; stencils[node][action].
class TableModel : public TransitionModel {
 public:
  explicit TableModel(std::vector<std::vector<Stencil>> stencils);
  std::size_t node_count() const override { return stencils_.size(); }
  int action_count() const override { return actions_; }
  void successors(std::size_t node, std::span<Stencil> out) const override;

 private:
  std::vector<std::vector<Stencil>> stencils_;
  int actions_ = 0;
};

// Semi-Lagrangian Dubins model: one Euler step from every node per action,
// successors interpolated trilinearly (x/y clamped, theta periodic).
class DubinsGridModel : public TransitionModel {
 public:
  DubinsGridModel(const GridSpec& spec, const sim::DubinsParams& params, int n_actions);
  std::size_t node_count() const override { return spec_.node_count(); }
  int action_count() const override { return static_cast<int>(actions_.size()); }
  void successors(std::size_t node, std::span<Stencil> out) const override;

  const GridSpec& spec() const { return spec_; }
  const std::vector<double>& actions() const { return actions_; }

 private:
  struct HeadingMove {
    double dx = 0.0;
    double dy = 0.0;
    int k0 = 0;
    int k1 = 0;
    double wk = 0.0;
  };
  GridSpec spec_;
  sim::DubinsParams params_;
  std::vector<double> actions_;
  std::vector<HeadingMove> moves_;  // [k * n_actions + a]
};

// Trilinear stencil for an arbitrary state on the grid.
Stencil interpolation_stencil(const GridSpec& spec, const sim::PrivilegedState& s);

// One synchronous backup: out = (1-γ)ℓ + γ min(ℓ, max_a V(succ)). Reads `in`
// only; returns the sup-norm change. Identical output for any worker count.
double backup_sweep(const TransitionModel& model, const std::vector<double>& margin, const std::vector<double>& in,
                    std::vector<double>& out, double gamma, int workers = 1);

struct IterationOptions {
  double gamma = 0.9999;
  double tol = 1e-6;
  int max_iter = 5000;
  int workers = 1;
  // When > 0, run exactly this many sweeps and ignore tol.
  int fixed_iterations = 0;
};

struct IterationResult {
  std::vector<double> values;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

// Starts from V0 = ℓ. Throws std::invalid_argument for γ outside [0, 1) or
// tol <= 0; non-convergence is reported through `converged`.
IterationResult value_iteration(const TransitionModel& model, const std::vector<double>& margin,
                                const IterationOptions& opt);

std::vector<double> margin_on_grid(const GridSpec& spec, const std::function<double(const sim::PrivilegedState&)>& l);

// Disc failure margin at an arbitrary center, solved on the Dubins grid.
ValueGrid solve_disc_grid(const GridSpec& spec, const sim::DubinsParams& params, int n_actions,
                          const sim::FailureDisc& disc, const IterationOptions& opt);

}  // namespace lsf::grid
