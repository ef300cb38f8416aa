#include "lsf/grid/bellman.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "lsf/common/angles.hpp"

namespace lsf::grid {

namespace {

struct AxisWeight {
  int i0 = 0;
  double w = 0.0;
};

AxisWeight clamped_axis(double v, double lo, double step, int n) {
  const double hi = lo + step * (n - 1);
  const double f = (std::clamp(v, lo, hi) - lo) / step;
  int i0 = static_cast<int>(std::floor(f));
  i0 = std::clamp(i0, 0, n - 2);
  return {i0, std::clamp(f - i0, 0.0, 1.0)};
}

struct PeriodicWeight {
  int k0 = 0;
  int k1 = 0;
  double w = 0.0;
};

PeriodicWeight periodic_axis(double theta, double lo, double step, int n) {
  double f = (theta - lo) / step;
  f -= n * std::floor(f / n);
  if (f >= n) f -= n;
  int k0 = static_cast<int>(std::floor(f));
  double w = f - k0;
  k0 %= n;
  if (k0 < 0) k0 += n;
  return {k0, (k0 + 1) % n, w};
}

void fill_stencil(const GridSpec& spec, const AxisWeight& ax, const AxisWeight& ay, const PeriodicWeight& at,
                  Stencil& st) {
  st.count = 8;
  int n = 0;
  for (int di = 0; di < 2; ++di) {
    const double wx = di ? ax.w : 1.0 - ax.w;
    for (int dj = 0; dj < 2; ++dj) {
      const double wy = dj ? ay.w : 1.0 - ay.w;
      for (int dk = 0; dk < 2; ++dk) {
        const double wk = dk ? at.w : 1.0 - at.w;
        st.index[n] = static_cast<std::uint32_t>(spec.flat(ax.i0 + di, ay.i0 + dj, dk ? at.k1 : at.k0));
        st.weight[n] = wx * wy * wk;
        ++n;
      }
    }
  }
}

}  // namespace

Stencil interpolation_stencil(const GridSpec& spec, const sim::PrivilegedState& s) {
  Stencil st;
  fill_stencil(spec, clamped_axis(s.x, spec.x_min, spec.dx(), spec.nx), clamped_axis(s.y, spec.y_min, spec.dy(), spec.ny),
               periodic_axis(s.theta, spec.theta_min, spec.dtheta(), spec.ntheta), st);
  return st;
}

TableModel::TableModel(std::vector<std::vector<Stencil>> stencils) : stencils_(std::move(stencils)) {
  if (stencils_.empty()) throw std::invalid_argument("TableModel: no nodes");
  actions_ = static_cast<int>(stencils_.front().size());
  for (const auto& row : stencils_) {
    if (static_cast<int>(row.size()) != actions_ || actions_ < 1) {
      throw std::invalid_argument("TableModel: every node needs the same positive action count");
    }
    for (const auto& st : row) {
      for (int n = 0; n < st.count; ++n) {
        if (st.index[n] >= stencils_.size()) throw std::invalid_argument("TableModel: successor out of range");
      }
    }
  }
}

void TableModel::successors(std::size_t node, std::span<Stencil> out) const {
  std::copy(stencils_[node].begin(), stencils_[node].end(), out.begin());
}

DubinsGridModel::DubinsGridModel(const GridSpec& spec, const sim::DubinsParams& params, int n_actions)
    : spec_(spec), params_(params), actions_(action_set(n_actions, params.a_max)) {
  spec_.validate();
  params_.validate();
  const auto na = actions_.size();
  moves_.resize(static_cast<std::size_t>(spec_.ntheta) * na);
  for (int k = 0; k < spec_.ntheta; ++k) {
    const double theta = spec_.theta_at(k);
    for (std::size_t a = 0; a < na; ++a) {
      HeadingMove& m = moves_[static_cast<std::size_t>(k) * na + a];
      m.dx = params_.dt * params_.v * std::cos(theta);
      m.dy = params_.dt * params_.v * std::sin(theta);
      const auto pw = periodic_axis(wrap_angle(theta + params_.dt * actions_[a]), spec_.theta_min, spec_.dtheta(),
                                    spec_.ntheta);
      m.k0 = pw.k0;
      m.k1 = pw.k1;
      m.wk = pw.w;
    }
  }
}

void DubinsGridModel::successors(std::size_t node, std::span<Stencil> out) const {
  const auto k = static_cast<int>(node % static_cast<std::size_t>(spec_.ntheta));
  const std::size_t ij = node / static_cast<std::size_t>(spec_.ntheta);
  const auto j = static_cast<int>(ij % static_cast<std::size_t>(spec_.ny));
  const auto i = static_cast<int>(ij / static_cast<std::size_t>(spec_.ny));
  const auto na = actions_.size();
  const HeadingMove& first = moves_[static_cast<std::size_t>(k) * na];
  // The positional step depends on the current heading only, so it is shared
  // by every action at this node.
  const AxisWeight ax = clamped_axis(spec_.x_at(i) + first.dx, spec_.x_min, spec_.dx(), spec_.nx);
  const AxisWeight ay = clamped_axis(spec_.y_at(j) + first.dy, spec_.y_min, spec_.dy(), spec_.ny);
  for (std::size_t a = 0; a < na; ++a) {
    const HeadingMove& m = moves_[static_cast<std::size_t>(k) * na + a];
    fill_stencil(spec_, ax, ay, {m.k0, m.k1, m.wk}, out[a]);
  }
}

double backup_sweep(const TransitionModel& model, const std::vector<double>& margin, const std::vector<double>& in,
                    std::vector<double>& out, double gamma, int workers) {
  const std::size_t n = model.node_count();
  if (margin.size() != n || in.size() != n) throw std::invalid_argument("backup_sweep: array size mismatch");
  out.resize(n);
  const int na = model.action_count();
  auto run = [&](std::size_t begin, std::size_t end, double* residual) {
    std::vector<Stencil> st(static_cast<std::size_t>(na));
    double res = 0.0;
    for (std::size_t node = begin; node < end; ++node) {
      model.successors(node, st);
      double best = -std::numeric_limits<double>::infinity();
      for (const auto& s : st) best = std::max(best, s.apply(in));
      const double l = margin[node];
      const double v = (1.0 - gamma) * l + gamma * std::min(l, best);
      out[node] = v;
      res = std::max(res, std::abs(v - in[node]));
    }
    *residual = res;
  };
  workers = std::max(1, std::min<int>(workers, static_cast<int>(std::max<std::size_t>(1, n / 1024))));
  std::vector<double> residuals(static_cast<std::size_t>(workers), 0.0);
  if (workers == 1) {
    run(0, n, &residuals[0]);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      const std::size_t b = n * static_cast<std::size_t>(w) / static_cast<std::size_t>(workers);
      const std::size_t e = n * static_cast<std::size_t>(w + 1) / static_cast<std::size_t>(workers);
      pool.emplace_back(run, b, e, &residuals[static_cast<std::size_t>(w)]);
    }
    for (auto& t : pool) t.join();
  }
  return *std::max_element(residuals.begin(), residuals.end());
}

IterationResult value_iteration(const TransitionModel& model, const std::vector<double>& margin,
                                const IterationOptions& opt) {
  if (!(opt.gamma >= 0.0 && opt.gamma < 1.0)) throw std::invalid_argument("value_iteration: gamma must be in [0, 1)");
  if (!(opt.tol > 0.0)) throw std::invalid_argument("value_iteration: tol must be positive");
  if (margin.size() != model.node_count()) throw std::invalid_argument("value_iteration: margin size mismatch");
  IterationResult r;
  r.values = margin;
  std::vector<double> next;
  const int limit = opt.fixed_iterations > 0 ? opt.fixed_iterations : opt.max_iter;
  while (r.iterations < limit) {
    r.residual = backup_sweep(model, margin, r.values, next, opt.gamma, opt.workers);
    r.values.swap(next);
    ++r.iterations;
    if (opt.fixed_iterations <= 0 && r.residual < opt.tol) {
      r.converged = true;
      break;
    }
  }
  if (opt.fixed_iterations > 0) r.converged = r.residual < opt.tol;
  return r;
}

std::vector<double> margin_on_grid(const GridSpec& spec, const std::function<double(const sim::PrivilegedState&)>& l) {
  std::vector<double> m(spec.node_count());
  for (std::size_t n = 0; n < m.size(); ++n) m[n] = l(spec.node_state(n));
  return m;
}

ValueGrid solve_disc_grid(const GridSpec& spec, const sim::DubinsParams& params, int n_actions,
                          const sim::FailureDisc& disc, const IterationOptions& opt) {
  const DubinsGridModel model(spec, params, n_actions);
  const auto margin = margin_on_grid(spec, [&](const sim::PrivilegedState& s) { return sim::signed_distance_margin(s, disc); });
  IterationResult r = value_iteration(model, margin, opt);
  ValueGrid g;
  g.spec = spec;
  g.values = std::move(r.values);
  g.gamma = opt.gamma;
  g.iterations = r.iterations;
  g.residual = r.residual;
  g.converged = r.converged;
  g.margin = MarginDescriptor{disc.radius, disc.cx, disc.cy};
  return g;
}

}  // namespace lsf::grid
