#pragma once

#include <cstdint>
#include <string>

// Independent numerical checks shared by the unit tests and the acceptance
// runner. Nothing here reuses the code under test for the reference values.
namespace lsf::checks {

struct GradientSuiteResult {
  int probes = 0;
  int failures = 0;
  double max_relative_error = 0.0;
  std::string worst_case;
};

// Central finite differences (double precision) against backward() on small
// random nets covering linear, LayerNorm, relu, silu and tanh layers, plus the
// column cosine head. Probes are split evenly across the cases.
GradientSuiteResult run_gradient_suite(int probes, std::uint64_t seed, double h = 1e-6, double tolerance = 1e-4);

struct BackupPropertyResult {
  int pairs = 0;
  double worst_contraction_ratio = 0.0;  // max ||T u - T v|| / ||u - v||
  bool contraction_holds = true;          // ||T u - T v||_inf <= γ ||u - v||_inf for every pair
  bool monotone_holds = true;             // u <= v  =>  T u <= T v for every pair
  double worst_value_above_margin = 0.0;  // max (V - ℓ) after convergence
};

// Random value arrays on a small Dubins grid with a random margin.
BackupPropertyResult check_backup_properties(int pairs, std::uint64_t seed, double gamma);

struct ChainValues {
  double a = 0.0;
  double b = 0.0;
};

// A -> B -> B with ℓ(A) = 1, ℓ(B) = -1, solved by value iteration with the
// margin shifted by `delta`.
ChainValues solve_two_state_chain(double gamma, double delta);

// ⌈(1-α)(N+1)⌉ evaluated in exact rational arithmetic for α = num/den.
std::size_t exact_quantile_rank(std::size_t n, std::uint64_t alpha_num, std::uint64_t alpha_den);

}  // namespace lsf::checks
