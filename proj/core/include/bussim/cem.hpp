#pragma once

// Cross-Entropy Method over independent Normal sampling distributions.
//
// Each iteration draws `population` candidates from N(mu, sigma) (clamped to
// the box), sorts them by ascending objective, keeps the ceil(rho * I) best as
// the elite set, refits mu' / sigma' to the elites and smooths:
//   mu    <- alpha * mu'    + (1 - alpha) * mu
//   sigma <- alpha * sigma' + (1 - alpha) * sigma
// The best candidate ever evaluated is returned.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace bussim::calib {

struct Bounds {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t size() const noexcept { return lower.size(); }
  double range(std::size_t k) const { return upper[k] - lower[k]; }
  void validate() const;
  void clamp(std::span<double> x) const;
  bool contains(std::span<const double> x) const;
};

struct CemHyperparams {
  int population = 100;       // I
  int iterations = 50;        // T_cem
  double elite_ratio = 0.1;   // rho
  double smoothing = 0.7;     // alpha
  int replications = 8;       // K_I, model runs per evaluation (stochastic models)
  double sigma_tolerance = 1e-3;  // stop once every sigma_k < tol * range_k

  std::size_t elite_count() const;
  void validate() const;  // throws ConfigError with "cem.*" field paths
};

struct IterationRecord {
  int iteration = 0;
  double best_pi = 0.0;            // best ever, after this iteration
  double iteration_best_pi = 0.0;  // best within this iteration's population
  double elite_threshold = 0.0;    // gamma: worst objective admitted to the elite set
  double max_relative_sigma = 0.0;
  std::vector<double> mean;             // mu after the update
  std::vector<double> sigma;            // sigma after the update
  std::vector<double> population_mean;  // mean of this iteration's draws
};

struct CemState {
  std::vector<double> mu;
  std::vector<double> sigma;
  int iteration = 0;
  std::vector<double> best;
  double best_pi = 0.0;
};

struct CemResult {
  CemState state;
  std::vector<IterationRecord> trace;
  bool converged = false;  // stopped on the sigma tolerance rather than the iteration cap
};

// objective(candidate, seed) -> non-negative performance index. Non-finite
// values mark a candidate as infeasible. `seed` is derived from
// (master seed, iteration, candidate index).
using ObjectiveFn = std::function<double(std::span<const double>, std::uint64_t)>;

struct CemOptions {
  std::vector<double> initial_mean;   // empty: box midpoint
  std::vector<double> initial_sigma;  // empty: range / 4
  int jobs = 1;
};

CemResult cem_optimize(const Bounds& bounds, const CemHyperparams& hyper, const ObjectiveFn& objective,
                       std::uint64_t seed, const CemOptions& options = {});

}  // namespace bussim::calib
