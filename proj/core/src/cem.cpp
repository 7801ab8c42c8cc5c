#include "bussim/cem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "bussim/errors.hpp"
#include "bussim/parallel.hpp"
#include "bussim/rng.hpp"

namespace bussim::calib {

void Bounds::validate() const {
  if (lower.size() != upper.size()) throw std::invalid_argument("bounds: lower/upper size mismatch");
  if (lower.empty()) throw std::invalid_argument("bounds: empty search space");
  for (std::size_t k = 0; k < lower.size(); ++k) {
    if (!std::isfinite(lower[k]) || !std::isfinite(upper[k]))
      throw std::invalid_argument("bounds: dimension " + std::to_string(k) + " is not finite");
    if (lower[k] > upper[k])
      throw std::invalid_argument("bounds: dimension " + std::to_string(k) + " has lower > upper");
  }
}

void Bounds::clamp(std::span<double> x) const {
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = std::clamp(x[k], lower[k], upper[k]);
}

bool Bounds::contains(std::span<const double> x) const {
  if (x.size() != lower.size()) return false;
  for (std::size_t k = 0; k < x.size(); ++k)
    if (!(x[k] >= lower[k] && x[k] <= upper[k])) return false;
  return true;
}

std::size_t CemHyperparams::elite_count() const {
  return static_cast<std::size_t>(std::ceil(elite_ratio * population - 1e-9));
}

namespace {

// Everything except the strict upper limit on rho: rho = 1 (no selection
// pressure) is accepted by the optimizer but not by configuration files.
void check_common(const CemHyperparams& h) {
  if (h.population < 2) throw ConfigError("cem.population", "must be >= 2");
  if (h.iterations < 1) throw ConfigError("cem.iterations", "must be >= 1");
  if (!(h.elite_ratio > 0.0 && h.elite_ratio <= 1.0))
    throw ConfigError("cem.elite_ratio", "elite ratio must lie in (0,1)");
  if (!(h.smoothing > 0.0 && h.smoothing <= 1.0)) throw ConfigError("cem.smoothing", "smoothing must lie in (0,1]");
  if (h.elite_ratio * h.population < 2.0 - 1e-9)
    throw ConfigError("cem.elite_ratio", "population * elite ratio must be >= 2");
  if (h.replications < 1) throw ConfigError("cem.replications", "must be >= 1");
  if (!(h.sigma_tolerance >= 0.0)) throw ConfigError("cem.sigma_tolerance", "must be >= 0");
}

}  // namespace

void CemHyperparams::validate() const {
  check_common(*this);
  if (!(elite_ratio < 1.0)) throw ConfigError("cem.elite_ratio", "elite ratio must lie in (0,1)");
}

CemResult cem_optimize(const Bounds& bounds, const CemHyperparams& hyper, const ObjectiveFn& objective,
                       std::uint64_t seed, const CemOptions& options) {
  bounds.validate();
  check_common(hyper);
  const std::size_t dims = bounds.size();
  const auto pop = static_cast<std::size_t>(hyper.population);
  const std::size_t n_elite = std::min(pop, hyper.elite_count());

  CemResult result;
  CemState& st = result.state;
  st.mu = options.initial_mean;
  st.sigma = options.initial_sigma;
  if (st.mu.empty()) {
    st.mu.resize(dims);
    for (std::size_t k = 0; k < dims; ++k) st.mu[k] = 0.5 * (bounds.lower[k] + bounds.upper[k]);
  }
  if (st.sigma.empty()) {
    st.sigma.resize(dims);
    for (std::size_t k = 0; k < dims; ++k) st.sigma[k] = bounds.range(k) / 4.0;
  }
  if (st.mu.size() != dims || st.sigma.size() != dims)
    throw std::invalid_argument("cem: initial mean/sigma dimension mismatch");
  st.best_pi = std::numeric_limits<double>::infinity();

  std::vector<std::vector<double>> samples(pop, std::vector<double>(dims));
  std::vector<double> values(pop);
  std::vector<std::size_t> order(pop);
  std::vector<double> mu_new(dims), sigma_new(dims);

  for (int it = 1; it <= hyper.iterations; ++it) {
    const auto uit = static_cast<std::uint64_t>(it);
    for (std::size_t i = 0; i < pop; ++i) {
      Rng rng = make_rng(seed, {uit, static_cast<std::uint64_t>(i), 0});
      std::normal_distribution<double> z(0.0, 1.0);
      for (std::size_t k = 0; k < dims; ++k) samples[i][k] = st.mu[k] + st.sigma[k] * z(rng);
      bounds.clamp(samples[i]);
    }

    parallel_for(pop, options.jobs, [&](std::size_t i) {
      const double v = objective(samples[i], derive_seed(seed, {uit, static_cast<std::uint64_t>(i), 1}));
      values[i] = std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    });

    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    if (!std::isfinite(values[order[0]]))
      throw std::runtime_error("cem: every candidate in iteration " + std::to_string(it) +
                               " was infeasible (bounds too tight or objective undefined)");

    IterationRecord rec;
    rec.iteration = it;
    rec.population_mean.assign(dims, 0.0);
    for (const auto& s : samples)
      for (std::size_t k = 0; k < dims; ++k) rec.population_mean[k] += s[k] / static_cast<double>(pop);

    // Infeasible candidates never enter the elite set.
    std::size_t take = 0;
    while (take < n_elite && std::isfinite(values[order[take]])) ++take;
    rec.elite_threshold = values[order[take - 1]];
    rec.iteration_best_pi = values[order[0]];

    std::fill(mu_new.begin(), mu_new.end(), 0.0);
    std::fill(sigma_new.begin(), sigma_new.end(), 0.0);
    for (std::size_t e = 0; e < take; ++e)
      for (std::size_t k = 0; k < dims; ++k) mu_new[k] += samples[order[e]][k];
    for (std::size_t k = 0; k < dims; ++k) mu_new[k] /= static_cast<double>(take);
    for (std::size_t e = 0; e < take; ++e)
      for (std::size_t k = 0; k < dims; ++k) {
        const double d = samples[order[e]][k] - mu_new[k];
        sigma_new[k] += d * d;
      }
    for (std::size_t k = 0; k < dims; ++k) sigma_new[k] = std::sqrt(sigma_new[k] / static_cast<double>(take));

    const double a = hyper.smoothing;
    for (std::size_t k = 0; k < dims; ++k) {
      st.mu[k] = a * mu_new[k] + (1.0 - a) * st.mu[k];
      st.sigma[k] = a * sigma_new[k] + (1.0 - a) * st.sigma[k];
    }
    st.iteration = it;

    if (values[order[0]] < st.best_pi) {
      st.best_pi = values[order[0]];
      st.best = samples[order[0]];
    }

    double max_rel = 0.0;
    for (std::size_t k = 0; k < dims; ++k) {
      const double r = bounds.range(k);
      if (r > 0.0) max_rel = std::max(max_rel, st.sigma[k] / r);
    }
    rec.best_pi = st.best_pi;
    rec.max_relative_sigma = max_rel;
    rec.mean = st.mu;
    rec.sigma = st.sigma;
    result.trace.push_back(std::move(rec));

    if (max_rel < hyper.sigma_tolerance) {
      result.converged = true;
      break;
    }
  }
  return result;
}

}  // namespace bussim::calib
