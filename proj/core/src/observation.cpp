#include "bussim/observation.hpp"

#include <cmath>
#include <stdexcept>

namespace bussim::sim {

void ObservationSeries::reserve(std::size_t frames) {
  times_.reserve(frames);
  rows_.reserve(frames * fleet_size_);
}

void ObservationSeries::append(double time, std::span<const ObservationRow> rows) {
  if (rows.size() != fleet_size_)
    throw std::invalid_argument("ObservationSeries::append: expected " + std::to_string(fleet_size_) +
                                " rows, got " + std::to_string(rows.size()));
  if (!times_.empty() && !(time > times_.back()))
    throw std::invalid_argument("ObservationSeries::append: timestamps must increase");
  times_.push_back(time);
  rows_.insert(rows_.end(), rows.begin(), rows.end());
}

ObservationVector ObservationSeries::vector_at(std::size_t f) const {
  auto rows = frame(f);
  return ObservationVector{times_.at(f), {rows.begin(), rows.end()}};
}

std::optional<std::size_t> ObservationSeries::frame_at_time(double t) const {
  if (times_.empty()) return std::nullopt;
  const double tol = 1e-6 * dt_;
  // Frames normally sit on the regular grid dt, 2dt, ...; try that first.
  const double guess = std::round(t / dt_) - 1.0;
  if (guess >= 0.0 && guess < static_cast<double>(times_.size())) {
    const auto g = static_cast<std::size_t>(guess);
    if (std::abs(times_[g] - t) <= tol) return g;
  }
  for (std::size_t i = 0; i < times_.size(); ++i)
    if (std::abs(times_[i] - t) <= tol) return i;
  return std::nullopt;
}

}  // namespace bussim::sim
