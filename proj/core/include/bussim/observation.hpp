#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "bussim/state.hpp"

namespace bussim::sim {

// The observable slice of one bus. Idle (not yet dispatched) slots are all
// zero, which keeps the vector a fixed size.
struct ObservationRow {
  BusStatus status = BusStatus::kIdle;
  double position = 0.0;
  double speed = 0.0;
  int occupancy = 0;

  bool active() const noexcept {
    return status == BusStatus::kMoving || status == BusStatus::kDwelling;
  }
  friend bool operator==(const ObservationRow&, const ObservationRow&) = default;
};

struct ObservationVector {
  double time = 0.0;
  std::vector<ObservationRow> rows;
  friend bool operator==(const ObservationVector&, const ObservationVector&) = default;
};

// Timestamped observations of a whole fleet, stored frame-major.
class ObservationSeries {
 public:
  ObservationSeries() = default;
  ObservationSeries(std::size_t fleet_size, double dt) : fleet_size_(fleet_size), dt_(dt) {}

  void reserve(std::size_t frames);
  void append(double time, std::span<const ObservationRow> rows);
  void append(const ObservationVector& v) { append(v.time, v.rows); }

  std::size_t fleet_size() const noexcept { return fleet_size_; }
  std::size_t num_frames() const noexcept { return times_.size(); }
  std::size_t num_rows() const noexcept { return rows_.size(); }
  double dt() const noexcept { return dt_; }
  bool empty() const noexcept { return times_.empty(); }

  double time(std::size_t frame) const { return times_.at(frame); }
  std::span<const ObservationRow> frame(std::size_t f) const {
    return std::span<const ObservationRow>(rows_).subspan(f * fleet_size_, fleet_size_);
  }
  const ObservationRow& at(std::size_t f, std::size_t bus) const { return rows_[f * fleet_size_ + bus]; }
  ObservationVector vector_at(std::size_t f) const;

  // Frame whose timestamp equals `t` (to within a millionth of a tick).
  std::optional<std::size_t> frame_at_time(double t) const;

  const std::vector<double>& times() const noexcept { return times_; }
  const std::vector<ObservationRow>& rows() const noexcept { return rows_; }

  friend bool operator==(const ObservationSeries&, const ObservationSeries&) = default;

 private:
  std::size_t fleet_size_ = 0;
  double dt_ = 1.0;
  std::vector<double> times_;
  std::vector<ObservationRow> rows_;
};

}  // namespace bussim::sim
