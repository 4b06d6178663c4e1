#pragma once

#include <chrono>
#include <cstdint>

namespace locathe {

/// Protocol time base. Timestamps count microseconds from an arbitrary epoch; the simulator
/// drives it virtually and the CLI maps it onto the system clock.
struct ProtocolClock {
  using rep = int64_t;
  using period = std::micro;
  using duration = std::chrono::microseconds;
  using time_point = std::chrono::time_point<ProtocolClock>;
  static constexpr bool is_steady = false;
};

using Duration = std::chrono::microseconds;
using Timestamp = ProtocolClock::time_point;

inline constexpr Timestamp at_seconds(double s) {
  return Timestamp(Duration(static_cast<int64_t>(s * 1'000'000.0)));
}

inline constexpr int64_t whole_seconds(Timestamp t) {
  return std::chrono::floor<std::chrono::seconds>(t.time_since_epoch()).count();
}

inline constexpr double to_seconds(Timestamp t) {
  return static_cast<double>(t.time_since_epoch().count()) / 1'000'000.0;
}

inline constexpr double to_seconds(Duration d) { return static_cast<double>(d.count()) / 1'000'000.0; }

/// One 802.11 time unit.
inline constexpr Duration kTimeUnit{1024};

}  // namespace locathe
