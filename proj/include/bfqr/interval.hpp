#pragma once

namespace bfqr {

struct Interval {
  double lower = 0.0;
  double upper = 0.0;

  double width() const { return upper - lower; }
  bool contains(double y) const { return lower <= y && y <= upper; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

}  // namespace bfqr
