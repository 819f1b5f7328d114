#pragma once

#include <cstddef>
#include <vector>

#include "bfqr/interval.hpp"

namespace bfqr {

// Sorted union of disjoint closed intervals. Touching or overlapping pieces
// are merged on construction, so u_j < l_{j+1} always holds.
class IntervalUnion {
 public:
  IntervalUnion() = default;
  explicit IntervalUnion(std::vector<Interval> pieces);
  static IntervalUnion single(Interval iv) { return IntervalUnion({iv}); }

  const std::vector<Interval>& intervals() const { return pieces_; }
  std::size_t size() const { return pieces_.size(); }
  bool empty() const { return pieces_.empty(); }

  double total_width() const;
  Interval hull() const;  // requires non-empty
  double hull_width() const;
  bool covers(double y) const;

  friend bool operator==(const IntervalUnion&, const IntervalUnion&) = default;

 private:
  std::vector<Interval> pieces_;
};

IntervalUnion hull_interval(const IntervalUnion& u);
inline bool covered(const IntervalUnion& u, double y) { return u.covers(y); }

}  // namespace bfqr
