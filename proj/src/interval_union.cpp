#include "bfqr/interval_union.hpp"

#include <algorithm>

namespace bfqr {

IntervalUnion::IntervalUnion(std::vector<Interval> pieces) {
  std::erase_if(pieces, [](const Interval& iv) { return !(iv.lower <= iv.upper); });
  std::sort(pieces.begin(), pieces.end(),
            [](const Interval& a, const Interval& b) { return a.lower < b.lower; });
  for (const auto& iv : pieces) {
    if (!pieces_.empty() && iv.lower <= pieces_.back().upper)
      pieces_.back().upper = std::max(pieces_.back().upper, iv.upper);
    else
      pieces_.push_back(iv);
  }
}

double IntervalUnion::total_width() const {
  double w = 0.0;
  for (const auto& iv : pieces_) w += iv.width();
  return w;
}

Interval IntervalUnion::hull() const { return {pieces_.front().lower, pieces_.back().upper}; }

double IntervalUnion::hull_width() const { return empty() ? 0.0 : hull().width(); }

bool IntervalUnion::covers(double y) const {
  auto it = std::upper_bound(pieces_.begin(), pieces_.end(), y,
                             [](double v, const Interval& iv) { return v < iv.lower; });
  if (it == pieces_.begin()) return false;
  return y <= std::prev(it)->upper;
}

IntervalUnion hull_interval(const IntervalUnion& u) {
  if (u.empty()) return {};
  return IntervalUnion::single(u.hull());
}

}  // namespace bfqr
