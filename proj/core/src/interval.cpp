#include "crn/interval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace crn {

IntervalSet IntervalSet::from_pieces(std::vector<Piece> pieces) {
  std::sort(pieces.begin(), pieces.end(),
            [](const Piece& a, const Piece& b) { return a.lo < b.lo; });
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (!(pieces[i].hi >= pieces[i].lo) || !std::isfinite(pieces[i].lo) ||
        !std::isfinite(pieces[i].hi))
      throw std::domain_error("interval piece is inverted or non-finite");
    if (i > 0 && pieces[i].lo < pieces[i - 1].hi)
      throw std::domain_error("interval pieces overlap");
  }
  IntervalSet out;
  out.pieces_ = std::move(pieces);
  return out;
}

IntervalSet IntervalSet::single(double lo, double hi) {
  IntervalSet out;
  out.add(lo, hi);
  return out;
}

void IntervalSet::add(double lo, double hi) {
  if (!(hi >= lo) || !std::isfinite(lo) || !std::isfinite(hi))
    throw std::domain_error("interval piece is inverted or non-finite");
  if (hi == lo) return;
  Piece merged{lo, hi};
  std::vector<Piece> out;
  out.reserve(pieces_.size() + 1);
  for (const Piece& p : pieces_) {
    if (p.hi < merged.lo || p.lo > merged.hi) {
      out.push_back(p);
    } else {
      merged.lo = std::min(merged.lo, p.lo);
      merged.hi = std::max(merged.hi, p.hi);
    }
  }
  out.push_back(merged);
  std::sort(out.begin(), out.end(),
            [](const Piece& a, const Piece& b) { return a.lo < b.lo; });
  pieces_ = std::move(out);
}

double IntervalSet::measure() const {
  double total = 0.0;
  for (const Piece& p : pieces_) total += p.length();
  return total;
}

double IntervalSet::overlap(double lo, double hi) const {
  double total = 0.0;
  for (const Piece& p : pieces_) {
    const double a = std::max(lo, p.lo);
    const double b = std::min(hi, p.hi);
    if (b > a) total += b - a;
  }
  return total;
}

void IntervalSet::require_within(double lo, double hi) const {
  constexpr double kSlack = 1e-9;
  for (const Piece& p : pieces_)
    if (p.lo < lo - kSlack || p.hi > hi + kSlack)
      throw std::domain_error("interval set escapes its allowed window");
}

bool IntervalSet::operator==(const IntervalSet& other) const {
  if (pieces_.size() != other.pieces_.size()) return false;
  for (std::size_t i = 0; i < pieces_.size(); ++i)
    if (pieces_[i].lo != other.pieces_[i].lo ||
        pieces_[i].hi != other.pieces_[i].hi)
      return false;
  return true;
}

IntervalSet unite(const IntervalSet& a, const IntervalSet& b) {
  IntervalSet out = a;
  for (const auto& p : b.pieces()) out.add(p.lo, p.hi);
  return out;
}

}  // namespace crn
