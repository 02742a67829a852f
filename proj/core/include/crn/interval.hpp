#pragma once

#include <utility>
#include <vector>

namespace crn {

// Union of disjoint time intervals on the real line, kept sorted. Endpoints
// are treated as half-open [lo, hi) for membership so that adjacent pieces
// merge without double counting; reported endpoints are the closed values.
class IntervalSet {
 public:
  struct Piece {
    double lo = 0.0;
    double hi = 0.0;
    double length() const { return hi - lo; }
  };

  IntervalSet() = default;

  // Builds from raw pieces; throws std::domain_error if any piece is
  // inverted or the pieces overlap after sorting.
  static IntervalSet from_pieces(std::vector<Piece> pieces);

  static IntervalSet single(double lo, double hi);

  // Adds [lo, hi), merging with touching or overlapping pieces.
  void add(double lo, double hi);

  double measure() const;
  bool empty() const { return pieces_.empty(); }
  std::size_t size() const { return pieces_.size(); }
  const std::vector<Piece>& pieces() const { return pieces_; }

  // Measure of the overlap with [lo, hi).
  double overlap(double lo, double hi) const;

  // Throws std::domain_error unless every piece fits inside [lo, hi].
  void require_within(double lo, double hi) const;

  bool operator==(const IntervalSet& other) const;

 private:
  std::vector<Piece> pieces_;
};

// Union of two sets.
IntervalSet unite(const IntervalSet& a, const IntervalSet& b);

}  // namespace crn
