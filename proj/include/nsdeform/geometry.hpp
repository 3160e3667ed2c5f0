#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <vector>

namespace nsdeform {

/// Sites live in a two-dimensional geographic domain.
using Location = Eigen::Vector2d;

/// Row-per-site coordinate matrix.
using SiteMatrix = Eigen::Matrix<double, Eigen::Dynamic, 2>;

/// Closed axis-aligned rectangle.
struct Box {
  double xmin = 0.0;
  double xmax = 0.0;
  double ymin = 0.0;
  double ymax = 0.0;

  bool contains(const Location& p) const {
    return p.x() >= xmin && p.x() <= xmax && p.y() >= ymin && p.y() <= ymax;
  }
  double area() const { return (xmax - xmin) * (ymax - ymin); }
};

/// Axis-aligned rectangular subregions tiling a bounding box. Points on a
/// shared edge belong to the lowest-index region containing them.
class Partition {
public:
  /// Validates positivity, coverage of the bounding box and disjointness.
  explicit Partition(std::vector<Box> regions);

  /// Two regions split by the vertical line x = split.
  static Partition vertical_split(const Box& domain, double split);
  /// nx-by-ny grid of equal boxes, row-major in x then y.
  static Partition grid(const Box& domain, int nx, int ny);

  std::size_t size() const { return regions_.size(); }
  const Box& region(std::size_t i) const { return regions_[i]; }
  const std::vector<Box>& regions() const { return regions_; }
  const Box& domain() const { return domain_; }

  /// Index of the region containing p. Throws DomainError outside the domain.
  std::size_t region_of(const Location& p) const;

private:
  std::vector<Box> regions_;
  Box domain_;
};

struct SegmentPiece {
  std::size_t region = 0;
  double length = 0.0;
};

/// Per-region lengths of the straight segment [a, b]; at most one entry per
/// region, ordered by region index.
struct SegmentDecomposition {
  std::vector<SegmentPiece> pieces;

  double total() const;
};

SegmentDecomposition segment_lengths(const Location& a, const Location& b, const Partition& part);

struct RegionWeight {
  std::size_t region = 0;
  double weight = 0.0;
};

/// Fraction of the segment [a, b] lying in each region. Requires a != b.
std::vector<RegionWeight> weights(const Location& a, const Location& b, const Partition& part);

}  // namespace nsdeform
