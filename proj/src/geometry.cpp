#include "nsdeform/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nsdeform/errors.hpp"

namespace nsdeform {

namespace {

// Parameter interval of {a + t (b - a)} inside the box, intersected with [0, 1].
bool clip(const Location& a, const Location& d, const Box& box, double& t0, double& t1) {
  t0 = 0.0;
  t1 = 1.0;
  const double lo[2] = {box.xmin, box.ymin};
  const double hi[2] = {box.xmax, box.ymax};
  for (int axis = 0; axis < 2; ++axis) {
    if (d[axis] == 0.0) {
      if (a[axis] < lo[axis] || a[axis] > hi[axis]) return false;
      continue;
    }
    double ta = (lo[axis] - a[axis]) / d[axis];
    double tb = (hi[axis] - a[axis]) / d[axis];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

}  // namespace

Partition::Partition(std::vector<Box> regions) : regions_(std::move(regions)) {
  if (regions_.empty()) throw DomainError("partition needs at least one region");
  domain_ = regions_.front();
  double area = 0.0;
  for (std::size_t i = 0; i < regions_.size(); ++i) {
    const Box& r = regions_[i];
    if (!(r.xmax > r.xmin) || !(r.ymax > r.ymin) || !std::isfinite(r.area())) {
      std::ostringstream msg;
      msg << "region " << i << " has non-positive or non-finite extent";
      throw DomainError(msg.str());
    }
    domain_.xmin = std::min(domain_.xmin, r.xmin);
    domain_.xmax = std::max(domain_.xmax, r.xmax);
    domain_.ymin = std::min(domain_.ymin, r.ymin);
    domain_.ymax = std::max(domain_.ymax, r.ymax);
    area += r.area();
    for (std::size_t j = 0; j < i; ++j) {
      const Box& s = regions_[j];
      const double ox = std::min(r.xmax, s.xmax) - std::max(r.xmin, s.xmin);
      const double oy = std::min(r.ymax, s.ymax) - std::max(r.ymin, s.ymin);
      if (ox > 1e-12 * (domain_.xmax - domain_.xmin) && oy > 1e-12 * (domain_.ymax - domain_.ymin)) {
        std::ostringstream msg;
        msg << "regions " << j << " and " << i << " overlap";
        throw DomainError(msg.str());
      }
    }
  }
  // Disjoint boxes inside the bounding box cover it iff their areas add up.
  if (std::abs(area - domain_.area()) > 1e-9 * domain_.area()) {
    throw DomainError("regions do not cover their bounding box");
  }
}

Partition Partition::vertical_split(const Box& domain, double split) {
  return Partition({{domain.xmin, split, domain.ymin, domain.ymax},
                    {split, domain.xmax, domain.ymin, domain.ymax}});
}

Partition Partition::grid(const Box& domain, int nx, int ny) {
  if (nx < 1 || ny < 1) throw DomainError("grid partition needs nx, ny >= 1");
  std::vector<Box> boxes;
  const double dx = (domain.xmax - domain.xmin) / nx;
  const double dy = (domain.ymax - domain.ymin) / ny;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      // Reuse the domain edges exactly on the outside.
      const double x0 = i == 0 ? domain.xmin : domain.xmin + i * dx;
      const double x1 = i == nx - 1 ? domain.xmax : domain.xmin + (i + 1) * dx;
      const double y0 = j == 0 ? domain.ymin : domain.ymin + j * dy;
      const double y1 = j == ny - 1 ? domain.ymax : domain.ymin + (j + 1) * dy;
      boxes.push_back({x0, x1, y0, y1});
    }
  }
  return Partition(std::move(boxes));
}

std::size_t Partition::region_of(const Location& p) const {
  for (std::size_t i = 0; i < regions_.size(); ++i) {
    if (regions_[i].contains(p)) return i;
  }
  std::ostringstream msg;
  msg << "location (" << p.x() << ", " << p.y() << ") is outside the partition domain";
  throw DomainError(msg.str());
}

double SegmentDecomposition::total() const {
  double sum = 0.0;
  for (const auto& piece : pieces) sum += piece.length;
  return sum;
}

SegmentDecomposition segment_lengths(const Location& a, const Location& b, const Partition& part) {
  if (!part.domain().contains(a) || !part.domain().contains(b)) {
    throw DomainError("segment endpoint outside the partition domain");
  }
  SegmentDecomposition out;
  const Location d = b - a;
  const double len = d.norm();
  if (len == 0.0) return out;

  // Breakpoints where the segment enters or leaves any box; every open
  // interval between consecutive breakpoints lies inside a single region.
  std::vector<double> ts{0.0, 1.0};
  for (const Box& box : part.regions()) {
    double t0, t1;
    if (clip(a, d, box, t0, t1)) {
      ts.push_back(t0);
      ts.push_back(t1);
    }
  }
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());

  std::vector<double> acc(part.size(), 0.0);
  std::vector<bool> hit(part.size(), false);
  for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
    const double dt = ts[k + 1] - ts[k];
    if (dt <= 0.0) continue;
    Location mid = a + (0.5 * (ts[k] + ts[k + 1])) * d;
    // Midpoints stay inside the closed domain; clamp away rounding drift.
    const Box& dom = part.domain();
    mid.x() = std::clamp(mid.x(), dom.xmin, dom.xmax);
    mid.y() = std::clamp(mid.y(), dom.ymin, dom.ymax);
    const std::size_t r = part.region_of(mid);
    acc[r] += dt;
    hit[r] = true;
  }
  for (std::size_t r = 0; r < part.size(); ++r) {
    if (hit[r]) out.pieces.push_back({r, acc[r] * len});
  }
  return out;
}

std::vector<RegionWeight> weights(const Location& a, const Location& b, const Partition& part) {
  if (a == b) throw DomainError("weights are undefined for coincident locations");
  const SegmentDecomposition dec = segment_lengths(a, b, part);
  double total = 0.0;
  for (const auto& p : dec.pieces) total += p.length;
  std::vector<RegionWeight> out;
  out.reserve(dec.pieces.size());
  for (const auto& p : dec.pieces) out.push_back({p.region, p.length / total});
  return out;
}

}  // namespace nsdeform
