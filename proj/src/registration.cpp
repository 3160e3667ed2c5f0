#include "nsdeform/registration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include "nsdeform/errors.hpp"

namespace nsdeform {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Linear interpolation of samples on the uniform grid of [0, 1] at position t.
double sample_unit(const std::vector<double>& v, double t) {
  const std::size_t m = v.size();
  const double pos = std::clamp(t, 0.0, 1.0) * static_cast<double>(m - 1);
  const auto i = std::min(static_cast<std::size_t>(pos), m - 2);
  const double frac = pos - static_cast<double>(i);
  return v[i] + frac * (v[i + 1] - v[i]);
}

std::vector<double> unit_grid(std::size_t m) { return uniform_grid(1.0, m); }

// w1 o w2 for warps sampled on the same unit grid.
std::vector<double> compose(const std::vector<double>& w1, const std::vector<double>& w2) {
  std::vector<double> out(w2.size());
  for (std::size_t i = 0; i < w2.size(); ++i) out[i] = sample_unit(w1, w2[i]);
  out.front() = 0.0;
  out.back() = 1.0;
  return out;
}

std::vector<double> invert(const std::vector<double>& w) {
  const std::vector<double> grid = unit_grid(w.size());
  std::vector<double> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double y = grid[i];
    auto it = std::lower_bound(w.begin(), w.end(), y);
    if (it == w.begin()) {
      out[i] = 0.0;
    } else if (it == w.end()) {
      out[i] = 1.0;
    } else {
      const auto j = static_cast<std::size_t>(it - w.begin());
      const double dy = w[j] - w[j - 1];
      const double frac = dy > 0.0 ? (y - w[j - 1]) / dy : 0.0;
      out[i] = grid[j - 1] + frac * (grid[j] - grid[j - 1]);
    }
  }
  out.front() = 0.0;
  out.back() = 1.0;
  return out;
}

// (q o gamma) sqrt(gamma') on the unit grid.
std::vector<double> act(const std::vector<double>& q, const std::vector<double>& gamma) {
  const std::size_t m = q.size();
  const double dt = 1.0 / static_cast<double>(m - 1);
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    double slope;
    if (i == 0) {
      slope = (gamma[1] - gamma[0]) / dt;
    } else if (i == m - 1) {
      slope = (gamma[m - 1] - gamma[m - 2]) / dt;
    } else {
      slope = (gamma[i + 1] - gamma[i - 1]) / (2.0 * dt);
    }
    out[i] = sample_unit(q, gamma[i]) * std::sqrt(std::max(slope, 0.0));
  }
  return out;
}

double l2_distance(const std::vector<double>& a, const std::vector<double>& b) {
  const double dt = 1.0 / static_cast<double>(a.size() - 1);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s * dt);
}

}  // namespace

double interp_linear(std::span<const double> xs, std::span<const double> ys, double x) {
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const auto j = static_cast<std::size_t>(it - xs.begin());
  const double frac = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
  return ys[j - 1] + frac * (ys[j] - ys[j - 1]);
}

Standardized standardize(const SampledFunction& f) {
  if (f.values.size() < 2) throw ParameterError("standardize needs at least two samples");
  const double shift = f.values.front();
  const double scale = f.values.back() - shift;
  if (!(scale > 0.0)) throw NumericalError("degenerate variogram: no increase over [0, h_t]");
  Standardized out{f, scale, shift};
  for (auto& v : out.function.values) v = (v - shift) / scale;
  return out;
}

SrvfCurve to_srvf(std::span<const double> values) {
  const std::size_t m = values.size();
  if (m < 2) throw ParameterError("SRVF needs at least two samples");
  SrvfCurve out;
  out.grid = unit_grid(m);
  out.q.resize(m);
  const double dt = 1.0 / static_cast<double>(m - 1);
  for (std::size_t i = 0; i < m; ++i) {
    double d;
    if (m == 2) {
      d = (values[1] - values[0]) / dt;
    } else if (i == 0) {
      d = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * dt);
    } else if (i == m - 1) {
      d = (3.0 * values[m - 1] - 4.0 * values[m - 2] + values[m - 3]) / (2.0 * dt);
    } else {
      d = (values[i + 1] - values[i - 1]) / (2.0 * dt);
    }
    out.q[i] = std::copysign(std::sqrt(std::abs(d)), d);
    if (d == 0.0) out.q[i] = 0.0;
  }
  return out;
}

SrvfCurve to_srvf(const SampledFunction& f) { return to_srvf(std::span<const double>(f.values)); }

std::vector<std::pair<int, int>> dp_neighbors(int max_step) {
  if (max_step < 1) throw ParameterError("max_step must be >= 1");
  std::vector<std::pair<int, int>> out{{1, 1}};
  for (int a = 1; a <= max_step; ++a) {
    for (int b = 1; b <= max_step; ++b) {
      if ((a != 1 || b != 1) && std::gcd(a, b) == 1) out.emplace_back(a, b);
    }
  }
  return out;
}

DpResult dp_align(const SrvfCurve& q_target, const SrvfCurve& q_moving, const DpOptions& opts) {
  const std::size_t m = q_target.size();
  if (m < 8) throw ParameterError("DP grid too coarse: need at least 8 samples");
  if (q_moving.size() != m) throw ParameterError("DP curves must share a grid");
  const auto nbrs = dp_neighbors(opts.max_step);
  const double dt = 1.0 / static_cast<double>(m - 1);
  const auto& q1 = q_target.q;
  const auto& q2 = q_moving.q;

  std::vector<double> sqrt_slope(nbrs.size());
  for (std::size_t n = 0; n < nbrs.size(); ++n) {
    sqrt_slope[n] = std::sqrt(static_cast<double>(nbrs[n].second) / nbrs[n].first);
  }

  // Trapezoidal cost of the straight edge (k, l) -> (k + a, l + b).
  auto edge_cost = [&](std::size_t k, std::size_t l, std::size_t n) {
    const int a = nbrs[n].first;
    const int b = nbrs[n].second;
    const double rs = sqrt_slope[n];
    double s = 0.0;
    for (int p = 0; p <= a; ++p) {
      const int num = b * p;
      const std::size_t base = l + static_cast<std::size_t>(num / a);
      const double frac = static_cast<double>(num % a) / a;
      const double v = frac == 0.0 ? q2[base] : q2[base] + frac * (q2[base + 1] - q2[base]);
      const double r = q1[k + p] - rs * v;
      s += (p == 0 || p == a) ? 0.5 * r * r : r * r;
    }
    return s * dt;
  };

  std::vector<double> energy(m * m, kInf);
  std::vector<std::uint8_t> pred(m * m, 0xFF);
  energy[0] = 0.0;
  for (std::size_t i = 1; i < m; ++i) {
    for (std::size_t j = 1; j < m; ++j) {
      double best = kInf;
      std::uint8_t arg = 0xFF;
      for (std::size_t n = 0; n < nbrs.size(); ++n) {
        const auto a = static_cast<std::size_t>(nbrs[n].first);
        const auto b = static_cast<std::size_t>(nbrs[n].second);
        if (a > i || b > j) continue;
        const std::size_t k = i - a;
        const std::size_t l = j - b;
        const double e0 = energy[k * m + l];
        if (e0 >= best) continue;
        const double e = e0 + edge_cost(k, l, n);
        if (e < best) {
          best = e;
          arg = static_cast<std::uint8_t>(n);
        }
      }
      energy[i * m + j] = best;
      pred[i * m + j] = arg;
    }
  }
  if (!std::isfinite(energy[m * m - 1])) throw NumericalError("DP found no admissible path");

  std::vector<std::pair<std::size_t, std::size_t>> path{{m - 1, m - 1}};
  while (path.back().first != 0) {
    const auto [i, j] = path.back();
    const std::uint8_t n = pred[i * m + j];
    path.emplace_back(i - nbrs[n].first, j - nbrs[n].second);
  }
  std::reverse(path.begin(), path.end());

  DpResult out;
  out.cost = energy[m * m - 1];
  out.warp.resize(m);
  for (std::size_t s = 0; s + 1 < path.size(); ++s) {
    const auto [k, l] = path[s];
    const auto [i, j] = path[s + 1];
    for (std::size_t p = k; p <= i; ++p) {
      const double frac = static_cast<double>(p - k) / static_cast<double>(i - k);
      out.warp[p] = (static_cast<double>(l) + frac * static_cast<double>(j - l)) * dt;
    }
  }
  out.warp.front() = 0.0;
  out.warp.back() = 1.0;
  return out;
}

WarpingFunction::WarpingFunction(std::vector<double> knots, std::vector<double> warped, double bandwidth)
    : knots_(std::move(knots)), warped_(std::move(warped)), bandwidth_(bandwidth) {
  if (knots_.size() < 2 || knots_.size() != warped_.size()) {
    throw ParameterError("warp needs matching knot and value arrays of length >= 2");
  }
  const double ht = knots_.back();
  if (knots_.front() != 0.0 || !(ht > 0.0)) throw ParameterError("warp knots must span [0, h_t]");
  for (std::size_t i = 1; i < knots_.size(); ++i) {
    if (!(knots_[i] > knots_[i - 1])) throw ParameterError("warp knots must be strictly increasing");
    if (warped_[i] < warped_[i - 1]) throw ParameterError("warp values must be nondecreasing");
  }
  if (warped_.front() != 0.0 || warped_.back() != ht) {
    throw ParameterError("warp must map 0 to 0 and h_t to h_t");
  }
}

WarpingFunction WarpingFunction::identity(double h_t, std::size_t m) {
  auto g = uniform_grid(h_t, m);
  return WarpingFunction(g, g, 0.0);
}

double WarpingFunction::operator()(double h) const {
  if (h < 0.0) throw DomainError("warp evaluated at a negative distance");
  if (h > knots_.back()) return h;
  return interp_linear(knots_, warped_, h);
}

RegistrationResult register_set(std::span<const SampledFunction> functions, const RegistrationOptions& opts) {
  const std::size_t k = functions.size();
  if (k < 2) throw ParameterError("registration needs at least two curves");
  const std::size_t m = functions.front().size();
  const double ht = functions.front().upper();
  for (const auto& f : functions) {
    if (f.size() != m || f.upper() != ht) throw ParameterError("registration curves must share a grid");
  }

  RegistrationResult res;
  std::vector<std::vector<double>> fs;
  std::vector<std::vector<double>> qs;
  for (const auto& f : functions) {
    const Standardized s = standardize(f);
    res.scalings.push_back(s.scale);
    res.translations.push_back(s.shift);
    fs.push_back(s.function.values);
    qs.push_back(to_srvf(s.function).q);
  }

  std::vector<double> mu(m, 0.0);
  for (const auto& q : qs) {
    for (std::size_t i = 0; i < m; ++i) mu[i] += q[i] / static_cast<double>(k);
  }

  std::vector<std::vector<double>> gammas(k);
  const std::vector<double> ugrid = unit_grid(m);
  for (int iter = 1; iter <= opts.max_iterations; ++iter) {
    SrvfCurve target{ugrid, mu};
    for (std::size_t c = 0; c < k; ++c) gammas[c] = dp_align(target, SrvfCurve{ugrid, qs[c]}, opts.dp).warp;

    // Centre so that the mean warp is the identity.
    std::vector<double> mean(m, 0.0);
    for (const auto& g : gammas) {
      for (std::size_t i = 0; i < m; ++i) mean[i] += g[i] / static_cast<double>(k);
    }
    const std::vector<double> mean_inv = invert(mean);
    for (auto& g : gammas) g = compose(g, mean_inv);

    std::vector<double> next(m, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
      const auto aligned_q = act(qs[c], gammas[c]);
      for (std::size_t i = 0; i < m; ++i) next[i] += aligned_q[i] / static_cast<double>(k);
    }
    const double change = l2_distance(next, mu);
    mu = std::move(next);
    res.iterations = iter;
    if (change < opts.tolerance) {
      res.converged = true;
      break;
    }
  }

  const std::vector<double> hgrid = functions.front().grid;
  res.template_function.grid = hgrid;
  res.template_function.values.assign(m, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    SampledFunction aligned{hgrid, std::vector<double>(m)};
    for (std::size_t i = 0; i < m; ++i) aligned.values[i] = sample_unit(fs[c], gammas[c][i]);
    for (std::size_t i = 0; i < m; ++i) res.template_function.values[i] += aligned.values[i] / static_cast<double>(k);
    res.aligned.push_back(std::move(aligned));

    // f_i o gamma_i ~ g, hence phi_i = gamma_i^{-1} maps geographic lag to template lag.
    const std::vector<double> phi = invert(gammas[c]);
    std::vector<double> warped(m);
    for (std::size_t i = 0; i < m; ++i) warped[i] = ht * phi[i];
    warped.front() = 0.0;
    warped.back() = ht;
    res.warps.emplace_back(hgrid, std::move(warped), 0.0);
  }
  return res;
}

std::vector<double> isotonic_fit(std::span<const double> y) {
  struct Block {
    double sum;
    std::size_t count;
  };
  std::vector<Block> blocks;
  for (const double v : y) {
    blocks.push_back({v, 1});
    while (blocks.size() > 1) {
      const Block& last = blocks.back();
      const Block& prev = blocks[blocks.size() - 2];
      if (prev.sum / prev.count <= last.sum / last.count) break;
      Block merged{prev.sum + last.sum, prev.count + last.count};
      blocks.pop_back();
      blocks.back() = merged;
    }
  }
  std::vector<double> out;
  out.reserve(y.size());
  for (const auto& b : blocks) out.insert(out.end(), b.count, b.sum / b.count);
  return out;
}

WarpingFunction smooth_and_extend(std::span<const double> distances, std::span<const double> warped,
                                  double h_t, double bandwidth) {
  if (!(bandwidth > 0.0)) throw ParameterError("smoothing bandwidth must be positive");
  if (distances.size() != warped.size() || distances.size() < 2) {
    throw ParameterError("smoothing needs matching sample arrays");
  }
  const std::size_t m = distances.size();
  std::vector<double> dev(m);
  for (std::size_t i = 0; i < m; ++i) dev[i] = warped[i] - distances[i];

  const double cutoff = 8.0 * bandwidth;
  std::vector<double> smooth(m);
  for (std::size_t i = 0; i < m; ++i) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double u = distances[j] - distances[i];
      if (std::abs(u) > cutoff) continue;
      const double w = std::exp(-0.5 * (u / bandwidth) * (u / bandwidth));
      num += w * dev[j];
      den += w;
    }
    smooth[i] = std::clamp(distances[i] + num / den, 0.0, h_t);
  }
  smooth.front() = 0.0;
  smooth.back() = h_t;
  std::vector<double> mono = isotonic_fit(smooth);
  mono.front() = 0.0;
  mono.back() = h_t;
  std::vector<double> knots(distances.begin(), distances.end());
  knots.front() = 0.0;
  knots.back() = h_t;
  return WarpingFunction(std::move(knots), std::move(mono), bandwidth);
}

}  // namespace nsdeform
