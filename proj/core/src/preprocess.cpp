#include "deltamap/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace deltamap {
namespace {

inline double source_coord(int i, int n_dst, int n_src) {
  if (n_dst == 1) return 0.5 * (n_src - 1);
  return static_cast<double>(i) * static_cast<double>(n_src - 1) / static_cast<double>(n_dst - 1);
}

// quantiles of the foreground (value > volume mean), linear interpolation on
// the sorted sample (type-7)
std::vector<double> foreground_quantiles(const Volume& v, int points) {
  double mean = v.mean_value();
  std::vector<float> fg;
  fg.reserve(v.size() / 2);
  for (float x : v.raw())
    if (x > mean) fg.push_back(x);
  if (fg.empty()) {
    // threshold-at-mean leaves nothing only for a constant volume
    return {};
  }
  std::sort(fg.begin(), fg.end());
  std::vector<double> q(points);
  for (int i = 0; i < points; ++i) {
    double pos = static_cast<double>(i) / (points - 1) * (fg.size() - 1);
    size_t lo = static_cast<size_t>(pos);
    size_t hi = std::min(lo + 1, fg.size() - 1);
    double t = pos - static_cast<double>(lo);
    q[i] = (1.0 - t) * fg[lo] + t * fg[hi];
  }
  return q;
}

}  // namespace

Volume resample(const Volume& v, std::array<int, 3> target) {
  if (target[0] <= 0 || target[1] <= 0 || target[2] <= 0)
    throw std::invalid_argument("resample: target shape must be positive");

  Volume out(target[0], target[1], target[2]);
  for (int a = 0; a < 3; ++a) {
    int n_src = v.shape()[a], n_dst = target[a];
    out.spacing[a] = n_dst > 1 ? v.spacing[a] * (n_src - 1) / static_cast<double>(n_dst - 1)
                               : v.spacing[a] * n_src;
  }
  out.origin = v.origin;
  out.provenance = v.provenance;

  for (int z = 0; z < target[2]; ++z) {
    double sz = source_coord(z, target[2], v.nz());
    int z0 = static_cast<int>(std::floor(sz));
    double tz = sz - z0;
    int z1 = std::min(z0 + 1, v.nz() - 1);
    z0 = std::clamp(z0, 0, v.nz() - 1);
    for (int y = 0; y < target[1]; ++y) {
      double sy = source_coord(y, target[1], v.ny());
      int y0 = static_cast<int>(std::floor(sy));
      double ty = sy - y0;
      int y1 = std::min(y0 + 1, v.ny() - 1);
      y0 = std::clamp(y0, 0, v.ny() - 1);
      for (int x = 0; x < target[0]; ++x) {
        double sx = source_coord(x, target[0], v.nx());
        int x0 = static_cast<int>(std::floor(sx));
        double tx = sx - x0;
        int x1 = std::min(x0 + 1, v.nx() - 1);
        x0 = std::clamp(x0, 0, v.nx() - 1);

        double c00 = (1 - tx) * v.at(x0, y0, z0) + tx * v.at(x1, y0, z0);
        double c10 = (1 - tx) * v.at(x0, y1, z0) + tx * v.at(x1, y1, z0);
        double c01 = (1 - tx) * v.at(x0, y0, z1) + tx * v.at(x1, y0, z1);
        double c11 = (1 - tx) * v.at(x0, y1, z1) + tx * v.at(x1, y1, z1);
        double c0 = (1 - ty) * c00 + ty * c10;
        double c1 = (1 - ty) * c01 + ty * c11;
        out.at(x, y, z) = static_cast<float>((1 - tz) * c0 + tz * c1);
      }
    }
  }
  return out;
}

Mask resample_mask(const Mask& m, std::array<int, 3> target) {
  if (target[0] <= 0 || target[1] <= 0 || target[2] <= 0)
    throw std::invalid_argument("resample_mask: target shape must be positive");
  Mask out(target[0], target[1], target[2]);
  for (int z = 0; z < target[2]; ++z) {
    int sz = std::clamp(static_cast<int>(std::lround(source_coord(z, target[2], m.nz()))), 0, m.nz() - 1);
    for (int y = 0; y < target[1]; ++y) {
      int sy = std::clamp(static_cast<int>(std::lround(source_coord(y, target[1], m.ny()))), 0, m.ny() - 1);
      for (int x = 0; x < target[0]; ++x) {
        int sx = std::clamp(static_cast<int>(std::lround(source_coord(x, target[0], m.nx()))), 0, m.nx() - 1);
        out.at(x, y, z) = m.at(sx, sy, sz);
      }
    }
  }
  return out;
}

HistogramMatchResult histogram_match(const Volume& moving, const Volume& reference, int quantile_points) {
  if (moving.size() == 0 || reference.size() == 0)
    throw std::invalid_argument("histogram_match: empty volume");
  if (quantile_points < 2) throw std::invalid_argument("histogram_match: need at least 2 quantile points");

  std::vector<double> qm = foreground_quantiles(moving, quantile_points);
  std::vector<double> qr = foreground_quantiles(reference, quantile_points);
  if (qm.empty() || qr.empty() || qm.front() == qm.back()) {
    return {moving, true};
  }

  HistogramMatchResult res{moving, false};
  Volume& out = res.volume;
  const int n = quantile_points;
  for (float& xv : out.raw()) {
    double x = xv;
    double y;
    if (x <= qm.front()) {
      y = qr.front();
    } else if (x >= qm.back()) {
      y = qr.back();
    } else {
      // first segment [qm[j], qm[j+1]] containing x; flats take the left edge
      auto it = std::upper_bound(qm.begin(), qm.end(), x);
      int j = static_cast<int>(it - qm.begin()) - 1;
      j = std::clamp(j, 0, n - 2);
      double span = qm[j + 1] - qm[j];
      double t = span > 0.0 ? (x - qm[j]) / span : 0.0;
      y = (1.0 - t) * qr[j] + t * qr[j + 1];
    }
    xv = static_cast<float>(y);
  }
  return res;
}

Volume normalize_unit(const Volume& v) {
  if (v.size() == 0) throw std::invalid_argument("normalize_unit: empty volume");
  float lo = v.min_value();
  float hi = v.max_value();
  Volume out = v;
  if (hi <= lo) {
    std::fill(out.raw().begin(), out.raw().end(), 0.f);
    return out;
  }
  double scale = 1.0 / (static_cast<double>(hi) - static_cast<double>(lo));
  for (float& x : out.raw()) x = static_cast<float>((static_cast<double>(x) - lo) * scale);
  return out;
}

std::array<int, 3> mask_centroid_shift(const Mask& mask) {
  double cx = 0, cy = 0, cz = 0;
  size_t n = 0;
  for (int z = 0; z < mask.nz(); ++z)
    for (int y = 0; y < mask.ny(); ++y)
      for (int x = 0; x < mask.nx(); ++x)
        if (mask.at(x, y, z)) {
          cx += x;
          cy += y;
          cz += z;
          ++n;
        }
  if (n == 0) throw std::invalid_argument("center_brain: empty mask");
  cx /= n;
  cy /= n;
  cz /= n;
  return {static_cast<int>(mask.nx() / 2 - std::lround(cx)),
          static_cast<int>(mask.ny() / 2 - std::lround(cy)),
          static_cast<int>(mask.nz() / 2 - std::lround(cz))};
}

Volume shift_volume(const Volume& v, std::array<int, 3> s) {
  Volume out(v.nx(), v.ny(), v.nz());
  out.spacing = v.spacing;
  out.origin = v.origin;
  out.provenance = v.provenance;
  for (int z = 0; z < v.nz(); ++z) {
    int zs = z - s[2];
    if (zs < 0 || zs >= v.nz()) continue;
    for (int y = 0; y < v.ny(); ++y) {
      int ys = y - s[1];
      if (ys < 0 || ys >= v.ny()) continue;
      for (int x = 0; x < v.nx(); ++x) {
        int xs = x - s[0];
        if (xs >= 0 && xs < v.nx()) out.at(x, y, z) = v.at(xs, ys, zs);
      }
    }
  }
  return out;
}

Mask shift_mask(const Mask& m, std::array<int, 3> s) {
  Mask out(m.nx(), m.ny(), m.nz());
  for (int z = 0; z < m.nz(); ++z) {
    int zs = z - s[2];
    if (zs < 0 || zs >= m.nz()) continue;
    for (int y = 0; y < m.ny(); ++y) {
      int ys = y - s[1];
      if (ys < 0 || ys >= m.ny()) continue;
      for (int x = 0; x < m.nx(); ++x) {
        int xs = x - s[0];
        if (xs >= 0 && xs < m.nx()) out.at(x, y, z) = m.at(xs, ys, zs);
      }
    }
  }
  return out;
}

CenterResult center_brain(const Volume& v, const Mask& mask) {
  if (!mask.same_grid(v)) throw std::invalid_argument("center_brain: mask grid mismatch");
  std::array<int, 3> s = mask_centroid_shift(mask);
  return {shift_volume(v, s), s};
}

}  // namespace deltamap
