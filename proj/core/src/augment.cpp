#include "deltamap/augment.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace deltamap {

void AugmentSpec::validate() const {
  if (rotation_range_deg < 0 || shift_range_vox < 0 || noise_variance_max < 0)
    throw std::invalid_argument("AugmentSpec: bounds must be non-negative");
  if (noise_variance_max > 1.0)
    throw std::invalid_argument("AugmentSpec: noise_variance_max must be <= 1");
}

AugmentDraw draw(const AugmentSpec& spec, Rng& rng) {
  spec.validate();
  AugmentDraw d;
  for (int a = 0; a < 3; ++a) d.angles_deg[a] = rng.uniform(-spec.rotation_range_deg, spec.rotation_range_deg);
  for (int a = 0; a < 3; ++a) d.shifts_vox[a] = rng.uniform(-spec.shift_range_vox, spec.shift_range_vox);
  d.noise_variance = rng.uniform(0.0, spec.noise_variance_max);
  d.noise_seed = rng.next_u64();
  return d;
}

namespace augment_detail {

std::array<double, 9> inverse_rotation(const std::array<double, 3>& angles_deg) {
  constexpr double kDegToRad = 0.017453292519943295;
  double ax = angles_deg[0] * kDegToRad;
  double ay = angles_deg[1] * kDegToRad;
  double az = angles_deg[2] * kDegToRad;
  double cx = std::cos(ax), sx = std::sin(ax);
  double cy = std::cos(ay), sy = std::sin(ay);
  double cz = std::cos(az), sz = std::sin(az);
  // R = Rz * Ry * Rx (row-major)
  std::array<double, 9> r = {
      cz * cy, cz * sy * sx - sz * cx, cz * sy * cx + sz * sx,
      sz * cy, sz * sy * sx + cz * cx, sz * sy * cx - cz * sx,
      -sy,     cy * sx,                cy * cx,
  };
  // orthogonal, so the inverse is the transpose
  return {r[0], r[3], r[6], r[1], r[4], r[7], r[2], r[5], r[8]};
}

}  // namespace augment_detail

namespace {

struct SliceSampler {
  const Volume* v;
  std::array<double, 9> rinv;
  std::array<double, 3> center;
  std::array<double, 3> shift;
  bool identity_transform;
  double noise_std;
  uint64_t noise_seed;

  SliceSampler(const Volume& vol, const AugmentDraw& d) : v(&vol) {
    rinv = augment_detail::inverse_rotation(d.angles_deg);
    center = {(vol.nx() - 1) / 2.0, (vol.ny() - 1) / 2.0, (vol.nz() - 1) / 2.0};
    shift = d.shifts_vox;
    identity_transform = d.angles_deg[0] == 0 && d.angles_deg[1] == 0 && d.angles_deg[2] == 0 &&
                         shift[0] == 0 && shift[1] == 0 && shift[2] == 0;
    noise_std = std::sqrt(d.noise_variance);
    noise_seed = d.noise_seed;
  }

  void sample_slice(int z, float* out) const {
    const int nx = v->nx(), ny = v->ny(), nz = v->nz();
    for (int y = 0; y < ny; ++y) {
      for (int x = 0; x < nx; ++x) {
        double val;
        if (identity_transform) {
          val = v->at(x, y, z);
        } else {
          double px = x - shift[0] - center[0];
          double py = y - shift[1] - center[1];
          double pz = z - shift[2] - center[2];
          double sx = rinv[0] * px + rinv[1] * py + rinv[2] * pz + center[0];
          double sy = rinv[3] * px + rinv[4] * py + rinv[5] * pz + center[1];
          double sz = rinv[6] * px + rinv[7] * py + rinv[8] * pz + center[2];
          val = trilinear(sx, sy, sz, nx, ny, nz);
        }
        if (noise_std > 0) {
          uint64_t lin = static_cast<uint64_t>(x) + static_cast<uint64_t>(nx) * (static_cast<uint64_t>(y) + static_cast<uint64_t>(ny) * z);
          val += noise_std * counter_normal(noise_seed, lin);
        }
        out[static_cast<size_t>(y) * nx + x] = static_cast<float>(val);
      }
    }
  }

  double trilinear(double sx, double sy, double sz, int nx, int ny, int nz) const {
    int x0 = static_cast<int>(std::floor(sx));
    int y0 = static_cast<int>(std::floor(sy));
    int z0 = static_cast<int>(std::floor(sz));
    double tx = sx - x0, ty = sy - y0, tz = sz - z0;
    double acc = 0.0;
    for (int dz = 0; dz < 2; ++dz) {
      int zz = z0 + dz;
      if (zz < 0 || zz >= nz) continue;
      double wz = dz ? tz : 1.0 - tz;
      if (wz == 0.0) continue;
      for (int dy = 0; dy < 2; ++dy) {
        int yy = y0 + dy;
        if (yy < 0 || yy >= ny) continue;
        double wy = dy ? ty : 1.0 - ty;
        if (wy == 0.0) continue;
        for (int dx = 0; dx < 2; ++dx) {
          int xx = x0 + dx;
          if (xx < 0 || xx >= nx) continue;
          double wx = dx ? tx : 1.0 - tx;
          if (wx == 0.0) continue;
          acc += wz * wy * wx * v->at(xx, yy, zz);
        }
      }
    }
    return acc;
  }
};

}  // namespace

Volume apply(const Volume& v, const AugmentDraw& d) {
  if (d.is_identity()) return v;
  Volume out(v.nx(), v.ny(), v.nz());
  out.spacing = v.spacing;
  out.origin = v.origin;
  out.provenance = v.provenance;
  SliceSampler s(v, d);
  for (int z = 0; z < v.nz(); ++z)
    s.sample_slice(z, out.data() + out.idx(0, 0, z));
  return out;
}

void augmented_slice(const Volume& v, const AugmentDraw& d, int z, float* out) {
  if (z < 0 || z >= v.nz()) throw std::out_of_range("augmented_slice: slice index out of range");
  if (d.is_identity()) {
    std::memcpy(out, v.data() + v.idx(0, 0, z), sizeof(float) * static_cast<size_t>(v.nx()) * v.ny());
    return;
  }
  SliceSampler s(v, d);
  s.sample_slice(z, out);
}

}  // namespace deltamap
