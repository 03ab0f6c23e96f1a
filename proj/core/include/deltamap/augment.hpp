#pragma once

#include <array>
#include <cstdint>

#include "deltamap/rng.hpp"
#include "deltamap/volume.hpp"

namespace deltamap {

struct AugmentSpec {
  double rotation_range_deg = 15.0;  // symmetric bound per axis
  double shift_range_vox = 10.0;     // symmetric bound per axis
  double noise_variance_max = 0.1;
  uint64_t seed = 0;

  void validate() const;
};

struct AugmentDraw {
  std::array<double, 3> angles_deg{0, 0, 0};
  std::array<double, 3> shifts_vox{0, 0, 0};
  double noise_variance = 0.0;
  uint64_t noise_seed = 0;

  bool is_identity() const {
    return angles_deg[0] == 0 && angles_deg[1] == 0 && angles_deg[2] == 0 && shifts_vox[0] == 0 &&
           shifts_vox[1] == 0 && shifts_vox[2] == 0 && noise_variance == 0;
  }
};

// angles ~ U[-r,r] per axis, shifts ~ U[-s,s] per axis, variance ~ U[0,vmax];
// deterministic given the generator state.
AugmentDraw draw(const AugmentSpec& spec, Rng& rng);

// Rotation about the continuous grid center (trilinear, zero fill), then
// translation, then additive Gaussian noise with the drawn variance. The
// spatial part is composed into a single resampling pass.
Volume apply(const Volume& v, const AugmentDraw& d);

// Slice z of apply(v, d), computed without materializing the full volume.
// Bit-identical to the corresponding slice of apply().
void augmented_slice(const Volume& v, const AugmentDraw& d, int z, float* out);

namespace augment_detail {
// row-major inverse rotation matrix for the draw (R = Rz*Ry*Rx, inverted)
std::array<double, 9> inverse_rotation(const std::array<double, 3>& angles_deg);
}  // namespace augment_detail

}  // namespace deltamap
