#pragma once

#include <array>

#include "deltamap/volume.hpp"

namespace deltamap {

// Trilinear resample to a new grid. Sample positions are corner-aligned
// (source index u = i * (n_src-1)/(n_dst-1)), so equal shapes reproduce the
// input exactly and ramps keep their endpoints. Spacing is rescaled so the
// physical extent between outer voxel centers is preserved.
Volume resample(const Volume& v, std::array<int, 3> target_shape);

// Nearest-neighbour resample for binary masks (no interpolation values).
Mask resample_mask(const Mask& m, std::array<int, 3> target_shape);

struct HistogramMatchResult {
  Volume volume;
  bool constant_input = false;  // moving volume was constant; returned unchanged
};

// Quantile mapping of `moving` onto `reference` with `quantile_points`
// points computed over foreground voxels (intensity above the per-volume
// mean). The monotone piecewise-linear transfer is applied to every voxel,
// clamped to the outer quantiles.
HistogramMatchResult histogram_match(const Volume& moving, const Volume& reference,
                                     int quantile_points = 1024);

// Affine rescale to [0,1]; a constant volume maps to all zeros.
Volume normalize_unit(const Volume& v);

struct CenterResult {
  Volume volume;
  std::array<int, 3> shift{0, 0, 0};  // applied integer translation
};

// Integer translation placing the rounded mask centroid at (nx/2, ny/2,
// nz/2); zero fill outside. Throws on an empty mask.
CenterResult center_brain(const Volume& v, const Mask& mask);

// The same integer translation applied to a mask (used to carry brain and
// segmentation masks onto the centered grid).
Mask shift_mask(const Mask& m, std::array<int, 3> shift);
Volume shift_volume(const Volume& v, std::array<int, 3> shift);

std::array<int, 3> mask_centroid_shift(const Mask& mask);

}  // namespace deltamap
