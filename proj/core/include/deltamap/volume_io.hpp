#pragma once

#include <string>

#include "deltamap/volume.hpp"

namespace deltamap {

// Reads a volume from disk. Format is chosen by extension:
//   .nii / .nii.gz  NIfTI-1 single file, little-endian, scalar datatypes
//                   uint8/int16/int32/float32/float64
//   .raw            flat little-endian float32 payload, x-fastest, with a
//                   JSON sidecar "<path>.json" holding shape/spacing/origin
// Throws std::runtime_error on unreadable files, unsupported datatypes and
// dimension count != 3.
Volume read_volume(const std::string& path);

// Writes little-endian float32 in the format matching the extension.
void write_volume(const Volume& v, const std::string& path);

Mask read_mask(const std::string& path);             // binarizes at 0.5
void write_mask(const Mask& m, const std::string& path);

namespace io_detail {
Volume read_nifti(const std::string& path);
void write_nifti(const Volume& v, const std::string& path);
Volume read_raw(const std::string& path);
void write_raw(const Volume& v, const std::string& path);
}  // namespace io_detail

}  // namespace deltamap
