#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace deltamap {

// 3D scalar grid with voxel spacing and origin. Data is float32 (the on-disk
// precision), x-fastest: index = x + nx*(y + ny*z).
class Volume {
 public:
  Volume() = default;
  Volume(int nx, int ny, int nz, float fill = 0.f)
      : nx_(nx), ny_(ny), nz_(nz), data_(static_cast<size_t>(nx) * ny * nz, fill) {
    if (nx <= 0 || ny <= 0 || nz <= 0) throw std::invalid_argument("Volume: shape must be positive");
  }

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int nz() const { return nz_; }
  std::array<int, 3> shape() const { return {nx_, ny_, nz_}; }
  size_t size() const { return data_.size(); }

  std::array<double, 3> spacing{1.0, 1.0, 1.0};  // mm, strictly positive
  std::array<double, 3> origin{0.0, 0.0, 0.0};   // mm
  std::string provenance;                        // free-form run reference

  float& at(int x, int y, int z) { return data_[idx(x, y, z)]; }
  float at(int x, int y, int z) const { return data_[idx(x, y, z)]; }
  size_t idx(int x, int y, int z) const {
    return static_cast<size_t>(x) + static_cast<size_t>(nx_) * (static_cast<size_t>(y) + static_cast<size_t>(ny_) * z);
  }
  bool in_bounds(int x, int y, int z) const {
    return x >= 0 && x < nx_ && y >= 0 && y < ny_ && z >= 0 && z < nz_;
  }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::vector<float>& raw() { return data_; }
  const std::vector<float>& raw() const { return data_; }

  bool same_grid(const Volume& o) const {
    return nx_ == o.nx_ && ny_ == o.ny_ && nz_ == o.nz_;
  }

  float min_value() const;
  float max_value() const;
  double mean_value() const;

 private:
  int nx_ = 0, ny_ = 0, nz_ = 0;
  std::vector<float> data_;
};

// Binary mask over the same lattice as its paired Volume. Stored as bytes.
class Mask {
 public:
  Mask() = default;
  Mask(int nx, int ny, int nz, uint8_t fill = 0)
      : nx_(nx), ny_(ny), nz_(nz), data_(static_cast<size_t>(nx) * ny * nz, fill) {
    if (nx <= 0 || ny <= 0 || nz <= 0) throw std::invalid_argument("Mask: shape must be positive");
  }

  static Mask from_volume_nonzero(const Volume& v, float threshold = 0.f);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int nz() const { return nz_; }
  std::array<int, 3> shape() const { return {nx_, ny_, nz_}; }
  size_t size() const { return data_.size(); }

  uint8_t& at(int x, int y, int z) { return data_[idx(x, y, z)]; }
  uint8_t at(int x, int y, int z) const { return data_[idx(x, y, z)]; }
  size_t idx(int x, int y, int z) const {
    return static_cast<size_t>(x) + static_cast<size_t>(nx_) * (static_cast<size_t>(y) + static_cast<size_t>(ny_) * z);
  }

  uint8_t* data() { return data_.data(); }
  const uint8_t* data() const { return data_.data(); }

  size_t count() const;  // foreground voxels
  bool same_grid(const Volume& v) const {
    return nx_ == v.nx() && ny_ == v.ny() && nz_ == v.nz();
  }
  bool same_grid(const Mask& o) const { return nx_ == o.nx_ && ny_ == o.ny_ && nz_ == o.nz_; }

  Volume to_volume() const;
  static Mask from_volume_binary(const Volume& v);  // values > 0.5 -> 1

 private:
  int nx_ = 0, ny_ = 0, nz_ = 0;
  std::vector<uint8_t> data_;
};

using BrainMask = Mask;
using SegmentationMask = Mask;

}  // namespace deltamap
