#include "deltamap/volume.hpp"

#include <algorithm>
#include <numeric>

namespace deltamap {

float Volume::min_value() const {
  return *std::min_element(data_.begin(), data_.end());
}

float Volume::max_value() const {
  return *std::max_element(data_.begin(), data_.end());
}

double Volume::mean_value() const {
  double s = std::accumulate(data_.begin(), data_.end(), 0.0);
  return s / static_cast<double>(data_.size());
}

Mask Mask::from_volume_nonzero(const Volume& v, float threshold) {
  Mask m(v.nx(), v.ny(), v.nz());
  for (size_t i = 0; i < v.size(); ++i) m.data_[i] = v.raw()[i] > threshold ? 1 : 0;
  return m;
}

Mask Mask::from_volume_binary(const Volume& v) {
  Mask m(v.nx(), v.ny(), v.nz());
  for (size_t i = 0; i < v.size(); ++i) m.data_[i] = v.raw()[i] > 0.5f ? 1 : 0;
  return m;
}

size_t Mask::count() const {
  size_t n = 0;
  for (uint8_t b : data_) n += b != 0;
  return n;
}

Volume Mask::to_volume() const {
  Volume v(nx_, ny_, nz_);
  for (size_t i = 0; i < data_.size(); ++i) v.raw()[i] = data_[i] ? 1.f : 0.f;
  return v;
}

}  // namespace deltamap
