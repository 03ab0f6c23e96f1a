#include <zlib.h>

#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "deltamap/volume_io.hpp"

namespace deltamap {
namespace {

#pragma pack(push, 1)
struct Nifti1Header {
  int32_t sizeof_hdr;     // must be 348
  char data_type[10];
  char db_name[18];
  int32_t extents;
  int16_t session_error;
  char regular;
  char dim_info;
  int16_t dim[8];
  float intent_p1, intent_p2, intent_p3;
  int16_t intent_code;
  int16_t datatype;
  int16_t bitpix;
  int16_t slice_start;
  float pixdim[8];
  float vox_offset;
  float scl_slope;
  float scl_inter;
  int16_t slice_end;
  char slice_code;
  char xyzt_units;
  float cal_max, cal_min;
  float slice_duration;
  float toffset;
  int32_t glmax, glmin;
  char descrip[80];
  char aux_file[24];
  int16_t qform_code;
  int16_t sform_code;
  float quatern_b, quatern_c, quatern_d;
  float qoffset_x, qoffset_y, qoffset_z;
  float srow_x[4];
  float srow_y[4];
  float srow_z[4];
  char intent_name[16];
  char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(Nifti1Header) == 348, "NIfTI-1 header must pack to 348 bytes");

constexpr int16_t kDtUint8 = 2;
constexpr int16_t kDtInt16 = 4;
constexpr int16_t kDtInt32 = 8;
constexpr int16_t kDtFloat32 = 16;
constexpr int16_t kDtFloat64 = 64;

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Reads the whole file, transparently inflating gzip. gzread handles plain
// files as well, but we keep an explicit magic check for error messages.
std::vector<char> read_all_bytes(const std::string& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("cannot open volume file: " + path);
  std::vector<char> out;
  char buf[1 << 16];
  int n;
  while ((n = gzread(f, buf, sizeof(buf))) > 0) out.insert(out.end(), buf, buf + n);
  bool bad = n < 0;
  gzclose(f);
  if (bad) throw std::runtime_error("gzip read error: " + path);
  return out;
}

void write_all_bytes(const std::string& path, const char* data, size_t len, bool gzip) {
  if (gzip) {
    gzFile f = gzopen(path.c_str(), "wb6");
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    size_t off = 0;
    while (off < len) {
      unsigned chunk = static_cast<unsigned>(std::min<size_t>(len - off, 1u << 24));
      if (gzwrite(f, data + off, chunk) != static_cast<int>(chunk)) {
        gzclose(f);
        throw std::runtime_error("gzip write error: " + path);
      }
      off += chunk;
    }
    gzclose(f);
  } else {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    f.write(data, static_cast<std::streamsize>(len));
    if (!f) throw std::runtime_error("write error: " + path);
  }
}

template <class T>
void convert_samples(const char* src, size_t count, double slope, double inter, float* dst) {
  const T* p = reinterpret_cast<const T*>(src);
  for (size_t i = 0; i < count; ++i)
    dst[i] = static_cast<float>(slope * static_cast<double>(p[i]) + inter);
}

}  // namespace

namespace io_detail {

Volume read_nifti(const std::string& path) {
  std::vector<char> bytes = read_all_bytes(path);
  if (bytes.size() < sizeof(Nifti1Header))
    throw std::runtime_error("truncated NIfTI file: " + path);

  Nifti1Header h;
  std::memcpy(&h, bytes.data(), sizeof(h));
  if (h.sizeof_hdr != 348) {
    // a byte-swapped 348 means big-endian data, which we do not support
    int32_t swapped = __builtin_bswap32(h.sizeof_hdr);
    if (swapped == 348) throw std::runtime_error("big-endian NIfTI is not supported: " + path);
    throw std::runtime_error("not a NIfTI-1 file (bad sizeof_hdr): " + path);
  }
  if (std::strncmp(h.magic, "n+1", 3) != 0 && std::strncmp(h.magic, "ni1", 3) != 0)
    throw std::runtime_error("not a NIfTI-1 file (bad magic): " + path);

  int ndim = h.dim[0];
  // trailing singleton dims are tolerated (common in exports)
  int effective = ndim;
  while (effective > 3 && h.dim[effective] == 1) --effective;
  if (effective != 3)
    throw std::runtime_error("unsupported dimension count " + std::to_string(ndim) + " (need 3): " + path);

  int nx = h.dim[1], ny = h.dim[2], nz = h.dim[3];
  if (nx <= 0 || ny <= 0 || nz <= 0)
    throw std::runtime_error("invalid NIfTI dimensions: " + path);

  size_t count = static_cast<size_t>(nx) * ny * nz;
  size_t sample_bytes;
  switch (h.datatype) {
    case kDtUint8: sample_bytes = 1; break;
    case kDtInt16: sample_bytes = 2; break;
    case kDtInt32: sample_bytes = 4; break;
    case kDtFloat32: sample_bytes = 4; break;
    case kDtFloat64: sample_bytes = 8; break;
    default:
      throw std::runtime_error("unsupported NIfTI datatype " + std::to_string(h.datatype) + ": " + path);
  }

  size_t offset = static_cast<size_t>(h.vox_offset);
  if (offset < 348) offset = 352;
  if (bytes.size() < offset + count * sample_bytes)
    throw std::runtime_error("NIfTI payload shorter than header promises: " + path);

  double slope = (h.scl_slope == 0.f) ? 1.0 : static_cast<double>(h.scl_slope);
  double inter = static_cast<double>(h.scl_inter);

  Volume v(nx, ny, nz);
  const char* payload = bytes.data() + offset;
  switch (h.datatype) {
    case kDtUint8: convert_samples<uint8_t>(payload, count, slope, inter, v.data()); break;
    case kDtInt16: convert_samples<int16_t>(payload, count, slope, inter, v.data()); break;
    case kDtInt32: convert_samples<int32_t>(payload, count, slope, inter, v.data()); break;
    case kDtFloat64: convert_samples<double>(payload, count, slope, inter, v.data()); break;
    case kDtFloat32:
      if (slope == 1.0 && inter == 0.0) {
        std::memcpy(v.data(), payload, count * 4);  // bit-exact path
      } else {
        convert_samples<float>(payload, count, slope, inter, v.data());
      }
      break;
  }

  v.spacing = {std::abs(static_cast<double>(h.pixdim[1])), std::abs(static_cast<double>(h.pixdim[2])),
               std::abs(static_cast<double>(h.pixdim[3]))};
  for (auto& s : v.spacing)
    if (s <= 0.0) s = 1.0;
  if (h.qform_code > 0 || h.sform_code > 0)
    v.origin = {h.qoffset_x, h.qoffset_y, h.qoffset_z};
  v.provenance.assign(h.descrip, h.descrip + strnlen(h.descrip, sizeof(h.descrip)));
  return v;
}

void write_nifti(const Volume& v, const std::string& path) {
  Nifti1Header h;
  std::memset(&h, 0, sizeof(h));
  h.sizeof_hdr = 348;
  h.regular = 'r';
  h.dim[0] = 3;
  h.dim[1] = static_cast<int16_t>(v.nx());
  h.dim[2] = static_cast<int16_t>(v.ny());
  h.dim[3] = static_cast<int16_t>(v.nz());
  for (int i = 4; i < 8; ++i) h.dim[i] = 1;
  h.datatype = kDtFloat32;
  h.bitpix = 32;
  h.pixdim[0] = 1.f;
  h.pixdim[1] = static_cast<float>(v.spacing[0]);
  h.pixdim[2] = static_cast<float>(v.spacing[1]);
  h.pixdim[3] = static_cast<float>(v.spacing[2]);
  h.vox_offset = 352.f;
  h.scl_slope = 1.f;
  h.scl_inter = 0.f;
  h.xyzt_units = 2;  // millimetres
  std::strncpy(h.descrip, v.provenance.c_str(), sizeof(h.descrip) - 1);
  h.qform_code = 1;
  h.sform_code = 1;
  h.quatern_b = h.quatern_c = h.quatern_d = 0.f;  // identity orientation
  h.qoffset_x = static_cast<float>(v.origin[0]);
  h.qoffset_y = static_cast<float>(v.origin[1]);
  h.qoffset_z = static_cast<float>(v.origin[2]);
  h.srow_x[0] = static_cast<float>(v.spacing[0]);
  h.srow_y[1] = static_cast<float>(v.spacing[1]);
  h.srow_z[2] = static_cast<float>(v.spacing[2]);
  h.srow_x[3] = static_cast<float>(v.origin[0]);
  h.srow_y[3] = static_cast<float>(v.origin[1]);
  h.srow_z[3] = static_cast<float>(v.origin[2]);
  std::memcpy(h.magic, "n+1", 4);

  std::vector<char> bytes(352 + v.size() * 4, 0);
  std::memcpy(bytes.data(), &h, sizeof(h));
  std::memcpy(bytes.data() + 352, v.data(), v.size() * 4);
  write_all_bytes(path, bytes.data(), bytes.size(), ends_with(path, ".gz"));
}

}  // namespace io_detail

Volume read_volume(const std::string& path) {
  if (ends_with(path, ".nii") || ends_with(path, ".nii.gz")) return io_detail::read_nifti(path);
  if (ends_with(path, ".raw")) return io_detail::read_raw(path);
  throw std::runtime_error("unsupported volume format (want .nii, .nii.gz or .raw): " + path);
}

void write_volume(const Volume& v, const std::string& path) {
  if (ends_with(path, ".nii") || ends_with(path, ".nii.gz")) return io_detail::write_nifti(v, path);
  if (ends_with(path, ".raw")) return io_detail::write_raw(v, path);
  throw std::runtime_error("unsupported volume format (want .nii, .nii.gz or .raw): " + path);
}

Mask read_mask(const std::string& path) { return Mask::from_volume_binary(read_volume(path)); }

void write_mask(const Mask& m, const std::string& path) { write_volume(m.to_volume(), path); }

}  // namespace deltamap
