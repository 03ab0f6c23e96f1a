#include <fstream>
#include <stdexcept>

#include "deltamap/volume_io.hpp"
#include "json.hpp"

namespace deltamap {
namespace io_detail {

// Raw fallback format: <path> is the flat little-endian float32 payload in
// x-fastest order; <path>.json is the sidecar header.

Volume read_raw(const std::string& path) {
  std::ifstream hdr(path + ".json");
  if (!hdr) throw std::runtime_error("missing raw sidecar header: " + path + ".json");
  nlohmann::json j;
  try {
    hdr >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error("bad raw sidecar JSON (" + std::string(e.what()) + "): " + path + ".json");
  }

  auto shape = j.at("shape");
  if (!shape.is_array() || shape.size() != 3)
    throw std::runtime_error("raw sidecar: dimension count must be 3: " + path);
  if (j.value("dtype", "float32") != "float32")
    throw std::runtime_error("raw sidecar: unsupported dtype: " + path);

  Volume v(shape[0].get<int>(), shape[1].get<int>(), shape[2].get<int>());
  if (j.contains("spacing")) {
    auto sp = j["spacing"];
    v.spacing = {sp[0].get<double>(), sp[1].get<double>(), sp[2].get<double>()};
  }
  if (j.contains("origin")) {
    auto o = j["origin"];
    v.origin = {o[0].get<double>(), o[1].get<double>(), o[2].get<double>()};
  }
  v.provenance = j.value("provenance", "");

  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open raw payload: " + path);
  f.seekg(0, std::ios::end);
  size_t actual = static_cast<size_t>(f.tellg());
  size_t expected = v.size() * 4;
  if (actual != expected)
    throw std::runtime_error("raw payload size mismatch (have " + std::to_string(actual) + ", want " +
                             std::to_string(expected) + "): " + path);
  f.seekg(0, std::ios::beg);
  f.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(expected));
  if (!f) throw std::runtime_error("raw payload read error: " + path);
  return v;
}

void write_raw(const Volume& v, const std::string& path) {
  nlohmann::json j;
  j["shape"] = {v.nx(), v.ny(), v.nz()};
  j["spacing"] = {v.spacing[0], v.spacing[1], v.spacing[2]};
  j["origin"] = {v.origin[0], v.origin[1], v.origin[2]};
  j["dtype"] = "float32";
  j["order"] = "x-fastest";
  if (!v.provenance.empty()) j["provenance"] = v.provenance;

  std::ofstream hdr(path + ".json");
  if (!hdr) throw std::runtime_error("cannot write raw sidecar: " + path + ".json");
  hdr << j.dump(2) << "\n";

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write raw payload: " + path);
  f.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 4));
  if (!f) throw std::runtime_error("raw payload write error: " + path);
}

}  // namespace io_detail
}  // namespace deltamap
