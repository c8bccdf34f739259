#ifndef FPNET_CONTAINER_HPP
#define FPNET_CONTAINER_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace fpnet::io {

/// On-disk container shared by dataset and checkpoint files:
///   bytes 0..3   magic (4 ASCII chars)
///   bytes 4..7   format version, uint32 little-endian
///   bytes 8..15  JSON header length, uint64 little-endian
///   then the UTF-8 JSON header, then the binary blob (rest of file).
struct Container {
  uint32_t version = 0;
  std::string json;
  std::vector<uint8_t> blob;
};

void write_container(const std::string& path, const char magic[4],
                     uint32_t version, const std::string& json,
                     const void* blob, size_t blob_size);

/// Throws fpnet::Error on missing file, magic mismatch, version mismatch,
/// or a header length that runs past the end of the file.
Container read_container(const std::string& path, const char magic[4],
                         uint32_t expected_version);

/// float32 little-endian blob helpers (the only numeric blob encoding used).
std::vector<uint8_t> doubles_to_f32le(const double* v, size_t n);
std::vector<double> f32le_to_doubles(const uint8_t* bytes, size_t n_bytes);

}  // namespace fpnet::io

#endif  // FPNET_CONTAINER_HPP
