#include "fpnet/container.hpp"

#include <cstring>
#include <fstream>
#include <limits>

#include "fpnet/common.hpp"

namespace fpnet::io {

static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559,
              "float32 blob encoding requires IEEE-754 single precision");

namespace {

void put_u32le(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64le(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t get_u32le(const uint8_t* p) {
  return (uint32_t)p[0] | ((uint32_t)p[1] << 8) | ((uint32_t)p[2] << 16) |
         ((uint32_t)p[3] << 24);
}

uint64_t get_u64le(const uint8_t* p) {
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

}  // namespace

void write_container(const std::string& path, const char magic[4],
                     uint32_t version, const std::string& json,
                     const void* blob, size_t blob_size) {
  std::string header;
  header.append(magic, 4);
  put_u32le(header, version);
  put_u64le(header, json.size());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("write_container: cannot open " + path);
  f.write(header.data(), static_cast<std::streamsize>(header.size()));
  f.write(json.data(), static_cast<std::streamsize>(json.size()));
  if (blob_size)
    f.write(static_cast<const char*>(blob),
            static_cast<std::streamsize>(blob_size));
  if (!f) throw Error("write_container: write failed for " + path);
}

Container read_container(const std::string& path, const char magic[4],
                         uint32_t expected_version) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("read_container: cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
  if (bytes.size() < 16)
    throw Error("read_container: " + path + " is truncated (no header)");
  if (std::memcmp(bytes.data(), magic, 4) != 0)
    throw Error("read_container: bad magic in " + path);
  Container c;
  c.version = get_u32le(bytes.data() + 4);
  if (c.version != expected_version)
    throw Error("read_container: " + path + " has format version " +
                std::to_string(c.version) + ", expected " +
                std::to_string(expected_version));
  const uint64_t jlen = get_u64le(bytes.data() + 8);
  if (16 + jlen > bytes.size())
    throw Error("read_container: " + path +
                " header length exceeds file size (truncated file?)");
  c.json.assign(reinterpret_cast<const char*>(bytes.data() + 16),
                static_cast<size_t>(jlen));
  c.blob.assign(bytes.begin() + 16 + static_cast<ptrdiff_t>(jlen),
                bytes.end());
  return c;
}

std::vector<uint8_t> doubles_to_f32le(const double* v, size_t n) {
  std::vector<uint8_t> out(n * 4);
  for (size_t i = 0; i < n; ++i) {
    const float x = static_cast<float>(v[i]);
    uint32_t u;
    std::memcpy(&u, &x, 4);
    out[4 * i + 0] = static_cast<uint8_t>(u & 0xff);
    out[4 * i + 1] = static_cast<uint8_t>((u >> 8) & 0xff);
    out[4 * i + 2] = static_cast<uint8_t>((u >> 16) & 0xff);
    out[4 * i + 3] = static_cast<uint8_t>((u >> 24) & 0xff);
  }
  return out;
}

std::vector<double> f32le_to_doubles(const uint8_t* bytes, size_t n_bytes) {
  if (n_bytes % 4 != 0)
    throw Error("f32le_to_doubles: byte count not a multiple of 4");
  std::vector<double> out(n_bytes / 4);
  for (size_t i = 0; i < out.size(); ++i) {
    const uint32_t u = get_u32le(bytes + 4 * i);
    float x;
    std::memcpy(&x, &u, 4);
    out[i] = static_cast<double>(x);
  }
  return out;
}

}  // namespace fpnet::io
