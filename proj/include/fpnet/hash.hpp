#ifndef FPNET_HASH_HPP
#define FPNET_HASH_HPP

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

namespace fpnet {

/// FNV-1a 64-bit. Stable, dependency-free content hash used for provenance
/// fields (config hash, dataset hash, checkpoint hash). Not cryptographic.
class Fnv1a {
 public:
  Fnv1a& update(const void* data, size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ull;
    }
    return *this;
  }

  Fnv1a& update(const std::string& s) { return update(s.data(), s.size()); }

  template <typename T>
  Fnv1a& update_pod(const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    return update(&v, sizeof(T));
  }

  uint64_t digest() const { return state_; }

  std::string hex() const {
    static const char* k = "0123456789abcdef";
    std::string out(16, '0');
    uint64_t v = state_;
    for (int i = 15; i >= 0; --i) {
      out[static_cast<size_t>(i)] = k[v & 0xf];
      v >>= 4;
    }
    return out;
  }

 private:
  uint64_t state_ = 0xcbf29ce484222325ull;
};

inline std::string hash_bytes_hex(const void* data, size_t n) {
  return Fnv1a().update(data, n).hex();
}

inline std::string hash_string_hex(const std::string& s) {
  return hash_bytes_hex(s.data(), s.size());
}

}  // namespace fpnet

#endif  // FPNET_HASH_HPP
