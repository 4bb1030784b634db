#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace ossr {

// ----------------------------------------------------------------------------
// Error taxonomy. Domain errors map to CLI exit code 1, usage errors to 2.
// ----------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or corrupt input data (bad rows, non-finite values, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// API misuse: violated precondition, shape mismatch, wrong call order.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure: divergence, non-finite gradients, degenerate fits.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Requested operation is undefined in this configuration
/// (e.g. entropy thresholds with a single known class).
class NotApplicableError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// ----------------------------------------------------------------------------
// Labels
// ----------------------------------------------------------------------------

/// Records without a class assignment carry this label.
constexpr int kUnlabeled = -1;

/// Verdicts and scoring use this id for the rejected / unknown class.
constexpr int kUnknownClass = -1;

// ----------------------------------------------------------------------------
// Finite checks
// ----------------------------------------------------------------------------

inline bool all_finite(const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

inline void require_finite(const std::vector<double>& v, const std::string& what) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw DataError(what + ": non-finite value at index " + std::to_string(i));
    }
  }
}

// ----------------------------------------------------------------------------
// FNV-1a 64-bit content hashing (manifest checksums, provenance blocks)
// ----------------------------------------------------------------------------

class Fnv1a64 {
 public:
  void update(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      hash_ ^= static_cast<std::uint64_t>(p[i]);
      hash_ *= 0x100000001b3ull;
    }
  }

  void update_u32(std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    update(b, 4);
  }

  void update_f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    update_u32(bits);
  }

  std::uint64_t value() const { return hash_; }

  std::string hex() const {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    std::uint64_t h = hash_;
    for (int i = 15; i >= 0; --i) {
      s[static_cast<std::size_t>(i)] = digits[h & 0xf];
      h >>= 4;
    }
    return s;
  }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ull;
};

inline std::string fnv1a64_hex(const std::string& bytes) {
  Fnv1a64 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

}  // namespace ossr
