// Copyright 2026 The Tarmac Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace tarmac {

/// Base class for all toolkit errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Deterministic RNG (splitmix64 core). std:: distributions are
/// implementation-defined, so all draws are derived here explicitly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_int(std::uint64_t n) {
    // Rejection sampling keeps the draw unbiased.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

  /// Standard normal via Box-Muller.
  double normal();

  /// Fisher-Yates shuffle with this generator.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// FNV-1a 64-bit hash, used for config fingerprints.
std::uint64_t fnv1a(const void* data, std::size_t n,
                    std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a(const std::string& s, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hash_hex(std::uint64_t h);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

/// Fixed-precision float formatting (snprintf-backed) so emitted tables and
/// SVGs are byte-stable across runs.
std::string fmt_fixed(double v, int precision);

std::string lower(std::string s);
std::vector<std::string> split(const std::string& s, char sep);

}  // namespace tarmac
