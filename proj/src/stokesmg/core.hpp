#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace stokesmg {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define STOKESMG_REQUIRE(cond, exc, msg) \
  do {                                   \
    if (!(cond)) throw exc(msg);         \
  } while (0)

// Counter-based 64-bit mixer (splitmix64 finalizer). Output depends only on
// the input word, so streams are reproducible regardless of draw order.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Uniform double in [0,1) from (seed, index) without shared state.
inline double uniform01(std::uint64_t seed, std::uint64_t index) {
  const std::uint64_t h = mix64(mix64(seed) ^ (0x632be59bd9b4e019ULL + index));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace stokesmg
