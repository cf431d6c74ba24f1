#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace bleaoa {

// Hardware register cap: at most 511 IQ pairs per CTE stream.
inline constexpr std::size_t kCteSampleCount = 511;
// Firmware splits a CTE stream into UART chunks of at most 32 IQ pairs.
inline constexpr std::size_t kChunkMaxSamples = 32;
// BLE data channels 0..36.
inline constexpr int kBleDataChannels = 37;

inline constexpr double kSpeedOfLight = 299792458.0;

/// Raw ADC sample. Values must fit the 16-bit signed capture register.
struct IqPair {
  std::int16_t i = 0;
  std::int16_t q = 0;

  friend bool operator==(const IqPair&, const IqPair&) = default;
};

/// One UART chunk of a CTE stream as it appears in a signal log entry.
struct Chunk {
  std::uint64_t idx = 0;     // CTE identifier, groups chunks into packets
  std::uint32_t offset = 0;  // write position in samples
  std::vector<IqPair> samples;
  int rss_dbm = 0;
  int channel = 0;  // BLE data channel, 0..36
  double timestamp = 0.0;

  friend bool operator==(const Chunk&, const Chunk&) = default;
};

/// A reassembled CTE stream. `samples` has kCteSampleCount entries; positions
/// never written stay zero and `complete` is false unless every position was
/// written exactly once.
struct CtePacket {
  std::uint64_t idx = 0;
  std::vector<IqPair> samples;
  int rss_dbm = 0;
  int channel = 0;
  double timestamp = 0.0;  // earliest constituent chunk timestamp
  bool complete = false;

  friend bool operator==(const CtePacket&, const CtePacket&) = default;
};

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  friend Vec3 operator-(const Vec3& a, const Vec3& b) {
    return {a.x - b.x, a.y - b.y, a.z - b.z};
  }
  friend Vec3 operator+(const Vec3& a, const Vec3& b) {
    return {a.x + b.x, a.y + b.y, a.z + b.z};
  }
  friend Vec3 operator*(double s, const Vec3& v) { return {s * v.x, s * v.y, s * v.z}; }
  double norm() const { return std::sqrt(x * x + y * y + z * z); }

  friend bool operator==(const Vec3&, const Vec3&) = default;
};

// Row-major 3x3 matrix; columns are the local coordinate axes expressed in
// the global frame.
using Mat3 = std::array<std::array<double, 3>, 3>;

inline Mat3 identity_mat3() {
  return {{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}};
}

/// Motion-capture pose sample. Position in millimeters.
struct GtRecord {
  double timestamp = 0.0;
  Vec3 position_mm;
  Mat3 rotation = identity_mat3();

  friend bool operator==(const GtRecord&, const GtRecord&) = default;
};

}  // namespace bleaoa
