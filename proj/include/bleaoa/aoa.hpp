#pragma once

#include <array>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <span>
#include <vector>

#include "bleaoa/iq_pipeline.hpp"
#include "bleaoa/types.hpp"

namespace bleaoa::aoa {

/// Center frequencies of the 37 BLE data channels in Hz (2404..2478 MHz,
/// skipping the three advertising channels).
std::array<double, kBleDataChannels> default_channel_frequencies();

struct ArrayGeometry {
  int elements = 3;
  // The BOOSTXL element spacing is not published; default to lambda/2 at
  // 2.44 GHz, the unambiguous-PDoA design point. Calibrate against real data.
  double spacing_m = 0.0614;
  std::array<double, 2> sub_array_normals_deg = {45.0, -45.0};
  double c = kSpeedOfLight;
  std::array<double, kBleDataChannels> channel_freq_hz =
      default_channel_frequencies();

  double frequency_hz(int channel) const;  // throws Error{OutOfRange}
  void validate() const;
};

/// Per (sub-array, antenna, channel) phase offsets in radians. The all-zero
/// table is valid; TI's lab calibration values can be loaded from JSON:
///   {"sub_arrays": [{"antennas": [[37 offsets], ...]}, {...}]}
class CalibrationTable {
 public:
  CalibrationTable() = default;
  double offset(int sub_array, int antenna, int channel) const;
  void set(int sub_array, int antenna, int channel, double radians);
  static CalibrationTable load_json(const std::filesystem::path& file);

 private:
  // [sub_array-1][antenna][channel]; empty means all-zero.
  std::array<std::vector<std::array<double, kBleDataChannels>>, 2> table_;
};

/// Hook for the vendor's undocumented per-array output correction. Identity
/// by default.
struct AngleAdjustment {
  double scale = 1.0;
  double offset_deg = 0.0;
  double apply(double theta_deg) const { return scale * theta_deg + offset_deg; }
};

/// Estimate in the sub-array (ULA) frame, theta in [0, 180].
struct UlaEstimate {
  double theta_ula_deg = 0.0;
  bool ambiguous = false;       // |cos| exceeded 1 and was clamped
  bool low_confidence = false;  // near endfire (< 10 deg or > 170 deg)
  bool no_peak = false;         // MUSIC only: spectrum carried no source
};

// CFO slope in rad/sample from the reference period (mean per-sample phase
// slope over the unwrapped reference phases).
double reference_cfo_slope(const iq::CtePhases& phases);

// CFO slope in rad/sample from same-antenna phase change across consecutive
// switching rounds; requires >= 2 rounds. This is the TI variant: it spends
// no reference samples.
double round_cfo_slope(const iq::CtePhases& phases);

/// Naive PDoA: reference-period CFO correction, adjacent-element phase
/// differences averaged across rounds, inverted through arccos.
UlaEstimate pdoa_naive(const iq::SlottedCte& slotted, const ArrayGeometry& geom,
                       int channel);

/// TI PDoA: previous-round CFO compensation, per-pair averages for (1,2),
/// (2,3) and (1,3) (the wide pair is halved for its 2d spacing), calibration
/// subtracted before differencing, pair angles combined by mean.
/// Throws Error{InsufficientRounds} below 2 rounds.
UlaEstimate pdoa_ti(const iq::SlottedCte& slotted, const ArrayGeometry& geom,
                    int channel, const CalibrationTable& calib = {},
                    const AngleAdjustment& adjustment = {});

/// MUSIC with a single assumed source: sample covariance of CFO-derotated
/// per-round snapshots, eigendecomposition, pseudo-spectrum scanned over
/// [0, 180] at grid_deg with parabolic peak refinement.
/// Throws Error{RankDeficient} when snapshots < elements or the covariance
/// is not PSD within tolerance.
UlaEstimate music(const iq::SlottedCte& slotted, const ArrayGeometry& geom,
                  int channel, double grid_deg = 0.5);

/// Sub-array frame -> device frame. Array 1 covers [-45, 135]
/// (theta_global = theta_ula - 45), array 2 mirrors to [-135, 45]
/// (theta_global = 45 - theta_ula).
double remap_to_global(double theta_ula_deg, int sub_array);
double remap_to_ula(double theta_global_deg, int sub_array);  // inverse

struct AngleEstimate {
  double theta_ula_deg = 0.0;
  double theta_global_deg = 0.0;
  int sub_array = 1;  // 1 or 2
  int rss_dbm = 0;
  double timestamp = 0.0;
  std::uint64_t idx = 0;
  bool low_confidence = false;
};

/// Pick the estimate with the strictly higher RSS; ties go to sub-array 1.
/// Throws Error{UnpairedEstimate} unless the two estimates come from
/// different sub-arrays within window_s of each other.
AngleEstimate rss_select(const AngleEstimate& a, const AngleEstimate& b,
                         double window_s = 0.25);

struct SelectionOutput {
  std::vector<AngleEstimate> selected;
  std::vector<AngleEstimate> unpaired;
};

/// Walk a time-ordered estimate stream, pair consecutive estimates from
/// opposite sub-arrays within the window, and keep the higher-RSS member of
/// each pair. Single consumer; not safe for concurrent feeding.
SelectionOutput pair_and_select(std::span<const AngleEstimate> estimates,
                                double window_s = 0.25);

/// Arithmetic mean of up to the last `window` values (fewer during warm-up);
/// one output per input. Single consumer.
class MovingAverage {
 public:
  explicit MovingAverage(std::size_t window = 6);
  double push(double value);
  void reset();

 private:
  std::size_t window_;
  std::deque<double> buf_;
  double sum_ = 0.0;
};

}  // namespace bleaoa::aoa
