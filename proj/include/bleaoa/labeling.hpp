#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "bleaoa/types.hpp"

namespace bleaoa::label {

/// Receiver placement. The array boresight faces the global +x axis; a
/// nonzero boresight_deg models a mounting misalignment (subtracted from the
/// computed azimuth).
struct AnchorConfig {
  double x_mm = -1200.0;
  double y_mm = 0.0;
  double height_mm = 1100.0;
  double boresight_deg = 0.0;

  void validate() const;  // height > 0
};

struct LabeledPacket {
  CtePacket packet;
  double azimuth_deg = 0.0;    // (-180, 180]
  double elevation_deg = 0.0;
  double distance_mm = 0.0;    // 3D tag-anchor distance
  Vec3 tag_position_mm;
  Mat3 tag_rotation = identity_mat3();
  bool interpolated = false;
};

struct InterpolatedPose {
  Vec3 position_mm;
  Mat3 rotation = identity_mat3();
  bool interpolated = false;
};

/// Pose at time t from a sorted GT log. Exact timestamp matches return the
/// record verbatim; otherwise the position is linearly interpolated between
/// the bracketing records and the rotation comes from the nearer bracket.
/// No extrapolation: t outside [first, last] or a bracketing gap above
/// max_gap_s throws Error{OutOfRange}.
InterpolatedPose interpolate_position(std::span<const GtRecord> gt, double t,
                                      double max_gap_s = 0.5);

/// Azimuth of the tag seen from the anchor, degrees in (-180, 180].
/// Throws Error{DegeneratePosition} when tag == anchor.
double azimuth_deg(double tag_x_mm, double tag_y_mm, double anchor_x_mm,
                   double anchor_y_mm);

/// Elevation of the tag relative to the anchor's mounting height.
/// Throws Error{DegeneratePosition} when directly above/below the anchor.
double elevation_deg(const Vec3& tag_mm, const AnchorConfig& anchor);

struct UnlabeledPacket {
  std::uint64_t idx = 0;
  double timestamp = 0.0;
  std::string reason;
};

struct LabelingResult {
  std::vector<LabeledPacket> labeled;
  std::vector<UnlabeledPacket> skipped;
};

/// Label every complete packet whose timestamp falls inside the GT span.
/// Per-packet failures are collected in `skipped`, never thrown.
LabelingResult label_packets(std::span<const CtePacket> packets,
                             std::span<const GtRecord> gt,
                             const AnchorConfig& anchor = {},
                             double max_gap_s = 0.5);

// Labeled store: JSON lines, one LabeledPacket per line.
void write_labeled_store(std::ostream& out, std::span<const LabeledPacket> rows);
std::vector<LabeledPacket> read_labeled_store(std::istream& in);
void write_skipped_csv(std::ostream& out, std::span<const UnlabeledPacket> rows);

}  // namespace bleaoa::label
