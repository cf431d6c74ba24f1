#include "bleaoa/labeling.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "bleaoa/angles.hpp"
#include "bleaoa/error.hpp"

namespace bleaoa::label {

using nlohmann::json;

void AnchorConfig::validate() const {
  if (height_mm <= 0.0) {
    throw Error(ErrorCode::InvalidArgument, "anchor height must be positive");
  }
}

InterpolatedPose interpolate_position(std::span<const GtRecord> gt, double t,
                                      double max_gap_s) {
  if (gt.empty()) throw Error(ErrorCode::Empty, "GT log is empty");
  if (t < gt.front().timestamp || t > gt.back().timestamp) {
    throw Error(ErrorCode::OutOfRange,
                "t=" + std::to_string(t) + " outside the GT span");
  }

  const auto upper = std::lower_bound(
      gt.begin(), gt.end(), t,
      [](const GtRecord& r, double value) { return r.timestamp < value; });
  // lower_bound lands on the first record with timestamp >= t.
  if (upper != gt.end() && upper->timestamp == t) {
    return {upper->position_mm, upper->rotation, false};
  }

  const GtRecord& after = *upper;
  const GtRecord& before = *(upper - 1);
  const double gap = after.timestamp - before.timestamp;
  if (gap <= 0.0) {
    return {before.position_mm, before.rotation, false};
  }
  if (gap > max_gap_s) {
    throw Error(ErrorCode::OutOfRange,
                "bracketing gap " + std::to_string(gap) + "s exceeds max_gap");
  }
  const double w = (t - before.timestamp) / gap;
  InterpolatedPose pose;
  pose.position_mm = (1.0 - w) * before.position_mm + w * after.position_mm;
  // Rotations are pose metadata, not label inputs; the nearer bracket wins.
  pose.rotation = (w <= 0.5) ? before.rotation : after.rotation;
  pose.interpolated = true;
  return pose;
}

double azimuth_deg(double tag_x_mm, double tag_y_mm, double anchor_x_mm,
                   double anchor_y_mm) {
  const double dx = tag_x_mm - anchor_x_mm;
  const double dy = tag_y_mm - anchor_y_mm;
  if (dx == 0.0 && dy == 0.0) {
    throw Error(ErrorCode::DegeneratePosition, "tag coincides with anchor");
  }
  return rad_to_deg(std::atan2(dy, dx));
}

double elevation_deg(const Vec3& tag_mm, const AnchorConfig& anchor) {
  const double dx = tag_mm.x - anchor.x_mm;
  const double dy = tag_mm.y - anchor.y_mm;
  const double horizontal = std::hypot(dx, dy);
  if (horizontal == 0.0) {
    throw Error(ErrorCode::DegeneratePosition, "tag directly above/below anchor");
  }
  return rad_to_deg(std::atan2(tag_mm.z - anchor.height_mm, horizontal));
}

LabelingResult label_packets(std::span<const CtePacket> packets,
                             std::span<const GtRecord> gt,
                             const AnchorConfig& anchor, double max_gap_s) {
  anchor.validate();
  LabelingResult result;
  for (const CtePacket& packet : packets) {
    if (!packet.complete) {
      result.skipped.push_back({packet.idx, packet.timestamp, "incomplete"});
      continue;
    }
    InterpolatedPose pose;
    try {
      pose = interpolate_position(gt, packet.timestamp, max_gap_s);
    } catch (const Error& e) {
      result.skipped.push_back({packet.idx, packet.timestamp,
                                std::string(error_code_name(e.code()))});
      continue;
    }
    LabeledPacket labeled;
    labeled.packet = packet;
    labeled.tag_position_mm = pose.position_mm;
    labeled.tag_rotation = pose.rotation;
    labeled.interpolated = pose.interpolated;
    try {
      labeled.azimuth_deg =
          wrap_deg(azimuth_deg(pose.position_mm.x, pose.position_mm.y,
                               anchor.x_mm, anchor.y_mm) -
                   anchor.boresight_deg);
      labeled.elevation_deg = elevation_deg(pose.position_mm, anchor);
    } catch (const Error& e) {
      result.skipped.push_back({packet.idx, packet.timestamp,
                                std::string(error_code_name(e.code()))});
      continue;
    }
    const Vec3 delta = pose.position_mm -
                       Vec3{anchor.x_mm, anchor.y_mm, anchor.height_mm};
    labeled.distance_mm = delta.norm();
    result.labeled.push_back(std::move(labeled));
  }
  return result;
}

namespace {

json mat3_to_json(const Mat3& m) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) {
    rows.push_back(json::array({m[r][0], m[r][1], m[r][2]}));
  }
  return rows;
}

Mat3 mat3_from_json(const json& rows) {
  if (!rows.is_array() || rows.size() != 3) {
    throw Error(ErrorCode::MalformedJson, "rotation is not 3x3");
  }
  Mat3 m;
  for (int r = 0; r < 3; ++r) {
    if (!rows[r].is_array() || rows[r].size() != 3) {
      throw Error(ErrorCode::MalformedJson, "rotation is not 3x3");
    }
    for (int c = 0; c < 3; ++c) m[r][c] = rows[r][c].get<double>();
  }
  return m;
}

}  // namespace

void write_labeled_store(std::ostream& out,
                         std::span<const LabeledPacket> rows) {
  for (const LabeledPacket& r : rows) {
    json samples = json::array();
    for (const IqPair& s : r.packet.samples) {
      samples.push_back(json::array({s.i, s.q}));
    }
    json entry;
    entry["idx"] = r.packet.idx;
    entry["timestamp"] = r.packet.timestamp;
    entry["rss"] = r.packet.rss_dbm;
    entry["channel"] = r.packet.channel;
    entry["complete"] = r.packet.complete;
    entry["samples"] = std::move(samples);
    entry["azimuth"] = r.azimuth_deg;
    entry["elevation"] = r.elevation_deg;
    entry["distance"] = r.distance_mm;
    entry["tag_position"] = json::array(
        {r.tag_position_mm.x, r.tag_position_mm.y, r.tag_position_mm.z});
    entry["tag_rotation"] = mat3_to_json(r.tag_rotation);
    entry["interpolated"] = r.interpolated;
    out << entry.dump() << '\n';
  }
}

std::vector<LabeledPacket> read_labeled_store(std::istream& in) {
  std::vector<LabeledPacket> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json entry;
    try {
      entry = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::MalformedJson,
                  "line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      LabeledPacket r;
      r.packet.idx = entry.at("idx").get<std::uint64_t>();
      r.packet.timestamp = entry.at("timestamp").get<double>();
      r.packet.rss_dbm = entry.at("rss").get<int>();
      r.packet.channel = entry.at("channel").get<int>();
      r.packet.complete = entry.at("complete").get<bool>();
      for (const json& s : entry.at("samples")) {
        r.packet.samples.push_back({s[0].get<std::int16_t>(), s[1].get<std::int16_t>()});
      }
      r.azimuth_deg = entry.at("azimuth").get<double>();
      r.elevation_deg = entry.at("elevation").get<double>();
      r.distance_mm = entry.at("distance").get<double>();
      const json& pos = entry.at("tag_position");
      r.tag_position_mm = {pos[0].get<double>(), pos[1].get<double>(),
                           pos[2].get<double>()};
      r.tag_rotation = mat3_from_json(entry.at("tag_rotation"));
      r.interpolated = entry.at("interpolated").get<bool>();
      rows.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::MalformedJson,
                  "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

void write_skipped_csv(std::ostream& out,
                       std::span<const UnlabeledPacket> rows) {
  out << "idx,timestamp,reason\n";
  char buf[64];
  for (const UnlabeledPacket& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.6f", r.timestamp);
    out << r.idx << ',' << buf << ',' << r.reason << '\n';
  }
}

}  // namespace bleaoa::label
