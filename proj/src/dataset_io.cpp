#include "bleaoa/dataset_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "bleaoa/error.hpp"

namespace bleaoa::io {
namespace {

using nlohmann::json;

json parse_json(std::string_view text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedJson, where + ": " + e.what());
  }
}

const json& require_field(const json& obj, const std::string& key,
                          const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw Error(ErrorCode::MissingField, where + "." + key);
  }
  return *it;
}

std::int64_t require_int(const json& obj, const std::string& key,
                         const std::string& where) {
  const json& v = require_field(obj, key, where);
  if (!v.is_number_integer()) {
    throw Error(ErrorCode::MalformedJson,
                where + "." + key + " is not an integer");
  }
  return v.get<std::int64_t>();
}

double require_number(const json& obj, const std::string& key,
                      const std::string& where) {
  const json& v = require_field(obj, key, where);
  if (!v.is_number()) {
    throw Error(ErrorCode::MalformedJson, where + "." + key + " is not a number");
  }
  return v.get<double>();
}

std::int16_t check_adc(std::int64_t v, const std::string& where) {
  if (v < std::numeric_limits<std::int16_t>::min() ||
      v > std::numeric_limits<std::int16_t>::max()) {
    throw Error(ErrorCode::OutOfRange, where + " exceeds the 16-bit register");
  }
  return static_cast<std::int16_t>(v);
}

Chunk parse_entry(const json& entry, const SignalSchema& schema,
                  const std::string& where) {
  if (!entry.is_object()) {
    throw Error(ErrorCode::MalformedJson, where + " is not an object");
  }
  const json& payload = require_field(entry, schema.payload, where);
  if (!payload.is_object()) {
    throw Error(ErrorCode::MalformedJson, where + "." + schema.payload +
                                              " is not an object");
  }
  Chunk chunk;
  chunk.timestamp = require_number(entry, schema.timestamp, where);

  const std::string pw = where + "." + schema.payload;
  const std::int64_t idx = require_int(payload, schema.idx, pw);
  if (idx < 0) throw Error(ErrorCode::OutOfRange, pw + "." + schema.idx);
  chunk.idx = static_cast<std::uint64_t>(idx);

  const std::int64_t offset = require_int(payload, schema.offset, pw);
  if (offset < 0 || offset > static_cast<std::int64_t>(kCteSampleCount) - 1) {
    throw Error(ErrorCode::OutOfRange, pw + "." + schema.offset);
  }
  chunk.offset = static_cast<std::uint32_t>(offset);

  chunk.rss_dbm = static_cast<int>(require_int(payload, schema.rss, pw));
  chunk.channel = static_cast<int>(require_int(payload, schema.channel, pw));
  if (chunk.channel < 0 || chunk.channel >= kBleDataChannels) {
    throw Error(ErrorCode::OutOfRange, pw + "." + schema.channel);
  }

  const json& samples = require_field(payload, schema.samples, pw);
  if (!samples.is_array() || samples.empty() ||
      samples.size() > kChunkMaxSamples) {
    throw Error(ErrorCode::OutOfRange, pw + "." + schema.samples);
  }
  if (chunk.offset + samples.size() > kCteSampleCount) {
    throw Error(ErrorCode::OutOfRange, pw + "." + schema.samples +
                                           " spills past the 511-sample cap");
  }
  chunk.samples.reserve(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const json& s = samples[k];
    const std::string sw = pw + "." + schema.samples + "[" + std::to_string(k) + "]";
    if (!s.is_array() || s.size() != 2 || !s[0].is_number_integer() ||
        !s[1].is_number_integer()) {
      throw Error(ErrorCode::MalformedJson, sw + " is not an [i, q] pair");
    }
    chunk.samples.push_back({check_adc(s[0].get<std::int64_t>(), sw + ".i"),
                             check_adc(s[1].get<std::int64_t>(), sw + ".q")});
  }
  return chunk;
}

// Splits a stream into top-level JSON entries: either one entry per line or
// one top-level array of entries.
std::vector<json> read_entries(std::istream& stream) {
  std::ostringstream buffer;
  buffer << stream.rdbuf();
  const std::string text = buffer.str();

  std::size_t first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  if (text[first] == '[') {
    json root = parse_json(text, "file");
    if (!root.is_array()) {
      throw Error(ErrorCode::MalformedJson, "top-level value is not an array");
    }
    std::vector<json> entries;
    entries.reserve(root.size());
    for (auto& e : root) entries.push_back(std::move(e));
    return entries;
  }

  std::vector<json> entries;
  std::istringstream lines(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    entries.push_back(parse_json(line, "line " + std::to_string(line_no)));
  }
  return entries;
}

}  // namespace

std::vector<Chunk> parse_signal_file(std::istream& stream,
                                     const SignalSchema& schema) {
  std::vector<Chunk> chunks;
  std::size_t n = 0;
  for (const json& entry : read_entries(stream)) {
    chunks.push_back(parse_entry(entry, schema, "entry " + std::to_string(n++)));
  }
  return chunks;
}

std::vector<Chunk> parse_signal_text(std::string_view text,
                                     const SignalSchema& schema) {
  std::istringstream stream{std::string(text)};
  return parse_signal_file(stream, schema);
}

std::vector<CtePacket> reassemble(std::span<const Chunk> chunks) {
  struct Group {
    CtePacket packet;
    std::array<std::uint8_t, kCteSampleCount> writes{};
    bool first = true;
  };
  std::map<std::uint64_t, Group> groups;

  for (const Chunk& chunk : chunks) {
    Group& g = groups[chunk.idx];
    CtePacket& p = g.packet;
    if (g.first) {
      p.idx = chunk.idx;
      p.samples.assign(kCteSampleCount, IqPair{});
      p.rss_dbm = chunk.rss_dbm;
      p.channel = chunk.channel;
      p.timestamp = chunk.timestamp;
      g.first = false;
    } else {
      if (p.rss_dbm != chunk.rss_dbm || p.channel != chunk.channel) {
        throw Error(ErrorCode::ConflictingMetadata,
                    "idx " + std::to_string(chunk.idx));
      }
      p.timestamp = std::min(p.timestamp, chunk.timestamp);
    }
    for (std::size_t k = 0; k < chunk.samples.size(); ++k) {
      const std::size_t pos = chunk.offset + k;
      if (g.writes[pos] > 0 && p.samples[pos] != chunk.samples[k]) {
        throw Error(ErrorCode::OverlappingChunks,
                    "idx " + std::to_string(chunk.idx) + " offset " +
                        std::to_string(pos));
      }
      p.samples[pos] = chunk.samples[k];
      if (g.writes[pos] < 255) ++g.writes[pos];
    }
  }

  std::vector<CtePacket> packets;
  packets.reserve(groups.size());
  for (auto& [idx, g] : groups) {
    g.packet.complete =
        std::all_of(g.writes.begin(), g.writes.end(),
                    [](std::uint8_t w) { return w == 1; });
    packets.push_back(std::move(g.packet));
  }
  std::stable_sort(packets.begin(), packets.end(),
                   [](const CtePacket& a, const CtePacket& b) {
                     if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
                     return a.idx < b.idx;
                   });
  return packets;
}

namespace {

GtRecord parse_gt_entry(const json& entry, const std::string& where) {
  if (!entry.is_object()) {
    throw Error(ErrorCode::MalformedJson, where + " is not an object");
  }
  GtRecord record;
  record.timestamp = require_number(entry, "timestamp", where);

  const json& pos = require_field(entry, "position", where);
  if (!pos.is_array() || pos.size() != 3 ||
      !std::all_of(pos.begin(), pos.end(),
                   [](const json& v) { return v.is_number(); })) {
    throw Error(ErrorCode::MalformedJson, where + ".position is not [x, y, z]");
  }
  record.position_mm = {pos[0].get<double>(), pos[1].get<double>(),
                        pos[2].get<double>()};

  const json& rot = require_field(entry, "rotation", where);
  if (!rot.is_array() || rot.size() != 3) {
    throw Error(ErrorCode::MalformedJson, where + ".rotation is not 3x3");
  }
  for (int r = 0; r < 3; ++r) {
    const json& row = rot[r];
    if (!row.is_array() || row.size() != 3 ||
        !std::all_of(row.begin(), row.end(),
                     [](const json& v) { return v.is_number(); })) {
      throw Error(ErrorCode::MalformedJson, where + ".rotation is not 3x3");
    }
    for (int c = 0; c < 3; ++c) record.rotation[r][c] = row[c].get<double>();
  }

  // Columns are local axes: unit norm and pairwise orthogonal within 1e-3.
  constexpr double kTol = 1e-3;
  for (int c = 0; c < 3; ++c) {
    double norm2 = 0.0;
    for (int r = 0; r < 3; ++r) norm2 += record.rotation[r][c] * record.rotation[r][c];
    if (std::abs(std::sqrt(norm2) - 1.0) > kTol) {
      throw Error(ErrorCode::NonOrthonormalRotation, where + " column " +
                                                         std::to_string(c));
    }
  }
  for (int a = 0; a < 3; ++a) {
    for (int b = a + 1; b < 3; ++b) {
      double dot = 0.0;
      for (int r = 0; r < 3; ++r) dot += record.rotation[r][a] * record.rotation[r][b];
      if (std::abs(dot) >= kTol) {
        throw Error(ErrorCode::NonOrthonormalRotation,
                    where + " columns " + std::to_string(a) + "," + std::to_string(b));
      }
    }
  }
  return record;
}

}  // namespace

std::vector<GtRecord> parse_gt_file(std::istream& stream) {
  std::vector<GtRecord> records;
  std::size_t n = 0;
  for (const json& entry : read_entries(stream)) {
    records.push_back(parse_gt_entry(entry, "entry " + std::to_string(n++)));
  }
  std::stable_sort(records.begin(), records.end(),
                   [](const GtRecord& a, const GtRecord& b) {
                     return a.timestamp < b.timestamp;
                   });
  records.erase(std::unique(records.begin(), records.end(),
                            [](const GtRecord& a, const GtRecord& b) {
                              return a.timestamp == b.timestamp;
                            }),
                records.end());
  return records;
}

std::vector<GtRecord> parse_gt_text(std::string_view text) {
  std::istringstream stream{std::string(text)};
  return parse_gt_file(stream);
}

std::vector<Chunk> packet_to_chunks(const CtePacket& packet,
                                    std::size_t chunk_len) {
  if (chunk_len == 0 || chunk_len > kChunkMaxSamples) {
    throw Error(ErrorCode::InvalidArgument, "chunk_len must be in [1, 32]");
  }
  std::vector<Chunk> chunks;
  for (std::size_t offset = 0; offset < packet.samples.size();
       offset += chunk_len) {
    Chunk chunk;
    chunk.idx = packet.idx;
    chunk.offset = static_cast<std::uint32_t>(offset);
    chunk.rss_dbm = packet.rss_dbm;
    chunk.channel = packet.channel;
    chunk.timestamp = packet.timestamp;
    const std::size_t len = std::min(chunk_len, packet.samples.size() - offset);
    chunk.samples.assign(packet.samples.begin() + offset,
                         packet.samples.begin() + offset + len);
    chunks.push_back(std::move(chunk));
  }
  return chunks;
}

namespace {

json chunk_to_json(const Chunk& chunk, const SignalSchema& schema) {
  json samples = json::array();
  for (const IqPair& s : chunk.samples) {
    samples.push_back(json::array({s.i, s.q}));
  }
  json payload;
  payload[schema.idx] = chunk.idx;
  payload[schema.offset] = chunk.offset;
  payload[schema.rss] = chunk.rss_dbm;
  payload[schema.channel] = chunk.channel;
  payload[schema.samples] = std::move(samples);
  json entry;
  entry[schema.payload] = std::move(payload);
  entry[schema.timestamp] = chunk.timestamp;
  return entry;
}

}  // namespace

void write_signal_file(std::ostream& out, std::span<const Chunk> chunks,
                       const SignalSchema& schema) {
  for (const Chunk& chunk : chunks) {
    out << chunk_to_json(chunk, schema).dump() << '\n';
  }
}

void write_gt_file(std::ostream& out, std::span<const GtRecord> records) {
  for (const GtRecord& r : records) {
    json entry;
    entry["timestamp"] = r.timestamp;
    entry["position"] =
        json::array({r.position_mm.x, r.position_mm.y, r.position_mm.z});
    json rot = json::array();
    for (int row = 0; row < 3; ++row) {
      rot.push_back(json::array(
          {r.rotation[row][0], r.rotation[row][1], r.rotation[row][2]}));
    }
    entry["rotation"] = std::move(rot);
    out << entry.dump() << '\n';
  }
}

void write_packet_store(std::ostream& out, std::span<const CtePacket> packets) {
  for (const CtePacket& p : packets) {
    json samples = json::array();
    for (const IqPair& s : p.samples) samples.push_back(json::array({s.i, s.q}));
    json entry;
    entry["idx"] = p.idx;
    entry["complete"] = p.complete;
    entry["timestamp"] = p.timestamp;
    entry["rss"] = p.rss_dbm;
    entry["channel"] = p.channel;
    entry["samples"] = std::move(samples);
    out << entry.dump() << '\n';
  }
}

std::vector<CtePacket> read_packet_store(std::istream& in) {
  std::vector<CtePacket> packets;
  std::size_t n = 0;
  for (const json& entry : read_entries(in)) {
    const std::string where = "packet " + std::to_string(n++);
    CtePacket p;
    p.idx = static_cast<std::uint64_t>(require_int(entry, "idx", where));
    const json& complete = require_field(entry, "complete", where);
    if (!complete.is_boolean()) {
      throw Error(ErrorCode::MalformedJson, where + ".complete");
    }
    p.complete = complete.get<bool>();
    p.timestamp = require_number(entry, "timestamp", where);
    p.rss_dbm = static_cast<int>(require_int(entry, "rss", where));
    p.channel = static_cast<int>(require_int(entry, "channel", where));
    const json& samples = require_field(entry, "samples", where);
    if (!samples.is_array()) {
      throw Error(ErrorCode::MalformedJson, where + ".samples");
    }
    p.samples.reserve(samples.size());
    for (const json& s : samples) {
      if (!s.is_array() || s.size() != 2 || !s[0].is_number_integer() ||
          !s[1].is_number_integer()) {
        throw Error(ErrorCode::MalformedJson, where + ".samples entry");
      }
      p.samples.push_back({check_adc(s[0].get<std::int64_t>(), where),
                           check_adc(s[1].get<std::int64_t>(), where)});
    }
    packets.push_back(std::move(p));
  }
  return packets;
}

ConversionDict load_conversion_dict(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + file.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  json root = parse_json(buffer.str(), file.string());
  if (!root.is_object()) {
    throw Error(ErrorCode::MalformedJson, file.string() + ": not an object");
  }
  ConversionDict dict;
  for (const auto& [name, value] : root.items()) {
    if (!value.is_object()) {
      throw Error(ErrorCode::MalformedJson, file.string() + ": " + name);
    }
    const json& signal = require_field(value, "signal", name);
    const json& gt = require_field(value, "gt", name);
    if (!signal.is_string() || !gt.is_string()) {
      throw Error(ErrorCode::MalformedJson, file.string() + ": " + name);
    }
    ExperimentFiles files;
    files.signal = signal.get<std::string>();
    files.gt = gt.get<std::string>();
    if (value.contains("manifest") && value["manifest"].is_string()) {
      files.manifest = value["manifest"].get<std::string>();
    }
    dict.emplace(name, std::move(files));
  }
  return dict;
}

void save_conversion_dict(const std::filesystem::path& file,
                          const ConversionDict& dict) {
  json root = json::object();
  for (const auto& [name, files] : dict) {
    json entry;
    entry["signal"] = files.signal;
    entry["gt"] = files.gt;
    if (!files.manifest.empty()) entry["manifest"] = files.manifest;
    root[name] = std::move(entry);
  }
  std::ofstream out(file);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + file.string());
  out << root.dump(2) << '\n';
}

std::filesystem::path resolve_experiment_path(
    const std::filesystem::path& dict_file, const std::string& entry) {
  std::filesystem::path p(entry);
  if (p.is_absolute()) return p;
  return dict_file.parent_path() / p;
}

}  // namespace bleaoa::io
