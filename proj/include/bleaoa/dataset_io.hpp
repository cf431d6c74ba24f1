#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "bleaoa/types.hpp"

namespace bleaoa::io {

/// JSON key names used by the signal logs. Defaults match the logs produced
/// by the TI collection script; override for logs with renamed keys.
struct SignalSchema {
  std::string payload = "payload";
  std::string timestamp = "timestamp";
  std::string idx = "idx";
  std::string offset = "offset";
  std::string rss = "rss";
  std::string channel = "channel";
  std::string samples = "samples";
};

/// Parse a signal log (JSON lines or a single top-level array) into chunks,
/// preserving file order. Unknown keys are ignored.
/// Throws Error{MalformedJson|MissingField|OutOfRange}.
std::vector<Chunk> parse_signal_file(std::istream& stream,
                                     const SignalSchema& schema = {});
std::vector<Chunk> parse_signal_text(std::string_view text,
                                     const SignalSchema& schema = {});

/// Group chunks by idx and rebuild CTE packets. Chunks may arrive in any
/// order; a packet is complete iff every position in [0, 511) was written
/// exactly once. Output is ordered by earliest chunk timestamp (ties by idx).
/// Throws Error{OverlappingChunks|ConflictingMetadata}.
std::vector<CtePacket> reassemble(std::span<const Chunk> chunks);

/// Parse a ground-truth log into records sorted by timestamp; duplicate
/// timestamps keep the first occurrence.
/// Throws Error{MalformedJson|MissingField|NonOrthonormalRotation}.
std::vector<GtRecord> parse_gt_file(std::istream& stream);
std::vector<GtRecord> parse_gt_text(std::string_view text);

/// Split a packet back into write-order chunks (all of `chunk_len` samples
/// except a shorter tail). Inverse of reassemble for complete packets.
std::vector<Chunk> packet_to_chunks(const CtePacket& packet,
                                    std::size_t chunk_len = kChunkMaxSamples);

void write_signal_file(std::ostream& out, std::span<const Chunk> chunks,
                       const SignalSchema& schema = {});
void write_gt_file(std::ostream& out, std::span<const GtRecord> records);

// Canonical packet store: JSON lines, one CtePacket per line.
void write_packet_store(std::ostream& out, std::span<const CtePacket> packets);
std::vector<CtePacket> read_packet_store(std::istream& in);

/// Files belonging to one experiment, as named by the conversion dictionary.
struct ExperimentFiles {
  std::string signal;
  std::string gt;
  std::string manifest;  // optional, synthetic scenarios only

  friend bool operator==(const ExperimentFiles&, const ExperimentFiles&) = default;
};

using ConversionDict = std::map<std::string, ExperimentFiles>;

/// Load a conversion dictionary (experiment name -> file-name pair). Relative
/// paths stay relative to the dictionary's directory; resolve_experiment_path
/// joins them.
ConversionDict load_conversion_dict(const std::filesystem::path& file);
void save_conversion_dict(const std::filesystem::path& file,
                          const ConversionDict& dict);
std::filesystem::path resolve_experiment_path(const std::filesystem::path& dict_file,
                                              const std::string& entry);

}  // namespace bleaoa::io
