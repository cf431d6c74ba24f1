#include "bleaoa/iq_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "bleaoa/angles.hpp"
#include "bleaoa/error.hpp"

namespace bleaoa::iq {

void CteLayout::validate() const {
  if (sample_rate_hz != 4e6) {
    throw Error(ErrorCode::InvalidLayout, "capture rate is fixed at 4 MHz");
  }
  if (slot_us != 1 && slot_us != 2) {
    throw Error(ErrorCode::InvalidLayout, "slot length must be 1 or 2 us");
  }
  if (antennas_per_array < 2) {
    throw Error(ErrorCode::InvalidLayout, "need at least 2 antennas");
  }
  if (switch_pattern.empty()) {
    throw Error(ErrorCode::InvalidLayout, "empty switch pattern");
  }
  for (int antenna : switch_pattern) {
    if (antenna < 0 || antenna >= antennas_per_array) {
      throw Error(ErrorCode::InvalidLayout, "switch pattern antenna out of range");
    }
  }
  if (std::abs(slot_offset_samples) >= slot_samples()) {
    throw Error(ErrorCode::InvalidLayout, "slot offset exceeds one slot");
  }
}

SlottedCte slot_filter(const CtePacket& packet, const CteLayout& layout) {
  layout.validate();
  if (layout.slot_us != 2) {
    // 1 us slots pass layout validation but the AoA hardware never emits
    // them; filtering support stops here.
    throw Error(ErrorCode::InvalidLayout, "slot filtering requires 2 us slots");
  }
  if (!packet.complete || packet.samples.size() != kCteSampleCount) {
    throw Error(ErrorCode::IncompletePacket, "idx " + std::to_string(packet.idx));
  }

  SlottedCte out;
  out.idx = packet.idx;
  out.channel = packet.channel;
  out.rss_dbm = packet.rss_dbm;
  out.timestamp = packet.timestamp;
  out.antenna_count = layout.antennas_per_array;
  out.slot_samples = layout.slot_samples();

  // The stored stream starts at the reference period; the guard period was
  // never sampled and the register cap truncated the tail.
  const int ref_len = layout.reference_samples();
  out.reference.assign(packet.samples.begin(), packet.samples.begin() + ref_len);

  const int slot_len = layout.slot_samples();
  const int first_slot_start = ref_len + layout.slot_offset_samples;
  const int total = static_cast<int>(packet.samples.size());
  const int slot_count = (total - first_slot_start) / slot_len;

  // Keep the middle half of each dwell; the edges carry switching
  // transients.
  const int retain = slot_len / 2;
  const int lead = (slot_len - retain) / 2;
  out.retained_per_slot = retain;

  out.per_antenna.assign(layout.antennas_per_array, {});
  const auto& pattern = layout.switch_pattern;
  for (int s = 0; s < slot_count; ++s) {
    const int start = first_slot_start + s * slot_len;
    const int antenna = pattern[s % pattern.size()];
    SlotSamples slot;
    slot.antenna = antenna;
    slot.round = s / static_cast<int>(pattern.size());
    slot.slot_index = s;
    slot.center_sample = start + (slot_len - 1) / 2.0;
    slot.retained.assign(packet.samples.begin() + start + lead,
                         packet.samples.begin() + start + lead + retain);
    out.per_antenna[antenna].push_back(std::move(slot));
  }

  // A round counts once every antenna in the pattern has been visited.
  out.rounds = slot_count / static_cast<int>(pattern.size());
  return out;
}

namespace {

double sample_phase(const IqPair& s) {
  const double magnitude = std::hypot(static_cast<double>(s.i),
                                      static_cast<double>(s.q));
  // 1e-12 of the 16-bit full scale; only a true (0, 0) sample trips this.
  if (magnitude < 1e-12 * 32768.0) {
    throw Error(ErrorCode::ZeroMagnitudeSample, "zero-magnitude IQ sample");
  }
  return std::atan2(static_cast<double>(s.q), static_cast<double>(s.i));
}

// Mean of atan2 phases with drift across the slot unwrapped against the
// first sample.
double slot_phase(const SlotSamples& slot) {
  if (slot.retained.empty()) {
    throw Error(ErrorCode::Empty, "sampling slot retained no samples");
  }
  double first = sample_phase(slot.retained.front());
  double sum = first;
  double prev = first;
  for (std::size_t k = 1; k < slot.retained.size(); ++k) {
    const double ph = unwrap_step(prev, sample_phase(slot.retained[k]));
    sum += ph;
    prev = ph;
  }
  return sum / static_cast<double>(slot.retained.size());
}

}  // namespace

CtePhases extract_phases(const SlottedCte& slotted) {
  CtePhases out;
  out.rounds = slotted.rounds;

  out.reference_phase.reserve(slotted.reference.size());
  for (const IqPair& s : slotted.reference) {
    out.reference_phase.push_back(sample_phase(s));
  }
  unwrap_in_place(out.reference_phase);

  out.per_antenna.resize(slotted.per_antenna.size());
  for (std::size_t a = 0; a < slotted.per_antenna.size(); ++a) {
    PhaseSeq& seq = out.per_antenna[a];
    for (const SlotSamples& slot : slotted.per_antenna[a]) {
      seq.phase.push_back(slot_phase(slot));
      seq.center_sample.push_back(slot.center_sample);
    }
    unwrap_in_place(seq.phase);
  }
  return out;
}

void dump_slots_csv(std::ostream& out, const SlottedCte& slotted) {
  out << "slot_index,antenna,round,phase_rad\n";
  struct Row {
    int slot, antenna, round;
    double phase;
  };
  std::vector<Row> rows;
  for (const auto& slots : slotted.per_antenna) {
    for (const SlotSamples& slot : slots) {
      rows.push_back({slot.slot_index, slot.antenna, slot.round,
                      slot_phase(slot)});
    }
  }
  std::sort(rows.begin(), rows.end(),
            [](const Row& a, const Row& b) { return a.slot < b.slot; });
  char buf[32];
  for (const Row& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.9f", r.phase);
    out << r.slot << ',' << r.antenna << ',' << r.round << ',' << buf << '\n';
  }
}

}  // namespace bleaoa::iq
