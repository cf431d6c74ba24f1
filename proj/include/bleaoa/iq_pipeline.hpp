#pragma once

#include <iosfwd>
#include <vector>

#include "bleaoa/types.hpp"

namespace bleaoa::iq {

/// CTE timing layout. The TI capture runs at a fixed 4 MHz and the 511-sample
/// stream starts at the reference period (the guard period is never stored;
/// the register cap truncates the tail of the sampling period, not the head).
struct CteLayout {
  double sample_rate_hz = 4e6;
  int guard_us = 4;
  int reference_us = 8;
  int slot_us = 2;  // antenna dwell; AoA hardware forces 2
  int antennas_per_array = 3;
  std::vector<int> switch_pattern = {0, 1, 2};  // cyclic, within one sub-array
  // Empirical shift of the first slot boundary relative to sample 32, in
  // samples. Real hardware may be off by +-1; default 0.
  int slot_offset_samples = 0;

  int samples_per_us() const { return static_cast<int>(sample_rate_hz / 1e6); }
  int reference_samples() const { return reference_us * samples_per_us(); }
  int slot_samples() const { return slot_us * samples_per_us(); }

  void validate() const;  // throws Error{InvalidLayout}
};

/// Retained samples of one antenna dwell.
struct SlotSamples {
  int antenna = 0;      // element index along the ULA
  int round = 0;        // 0-based pass through the switch pattern
  int slot_index = 0;   // dwell index counted from the end of the reference
  double center_sample = 0.0;  // center of the retained window, stream samples
  std::vector<IqPair> retained;
};

/// A packet sliced into reference samples and per-antenna dwell samples.
struct SlottedCte {
  std::vector<IqPair> reference;
  std::vector<std::vector<SlotSamples>> per_antenna;  // [element][time order]
  int rounds = 0;            // complete passes through the switch pattern
  int retained_per_slot = 0; // p
  int slot_samples = 8;
  int antenna_count = 3;
  // carried packet metadata
  std::uint64_t idx = 0;
  int channel = 0;
  int rss_dbm = 0;
  double timestamp = 0.0;
};

/// Slice a complete packet: 32 reference samples, then consecutive 8-sample
/// antenna dwells assigned cyclically per switch_pattern. The middle 4
/// samples of each dwell are retained; dwell edges carry switching
/// transients and are dropped. Throws Error{IncompletePacket}.
SlottedCte slot_filter(const CtePacket& packet, const CteLayout& layout = {});

struct PhaseSeq {
  std::vector<double> phase;          // radians, unwrapped across rounds
  std::vector<double> center_sample;  // matching retained-window centers
};

struct CtePhases {
  std::vector<double> reference_phase;  // unwrapped, one per reference sample
  std::vector<PhaseSeq> per_antenna;
  int rounds = 0;
};

/// Per-slot phase = atan2(q, i) averaged over the retained samples (wrap
/// handled), then unwrapped per antenna across rounds.
/// Throws Error{ZeroMagnitudeSample} for samples with |IQ| ~ 0.
CtePhases extract_phases(const SlottedCte& slotted);

/// Diagnostic dump: slot_index,antenna,round,phase CSV rows.
void dump_slots_csv(std::ostream& out, const SlottedCte& slotted);

}  // namespace bleaoa::iq
