#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "bleaoa/aoa.hpp"
#include "bleaoa/dataset_io.hpp"
#include "bleaoa/iq_pipeline.hpp"
#include "bleaoa/labeling.hpp"
#include "bleaoa/ranging.hpp"
#include "bleaoa/types.hpp"

namespace bleaoa::sim {

enum class PathKind { continuous, stopping, zigzag };

PathKind path_kind_from_string(const std::string& name);
std::string to_string(PathKind kind);

/// Angular sector with extra attenuation, emulating an obstacle in the
/// line-of-sight path.
struct ObstacleSector {
  double start_deg = 0.0;
  double end_deg = 0.0;
  double attenuation_db = 0.0;
};

struct ScenarioConfig {
  PathKind path = PathKind::continuous;
  double tag_height_mm = 1100.0;
  double distance_mm = 2000.0;  // constant radius (continuous/stopping)
  double zigzag_min_mm = 1500.0;
  double zigzag_max_mm = 3000.0;
  int zigzag_legs = 6;
  double sweep_start_deg = -135.0;
  double sweep_end_deg = 135.0;
  double sweep_duration_s = 60.0;  // continuous/zigzag
  double dwell_s = 25.0;           // stopping: dwell per increment
  double step_deg = 5.0;           // stopping: angular increment
  double move_speed_deg_s = 5.0;   // stopping: speed between increments
  double connection_interval_s = 0.1;
  double mocap_mean_dt_s = 0.0578;
  double mocap_jitter = 0.2;  // fraction of the mean step
  double snr_db = 30.0;       // phase-noise sigma = 1/sqrt(2*SNR)
  double cfo_hz = 0.0;
  double rss_at_1m_dbm = -40.0;
  double path_loss_alpha = 2.0;
  double alpha_channel_spread = 0.0;     // total width of per-channel alpha
  double rss_noise_db = 0.0;
  double rss_gain_slope_db_per_deg = 0.1;  // sub-array directivity model
  std::vector<ObstacleSector> obstacles;
  // Swap which sub-array sees the higher RSS inside a sector, reproducing
  // the anomalous selection behaviour observed on real hardware.
  bool rss_anomaly = false;
  double anomaly_start_deg = -135.0;
  double anomaly_end_deg = -50.0;
  double start_time_s = 1.7e9;
  label::AnchorConfig anchor;
  iq::CteLayout layout;
  aoa::ArrayGeometry geometry;
};

/// True per-packet state recorded alongside the generated files.
struct TruthRecord {
  std::uint64_t idx = 0;
  double timestamp = 0.0;
  double azimuth_deg = 0.0;    // device frame
  double theta_ula_deg = 0.0;  // frame of the sub-array that captured it
  int sub_array = 1;
  double distance_mm = 0.0;
  int channel = 0;
  int rss_dbm = 0;
  double cfo_hz = 0.0;
};

struct Scenario {
  std::vector<Chunk> chunks;  // shuffled, as the asynchronous logger emits
  std::vector<GtRecord> gt;
  std::vector<TruthRecord> truth;
};

/// Deterministic for a fixed (config, seed). Emitted chunks and GT records
/// parse back through the dataset-io module bit-exactly.
Scenario generate_scenario(const ScenarioConfig& config, std::uint64_t seed);

/// Write <name>.signal.json, <name>.gt.json and <name>.manifest.jsonl under
/// dir, then merge the experiment into dir/conversion_dict.json.
void write_scenario(const std::filesystem::path& dir, const std::string& name,
                    const Scenario& scenario,
                    const io::SignalSchema& schema = {});

std::vector<TruthRecord> read_manifest(std::istream& in);
void write_manifest(std::ostream& out, std::span<const TruthRecord> truth);

/// Forward model for the ranging experiments: RSS drawn from a per-channel
/// log-loss curve with additive Gaussian noise, channels uniform over the 37
/// data channels, tag distance sweeping the configured range.
struct RssWorldConfig {
  double x0_dbm = -40.0;
  double alpha = 2.0;
  double alpha_channel_spread = 0.0;  // alpha_c = alpha +- spread/2
  double rss_noise_db = 0.0;
  double d_min_m = 1.5;
  double d_max_m = 3.0;
  double interval_s = 0.1;
  std::size_t count = 10000;
  std::size_t gap_every_n = 0;  // inject a >mu_t gap every n packets; 0 = off
  double gap_factor = 3.0;
};

std::vector<ranging::RssObservation> generate_rss_dataset(
    const RssWorldConfig& config, std::uint64_t seed);

/// Per-channel path-loss exponents used by the forward model (deterministic
/// in the seed); exposed so tests can invert the construction.
std::array<double, kBleDataChannels> channel_alphas(const RssWorldConfig& config,
                                                    std::uint64_t seed);

}  // namespace bleaoa::sim
