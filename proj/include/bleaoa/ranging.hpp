#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "bleaoa/labeling.hpp"
#include "bleaoa/types.hpp"

namespace bleaoa::ranging {

/// One RSS vector with one entry per BLE data channel plus its distance
/// label. Every slot is populated when emitted by the assembler.
struct RangingFeatureRow {
  std::array<double, kBleDataChannels> rss_dbm{};
  double distance_m = 0.0;
};

/// Minimal per-packet view the feature assembler consumes.
struct RssObservation {
  double timestamp = 0.0;
  int channel = 0;
  double rss_dbm = 0.0;
  double distance_m = 0.0;
};

RssObservation to_observation(const label::LabeledPacket& packet);

struct RowAssemblyStats {
  std::size_t rows = 0;
  std::size_t resets = 0;    // partial rows cleared by an over-threshold gap
  std::size_t packets = 0;
  double mean_packets_per_row = 0.0;  // compare against the reported 50
};

/// Streaming implementation of the GPR dataset assembly: the latest RSS per
/// channel fills a 37-slot row (later packets on a filled channel overwrite);
/// a gap above mean_timestep clears the partial row; a full row is emitted
/// with the current packet's distance label.
class RowAssembler {
 public:
  explicit RowAssembler(double mean_timestep_s);

  // Returns the completed row, if this packet filled the last empty slot.
  std::optional<RangingFeatureRow> push(const RssObservation& obs);
  const RowAssemblyStats& stats() const { return stats_; }
  void finish();  // finalizes mean_packets_per_row

 private:
  double mean_timestep_s_;
  double last_timestamp_ = 0.0;
  bool have_last_ = false;
  std::array<double, kBleDataChannels> row_{};
  std::array<bool, kBleDataChannels> filled_{};
  int filled_count_ = 0;
  std::size_t packets_since_emit_ = 0;
  std::size_t packets_toward_rows_ = 0;
  RowAssemblyStats stats_;
};

struct RowAssembly {
  std::vector<RangingFeatureRow> rows;
  RowAssemblyStats stats;
};

RowAssembly build_feature_rows(std::span<const RssObservation> observations,
                               double mean_timestep_s);
RowAssembly build_feature_rows(std::span<const label::LabeledPacket> packets,
                               double mean_timestep_s);

/// Mean timestep over a time-ordered stream (the mu_t input above).
double mean_timestep(std::span<const RssObservation> observations);

/// Log-distance path loss: d(x) = 10^(-(x - x0) / (10 alpha)).
struct LogLossModel {
  double x0_dbm = 0.0;  // RSS at the 1 m reference distance
  double alpha = 2.0;   // path-loss exponent
};

/// Least-squares fit of RSS against log10(distance) over every populated
/// entry of the rows. Throws Error{DegenerateFit} with < 2 distinct
/// distances.
LogLossModel logloss_fit(std::span<const RangingFeatureRow> rows);
double logloss_predict(const LogLossModel& model, double rss_dbm);

/// One log-loss model per channel, with the pooled model as fallback for
/// channels that could not be fit.
struct ChillModel {
  std::array<std::optional<LogLossModel>, kBleDataChannels> per_channel;
  LogLossModel global;
};

struct ChillPrediction {
  double distance_m = 0.0;
  bool fallback_to_global = false;
};

ChillModel chill_fit(std::span<const RangingFeatureRow> rows);
ChillPrediction chill_predict(const ChillModel& model, int channel,
                              double rss_dbm);

struct GprParams {
  double rbf_variance = 1.0;     // sigma^2_RBF
  double lengthscale = 1.0;      // l
  double linear_variance = 1.0;  // sigma_linear
  double noise_variance = 0.1;
};

/// GP regression over RSS vectors with k = k_RBF + k_linear, where
/// k_RBF(x,x') = sigma^2 exp(-|x-x'|^2 / (2 l^2)) and
/// k_linear(x,x') = sigma_linear x.x'. Zero-mean after centering the labels.
class GprModel {
 public:
  struct Prediction {
    double mean_m = 0.0;
    double std_m = 0.0;  // predictive std-dev (includes the noise term)
  };

  /// Fit with fixed hyperparameters. Escalates diagonal jitter up to 1e-4 of
  /// the mean kernel diagonal before throwing Error{SingularKernel}.
  static GprModel fit(std::span<const RangingFeatureRow> train,
                      const GprParams& params);

  /// Throws Error{IncompleteFeature} when the query has non-finite entries.
  Prediction predict(const std::array<double, kBleDataChannels>& rss_dbm) const;

  const GprParams& params() const { return params_; }
  double log_marginal_likelihood() const { return lml_; }
  std::size_t train_size() const { return static_cast<std::size_t>(x_.rows()); }

 private:
  GprParams params_;
  Eigen::MatrixXd x_;       // M x 37 training inputs
  Eigen::VectorXd alpha_;   // (K + noise I)^-1 (y - mean)
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double y_mean_ = 0.0;
  double lml_ = 0.0;
};

struct GprFitResult {
  GprModel model;
  std::vector<std::size_t> train_indices;  // rows drawn for training
};

/// Draw train_size rows without replacement (seeded), then pick
/// hyperparameters by maximizing the log marginal likelihood over a
/// three-decade log grid per parameter with coordinate refinement.
/// Deterministic for a fixed seed.
GprFitResult gpr_fit(std::span<const RangingFeatureRow> rows,
                     std::size_t train_size, std::uint64_t seed);

/// Evaluation over held-out rows. LL and ChILL predict per populated channel
/// entry (pooled); GPR predicts once per row.
struct ModelEval {
  double mae_m = 0.0;
  double median_abs_error_m = 0.0;
  double error_variance_m2 = 0.0;
  double mean_posterior_variance_m2 = 0.0;  // NaN for non-GP models
  std::size_t count = 0;
};

ModelEval eval_logloss(const LogLossModel& model,
                       std::span<const RangingFeatureRow> test);
ModelEval eval_chill(const ChillModel& model,
                     std::span<const RangingFeatureRow> test);
ModelEval eval_gpr(const GprModel& model,
                   std::span<const RangingFeatureRow> test);

}  // namespace bleaoa::ranging
