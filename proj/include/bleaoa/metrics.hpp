#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace bleaoa::metrics {

// All angle errors are wrapped into (-180, 180] before aggregation; +-135
// degree sweeps make the wrap necessary even though the printed formulas
// omit it.

/// Mean absolute wrapped error. Throws Error{LengthMismatch|Empty}.
double mae_deg(std::span<const double> gt, std::span<const double> est);

/// MAE restricted to samples with gt in [lo, hi].
/// Throws Error{EmptySubset} when nothing falls inside.
double range_mae_deg(std::span<const double> gt, std::span<const double> est,
                     double lo_deg = -50.0, double hi_deg = 50.0);

/// Root mean squared wrapped error.
double rmse_deg(std::span<const double> gt, std::span<const double> est);

struct CrlbParams {
  int samples_per_slot = 4;   // p
  int rounds = 19;            // m
  int elements = 3;           // n
  double sigma_rad = 0.1;     // phase std-dev
  double spacing_m = 0.0614;  // d
  double f_c_hz = 2.44e9;
  double c = 299792458.0;
  double theta_deg = 90.0;    // must lie strictly inside (0, 180)

  void validate() const;
};

/// Lower bound on the angle-estimate RMSE, in degrees:
///   sqrt(3 / (2 p m n (n-1)(2n-1))) * sigma c / (pi d f_c sin theta)
/// Throws Error{SingularAngle} at theta in {0, 180}.
double crlb_deg(const CrlbParams& params);

/// Empirical CDF: sorted (value, fraction <= value) pairs, one per distinct
/// value, right-continuous, ending at (max, 1.0). Throws Error{Empty}.
std::vector<std::pair<double, double>> cdf(std::span<const double> values);

/// Single-anchor localization error d * tan(E[theta_e]).
/// Throws Error{OutOfRange} for |expected_angle_error| >= 90.
double single_anchor_error_m(double distance_m, double expected_angle_error_deg);

struct ErrorReport {
  double mae_deg = 0.0;
  double range_mae_deg = 0.0;       // NaN when no GT falls in [lo, hi]
  double moving_avg_mae_deg = 0.0;  // window-6 smoothing applied to est first
  double rmse_deg = 0.0;
  std::vector<std::pair<double, double>> cdf;  // of absolute wrapped errors
  std::size_t count = 0;
  std::size_t range_count = 0;
};

ErrorReport compute_report(std::span<const double> gt,
                           std::span<const double> est,
                           std::size_t moving_avg_window = 6,
                           double range_lo_deg = -50.0,
                           double range_hi_deg = 50.0);

// CSV emitters (plotting happens elsewhere; the CLI only ships data).
void write_report_csv_header(std::ostream& out);
void write_report_csv_row(std::ostream& out, const std::string& experiment,
                          double height_mm, bool obstacles,
                          const ErrorReport& report);
void write_cdf_csv(std::ostream& out,
                   std::span<const std::pair<double, double>> cdf);

}  // namespace bleaoa::metrics
