#include "bleaoa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "bleaoa/angles.hpp"
#include "bleaoa/aoa.hpp"
#include "bleaoa/error.hpp"

namespace bleaoa::metrics {
namespace {

void check_pair(std::span<const double> gt, std::span<const double> est) {
  if (gt.size() != est.size()) {
    throw Error(ErrorCode::LengthMismatch,
                std::to_string(gt.size()) + " vs " + std::to_string(est.size()));
  }
  if (gt.empty()) throw Error(ErrorCode::Empty, "no samples");
}

}  // namespace

double mae_deg(std::span<const double> gt, std::span<const double> est) {
  check_pair(gt, est);
  double sum = 0.0;
  for (std::size_t k = 0; k < gt.size(); ++k) {
    sum += std::abs(wrap_deg(est[k] - gt[k]));
  }
  return sum / static_cast<double>(gt.size());
}

double range_mae_deg(std::span<const double> gt, std::span<const double> est,
                     double lo_deg, double hi_deg) {
  check_pair(gt, est);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < gt.size(); ++k) {
    if (gt[k] < lo_deg || gt[k] > hi_deg) continue;
    sum += std::abs(wrap_deg(est[k] - gt[k]));
    ++count;
  }
  if (count == 0) {
    throw Error(ErrorCode::EmptySubset, "no GT angles inside the range");
  }
  return sum / static_cast<double>(count);
}

double rmse_deg(std::span<const double> gt, std::span<const double> est) {
  check_pair(gt, est);
  double sum = 0.0;
  for (std::size_t k = 0; k < gt.size(); ++k) {
    const double e = wrap_deg(est[k] - gt[k]);
    sum += e * e;
  }
  return std::sqrt(sum / static_cast<double>(gt.size()));
}

void CrlbParams::validate() const {
  if (samples_per_slot <= 0 || rounds <= 0 || elements < 2) {
    throw Error(ErrorCode::InvalidArgument, "p, m positive and n >= 2 required");
  }
  if (!(sigma_rad > 0.0) || !(spacing_m > 0.0) || !(f_c_hz > 0.0) || !(c > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "sigma, d, f_c, c must be positive");
  }
  if (!(theta_deg > 0.0) || !(theta_deg < 180.0)) {
    throw Error(ErrorCode::SingularAngle,
                "theta must lie strictly inside (0, 180)");
  }
}

double crlb_deg(const CrlbParams& p) {
  p.validate();
  const double n = static_cast<double>(p.elements);
  const double denom = 2.0 * p.samples_per_slot * p.rounds * n * (n - 1.0) *
                       (2.0 * n - 1.0);
  const double bound_rad = std::sqrt(3.0 / denom) * p.sigma_rad * p.c /
                           (kPi * p.spacing_m * p.f_c_hz *
                            std::sin(deg_to_rad(p.theta_deg)));
  return rad_to_deg(bound_rad);
}

std::vector<std::pair<double, double>> cdf(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::Empty, "no values");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::pair<double, double>> out;
  const double n = static_cast<double>(sorted.size());
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    const double v = sorted[k];
    if (!out.empty() && out.back().first == v) {
      out.back().second = static_cast<double>(k + 1) / n;
    } else {
      out.emplace_back(v, static_cast<double>(k + 1) / n);
    }
  }
  return out;
}

double single_anchor_error_m(double distance_m,
                             double expected_angle_error_deg) {
  if (std::abs(expected_angle_error_deg) >= 90.0) {
    throw Error(ErrorCode::OutOfRange,
                "expected angle error must satisfy |e| < 90 deg");
  }
  return distance_m * std::tan(deg_to_rad(expected_angle_error_deg));
}

ErrorReport compute_report(std::span<const double> gt,
                           std::span<const double> est,
                           std::size_t moving_avg_window, double range_lo_deg,
                           double range_hi_deg) {
  check_pair(gt, est);
  ErrorReport report;
  report.count = gt.size();
  report.mae_deg = mae_deg(gt, est);
  report.rmse_deg = rmse_deg(gt, est);

  report.range_count = 0;
  for (double g : gt) {
    if (g >= range_lo_deg && g <= range_hi_deg) ++report.range_count;
  }
  report.range_mae_deg = report.range_count > 0
                             ? range_mae_deg(gt, est, range_lo_deg, range_hi_deg)
                             : std::numeric_limits<double>::quiet_NaN();

  // The vendor firmware smooths estimates before reporting; mirror that for
  // the moving-average column. Window state never crosses report boundaries.
  aoa::MovingAverage smoother(moving_avg_window);
  std::vector<double> smoothed;
  smoothed.reserve(est.size());
  for (double e : est) smoothed.push_back(smoother.push(e));
  report.moving_avg_mae_deg = mae_deg(gt, smoothed);

  std::vector<double> abs_errors;
  abs_errors.reserve(gt.size());
  for (std::size_t k = 0; k < gt.size(); ++k) {
    abs_errors.push_back(std::abs(wrap_deg(est[k] - gt[k])));
  }
  report.cdf = cdf(abs_errors);
  return report;
}

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

void write_report_csv_header(std::ostream& out) {
  out << "experiment,height_mm,obstacles,count,range_count,"
         "mae_deg,range_mae_deg,moving_avg_mae_deg,rmse_deg\n";
}

void write_report_csv_row(std::ostream& out, const std::string& experiment,
                          double height_mm, bool obstacles,
                          const ErrorReport& report) {
  out << experiment << ',' << fmt(height_mm) << ',' << (obstacles ? 1 : 0)
      << ',' << report.count << ',' << report.range_count << ','
      << fmt(report.mae_deg) << ',' << fmt(report.range_mae_deg) << ','
      << fmt(report.moving_avg_mae_deg) << ',' << fmt(report.rmse_deg) << '\n';
}

void write_cdf_csv(std::ostream& out,
                   std::span<const std::pair<double, double>> cdf) {
  out << "error_deg,fraction\n";
  for (const auto& [value, fraction] : cdf) {
    out << fmt(value) << ',' << fmt(fraction) << '\n';
  }
}

}  // namespace bleaoa::metrics
