#include "bleaoa/aoa.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>

#include "bleaoa/angles.hpp"
#include "bleaoa/error.hpp"

namespace bleaoa::aoa {

using nlohmann::json;

std::array<double, kBleDataChannels> default_channel_frequencies() {
  // Data channels 0..10 sit at 2404 + 2k MHz, 11..36 at 2428 + 2(k-11) MHz;
  // the gaps are the advertising channels (2402, 2426, 2480 MHz).
  std::array<double, kBleDataChannels> freq{};
  for (int k = 0; k < kBleDataChannels; ++k) {
    const double mhz = (k <= 10) ? 2404.0 + 2.0 * k : 2428.0 + 2.0 * (k - 11);
    freq[k] = mhz * 1e6;
  }
  return freq;
}

double ArrayGeometry::frequency_hz(int channel) const {
  if (channel < 0 || channel >= kBleDataChannels) {
    throw Error(ErrorCode::OutOfRange, "channel " + std::to_string(channel));
  }
  return channel_freq_hz[channel];
}

void ArrayGeometry::validate() const {
  if (elements < 2) throw Error(ErrorCode::InvalidArgument, "elements < 2");
  if (spacing_m <= 0.0) throw Error(ErrorCode::InvalidArgument, "spacing <= 0");
  for (double f : channel_freq_hz) {
    if (!(f > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "channel frequency <= 0");
    }
  }
}

double CalibrationTable::offset(int sub_array, int antenna, int channel) const {
  if (sub_array < 1 || sub_array > 2) {
    throw Error(ErrorCode::OutOfRange, "sub_array must be 1 or 2");
  }
  const auto& per_antenna = table_[sub_array - 1];
  if (per_antenna.empty()) return 0.0;
  if (antenna < 0 || antenna >= static_cast<int>(per_antenna.size()) ||
      channel < 0 || channel >= kBleDataChannels) {
    throw Error(ErrorCode::OutOfRange, "calibration lookup");
  }
  return per_antenna[antenna][channel];
}

void CalibrationTable::set(int sub_array, int antenna, int channel,
                           double radians) {
  if (sub_array < 1 || sub_array > 2 || antenna < 0 || channel < 0 ||
      channel >= kBleDataChannels) {
    throw Error(ErrorCode::OutOfRange, "calibration entry");
  }
  auto& per_antenna = table_[sub_array - 1];
  if (antenna >= static_cast<int>(per_antenna.size())) {
    per_antenna.resize(antenna + 1);
  }
  if (!std::isfinite(radians)) {
    throw Error(ErrorCode::InvalidArgument, "calibration offset must be finite");
  }
  per_antenna[antenna][channel] = radians;
}

CalibrationTable CalibrationTable::load_json(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + file.string());
  json root;
  try {
    in >> root;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedJson, file.string() + ": " + e.what());
  }
  CalibrationTable table;
  const auto& subs = root.at("sub_arrays");
  for (std::size_t s = 0; s < subs.size() && s < 2; ++s) {
    const auto& antennas = subs[s].at("antennas");
    for (std::size_t a = 0; a < antennas.size(); ++a) {
      const auto& offsets = antennas[a];
      if (!offsets.is_array() || offsets.size() != kBleDataChannels) {
        throw Error(ErrorCode::MalformedJson,
                    file.string() + ": expected 37 offsets per antenna");
      }
      for (int c = 0; c < kBleDataChannels; ++c) {
        table.set(static_cast<int>(s) + 1, static_cast<int>(a), c,
                  offsets[c].get<double>());
      }
    }
  }
  return table;
}

double reference_cfo_slope(const iq::CtePhases& phases) {
  const auto& ref = phases.reference_phase;
  if (ref.size() < 2) {
    throw Error(ErrorCode::Empty, "reference period too short for a CFO fit");
  }
  // Mean per-sample slope; with unwrapped phases this telescopes.
  return (ref.back() - ref.front()) / static_cast<double>(ref.size() - 1);
}

double round_cfo_slope(const iq::CtePhases& phases) {
  if (phases.rounds < 2) {
    throw Error(ErrorCode::InsufficientRounds,
                "previous-round CFO needs >= 2 rounds");
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (const iq::PhaseSeq& seq : phases.per_antenna) {
    for (std::size_t r = 0; r + 1 < seq.phase.size(); ++r) {
      const double dt = seq.center_sample[r + 1] - seq.center_sample[r];
      // Same antenna, one switching cycle apart; the wrap keeps CFOs up to
      // half a cycle per round unambiguous (~83 kHz at 4 MHz / 24 samples).
      sum += wrap_rad(seq.phase[r + 1] - seq.phase[r]) / dt;
      ++count;
    }
  }
  if (count == 0) {
    throw Error(ErrorCode::InsufficientRounds, "no consecutive rounds");
  }
  return sum / static_cast<double>(count);
}

namespace {

struct CorrectedPhases {
  // [antenna][round] CFO-corrected phase; only complete rounds retained.
  std::vector<std::vector<double>> phase;
  int rounds = 0;
};

CorrectedPhases correct_phases(const iq::CtePhases& phases, double slope) {
  CorrectedPhases out;
  out.rounds = phases.rounds;
  out.phase.resize(phases.per_antenna.size());
  for (std::size_t a = 0; a < phases.per_antenna.size(); ++a) {
    const iq::PhaseSeq& seq = phases.per_antenna[a];
    const int usable = std::min<int>(phases.rounds,
                                     static_cast<int>(seq.phase.size()));
    out.phase[a].reserve(usable);
    for (int r = 0; r < usable; ++r) {
      out.phase[a].push_back(seq.phase[r] - slope * seq.center_sample[r]);
    }
  }
  return out;
}

double phase_to_cos(double dphi, double spacing_m, double f_c, double c) {
  return dphi * c / (2.0 * kPi * f_c * spacing_m);
}

UlaEstimate finish_estimate(double cos_theta) {
  UlaEstimate est;
  if (cos_theta > 1.0 || cos_theta < -1.0) {
    est.ambiguous = true;
    cos_theta = std::clamp(cos_theta, -1.0, 1.0);
  }
  est.theta_ula_deg = rad_to_deg(std::acos(cos_theta));
  est.low_confidence = est.theta_ula_deg < 10.0 || est.theta_ula_deg > 170.0;
  return est;
}

}  // namespace

UlaEstimate pdoa_naive(const iq::SlottedCte& slotted, const ArrayGeometry& geom,
                       int channel) {
  geom.validate();
  const double f_c = geom.frequency_hz(channel);
  const iq::CtePhases phases = extract_phases(slotted);
  if (phases.rounds < 1) {
    throw Error(ErrorCode::InsufficientRounds, "no complete switching round");
  }
  const CorrectedPhases corrected =
      correct_phases(phases, reference_cfo_slope(phases));

  // Adjacent-element differences, averaged across rounds. True |dphi| stays
  // below pi for spacings up to lambda/2, so a plain wrap is safe.
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t a = 0; a + 1 < corrected.phase.size(); ++a) {
    for (int r = 0; r < corrected.rounds; ++r) {
      sum += wrap_rad(corrected.phase[a + 1][r] - corrected.phase[a][r]);
      ++count;
    }
  }
  if (count == 0) throw Error(ErrorCode::InsufficientRounds, "no antenna pairs");
  const double dphi = sum / static_cast<double>(count);
  return finish_estimate(phase_to_cos(dphi, geom.spacing_m, f_c, geom.c));
}

UlaEstimate pdoa_ti(const iq::SlottedCte& slotted, const ArrayGeometry& geom,
                    int channel, const CalibrationTable& calib,
                    const AngleAdjustment& adjustment) {
  geom.validate();
  const double f_c = geom.frequency_hz(channel);
  const iq::CtePhases raw = extract_phases(slotted);
  if (raw.rounds < 2) {
    throw Error(ErrorCode::InsufficientRounds,
                "TI PDoA needs >= 2 switching rounds");
  }

  // Sub-array parity convention matches the capture firmware: even idx is
  // array 1, odd idx is array 2.
  const int sub_array = (slotted.idx % 2 == 0) ? 1 : 2;
  iq::CtePhases phases = raw;
  for (std::size_t a = 0; a < phases.per_antenna.size(); ++a) {
    const double offset = calib.offset(sub_array, static_cast<int>(a), channel);
    for (double& ph : phases.per_antenna[a].phase) ph -= offset;
  }

  const CorrectedPhases corrected =
      correct_phases(phases, round_cfo_slope(phases));
  if (corrected.phase.size() < 3) {
    throw Error(ErrorCode::InvalidLayout, "TI PDoA expects 3 elements");
  }

  double d12 = 0.0, d23 = 0.0, d13 = 0.0;
  for (int r = 0; r < corrected.rounds; ++r) {
    const double p1 = corrected.phase[0][r];
    const double p2 = corrected.phase[1][r];
    const double p3 = corrected.phase[2][r];
    const double w12 = wrap_rad(p2 - p1);
    const double w23 = wrap_rad(p3 - p2);
    // The wide pair spans 2d and can exceed a full cycle; anchor its wrap on
    // the adjacent-pair sum, which predicts the same geometry.
    const double expected13 = w12 + w23;
    const double w13 = expected13 + wrap_rad((p3 - p1) - expected13);
    d12 += w12;
    d23 += w23;
    d13 += w13;
  }
  d12 /= corrected.rounds;
  d23 /= corrected.rounds;
  d13 /= corrected.rounds;

  const double u12 = phase_to_cos(d12, geom.spacing_m, f_c, geom.c);
  const double u23 = phase_to_cos(d23, geom.spacing_m, f_c, geom.c);
  const double u13 = phase_to_cos(d13 / 2.0, geom.spacing_m, f_c, geom.c);

  UlaEstimate est;
  est.ambiguous = std::abs(u12) > 1.0 || std::abs(u23) > 1.0 || std::abs(u13) > 1.0;
  const double theta =
      (rad_to_deg(std::acos(std::clamp(u12, -1.0, 1.0))) +
       rad_to_deg(std::acos(std::clamp(u23, -1.0, 1.0))) +
       rad_to_deg(std::acos(std::clamp(u13, -1.0, 1.0)))) / 3.0;
  est.theta_ula_deg = adjustment.apply(theta);
  est.low_confidence = est.theta_ula_deg < 10.0 || est.theta_ula_deg > 170.0;
  return est;
}

UlaEstimate music(const iq::SlottedCte& slotted, const ArrayGeometry& geom,
                  int channel, double grid_deg) {
  geom.validate();
  if (grid_deg <= 0.0) {
    throw Error(ErrorCode::InvalidArgument, "grid step must be positive");
  }
  const double f_c = geom.frequency_hz(channel);
  const int n = geom.elements;
  const int snapshots = slotted.rounds;
  if (snapshots < n) {
    throw Error(ErrorCode::RankDeficient,
                "need >= " + std::to_string(n) + " snapshots");
  }

  const iq::CtePhases phases = extract_phases(slotted);
  const double slope = reference_cfo_slope(phases);

  // One complex snapshot per antenna per round: the retained samples
  // derotated by the CFO ramp, then averaged.
  Eigen::MatrixXcd x(n, snapshots);
  for (int a = 0; a < n; ++a) {
    const auto& slots = slotted.per_antenna[a];
    for (int r = 0; r < snapshots; ++r) {
      const iq::SlotSamples& slot = slots[r];
      std::complex<double> acc{0.0, 0.0};
      const int len = static_cast<int>(slot.retained.size());
      const double start = slot.center_sample - (len - 1) / 2.0;
      for (int k = 0; k < len; ++k) {
        const IqPair& s = slot.retained[k];
        const std::complex<double> v(static_cast<double>(s.i),
                                     static_cast<double>(s.q));
        acc += v * std::polar(1.0, -slope * (start + k));
      }
      x(a, r) = acc / static_cast<double>(len);
    }
  }

  const Eigen::MatrixXcd cov =
      (x * x.adjoint()) / static_cast<double>(snapshots);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(cov);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorCode::RankDeficient, "eigendecomposition failed");
  }
  const Eigen::VectorXd values = eig.eigenvalues();  // ascending
  const double lambda_max = values(n - 1);
  if (values(0) < -1e-9 * std::max(lambda_max, 1.0)) {
    throw Error(ErrorCode::RankDeficient, "covariance is not PSD");
  }

  UlaEstimate est;
  // Degenerate spectrum (pure noise): no signal eigenvalue separates from
  // the noise floor, so the noise subspace is arbitrary.
  if (lambda_max - values(n - 2) <= 1e-9 * std::max(lambda_max, 1e-300)) {
    est.no_peak = true;
    est.theta_ula_deg = 90.0;
    est.low_confidence = true;
    return est;
  }

  const Eigen::MatrixXcd noise = eig.eigenvectors().leftCols(n - 1);
  const double psi_scale = 2.0 * kPi * f_c * geom.spacing_m / geom.c;
  const auto spectrum = [&](double theta_deg) {
    const double psi = psi_scale * std::cos(deg_to_rad(theta_deg));
    Eigen::VectorXcd a(n);
    for (int k = 0; k < n; ++k) a(k) = std::polar(1.0, psi * k);
    const double denom = (noise.adjoint() * a).squaredNorm();
    return 1.0 / std::max(denom, 1e-300);
  };

  const int steps = static_cast<int>(std::floor(180.0 / grid_deg));
  double best_theta = 0.0, best_p = -1.0, min_p = 1e300;
  int best_i = 0;
  std::vector<double> ps(steps + 1);
  for (int i = 0; i <= steps; ++i) {
    const double theta = std::min(i * grid_deg, 180.0);
    ps[i] = spectrum(theta);
    if (ps[i] > best_p) {
      best_p = ps[i];
      best_theta = theta;
      best_i = i;
    }
    min_p = std::min(min_p, ps[i]);
  }

  if (best_p - min_p <= 1e-6 * best_p) {
    est.no_peak = true;
    est.theta_ula_deg = 90.0;
    est.low_confidence = true;
    return est;
  }

  // Parabolic refinement on the log-spectrum around the grid peak.
  if (best_i > 0 && best_i < steps) {
    const double l0 = std::log(ps[best_i - 1]);
    const double l1 = std::log(ps[best_i]);
    const double l2 = std::log(ps[best_i + 1]);
    const double denom = l0 - 2.0 * l1 + l2;
    if (denom < 0.0) {
      const double shift = 0.5 * (l0 - l2) / denom;
      best_theta += std::clamp(shift, -1.0, 1.0) * grid_deg;
    }
  }
  est.theta_ula_deg = std::clamp(best_theta, 0.0, 180.0);
  est.low_confidence = est.theta_ula_deg < 10.0 || est.theta_ula_deg > 170.0;
  return est;
}

double remap_to_global(double theta_ula_deg, int sub_array) {
  if (sub_array == 1) return theta_ula_deg - 45.0;
  if (sub_array == 2) return 45.0 - theta_ula_deg;
  throw Error(ErrorCode::OutOfRange, "sub_array must be 1 or 2");
}

double remap_to_ula(double theta_global_deg, int sub_array) {
  if (sub_array == 1) return theta_global_deg + 45.0;
  if (sub_array == 2) return 45.0 - theta_global_deg;
  throw Error(ErrorCode::OutOfRange, "sub_array must be 1 or 2");
}

AngleEstimate rss_select(const AngleEstimate& a, const AngleEstimate& b,
                         double window_s) {
  if (a.sub_array == b.sub_array) {
    throw Error(ErrorCode::UnpairedEstimate,
                "estimates come from the same sub-array");
  }
  if (std::abs(a.timestamp - b.timestamp) > window_s) {
    throw Error(ErrorCode::UnpairedEstimate, "estimates outside the pairing window");
  }
  if (a.rss_dbm == b.rss_dbm) {
    return a.sub_array == 1 ? a : b;  // documented tie-break
  }
  return a.rss_dbm > b.rss_dbm ? a : b;
}

SelectionOutput pair_and_select(std::span<const AngleEstimate> estimates,
                                double window_s) {
  SelectionOutput out;
  std::size_t i = 0;
  while (i < estimates.size()) {
    if (i + 1 < estimates.size() &&
        estimates[i].sub_array != estimates[i + 1].sub_array &&
        std::abs(estimates[i + 1].timestamp - estimates[i].timestamp) <=
            window_s) {
      out.selected.push_back(rss_select(estimates[i], estimates[i + 1], window_s));
      i += 2;
    } else {
      out.unpaired.push_back(estimates[i]);
      ++i;
    }
  }
  return out;
}

MovingAverage::MovingAverage(std::size_t window) : window_(window) {
  if (window_ == 0) {
    throw Error(ErrorCode::InvalidArgument, "window must be >= 1");
  }
}

double MovingAverage::push(double value) {
  buf_.push_back(value);
  sum_ += value;
  if (buf_.size() > window_) {
    sum_ -= buf_.front();
    buf_.pop_front();
  }
  return sum_ / static_cast<double>(buf_.size());
}

void MovingAverage::reset() {
  buf_.clear();
  sum_ = 0.0;
}

}  // namespace bleaoa::aoa
