#include "bleaoa/ranging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bleaoa/error.hpp"
#include "bleaoa/rng.hpp"

namespace bleaoa::ranging {

RssObservation to_observation(const label::LabeledPacket& packet) {
  return {packet.packet.timestamp, packet.packet.channel,
          static_cast<double>(packet.packet.rss_dbm),
          packet.distance_mm / 1000.0};
}

RowAssembler::RowAssembler(double mean_timestep_s)
    : mean_timestep_s_(mean_timestep_s) {
  if (!(mean_timestep_s > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "mean timestep must be positive");
  }
}

std::optional<RangingFeatureRow> RowAssembler::push(const RssObservation& obs) {
  if (obs.channel < 0 || obs.channel >= kBleDataChannels) {
    throw Error(ErrorCode::OutOfRange, "channel " + std::to_string(obs.channel));
  }
  ++stats_.packets;
  ++packets_since_emit_;

  if (have_last_ && obs.timestamp - last_timestamp_ > mean_timestep_s_) {
    // Over-threshold gap: the partial row is stale (likely an experiment
    // boundary) and is discarded before this packet is applied.
    if (filled_count_ > 0) ++stats_.resets;
    filled_.fill(false);
    filled_count_ = 0;
  }
  last_timestamp_ = obs.timestamp;
  have_last_ = true;

  if (!filled_[obs.channel]) {
    filled_[obs.channel] = true;
    ++filled_count_;
  }
  row_[obs.channel] = obs.rss_dbm;  // duplicates overwrite

  if (filled_count_ == kBleDataChannels) {
    RangingFeatureRow out;
    out.rss_dbm = row_;
    out.distance_m = obs.distance_m;
    ++stats_.rows;
    packets_toward_rows_ += packets_since_emit_;
    packets_since_emit_ = 0;
    filled_.fill(false);
    filled_count_ = 0;
    return out;
  }
  return std::nullopt;
}

void RowAssembler::finish() {
  stats_.mean_packets_per_row =
      stats_.rows > 0 ? static_cast<double>(packets_toward_rows_) /
                            static_cast<double>(stats_.rows)
                      : 0.0;
}

RowAssembly build_feature_rows(std::span<const RssObservation> observations,
                               double mean_timestep_s) {
  RowAssembler assembler(mean_timestep_s);
  RowAssembly out;
  for (const RssObservation& obs : observations) {
    if (auto row = assembler.push(obs)) out.rows.push_back(*row);
  }
  assembler.finish();
  out.stats = assembler.stats();
  return out;
}

RowAssembly build_feature_rows(std::span<const label::LabeledPacket> packets,
                               double mean_timestep_s) {
  RowAssembler assembler(mean_timestep_s);
  RowAssembly out;
  for (const label::LabeledPacket& p : packets) {
    if (auto row = assembler.push(to_observation(p))) out.rows.push_back(*row);
  }
  assembler.finish();
  out.stats = assembler.stats();
  return out;
}

double mean_timestep(std::span<const RssObservation> observations) {
  if (observations.size() < 2) {
    throw Error(ErrorCode::Empty, "need >= 2 observations for a mean timestep");
  }
  return (observations.back().timestamp - observations.front().timestamp) /
         static_cast<double>(observations.size() - 1);
}

LogLossModel logloss_fit(std::span<const RangingFeatureRow> rows) {
  // Eq: rss = x0 - 10 alpha log10(d); ordinary least squares on log10(d).
  double su = 0.0, sx = 0.0, suu = 0.0, sux = 0.0;
  std::size_t n = 0;
  double d_min = std::numeric_limits<double>::infinity();
  double d_max = -std::numeric_limits<double>::infinity();
  for (const RangingFeatureRow& row : rows) {
    if (!(row.distance_m > 0.0)) {
      throw Error(ErrorCode::OutOfRange, "distance label must be positive");
    }
    const double u = std::log10(row.distance_m);
    d_min = std::min(d_min, row.distance_m);
    d_max = std::max(d_max, row.distance_m);
    for (double rss : row.rss_dbm) {
      if (!std::isfinite(rss)) continue;
      su += u;
      sx += rss;
      suu += u * u;
      sux += u * rss;
      ++n;
    }
  }
  if (n < 2 || d_min == d_max) {
    throw Error(ErrorCode::DegenerateFit, "need >= 2 distinct distances");
  }
  const double denom = n * suu - su * su;
  if (denom == 0.0) {
    throw Error(ErrorCode::DegenerateFit, "no spread in log-distance");
  }
  const double slope = (n * sux - su * sx) / denom;
  LogLossModel model;
  model.x0_dbm = (sx - slope * su) / static_cast<double>(n);
  model.alpha = -slope / 10.0;
  if (model.alpha == 0.0) {
    throw Error(ErrorCode::DegenerateFit, "fitted path-loss exponent is zero");
  }
  return model;
}

double logloss_predict(const LogLossModel& model, double rss_dbm) {
  if (model.alpha == 0.0) {
    throw Error(ErrorCode::DegenerateFit, "alpha must be nonzero");
  }
  return std::pow(10.0, -(rss_dbm - model.x0_dbm) / (10.0 * model.alpha));
}

ChillModel chill_fit(std::span<const RangingFeatureRow> rows) {
  ChillModel model;
  model.global = logloss_fit(rows);
  for (int c = 0; c < kBleDataChannels; ++c) {
    double su = 0.0, sx = 0.0, suu = 0.0, sux = 0.0;
    std::size_t n = 0;
    double d_min = std::numeric_limits<double>::infinity();
    double d_max = -std::numeric_limits<double>::infinity();
    for (const RangingFeatureRow& row : rows) {
      const double rss = row.rss_dbm[c];
      if (!std::isfinite(rss)) continue;
      const double u = std::log10(row.distance_m);
      d_min = std::min(d_min, row.distance_m);
      d_max = std::max(d_max, row.distance_m);
      su += u;
      sx += rss;
      suu += u * u;
      sux += u * rss;
      ++n;
    }
    if (n < 2 || d_min == d_max) continue;  // falls back to the pooled model
    const double denom = n * suu - su * su;
    if (denom == 0.0) continue;
    const double slope = (n * sux - su * sx) / denom;
    LogLossModel per;
    per.x0_dbm = (sx - slope * su) / static_cast<double>(n);
    per.alpha = -slope / 10.0;
    if (per.alpha == 0.0) continue;
    model.per_channel[c] = per;
  }
  return model;
}

ChillPrediction chill_predict(const ChillModel& model, int channel,
                              double rss_dbm) {
  if (channel < 0 || channel >= kBleDataChannels) {
    throw Error(ErrorCode::OutOfRange, "channel " + std::to_string(channel));
  }
  if (model.per_channel[channel]) {
    return {logloss_predict(*model.per_channel[channel], rss_dbm), false};
  }
  return {logloss_predict(model.global, rss_dbm), true};
}

namespace {

struct KernelCache {
  Eigen::MatrixXd sq_dist;  // |x_i - x_j|^2
  Eigen::MatrixXd gram;     // x_i . x_j
};

Eigen::MatrixXd rows_to_matrix(std::span<const RangingFeatureRow> rows) {
  Eigen::MatrixXd x(rows.size(), kBleDataChannels);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (int c = 0; c < kBleDataChannels; ++c) {
      const double v = rows[r].rss_dbm[c];
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::IncompleteFeature,
                    "row " + std::to_string(r) + " channel " + std::to_string(c));
      }
      x(static_cast<Eigen::Index>(r), c) = v;
    }
  }
  return x;
}

KernelCache make_cache(const Eigen::MatrixXd& x) {
  KernelCache cache;
  cache.gram = x * x.transpose();
  const Eigen::VectorXd sq = cache.gram.diagonal();
  cache.sq_dist = (-2.0 * cache.gram).colwise() + sq;
  cache.sq_dist.rowwise() += sq.transpose();
  cache.sq_dist = cache.sq_dist.cwiseMax(0.0);
  return cache;
}

Eigen::MatrixXd kernel_matrix(const KernelCache& cache, const GprParams& p) {
  return (p.rbf_variance *
          (-cache.sq_dist / (2.0 * p.lengthscale * p.lengthscale))
              .array()
              .exp())
             .matrix() +
         p.linear_variance * cache.gram;
}

struct Factorization {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
};

// Cholesky of K + (noise + jitter) I, escalating jitter up to 1e-4 of the
// mean kernel diagonal.
Factorization factorize(const Eigen::MatrixXd& kernel, double noise_variance) {
  const double mean_diag = kernel.diagonal().mean();
  const double jitter_cap = 1e-4 * std::max(mean_diag, 1e-300);
  Eigen::MatrixXd working = kernel;
  working.diagonal().array() += noise_variance;

  Factorization f;
  double jitter = 0.0;
  for (;;) {
    f.llt.compute(working);
    if (f.llt.info() == Eigen::Success) {
      f.jitter = jitter;
      return f;
    }
    jitter = (jitter == 0.0) ? 1e-12 * std::max(mean_diag, 1e-300) : jitter * 10.0;
    if (jitter > jitter_cap) {
      throw Error(ErrorCode::SingularKernel,
                  "kernel not positive definite after jitter escalation");
    }
    working = kernel;
    working.diagonal().array() += noise_variance + jitter;
  }
}

double log_marginal(const Eigen::LLT<Eigen::MatrixXd>& llt,
                    const Eigen::VectorXd& centered,
                    const Eigen::VectorXd& alpha) {
  const double n = static_cast<double>(centered.size());
  double log_det = 0.0;
  const auto& l = llt.matrixLLT();
  for (Eigen::Index k = 0; k < l.rows(); ++k) log_det += std::log(l(k, k));
  return -0.5 * centered.dot(alpha) - log_det - 0.5 * n * std::log(2.0 * kPiGpr);
}

constexpr double kPiGpr = 3.14159265358979323846;

}  // namespace

GprModel GprModel::fit(std::span<const RangingFeatureRow> train,
                       const GprParams& params) {
  if (train.empty()) throw Error(ErrorCode::Empty, "no training rows");
  if (!(params.lengthscale > 0.0) || !(params.rbf_variance > 0.0) ||
      params.linear_variance < 0.0 || params.noise_variance < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "invalid GP hyperparameters");
  }
  GprModel model;
  model.params_ = params;
  model.x_ = rows_to_matrix(train);

  Eigen::VectorXd y(train.size());
  for (std::size_t r = 0; r < train.size(); ++r) {
    y(static_cast<Eigen::Index>(r)) = train[r].distance_m;
  }
  model.y_mean_ = y.mean();
  const Eigen::VectorXd centered = y.array() - model.y_mean_;

  const KernelCache cache = make_cache(model.x_);
  const Eigen::MatrixXd kernel = kernel_matrix(cache, params);
  Factorization f = factorize(kernel, params.noise_variance);
  model.llt_ = std::move(f.llt);
  model.alpha_ = model.llt_.solve(centered);
  model.lml_ = log_marginal(model.llt_, centered, model.alpha_);
  return model;
}

GprModel::Prediction GprModel::predict(
    const std::array<double, kBleDataChannels>& rss_dbm) const {
  Eigen::VectorXd q(kBleDataChannels);
  for (int c = 0; c < kBleDataChannels; ++c) {
    if (!std::isfinite(rss_dbm[c])) {
      throw Error(ErrorCode::IncompleteFeature,
                  "query channel " + std::to_string(c) + " unpopulated");
    }
    q(c) = rss_dbm[c];
  }

  const Eigen::Index m = x_.rows();
  Eigen::VectorXd k_star(m);
  const double inv_2l2 = 1.0 / (2.0 * params_.lengthscale * params_.lengthscale);
  for (Eigen::Index r = 0; r < m; ++r) {
    const double sq = (x_.row(r).transpose() - q).squaredNorm();
    k_star(r) = params_.rbf_variance * std::exp(-sq * inv_2l2) +
                params_.linear_variance * x_.row(r).dot(q);
  }

  Prediction out;
  out.mean_m = y_mean_ + k_star.dot(alpha_);
  const double k_self =
      params_.rbf_variance + params_.linear_variance * q.squaredNorm();
  const Eigen::VectorXd v = llt_.matrixL().solve(k_star);
  const double latent = std::max(k_self - v.squaredNorm(), 0.0);
  out.std_m = std::sqrt(latent + params_.noise_variance);
  return out;
}

namespace {

// Log-marginal-likelihood of a candidate without keeping the factorization.
double candidate_lml(const KernelCache& cache, const Eigen::VectorXd& centered,
                     const GprParams& params) {
  const Eigen::MatrixXd kernel = kernel_matrix(cache, params);
  Factorization f;
  try {
    f = factorize(kernel, params.noise_variance);
  } catch (const Error&) {
    return -std::numeric_limits<double>::infinity();
  }
  const Eigen::VectorXd alpha = f.llt.solve(centered);
  return log_marginal(f.llt, centered, alpha);
}

}  // namespace

GprFitResult gpr_fit(std::span<const RangingFeatureRow> rows,
                     std::size_t train_size, std::uint64_t seed) {
  if (rows.size() < train_size || train_size == 0) {
    throw Error(ErrorCode::InvalidArgument,
                "need at least train_size feature rows");
  }
  Rng rng(seed);
  GprFitResult result;
  result.train_indices = rng.sample_without_replacement(rows.size(), train_size);

  std::vector<RangingFeatureRow> train;
  train.reserve(train_size);
  for (std::size_t idx : result.train_indices) train.push_back(rows[idx]);

  const Eigen::MatrixXd x = rows_to_matrix(train);
  Eigen::VectorXd y(train.size());
  for (std::size_t r = 0; r < train.size(); ++r) {
    y(static_cast<Eigen::Index>(r)) = train[r].distance_m;
  }
  const Eigen::VectorXd centered = y.array() - y.mean();
  const KernelCache cache = make_cache(x);

  // Search centers from data scales: lengthscale near the median pairwise
  // distance, variances near the label variance, linear term scaled by the
  // feature gram.
  const double y_var = std::max(centered.squaredNorm() /
                                    static_cast<double>(centered.size()),
                                1e-12);
  std::vector<double> dists;
  const Eigen::Index probe = std::min<Eigen::Index>(x.rows(), 128);
  for (Eigen::Index a = 0; a < probe; ++a) {
    for (Eigen::Index b = a + 1; b < probe; ++b) {
      dists.push_back(std::sqrt(cache.sq_dist(a, b)));
    }
  }
  std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
  const double median_dist = std::max(dists[dists.size() / 2], 1e-6);
  const double gram_scale = std::max(cache.gram.diagonal().mean(), 1e-12);

  GprParams best;
  best.lengthscale = median_dist;
  best.rbf_variance = y_var;
  best.linear_variance = y_var / gram_scale;
  best.noise_variance = 0.1 * y_var;
  double best_lml = candidate_lml(cache, centered, best);

  const auto sweep = [&](double* field, std::span<const double> factors) {
    const double center = *field;
    for (double f : factors) {
      GprParams trial = best;
      *(field - reinterpret_cast<double*>(&best) +
        reinterpret_cast<double*>(&trial)) = center * f;
      const double lml = candidate_lml(cache, centered, trial);
      if (lml > best_lml) {
        best_lml = lml;
        best = trial;
      }
    }
  };

  // Three decades around each center, then two finer passes. Pure coordinate
  // ascent; every candidate evaluation is deterministic.
  const std::array<double, 6> coarse = {0.0316228, 0.1, 0.316228, 3.16228, 10.0,
                                        31.6228};
  const std::array<double, 4> fine = {0.562341, 0.749894, 1.33352, 1.77828};
  for (int pass = 0; pass < 2; ++pass) {
    sweep(&best.lengthscale, coarse);
    sweep(&best.rbf_variance, coarse);
    sweep(&best.linear_variance, coarse);
    sweep(&best.noise_variance, coarse);
  }
  for (int pass = 0; pass < 2; ++pass) {
    sweep(&best.lengthscale, fine);
    sweep(&best.rbf_variance, fine);
    sweep(&best.linear_variance, fine);
    sweep(&best.noise_variance, fine);
  }

  result.model = GprModel::fit(train, best);
  return result;
}

namespace {

ModelEval summarize(std::vector<double> errors, double mean_posterior_var) {
  if (errors.empty()) throw Error(ErrorCode::Empty, "no evaluation samples");
  ModelEval eval;
  eval.count = errors.size();
  double sum = 0.0, sum_abs = 0.0;
  for (double e : errors) {
    sum += e;
    sum_abs += std::abs(e);
  }
  const double mean = sum / static_cast<double>(errors.size());
  eval.mae_m = sum_abs / static_cast<double>(errors.size());
  double var = 0.0;
  for (double e : errors) var += (e - mean) * (e - mean);
  eval.error_variance_m2 = var / static_cast<double>(errors.size());

  std::vector<double> abs_errors(errors.size());
  std::transform(errors.begin(), errors.end(), abs_errors.begin(),
                 [](double e) { return std::abs(e); });
  std::nth_element(abs_errors.begin(), abs_errors.begin() + abs_errors.size() / 2,
                   abs_errors.end());
  eval.median_abs_error_m = abs_errors[abs_errors.size() / 2];
  eval.mean_posterior_variance_m2 = mean_posterior_var;
  return eval;
}

}  // namespace

ModelEval eval_logloss(const LogLossModel& model,
                       std::span<const RangingFeatureRow> test) {
  std::vector<double> errors;
  for (const RangingFeatureRow& row : test) {
    for (double rss : row.rss_dbm) {
      if (!std::isfinite(rss)) continue;
      errors.push_back(logloss_predict(model, rss) - row.distance_m);
    }
  }
  return summarize(std::move(errors),
                   std::numeric_limits<double>::quiet_NaN());
}

ModelEval eval_chill(const ChillModel& model,
                     std::span<const RangingFeatureRow> test) {
  std::vector<double> errors;
  for (const RangingFeatureRow& row : test) {
    for (int c = 0; c < kBleDataChannels; ++c) {
      if (!std::isfinite(row.rss_dbm[c])) continue;
      errors.push_back(chill_predict(model, c, row.rss_dbm[c]).distance_m -
                       row.distance_m);
    }
  }
  return summarize(std::move(errors),
                   std::numeric_limits<double>::quiet_NaN());
}

ModelEval eval_gpr(const GprModel& model,
                   std::span<const RangingFeatureRow> test) {
  std::vector<double> errors;
  double var_sum = 0.0;
  for (const RangingFeatureRow& row : test) {
    const GprModel::Prediction p = model.predict(row.rss_dbm);
    errors.push_back(p.mean_m - row.distance_m);
    var_sum += p.std_m * p.std_m;
  }
  if (errors.empty()) throw Error(ErrorCode::Empty, "no evaluation samples");
  return summarize(std::move(errors),
                   var_sum / static_cast<double>(errors.size()));
}

}  // namespace bleaoa::ranging
