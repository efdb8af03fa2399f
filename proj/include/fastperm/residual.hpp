#pragma once

// Residual variance and sample-max bias estimation from the training set.
//
// sigma2 comes from the full training residual S_train, not from the
// subsampled fits: the masked least-squares objective underestimates the
// residual spread, and the scalar bias shift absorbs the distortion that
// remains at the level of the per-trial maximum.

#include <cmath>
#include <cstdint>
#include <vector>

#include "fastperm/dataset.hpp"
#include "fastperm/error.hpp"
#include "fastperm/subspace.hpp"

namespace fastperm {

struct ResidualModel {
  double sigma2 = 0.0;       // residual entry variance about zero
  double bias_shift = 0.0;   // mean (true max - recovered max) over training
  int64_t training_trials = 0;
  std::vector<double> per_trial_max_gap;
};

// Population variance of the residual entries with the mean pinned to zero.
inline double estimate_sigma2(const Matrix& s_train) {
  if (s_train.size() == 0) {
    throw Error(ErrorCategory::invalid_config, "empty training residual");
  }
  return s_train.squaredNorm() / static_cast<double>(s_train.size());
}

// Replays the recovery path on each training trial (subsample, fit, inject
// residuals) and averages the max shortfall m_t - m_hat_t.
inline ResidualModel estimate_bias(const Matrix& p_train, const SubspaceModel& model,
                                   const SamplingMask& mask, double sigma2,
                                   uint64_t noise_seed, bool absolute_max = false) {
  const Index t0 = p_train.cols();
  if (mask.trial_count() < t0) {
    throw Error(ErrorCategory::invalid_config,
                "sampling mask does not cover the training trials");
  }
  ResidualModel out;
  out.sigma2 = sigma2;
  out.training_trials = t0;
  out.per_trial_max_gap.resize(static_cast<size_t>(t0));

  ColumnReconstructor rec(model);
  Vector estimate(p_train.rows());
  Vector samples;
  double gap_sum = 0.0;
  for (Index t = 0; t < t0; ++t) {
    const std::vector<Index> omega = mask.indices_for(t);
    samples.resize(static_cast<Index>(omega.size()));
    for (size_t i = 0; i < omega.size(); ++i) {
      samples[static_cast<Index>(i)] = p_train(omega[i], t);
    }
    bool singular = false;
    rec.reconstruct(omega, samples, sigma2, noise_seed, static_cast<uint64_t>(t), estimate,
                    &singular);
    const double true_max =
        absolute_max ? p_train.col(t).cwiseAbs().maxCoeff() : p_train.col(t).maxCoeff();
    const double recovered_max =
        absolute_max ? estimate.cwiseAbs().maxCoeff() : estimate.maxCoeff();
    const double gap = true_max - recovered_max;
    out.per_trial_max_gap[static_cast<size_t>(t)] = gap;
    gap_sum += gap;
  }
  out.bias_shift = gap_sum / static_cast<double>(t0);
  return out;
}

// Shifts recovered maxima by the estimated bias.
inline std::vector<double> apply_bias(const std::vector<double>& max_samples, double bias_shift) {
  std::vector<double> out(max_samples.size());
  for (size_t i = 0; i < max_samples.size(); ++i) out[i] = max_samples[i] + bias_shift;
  return out;
}

}  // namespace fastperm
