#pragma once

// Rank-r basis estimation from fully-sampled training trials and
// least-squares reconstruction of sparsely sampled columns.
//
// Training warm-starts from a truncated SVD of the training matrix (via the
// small T0 x T0 Gram system) and then makes subsampled refinement passes:
// rank-one Grassmannian updates driven by masked residuals, in the style of
// streaming subspace trackers. A pass is kept only if it does not lower the
// captured training energy, so the energy trace is non-decreasing by
// construction. Pure tracker runs from a random basis are available through
// BasisInit::random.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_set>
#include <vector>

#include "fastperm/dataset.hpp"
#include "fastperm/error.hpp"
#include "fastperm/rng.hpp"

namespace fastperm {

// |Omega_t| >= kOversamplingFloor * rank keeps the masked least-squares
// systems well conditioned.
constexpr Index kOversamplingFloor = 3;

// Per-trial uniform-without-replacement index sets of identical size
// round(rate * v). Sets are generated on demand as a pure function of
// (mask_seed, trial).
class SamplingMask {
 public:
  SamplingMask(double rate, Index feature_count, int64_t trial_count, uint64_t mask_seed,
               Index min_rank = 0)
      : rate_(rate),
        feature_count_(feature_count),
        trial_count_(trial_count),
        mask_seed_(mask_seed) {
    if (!(rate > 0.0 && rate <= 1.0)) {
      throw Error(ErrorCategory::invalid_config, "sampling rate must lie in (0, 1]");
    }
    samples_per_trial_ = static_cast<Index>(std::llround(rate * static_cast<double>(feature_count)));
    samples_per_trial_ = std::min(samples_per_trial_, feature_count);
    if (samples_per_trial_ < 1) {
      throw Error(ErrorCategory::insufficient_samples,
                  "rate " + std::to_string(rate) + " samples no entries of " +
                      std::to_string(feature_count) + " features");
    }
    if (min_rank > 0 && samples_per_trial_ < kOversamplingFloor * min_rank) {
      throw Error(ErrorCategory::insufficient_samples,
                  std::to_string(samples_per_trial_) + " samples per trial < " +
                      std::to_string(kOversamplingFloor * min_rank) +
                      " required for rank " + std::to_string(min_rank));
    }
  }

  double rate() const { return rate_; }
  Index samples_per_trial() const { return samples_per_trial_; }
  Index feature_count() const { return feature_count_; }
  int64_t trial_count() const { return trial_count_; }
  uint64_t seed() const { return mask_seed_; }

  // Sorted ascending indices for one trial.
  std::vector<Index> indices_for(int64_t trial) const {
    if (trial < 0 || trial >= trial_count_) {
      throw Error(ErrorCategory::invalid_config, "mask trial index out of range");
    }
    std::vector<Index> out;
    const Index k = samples_per_trial_;
    const Index v = feature_count_;
    out.reserve(static_cast<size_t>(k));
    if (k == v) {
      for (Index i = 0; i < v; ++i) out.push_back(i);
      return out;
    }
    // Floyd's sampling: k distinct draws in O(k).
    Stream stream(mask_seed_, static_cast<uint64_t>(trial));
    std::unordered_set<Index> chosen;
    chosen.reserve(static_cast<size_t>(k) * 2);
    for (Index j = v - k; j < v; ++j) {
      const Index pick = static_cast<Index>(stream.next_below(static_cast<uint64_t>(j) + 1));
      if (!chosen.insert(pick).second) chosen.insert(j);
    }
    out.assign(chosen.begin(), chosen.end());
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  double rate_;
  Index feature_count_;
  int64_t trial_count_;
  uint64_t mask_seed_;
  Index samples_per_trial_ = 0;
};

inline SamplingMask make_mask(double rate, Index feature_count, int64_t trial_count,
                              uint64_t mask_seed, Index min_rank = 0) {
  return SamplingMask(rate, feature_count, trial_count, mask_seed, min_rank);
}

enum class BasisInit { svd_warm_start, random };

struct TrainOptions {
  int passes = 3;
  BasisInit init = BasisInit::svd_warm_start;
  double step_scale = 1.0;          // fraction of the greedy rotation angle
  double convergence_tol = 1e-4;    // stop when energy gain drops below this
};

struct SubspaceModel {
  Matrix basis;             // v x r, orthonormal columns
  Index rank = 0;
  int64_t training_trials = 0;
  int passes_requested = 0;
  int passes_run = 0;
  bool converged = false;
  double training_rate = 1.0;
  uint64_t train_seed = 0;
  std::vector<double> energy_per_pass;  // captured energy fraction, [0] = init
  Matrix training_residual;             // S_train = P - U (U^T P)

  double orthonormality_error() const {
    return (basis.transpose() * basis - Matrix::Identity(rank, rank))
        .cwiseAbs()
        .maxCoeff();
  }
};

namespace detail {

inline Matrix thin_orthonormal(const Matrix& m) {
  Eigen::HouseholderQR<Matrix> qr(m);
  return qr.householderQ() * Matrix::Identity(m.rows(), m.cols());
}

inline double captured_energy(const Matrix& basis, const Matrix& p, double total_energy) {
  if (total_energy <= 0.0) return 1.0;
  return (basis.transpose() * p).squaredNorm() / total_energy;
}

// Least squares w = argmin ||u_rows w - values||_2 with a rank-revealing
// QR; rank-deficient systems fall back to the minimum-norm solution.
inline Vector masked_least_squares(const Matrix& u_rows, const Vector& values,
                                   bool* singular_flag) {
  Eigen::ColPivHouseholderQR<Matrix> qr(u_rows);
  if (qr.rank() < u_rows.cols()) {
    if (singular_flag) *singular_flag = true;
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(u_rows);
    return cod.solve(values);
  }
  return qr.solve(values);
}

// One masked rank-one Grassmannian update (GROUSE-style). theta is the
// greedy angle atan(||residual|| / ||weights||) scaled by step_scale.
inline void grouse_update(Matrix& basis, std::span<const Index> mask, const Vector& samples,
                          Matrix& u_rows_scratch, double step_scale) {
  const Index r = basis.cols();
  const auto k = static_cast<Index>(mask.size());
  u_rows_scratch.resize(k, r);
  for (Index i = 0; i < k; ++i) u_rows_scratch.row(i) = basis.row(mask[static_cast<size_t>(i)]);
  bool singular = false;
  const Vector w = masked_least_squares(u_rows_scratch, samples, &singular);
  const Vector residual = samples - u_rows_scratch * w;
  const double w_norm = w.norm();
  const double r_norm = residual.norm();
  if (w_norm <= 0.0 || r_norm <= 1e-14 * std::max(1.0, samples.norm())) return;
  const double theta = step_scale * std::atan2(r_norm, w_norm);
  Vector update = ((std::cos(theta) - 1.0) / w_norm) * (basis * w);
  const double res_gain = std::sin(theta) / r_norm;
  for (Index i = 0; i < k; ++i) update[mask[static_cast<size_t>(i)]] += res_gain * residual[i];
  basis.noalias() += update * (w / w_norm).transpose();
}

}  // namespace detail

// Learns the rank-r orthonormal basis of p_train and records the training
// residual. p_train is v x T0, one fully computed statistic column per
// training trial.
inline SubspaceModel train_basis(const Matrix& p_train, Index rank, double rate,
                                 uint64_t seed, TrainOptions opts = {}) {
  const Index v = p_train.rows();
  const Index t0 = p_train.cols();
  if (rank < 1 || rank > std::min(v, t0)) {
    throw Error(ErrorCategory::rank_too_high,
                "rank " + std::to_string(rank) + " exceeds min(v=" + std::to_string(v) +
                    ", T0=" + std::to_string(t0) + ")");
  }
  // Validates the oversampling floor for the refinement masks.
  SamplingMask mask(rate, v, t0, derive_seed(seed, 0x6d61736bULL), rank);

  SubspaceModel model;
  model.rank = rank;
  model.training_trials = t0;
  model.passes_requested = opts.passes;
  model.training_rate = rate;
  model.train_seed = seed;

  const double total_energy = p_train.squaredNorm();
  if (opts.init == BasisInit::svd_warm_start) {
    // Top-r left singular vectors via the T0 x T0 Gram system.
    const Matrix gram = p_train.transpose() * p_train;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    Matrix warm(v, rank);
    for (Index j = 0; j < rank; ++j) {
      warm.col(j) = p_train * eig.eigenvectors().col(t0 - 1 - j);
      const double norm = warm.col(j).norm();
      if (norm > 0) {
        warm.col(j) /= norm;
      } else {
        // Deficient training matrix: fill with a seeded random direction,
        // orthonormalized below.
        Stream pad(derive_seed(seed, 0x70616400ULL), static_cast<uint64_t>(j));
        for (Index i = 0; i < v; ++i) warm(i, j) = pad.next_normal();
      }
    }
    model.basis = detail::thin_orthonormal(warm);
  } else {
    Matrix init(v, rank);
    Stream stream(derive_seed(seed, 0x696e6974ULL), 0);
    for (Index j = 0; j < rank; ++j) {
      for (Index i = 0; i < v; ++i) init(i, j) = stream.next_normal();
    }
    model.basis = detail::thin_orthonormal(init);
  }

  double best_energy = detail::captured_energy(model.basis, p_train, total_energy);
  model.energy_per_pass.push_back(best_energy);

  Matrix u_rows_scratch;
  Vector samples;
  for (int pass = 1; pass <= opts.passes; ++pass) {
    Matrix candidate = model.basis;
    const SamplingMask pass_mask(
        rate, v, t0, derive_seed(seed, 0x70617373ULL + static_cast<uint64_t>(pass)), rank);
    for (Index t = 0; t < t0; ++t) {
      const std::vector<Index> omega = pass_mask.indices_for(t);
      samples.resize(static_cast<Index>(omega.size()));
      for (size_t i = 0; i < omega.size(); ++i) {
        samples[static_cast<Index>(i)] = p_train(omega[i], t);
      }
      detail::grouse_update(candidate, omega, samples, u_rows_scratch, opts.step_scale);
    }
    candidate = detail::thin_orthonormal(candidate);
    const double energy = detail::captured_energy(candidate, p_train, total_energy);
    model.passes_run = pass;
    if (energy > best_energy) {
      const double gain = energy - best_energy;
      model.basis = std::move(candidate);
      best_energy = energy;
      model.energy_per_pass.push_back(best_energy);
      if (gain < opts.convergence_tol) {
        model.converged = true;
        break;
      }
    } else {
      // Pass did not help; keep the previous basis and stop refining.
      model.energy_per_pass.push_back(best_energy);
      model.converged = true;
      break;
    }
  }

  model.training_residual = p_train - model.basis * (model.basis.transpose() * p_train);
  return model;
}

// Reconstruction coefficients for one sparsely observed column.
inline Vector fit_coefficients(const SubspaceModel& model, std::span<const Index> mask,
                               const Vector& sampled_values, bool* singular_flag = nullptr) {
  if (static_cast<Index>(mask.size()) < model.rank) {
    throw Error(ErrorCategory::insufficient_samples,
                "need at least rank=" + std::to_string(model.rank) + " samples, got " +
                    std::to_string(mask.size()));
  }
  Matrix u_rows(static_cast<Index>(mask.size()), model.rank);
  for (size_t i = 0; i < mask.size(); ++i) {
    u_rows.row(static_cast<Index>(i)) = model.basis.row(mask[i]);
  }
  return detail::masked_least_squares(u_rows, sampled_values, singular_flag);
}

struct RecoveredColumn {
  Vector estimate;        // full v-vector
  Vector coefficients;    // r
  std::vector<Index> observed_mask;
  bool singular = false;
};

// Reusable buffers for the per-trial recovery hot loop.
class ColumnReconstructor {
 public:
  explicit ColumnReconstructor(const SubspaceModel& model) : model_(model) {}

  // estimate = U w with observed entries overwritten by their exact values
  // and N(0, sigma2) residuals added to the unobserved ones. Noise comes
  // from Stream(noise_seed, trial) in ascending feature order.
  void reconstruct(std::span<const Index> mask, const Vector& sampled_values, double sigma2,
                   uint64_t noise_seed, uint64_t trial, Vector& estimate, bool* singular_flag) {
    const Index v = model_.basis.rows();
    const auto k = static_cast<Index>(mask.size());
    u_rows_.resize(k, model_.rank);
    for (Index i = 0; i < k; ++i) u_rows_.row(i) = model_.basis.row(mask[static_cast<size_t>(i)]);
    if (k < model_.rank) {
      throw Error(ErrorCategory::insufficient_samples, "mask smaller than basis rank");
    }
    coeffs_ = detail::masked_least_squares(u_rows_, sampled_values, singular_flag);
    estimate.noalias() = model_.basis * coeffs_;
    if (sigma2 > 0.0 && k < v) {
      const double sigma = std::sqrt(sigma2);
      Stream noise(noise_seed, trial);
      size_t next_observed = 0;
      for (Index i = 0; i < v; ++i) {
        if (next_observed < mask.size() && mask[next_observed] == i) {
          ++next_observed;
          continue;
        }
        estimate[i] += sigma * noise.next_normal();
      }
    }
    // Observed entries are never altered by the model.
    for (Index i = 0; i < k; ++i) estimate[mask[static_cast<size_t>(i)]] = sampled_values[i];
  }

  const Vector& coefficients() const { return coeffs_; }

 private:
  const SubspaceModel& model_;
  Matrix u_rows_;
  Vector coeffs_;
};

inline RecoveredColumn reconstruct_column(const SubspaceModel& model,
                                          std::span<const Index> mask,
                                          const Vector& sampled_values, double sigma2,
                                          uint64_t noise_seed, uint64_t trial) {
  RecoveredColumn out;
  out.observed_mask.assign(mask.begin(), mask.end());
  ColumnReconstructor rec(model);
  out.estimate.resize(model.basis.rows());
  rec.reconstruct(mask, sampled_values, sigma2, noise_seed, trial, out.estimate, &out.singular);
  out.coefficients = rec.coefficients();
  return out;
}

}  // namespace fastperm
