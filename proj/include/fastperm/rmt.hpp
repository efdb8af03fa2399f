#pragma once

// Spectral validation of the low-rank-plus-residual model on controlled
// random-matrix scenarios: Marchenko-Pastur bulk edges for the residual
// Gram spectrum, perturbed-eigenvalue predictions for planted spikes, the
// delta-tolerance condition on the perturbed spectrum, and the Chebyshev
// deviation bound for recovered maxima.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "fastperm/dataset.hpp"
#include "fastperm/error.hpp"
#include "fastperm/rng.hpp"

namespace fastperm {

struct SpectralScenario {
  Index v = 0;                  // ambient dimension (rows)
  Index t = 0;                  // trial count (columns)
  Index r = 0;                  // planted rank
  std::vector<double> lambda;   // planted eigenvalues of Q = U W W^T U^T, descending
  double sigma2 = 0.0;          // residual entry variance
  double delta = 0.5;           // tolerated relative eigenvalue perturbation

  double gamma() const { return static_cast<double>(v) / static_cast<double>(t); }

  void validate() const {
    if (v < 1 || t < 1) {
      throw Error(ErrorCategory::invalid_config, "scenario dimensions must be positive");
    }
    if (r < 1 || static_cast<size_t>(r) != lambda.size()) {
      throw Error(ErrorCategory::invalid_config, "lambda must hold exactly r entries");
    }
    if (!(delta > 0.0 && delta < 1.0)) {
      throw Error(ErrorCategory::invalid_config, "delta must lie in (0, 1)");
    }
    if (sigma2 < 0.0) {
      throw Error(ErrorCategory::invalid_config, "sigma2 must be non-negative");
    }
    for (size_t i = 0; i < lambda.size(); ++i) {
      if (!(lambda[i] > 0.0)) {
        throw Error(ErrorCategory::invalid_config, "planted eigenvalues must be positive");
      }
      if (i > 0 && lambda[i] > lambda[i - 1]) {
        throw Error(ErrorCategory::invalid_config, "planted eigenvalues must be descending");
      }
    }
    if (gamma() >= 1.0) {
      throw Error(ErrorCategory::invalid_config,
                  "spike analysis requires v/t < 1 (got gamma=" + std::to_string(gamma()) + ")");
    }
  }
};

// Support edges of the Marchenko-Pastur bulk of S S^T eigenvalues for S
// with i.i.d. N(0, sigma2) entries: sigma2 * t * (1 -+ sqrt(v/t))^2.
inline std::pair<double, double> mp_support(double sigma2, Index v, Index t) {
  if (v < 1 || t < 1) {
    throw Error(ErrorCategory::invalid_config, "mp_support needs positive dimensions");
  }
  if (sigma2 < 0.0) {
    throw Error(ErrorCategory::invalid_config, "sigma2 must be non-negative");
  }
  const double root = std::sqrt(static_cast<double>(v) / static_cast<double>(t));
  const double scale = sigma2 * static_cast<double>(t);
  const double lo = scale * (1.0 - root) * (1.0 - root);
  const double hi = scale * (1.0 + root) * (1.0 + root);
  return {lo, hi};
}

// Asymptotic eigenvalues of Q + S S^T: spikes lambda_i + sigma2*t +
// gamma*sigma2^2*t^2/lambda_i while separated from the bulk, and the bulk
// value sigma2*t*(1 - 2*sqrt(gamma)) beyond the planted rank.
inline Vector predicted_spike_eigenvalues(const SpectralScenario& sc) {
  sc.validate();
  const double gamma = sc.gamma();
  const double noise = sc.sigma2 * static_cast<double>(sc.t);
  const double bulk = noise * (1.0 - 2.0 * std::sqrt(gamma));
  Vector out(sc.v);
  for (Index i = 0; i < sc.v; ++i) {
    if (i < sc.r) {
      const double lam = sc.lambda[static_cast<size_t>(i)];
      out[i] = lam > gamma * noise ? lam + noise + gamma * noise * noise / lam : gamma * noise;
    } else {
      out[i] = bulk;
    }
  }
  return out;
}

struct StarConditionReport {
  bool premise_holds = false;       // sigma2 < delta * lambda_r / t
  std::vector<bool> spike_within;   // |eig_i - lambda_i| < delta * lambda_i
  bool bulk_within = false;         // eig_i < delta * lambda_r for i > r
  double max_bulk_eigenvalue = 0.0;
  std::vector<double> spike_relative_deviation;

  bool all_satisfied() const {
    if (!bulk_within) return false;
    for (bool ok : spike_within) {
      if (!ok) return false;
    }
    return true;
  }
};

// Evaluates the perturbation tolerance on a simulated spectrum
// (descending). The premise flag records whether the scenario satisfies
// the sufficiency condition; failures with a false premise are expected.
inline StarConditionReport check_star_condition(const SpectralScenario& sc,
                                                const Vector& simulated_eigs) {
  sc.validate();
  if (simulated_eigs.size() != sc.v) {
    throw Error(ErrorCategory::dimension_mismatch, "expected one eigenvalue per dimension");
  }
  StarConditionReport report;
  const double lambda_r = sc.lambda.back();
  report.premise_holds = sc.sigma2 < sc.delta * lambda_r / static_cast<double>(sc.t);
  report.spike_within.resize(static_cast<size_t>(sc.r));
  report.spike_relative_deviation.resize(static_cast<size_t>(sc.r));
  for (Index i = 0; i < sc.r; ++i) {
    const double lam = sc.lambda[static_cast<size_t>(i)];
    const double dev = std::abs(simulated_eigs[i] - lam);
    report.spike_within[static_cast<size_t>(i)] = dev < sc.delta * lam;
    report.spike_relative_deviation[static_cast<size_t>(i)] = dev / lam;
  }
  report.max_bulk_eigenvalue = sc.r < sc.v ? simulated_eigs[sc.r] : 0.0;
  report.bulk_within = report.max_bulk_eigenvalue < sc.delta * lambda_r;
  return report;
}

// Analytic form of the theorem's sufficiency: when sigma2 < delta*lambda_r/t
// the predicted spikes satisfy sigma2*t + gamma*sigma2^2*t^2/lambda_i <
// delta*lambda_i by direct substitution.
inline bool star_condition_analytic(const SpectralScenario& sc) {
  sc.validate();
  const double gamma = sc.gamma();
  const double noise = sc.sigma2 * static_cast<double>(sc.t);
  for (double lam : sc.lambda) {
    if (!(noise + gamma * noise * noise / lam < sc.delta * lam)) return false;
  }
  const double bulk = noise * (1.0 - 2.0 * std::sqrt(gamma));
  return bulk < sc.delta * sc.lambda.back();
}

struct ChebyshevRow {
  double k = 0.0;
  double exceedance_frequency = 0.0;
  double bound = 0.0;        // 1 / k^2
  double slack = 0.0;        // 3 / sqrt(T), finite-sample allowance
  bool vacuous = false;      // bound >= 1 holds trivially
  bool pass = false;
};

struct ChebyshevReport {
  std::vector<ChebyshevRow> rows;
  double recentered_mean = 0.0;  // mean of gap - (b - b_hat)

  bool all_pass() const {
    for (const auto& row : rows) {
      if (!row.pass) return false;
    }
    return true;
  }
};

// Empirical check of Pr[gap - (b - b_hat) > k*eps] < 1/k^2 over observed
// per-trial max gaps.
inline ChebyshevReport chebyshev_bound_check(std::span<const double> gaps, double b,
                                             double b_hat, double eps,
                                             std::span<const double> ks) {
  if (!(eps > 0.0)) {
    throw Error(ErrorCategory::invalid_config, "eps must be positive");
  }
  if (gaps.empty()) {
    throw Error(ErrorCategory::invalid_config, "no gaps to check");
  }
  ChebyshevReport report;
  const double center = b - b_hat;
  double mean = 0.0;
  for (double g : gaps) mean += g - center;
  report.recentered_mean = mean / static_cast<double>(gaps.size());
  const double slack = 3.0 / std::sqrt(static_cast<double>(gaps.size()));
  for (double k : ks) {
    ChebyshevRow row;
    row.k = k;
    row.bound = 1.0 / (k * k);
    row.slack = slack;
    row.vacuous = row.bound >= 1.0;
    int64_t exceed = 0;
    for (double g : gaps) {
      if (g - center > k * eps) ++exceed;
    }
    row.exceedance_frequency = static_cast<double>(exceed) / static_cast<double>(gaps.size());
    row.pass = row.vacuous || row.exceedance_frequency <= row.bound + row.slack;
    report.rows.push_back(row);
  }
  return report;
}

// ---- simulation helpers ----------------------------------------------

namespace detail {

inline Matrix random_gaussian(Index rows, Index cols, uint64_t seed, uint64_t stream) {
  Matrix m(rows, cols);
  Stream s(seed, stream);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = s.next_normal();
  }
  return m;
}

inline Vector descending_eigenvalues(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  return eig.eigenvalues().reverse();
}

}  // namespace detail

// Eigenvalues (descending) of S S^T for S with i.i.d. N(0, sigma2) entries.
inline Vector simulate_noise_eigenvalues(Index v, Index t, double sigma2, uint64_t seed) {
  Matrix s = detail::random_gaussian(v, t, seed, 0);
  s *= std::sqrt(sigma2);
  return detail::descending_eigenvalues(s * s.transpose());
}

// Eigenvalues (descending) of P P^T for P = U W + S with planted spectrum
// lambda: U is a random v x r orthonormal basis, W = diag(sqrt(lambda)) V^T
// with V^T V = I, and S has i.i.d. N(0, sigma2) entries. Cross terms are
// kept: the full perturbed matrix is eigensolved.
inline Vector simulate_spiked_eigenvalues(const SpectralScenario& sc, uint64_t seed) {
  sc.validate();
  Eigen::HouseholderQR<Matrix> qr_u(detail::random_gaussian(sc.v, sc.r, seed, 1));
  const Matrix u = qr_u.householderQ() * Matrix::Identity(sc.v, sc.r);
  Eigen::HouseholderQR<Matrix> qr_v(detail::random_gaussian(sc.t, sc.r, seed, 2));
  const Matrix vmat = qr_v.householderQ() * Matrix::Identity(sc.t, sc.r);
  Vector scale(sc.r);
  for (Index i = 0; i < sc.r; ++i) scale[i] = std::sqrt(sc.lambda[static_cast<size_t>(i)]);
  Matrix p = u * scale.asDiagonal() * vmat.transpose();
  if (sc.sigma2 > 0.0) {
    p += std::sqrt(sc.sigma2) * detail::random_gaussian(sc.v, sc.t, seed, 3);
  }
  return detail::descending_eigenvalues(p * p.transpose());
}

}  // namespace fastperm
