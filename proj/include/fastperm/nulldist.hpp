#pragma once

// Max-statistic null distribution: histogram, alpha-thresholds, corrected
// p-values, and histogram divergences (KL, Bhattacharyya) against a
// reference null.
//
// Histograms live on the global lattice of bin index floor(x / bin_width),
// so two distributions built with the same bin width share bin edges and
// rebinning for a comparison is pure index alignment.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "fastperm/error.hpp"

namespace fastperm {

inline double column_max(std::span<const double> column) {
  double m = column[0];
  for (double x : column) m = std::max(m, x);
  return m;
}

class MaxNullDistribution {
 public:
  MaxNullDistribution(std::vector<double> max_samples, double bin_width = 0.01)
      : samples_(std::move(max_samples)), bin_width_(bin_width) {
    if (samples_.empty()) {
      throw Error(ErrorCategory::insufficient_trials, "need at least one max sample");
    }
    if (!(bin_width_ > 0.0)) {
      throw Error(ErrorCategory::invalid_config, "bin_width must be positive");
    }
    for (double s : samples_) {
      if (!std::isfinite(s)) {
        throw Error(ErrorCategory::non_finite_value, "non-finite max sample");
      }
    }
    sorted_ = samples_;
    std::sort(sorted_.begin(), sorted_.end());
    first_bin_ = bin_of(sorted_.front());
    const int64_t last = bin_of(sorted_.back());
    counts_.assign(static_cast<size_t>(last - first_bin_ + 1), 0);
    for (double s : samples_) counts_[static_cast<size_t>(bin_of(s) - first_bin_)] += 1;
  }

  int64_t bin_of(double x) const {
    return static_cast<int64_t>(std::floor(x / bin_width_));
  }

  const std::vector<double>& samples() const { return samples_; }
  const std::vector<double>& sorted_samples() const { return sorted_; }
  double bin_width() const { return bin_width_; }
  int64_t first_bin_index() const { return first_bin_; }
  const std::vector<int64_t>& counts() const { return counts_; }
  int64_t trial_count() const { return static_cast<int64_t>(samples_.size()); }

  double bin_left(size_t i) const {
    return static_cast<double>(first_bin_ + static_cast<int64_t>(i)) * bin_width_;
  }
  double bin_right(size_t i) const {
    return static_cast<double>(first_bin_ + static_cast<int64_t>(i) + 1) * bin_width_;
  }

 private:
  std::vector<double> samples_;
  std::vector<double> sorted_;
  double bin_width_;
  int64_t first_bin_ = 0;
  std::vector<int64_t> counts_;
};

inline MaxNullDistribution build_null(std::vector<double> max_samples, double bin_width = 0.01) {
  return MaxNullDistribution(std::move(max_samples), bin_width);
}

enum class TailConvention { one_sided, two_sided };

// Empirical alpha-threshold: the order statistic at index ceil(q*T) with
// q = 1-alpha (one-sided) or 1-alpha/2 (two-sided). No interpolation, to
// match the counting semantics of the corrected p-value.
inline double threshold(const MaxNullDistribution& null, double alpha,
                        TailConvention tail = TailConvention::one_sided) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorCategory::invalid_config, "alpha must lie in (0, 1)");
  }
  const auto T = static_cast<double>(null.trial_count());
  if (T < 1.0 / alpha) {
    throw Error(ErrorCategory::insufficient_trials,
                "resolving alpha=" + std::to_string(alpha) + " needs at least " +
                    std::to_string(static_cast<int64_t>(std::ceil(1.0 / alpha))) +
                    " trials, got " + std::to_string(null.trial_count()));
  }
  const double q = tail == TailConvention::one_sided ? 1.0 - alpha : 1.0 - alpha / 2.0;
  auto rank = static_cast<int64_t>(std::ceil(q * T));
  rank = std::clamp<int64_t>(rank, 1, null.trial_count());
  return null.sorted_samples()[static_cast<size_t>(rank - 1)];
}

// FWER-corrected p-value with the add-one convention: never exactly zero,
// and an observation above every sample yields 1/(T+1).
inline double corrected_p_value(const MaxNullDistribution& null, double observed_stat) {
  const std::vector<double>& sorted = null.sorted_samples();
  const auto more_extreme = static_cast<int64_t>(
      sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), observed_stat));
  return static_cast<double>(more_extreme + 1) / static_cast<double>(null.trial_count() + 1);
}

namespace detail {

// Aligned probability vectors over the union support, each smoothed by
// adding 1/(10*T_own) to every bin and renormalizing. Raw empirical tails
// contain empty bins, so unsmoothed KL would be infinite.
inline std::pair<std::vector<double>, std::vector<double>> aligned_probabilities(
    const MaxNullDistribution& p, const MaxNullDistribution& q) {
  if (p.bin_width() != q.bin_width()) {
    throw Error(ErrorCategory::invalid_config,
                "histogram comparison requires identical bin widths");
  }
  const int64_t lo = std::min(p.first_bin_index(), q.first_bin_index());
  const int64_t hi = std::max(p.first_bin_index() + static_cast<int64_t>(p.counts().size()),
                              q.first_bin_index() + static_cast<int64_t>(q.counts().size()));
  const auto bins = static_cast<size_t>(hi - lo);
  std::vector<double> pp(bins, 0.0), qq(bins, 0.0);
  for (size_t i = 0; i < p.counts().size(); ++i) {
    pp[static_cast<size_t>(p.first_bin_index() - lo) + i] = static_cast<double>(p.counts()[i]);
  }
  for (size_t i = 0; i < q.counts().size(); ++i) {
    qq[static_cast<size_t>(q.first_bin_index() - lo) + i] = static_cast<double>(q.counts()[i]);
  }
  const double eps_p = 1.0 / (10.0 * static_cast<double>(p.trial_count()));
  const double eps_q = 1.0 / (10.0 * static_cast<double>(q.trial_count()));
  double sum_p = 0.0, sum_q = 0.0;
  for (size_t i = 0; i < bins; ++i) {
    pp[i] = pp[i] / static_cast<double>(p.trial_count()) + eps_p;
    qq[i] = qq[i] / static_cast<double>(q.trial_count()) + eps_q;
    sum_p += pp[i];
    sum_q += qq[i];
  }
  for (size_t i = 0; i < bins; ++i) {
    pp[i] /= sum_p;
    qq[i] /= sum_q;
  }
  return {std::move(pp), std::move(qq)};
}

}  // namespace detail

// KL(p || q) over the common binning; p is the reference distribution.
inline double kl_divergence(const MaxNullDistribution& p, const MaxNullDistribution& q) {
  const auto [pp, qq] = detail::aligned_probabilities(p, q);
  double kl = 0.0;
  for (size_t i = 0; i < pp.size(); ++i) {
    if (pp[i] > 0.0) kl += pp[i] * std::log(pp[i] / qq[i]);
  }
  return kl;
}

inline double bhattacharyya(const MaxNullDistribution& p, const MaxNullDistribution& q) {
  const auto [pp, qq] = detail::aligned_probabilities(p, q);
  double bc = 0.0;
  for (size_t i = 0; i < pp.size(); ++i) bc += std::sqrt(pp[i] * qq[i]);
  return -std::log(std::min(bc, 1.0));
}

// Baseline that pools the subsampled statistics with no completion: the
// per-trial max over only the sampled entries. Dominated from below by the
// true max, trial by trial.
inline MaxNullDistribution naive_null(const std::vector<std::vector<double>>& sampled_columns,
                                      double bin_width = 0.01) {
  std::vector<double> maxima;
  maxima.reserve(sampled_columns.size());
  for (const auto& col : sampled_columns) {
    if (col.empty()) {
      throw Error(ErrorCategory::insufficient_samples, "naive null: empty sampled column");
    }
    maxima.push_back(column_max(col));
  }
  return MaxNullDistribution(std::move(maxima), bin_width);
}

}  // namespace fastperm
