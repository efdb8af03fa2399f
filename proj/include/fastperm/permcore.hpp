#pragma once

// Two-sample t-statistics and permutation trial generation.
//
// The full-column and masked-column paths share one scalar kernel and
// accumulate group sums in identical subject order, so a masked evaluation
// is bit-identical to the corresponding slice of the full column. Trial t's
// label shuffle comes from Stream(master_seed, t) and nothing else, which
// makes results independent of evaluation order and worker count.

#include <Eigen/Core>
#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "fastperm/dataset.hpp"
#include "fastperm/error.hpp"
#include "fastperm/parallel.hpp"
#include "fastperm/rng.hpp"

namespace fastperm {

struct PermutationPlan {
  int64_t trial_count = 0;
  uint64_t master_seed = 0;
  bool include_identity = false;

  void validate() const {
    if (trial_count < 1) {
      throw Error(ErrorCategory::invalid_config, "trial_count must be >= 1");
    }
  }
};

struct PermutationMatrix {
  Matrix stats;  // v x T
  std::vector<uint64_t> trial_seeds;
};

enum class StatisticKind { pooled_t, welch_t };

struct StatOptions {
  StatisticKind kind = StatisticKind::pooled_t;
};

namespace detail {

struct GroupCounts {
  Index n0 = 0, n1 = 0;
  double inv_n0 = 0, inv_n1 = 0;
  double inv_dof = 0;    // 1 / (n0 + n1 - 2)
  double inv_pool = 0;   // 1/n0 + 1/n1
  double inv_dof0 = 0;   // 1 / (n0 - 1)
  double inv_dof1 = 0;   // 1 / (n1 - 1)
};

inline GroupCounts group_counts(const std::vector<uint8_t>& labels) {
  GroupCounts g;
  for (uint8_t l : labels) (l == 0 ? g.n0 : g.n1)++;
  if (g.n0 < 2 || g.n1 < 2) {
    throw Error(ErrorCategory::degenerate_labels,
                "each group needs >= 2 members for a two-sample statistic");
  }
  g.inv_n0 = 1.0 / static_cast<double>(g.n0);
  g.inv_n1 = 1.0 / static_cast<double>(g.n1);
  g.inv_dof = 1.0 / static_cast<double>(g.n0 + g.n1 - 2);
  g.inv_pool = g.inv_n0 + g.inv_n1;
  g.inv_dof0 = 1.0 / static_cast<double>(g.n0 - 1);
  g.inv_dof1 = 1.0 / static_cast<double>(g.n1 - 1);
  return g;
}

// Scalar statistic from per-group sums and sums of squares. A pooled (or
// Welch) variance of exactly zero defines the statistic as 0: a constant
// feature carries no evidence and must not reach the max.
inline double t_from_sums(double s0, double q0, double s1, double q1, const GroupCounts& g,
                          StatisticKind kind, bool* zero_variance) {
  const double m0 = s0 * g.inv_n0;
  const double m1 = s1 * g.inv_n1;
  const double ss0 = q0 - s0 * m0;
  const double ss1 = q1 - s1 * m1;
  double denom2;
  if (kind == StatisticKind::pooled_t) {
    denom2 = (ss0 + ss1) * g.inv_dof * g.inv_pool;
  } else {
    denom2 = ss0 * g.inv_dof0 * g.inv_n0 + ss1 * g.inv_dof1 * g.inv_n1;
  }
  if (denom2 <= 0.0) {
    if (zero_variance) *zero_variance = true;
    return 0.0;
  }
  return (m0 - m1) / std::sqrt(denom2);
}

}  // namespace detail

struct StatResult {
  Vector stats;
  std::vector<Index> zero_variance_features;
};

// Scratch buffers reused across trials by one worker.
class ColumnWorkspace {
 public:
  explicit ColumnWorkspace(Index feature_count)
      : s0_(feature_count), q0_(feature_count), s1_(feature_count), q1_(feature_count) {}

  // Full statistic column for the given labels, written to out (size v).
  // Returns the number of zero-variance features encountered; their indices
  // are appended to zero_variance when given.
  int64_t column(const LabeledDataset& data, const std::vector<uint8_t>& labels,
                 StatOptions opts, Eigen::Ref<Vector> out,
                 std::vector<Index>* zero_variance = nullptr) {
    const detail::GroupCounts g = detail::group_counts(labels);
    const Matrix& vals = data.values();
    const Matrix& sqs = data.squares();
    s0_.setZero();
    q0_.setZero();
    s1_.setZero();
    q1_.setZero();
    for (Index j = 0; j < data.subject_count(); ++j) {
      if (labels[static_cast<size_t>(j)] == 0) {
        s0_ += vals.col(j);
        q0_ += sqs.col(j);
      } else {
        s1_ += vals.col(j);
        q1_ += sqs.col(j);
      }
    }
    int64_t zero_count = 0;
    for (Index i = 0; i < out.size(); ++i) {
      bool zv = false;
      out[i] = detail::t_from_sums(s0_[i], q0_[i], s1_[i], q1_[i], g, opts.kind, &zv);
      if (zv) {
        ++zero_count;
        if (zero_variance) zero_variance->push_back(i);
      }
    }
    return zero_count;
  }

  // Statistics restricted to mask (ascending feature indices); out has
  // size mask.size(). Entries match the full column bit-for-bit.
  int64_t masked_column(const LabeledDataset& data, const std::vector<uint8_t>& labels,
                        std::span<const Index> mask, StatOptions opts,
                        Eigen::Ref<Vector> out) {
    const detail::GroupCounts g = detail::group_counts(labels);
    const Matrix& vals = data.values();
    const Matrix& sqs = data.squares();
    const Index n = data.subject_count();
    int64_t zero_count = 0;
    for (size_t k = 0; k < mask.size(); ++k) {
      const Index i = mask[k];
      double s0 = 0, q0 = 0, s1 = 0, q1 = 0;
      for (Index j = 0; j < n; ++j) {
        if (labels[static_cast<size_t>(j)] == 0) {
          s0 += vals(i, j);
          q0 += sqs(i, j);
        } else {
          s1 += vals(i, j);
          q1 += sqs(i, j);
        }
      }
      bool zv = false;
      out[static_cast<Index>(k)] = detail::t_from_sums(s0, q0, s1, q1, g, opts.kind, &zv);
      zero_count += zv ? 1 : 0;
    }
    return zero_count;
  }

 private:
  Vector s0_, q0_, s1_, q1_;
};

// Voxel-wise two-sample statistic under the given labels.
inline StatResult t_statistic(const LabeledDataset& data, const std::vector<uint8_t>& labels,
                              StatOptions opts = {}) {
  if (labels.size() != data.labels().size()) {
    throw Error(ErrorCategory::dimension_mismatch, "label vector length mismatch");
  }
  StatResult result;
  result.stats.resize(data.feature_count());
  ColumnWorkspace ws(data.feature_count());
  ws.column(data, labels, opts, result.stats, &result.zero_variance_features);
  return result;
}

// Label shuffle for one trial; a pure function of (master_seed, trial).
inline std::vector<uint8_t> permute_labels(const std::vector<uint8_t>& original,
                                           const PermutationPlan& plan, int64_t trial) {
  if (trial < 0 || trial >= plan.trial_count) {
    throw Error(ErrorCategory::invalid_config,
                "trial index " + std::to_string(trial) + " outside plan");
  }
  std::vector<uint8_t> labels = original;
  if (plan.include_identity && trial == 0) return labels;
  Stream stream(plan.master_seed, static_cast<uint64_t>(trial));
  stream.shuffle(labels);
  return labels;
}

inline uint64_t trial_seed(const PermutationPlan& plan, int64_t trial) {
  Stream stream(plan.master_seed, static_cast<uint64_t>(trial));
  return stream.next_u64();
}

// Dense v x T permutation matrix; column t is the statistic vector under
// permute_labels(.., t). Bit-identical for any worker count.
inline PermutationMatrix full_permutation_test(const LabeledDataset& data,
                                               const PermutationPlan& plan,
                                               StatOptions opts = {},
                                               int workers = default_worker_count()) {
  plan.validate();
  PermutationMatrix out;
  out.stats.resize(data.feature_count(), plan.trial_count);
  out.trial_seeds.resize(static_cast<size_t>(plan.trial_count));
  for (int64_t t = 0; t < plan.trial_count; ++t) {
    out.trial_seeds[static_cast<size_t>(t)] = trial_seed(plan, t);
  }
  Matrix& stats = out.stats;
  parallel_chunks(plan.trial_count, workers, [&](int, int64_t begin, int64_t end) {
    ColumnWorkspace ws(data.feature_count());
    for (int64_t t = begin; t < end; ++t) {
      const std::vector<uint8_t> labels = permute_labels(data.labels(), plan, t);
      ws.column(data, labels, opts, stats.col(t));
    }
  });
  return out;
}

// Statistic entries of column `trial` restricted to `mask`, computed without
// touching the other features.
inline Vector subsampled_column(const LabeledDataset& data, const PermutationPlan& plan,
                                int64_t trial, std::span<const Index> mask,
                                StatOptions opts = {}) {
  if (mask.empty()) {
    throw Error(ErrorCategory::insufficient_samples, "empty sampling mask");
  }
  const std::vector<uint8_t> labels = permute_labels(data.labels(), plan, trial);
  Vector out(static_cast<Index>(mask.size()));
  ColumnWorkspace ws(data.feature_count());
  ws.masked_column(data, labels, mask, opts, out);
  return out;
}

// All distinct group assignments with the same group sizes as `labels`,
// in lexicographic order. Feasible only for small cohorts; used as the
// exhaustive oracle.
inline std::vector<std::vector<uint8_t>> enumerate_assignments(std::vector<uint8_t> labels) {
  std::sort(labels.begin(), labels.end());
  std::vector<std::vector<uint8_t>> all;
  do {
    all.push_back(labels);
  } while (std::next_permutation(labels.begin(), labels.end()));
  return all;
}

// Statistic matrix over every distinct assignment (exhaustive permutation
// test).
inline PermutationMatrix exhaustive_permutation_test(const LabeledDataset& data,
                                                     StatOptions opts = {},
                                                     int workers = default_worker_count()) {
  const std::vector<std::vector<uint8_t>> assignments = enumerate_assignments(data.labels());
  PermutationMatrix out;
  out.stats.resize(data.feature_count(), static_cast<Index>(assignments.size()));
  out.trial_seeds.assign(assignments.size(), 0);
  Matrix& stats = out.stats;
  parallel_chunks(static_cast<int64_t>(assignments.size()), workers,
                  [&](int, int64_t begin, int64_t end) {
                    ColumnWorkspace ws(data.feature_count());
                    for (int64_t t = begin; t < end; ++t) {
                      ws.column(data, assignments[static_cast<size_t>(t)], opts, stats.col(t));
                    }
                  });
  return out;
}

}  // namespace fastperm
