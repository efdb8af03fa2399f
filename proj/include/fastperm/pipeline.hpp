#pragma once

// Orchestration of the train -> recover -> analyze pipeline and the exact
// (full) oracle run, with per-phase timings and auditable counts of
// statistic evaluations. Columns are dispatched to a worker pool; every
// result lands in a trial-indexed slot, so output is identical for any
// worker count.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fastperm/dataset.hpp"
#include "fastperm/error.hpp"
#include "fastperm/nulldist.hpp"
#include "fastperm/parallel.hpp"
#include "fastperm/permcore.hpp"
#include "fastperm/residual.hpp"
#include "fastperm/subspace.hpp"

namespace fastperm {

enum class RunMode { full, fast, compare, rmt };

struct RunConfig {
  int64_t trial_count = 1000;          // T
  int64_t training_trials = 100;       // T0
  Index rank = 0;                      // 0 = number of subjects
  double sampling_rate = 0.005;
  double training_rate = 0.0;          // 0 = same as sampling_rate
  int passes = 3;
  double bin_width = 0.01;
  std::vector<double> alpha_levels = {0.05, 0.01, 0.005, 0.001};
  uint64_t master_seed = 0;
  uint64_t mask_seed = 1;
  bool include_identity = false;
  StatisticKind statistic = StatisticKind::pooled_t;
  TailConvention tail = TailConvention::one_sided;
  bool absolute_max = false;           // max |t| instead of max t per trial
  BasisInit basis_init = BasisInit::svd_warm_start;
  int workers = 0;                     // 0 = default_worker_count()

  Index effective_rank(const LabeledDataset& data) const {
    return rank > 0 ? rank : data.subject_count();
  }
  double effective_training_rate() const {
    return training_rate > 0.0 ? training_rate : sampling_rate;
  }
  int effective_workers() const { return workers > 0 ? workers : default_worker_count(); }

  void validate(const LabeledDataset& data) const {
    if (!(sampling_rate > 0.0 && sampling_rate <= 1.0)) {
      throw Error(ErrorCategory::invalid_config, "sampling_rate must lie in (0, 1]");
    }
    const Index r = effective_rank(data);
    if (trial_count < training_trials || training_trials < r) {
      throw Error(ErrorCategory::invalid_config,
                  "need T >= T0 >= rank (T=" + std::to_string(trial_count) +
                      ", T0=" + std::to_string(training_trials) + ", rank=" + std::to_string(r) +
                      ")");
    }
    if (!(bin_width > 0.0)) {
      throw Error(ErrorCategory::invalid_config, "bin_width must be positive");
    }
    for (double a : alpha_levels) {
      if (!(a > 0.0 && a < 1.0)) {
        throw Error(ErrorCategory::invalid_config, "alpha levels must lie in (0, 1)");
      }
    }
  }
};

struct PhaseTimings {
  double full_seconds = 0.0;
  double training_seconds = 0.0;
  double recovery_seconds = 0.0;
};

struct EvalCounts {
  int64_t full_stat_evals = 0;
  int64_t training_stat_evals = 0;
  int64_t recovery_stat_evals = 0;
  int64_t observed_stat_evals = 0;

  int64_t fast_total() const { return training_stat_evals + recovery_stat_evals; }
};

struct ThresholdEntry {
  double alpha = 0.0;
  double value = 0.0;
  bool available = false;       // false when T < 1/alpha
  double abs_error = 0.0;       // compare mode: |fast - full|
};

struct RunReport {
  std::string mode;
  RunConfig config;
  std::vector<double> max_samples;          // the null samples, trial order
  std::vector<ThresholdEntry> thresholds;
  std::vector<double> p_values;             // per feature, corrected
  double min_p_value = 1.0;
  std::vector<int64_t> significant_at;      // per alpha level
  EvalCounts counts;
  PhaseTimings timings;
  int64_t zero_variance_features = 0;
  int64_t singular_trials = 0;
  double sigma2 = 0.0;
  double bias_shift = 0.0;
  std::vector<double> energy_per_pass;
  // compare mode
  double kl_recovered = 0.0, bd_recovered = 0.0;
  double kl_naive = 0.0, bd_naive = 0.0;
  double wallclock_speedup = 0.0;
  double eval_count_ratio = 0.0;
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

inline double column_extreme(const Vector& column, bool absolute) {
  return absolute ? column.cwiseAbs().maxCoeff() : column.maxCoeff();
}

inline void fill_thresholds(RunReport& report, const MaxNullDistribution& null) {
  report.thresholds.clear();
  for (double alpha : report.config.alpha_levels) {
    ThresholdEntry entry;
    entry.alpha = alpha;
    if (static_cast<double>(null.trial_count()) >= 1.0 / alpha) {
      entry.value = threshold(null, alpha, report.config.tail);
      entry.available = true;
    }
    report.thresholds.push_back(entry);
  }
}

inline void fill_p_values(RunReport& report, const MaxNullDistribution& null,
                          const Vector& observed) {
  report.p_values.resize(static_cast<size_t>(observed.size()));
  report.min_p_value = 1.0;
  for (Index i = 0; i < observed.size(); ++i) {
    const double stat =
        report.config.absolute_max ? std::abs(observed[i]) : observed[i];
    const double p = corrected_p_value(null, stat);
    report.p_values[static_cast<size_t>(i)] = p;
    report.min_p_value = std::min(report.min_p_value, p);
  }
  report.significant_at.assign(report.config.alpha_levels.size(), 0);
  for (size_t a = 0; a < report.config.alpha_levels.size(); ++a) {
    for (double p : report.p_values) {
      if (p <= report.config.alpha_levels[a]) ++report.significant_at[a];
    }
  }
}

}  // namespace detail

// Exact permutation run: per-trial maxima of fully computed statistic
// columns. Optionally collects the first `collect_prefix` columns (used by
// the fast path's training phase and by compare mode's oracle).
struct FullRunResult {
  std::vector<double> maxima;
  Matrix prefix_columns;     // v x collect_prefix
  int64_t zero_variance = 0;
  double seconds = 0.0;
};

inline FullRunResult compute_trial_maxima(const LabeledDataset& data,
                                          const PermutationPlan& plan, StatOptions stat_opts,
                                          bool absolute_max, Index collect_prefix, int workers,
                                          const SamplingMask* naive_mask = nullptr,
                                          std::vector<double>* naive_maxima = nullptr) {
  const auto start = std::chrono::steady_clock::now();
  FullRunResult result;
  result.maxima.resize(static_cast<size_t>(plan.trial_count));
  if (collect_prefix > 0) result.prefix_columns.resize(data.feature_count(), collect_prefix);
  if (naive_maxima) naive_maxima->resize(static_cast<size_t>(plan.trial_count));
  std::atomic<int64_t> zero_variance{0};

  parallel_chunks(plan.trial_count, workers, [&](int, int64_t begin, int64_t end) {
    ColumnWorkspace ws(data.feature_count());
    Vector column(data.feature_count());
    int64_t local_zero = 0;
    for (int64_t t = begin; t < end; ++t) {
      const std::vector<uint8_t> labels = permute_labels(data.labels(), plan, t);
      local_zero += ws.column(data, labels, stat_opts, column);
      result.maxima[static_cast<size_t>(t)] = detail::column_extreme(column, absolute_max);
      if (t < collect_prefix) result.prefix_columns.col(t) = column;
      if (naive_mask && naive_maxima) {
        const std::vector<Index> omega = naive_mask->indices_for(t);
        double m = absolute_max ? std::abs(column[omega.front()]) : column[omega.front()];
        for (Index i : omega) {
          m = std::max(m, absolute_max ? std::abs(column[i]) : column[i]);
        }
        (*naive_maxima)[static_cast<size_t>(t)] = m;
      }
    }
    zero_variance += local_zero;
  });

  result.zero_variance = zero_variance.load();
  result.seconds = detail::seconds_since(start);
  return result;
}

struct FullOutputs {
  RunReport report;
  std::vector<double> maxima;
  Vector observed_stats;
};

inline FullOutputs run_full(const LabeledDataset& data, const RunConfig& config) {
  config.validate(data);
  PermutationPlan plan{config.trial_count, config.master_seed, config.include_identity};
  StatOptions stat_opts{config.statistic};
  const int workers = config.effective_workers();

  FullOutputs out;
  out.report.mode = "full";
  out.report.config = config;

  FullRunResult full =
      compute_trial_maxima(data, plan, stat_opts, config.absolute_max, 0, workers);
  out.maxima = full.maxima;
  out.report.max_samples = full.maxima;
  out.report.timings.full_seconds = full.seconds;
  out.report.counts.full_stat_evals = data.feature_count() * config.trial_count;
  out.report.zero_variance_features = full.zero_variance;

  const StatResult observed = t_statistic(data, data.labels(), stat_opts);
  out.observed_stats = observed.stats;
  out.report.counts.observed_stat_evals = data.feature_count();

  MaxNullDistribution null(out.maxima, config.bin_width);
  detail::fill_thresholds(out.report, null);
  detail::fill_p_values(out.report, null, out.observed_stats);
  return out;
}

struct FastOutputs {
  RunReport report;
  std::vector<double> maxima;          // exact training maxima + corrected recovered
  std::vector<double> naive_maxima;    // per-trial max over sampled entries only
  Vector observed_stats;
  SubspaceModel model;
  ResidualModel residual;
};

// Two-phase accelerated run: fully computed training trials fit the basis
// and residual model; every later trial is reconstructed from its sampled
// entries and the recovered maxima are shifted by the trained bias. The
// training maxima enter the null as exact values.
inline FastOutputs run_fast(const LabeledDataset& data, const RunConfig& config,
                            const std::optional<std::pair<SubspaceModel, ResidualModel>>&
                                pretrained = std::nullopt) {
  config.validate(data);
  const Index v = data.feature_count();
  const Index rank = config.effective_rank(data);
  PermutationPlan plan{config.trial_count, config.master_seed, config.include_identity};
  StatOptions stat_opts{config.statistic};
  const int workers = config.effective_workers();
  const uint64_t noise_seed = derive_seed(config.master_seed, 0x7265736eULL);

  SamplingMask mask(config.sampling_rate, v, config.trial_count, config.mask_seed, rank);

  FastOutputs out;
  out.report.mode = "fast";
  out.report.config = config;

  // Training phase: full columns for the first T0 trials.
  const auto train_start = std::chrono::steady_clock::now();
  PermutationPlan training_plan = plan;
  training_plan.trial_count = config.training_trials;
  out.naive_maxima.clear();
  std::vector<double> training_naive;
  FullRunResult training =
      compute_trial_maxima(data, training_plan, stat_opts, config.absolute_max,
                           static_cast<Index>(config.training_trials), workers, &mask,
                           &training_naive);
  out.report.zero_variance_features = training.zero_variance;
  out.report.counts.training_stat_evals = v * config.training_trials;

  if (pretrained.has_value()) {
    out.model = pretrained->first;
    out.residual = pretrained->second;
    if (out.model.basis.rows() != v) {
      throw Error(ErrorCategory::dimension_mismatch,
                  "pretrained model feature count does not match the dataset");
    }
  } else {
    TrainOptions train_opts;
    train_opts.passes = config.passes;
    train_opts.init = config.basis_init;
    out.model = train_basis(training.prefix_columns, rank, config.effective_training_rate(),
                            derive_seed(config.mask_seed, 0x747261696eULL), train_opts);
    const double sigma2 = estimate_sigma2(out.model.training_residual);
    out.residual = estimate_bias(training.prefix_columns, out.model, mask, sigma2, noise_seed,
                                 config.absolute_max);
  }
  out.report.sigma2 = out.residual.sigma2;
  out.report.bias_shift = out.residual.bias_shift;
  out.report.energy_per_pass = out.model.energy_per_pass;
  out.report.timings.training_seconds = detail::seconds_since(train_start);

  // Recovery phase: subsample, fit, inject residuals, correct the max.
  const auto recover_start = std::chrono::steady_clock::now();
  const int64_t recovery_trials = config.trial_count - config.training_trials;
  std::vector<double> recovered(static_cast<size_t>(recovery_trials));
  std::vector<double> recovery_naive(static_cast<size_t>(recovery_trials));
  std::atomic<int64_t> singular_count{0};
  std::atomic<int64_t> recovery_evals{0};

  parallel_chunks(recovery_trials, workers, [&](int, int64_t begin, int64_t end) {
    ColumnWorkspace ws(v);
    ColumnReconstructor rec(out.model);
    Vector estimate(v);
    Vector samples;
    int64_t local_evals = 0, local_singular = 0;
    for (int64_t i = begin; i < end; ++i) {
      const int64_t t = config.training_trials + i;
      const std::vector<Index> omega = mask.indices_for(t);
      samples.resize(static_cast<Index>(omega.size()));
      const std::vector<uint8_t> labels = permute_labels(data.labels(), plan, t);
      ws.masked_column(data, labels, omega, stat_opts, samples);
      local_evals += static_cast<int64_t>(omega.size());
      recovery_naive[static_cast<size_t>(i)] =
          detail::column_extreme(samples, config.absolute_max);
      bool singular = false;
      rec.reconstruct(omega, samples, out.residual.sigma2, noise_seed,
                      static_cast<uint64_t>(t), estimate, &singular);
      local_singular += singular ? 1 : 0;
      recovered[static_cast<size_t>(i)] = detail::column_extreme(estimate, config.absolute_max);
    }
    recovery_evals += local_evals;
    singular_count += local_singular;
  });

  out.report.counts.recovery_stat_evals = recovery_evals.load();
  out.report.singular_trials = singular_count.load();
  out.report.timings.recovery_seconds = detail::seconds_since(recover_start);

  const std::vector<double> corrected = apply_bias(recovered, out.residual.bias_shift);
  out.maxima = training.maxima;
  out.maxima.insert(out.maxima.end(), corrected.begin(), corrected.end());
  out.report.max_samples = out.maxima;

  out.naive_maxima = training_naive;
  out.naive_maxima.insert(out.naive_maxima.end(), recovery_naive.begin(), recovery_naive.end());

  const StatResult observed = t_statistic(data, data.labels(), stat_opts);
  out.observed_stats = observed.stats;
  out.report.counts.observed_stat_evals = v;

  MaxNullDistribution null(out.maxima, config.bin_width);
  detail::fill_thresholds(out.report, null);
  detail::fill_p_values(out.report, null, out.observed_stats);
  return out;
}

struct CompareOutputs {
  RunReport report;            // fast-side report enriched with comparisons
  RunReport full_report;
  std::vector<double> true_maxima;
  std::vector<double> recovered_maxima;
  std::vector<double> naive_maxima;
};

// Comparison against an already computed exact run; lets a rate sweep reuse
// one oracle run. The fast side recomputes its own training columns so
// wall-clock numbers stay honest.
inline CompareOutputs run_compare_with_full(const LabeledDataset& data, const RunConfig& config,
                                            const FullOutputs& full) {
  FastOutputs fast = run_fast(data, config);

  CompareOutputs out;
  out.full_report = full.report;
  out.report = fast.report;
  out.report.mode = "compare";
  out.true_maxima = full.maxima;
  out.recovered_maxima = fast.maxima;
  out.naive_maxima = fast.naive_maxima;

  MaxNullDistribution true_null(full.maxima, config.bin_width);
  MaxNullDistribution recovered_null(fast.maxima, config.bin_width);
  MaxNullDistribution naive(fast.naive_maxima, config.bin_width);
  out.report.kl_recovered = kl_divergence(true_null, recovered_null);
  out.report.bd_recovered = bhattacharyya(true_null, recovered_null);
  out.report.kl_naive = kl_divergence(true_null, naive);
  out.report.bd_naive = bhattacharyya(true_null, naive);

  for (size_t i = 0; i < out.report.thresholds.size(); ++i) {
    ThresholdEntry& entry = out.report.thresholds[i];
    const ThresholdEntry& exact = full.report.thresholds[i];
    if (entry.available && exact.available) {
      entry.abs_error = std::abs(entry.value - exact.value);
    }
  }

  out.report.counts.full_stat_evals = full.report.counts.full_stat_evals;
  const double fast_seconds =
      fast.report.timings.training_seconds + fast.report.timings.recovery_seconds;
  out.report.timings.full_seconds = full.report.timings.full_seconds;
  if (fast_seconds > 0.0) {
    out.report.wallclock_speedup = full.report.timings.full_seconds / fast_seconds;
  }
  if (out.report.counts.fast_total() > 0) {
    out.report.eval_count_ratio = static_cast<double>(full.report.counts.full_stat_evals) /
                                  static_cast<double>(out.report.counts.fast_total());
  }
  return out;
}

// Runs the exact and accelerated pipelines on the same seeds and reports
// divergences, threshold errors, and speedup factors.
inline CompareOutputs run_compare(const LabeledDataset& data, const RunConfig& config) {
  const FullOutputs full = run_full(data, config);
  return run_compare_with_full(data, config, full);
}

}  // namespace fastperm
