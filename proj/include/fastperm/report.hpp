#pragma once

// JSON and CSV emission for run reports. Key order is deterministic, so
// identical configs and seeds produce byte-identical reports once timing
// fields are stripped.

#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fastperm/error.hpp"
#include "fastperm/pipeline.hpp"

namespace fastperm {

constexpr int kReportSchemaVersion = 1;

inline const char* to_string(RunMode mode) {
  switch (mode) {
    case RunMode::full: return "full";
    case RunMode::fast: return "fast";
    case RunMode::compare: return "compare";
    case RunMode::rmt: return "rmt";
  }
  return "full";
}

inline nlohmann::json config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["trial_count"] = c.trial_count;
  j["training_trials"] = c.training_trials;
  j["rank"] = c.rank;
  j["sampling_rate"] = c.sampling_rate;
  j["training_rate"] = c.training_rate;
  j["passes"] = c.passes;
  j["bin_width"] = c.bin_width;
  j["alpha_levels"] = c.alpha_levels;
  j["master_seed"] = c.master_seed;
  j["mask_seed"] = c.mask_seed;
  j["include_identity"] = c.include_identity;
  j["statistic"] = c.statistic == StatisticKind::pooled_t ? "pooled_t" : "welch_t";
  j["tail"] = c.tail == TailConvention::one_sided ? "one_sided" : "two_sided";
  j["absolute_max"] = c.absolute_max;
  j["basis_init"] = c.basis_init == BasisInit::svd_warm_start ? "svd_warm_start" : "random";
  return j;
}

inline nlohmann::json report_to_json(const RunReport& r, bool include_samples = true,
                                     bool include_p_values = true) {
  nlohmann::json j;
  j["schema_version"] = kReportSchemaVersion;
  j["mode"] = r.mode;
  j["config"] = config_to_json(r.config);

  nlohmann::json thresholds = nlohmann::json::array();
  for (const ThresholdEntry& t : r.thresholds) {
    nlohmann::json entry;
    entry["alpha"] = t.alpha;
    entry["available"] = t.available;
    if (t.available) entry["value"] = t.value;
    if (r.mode == "compare" && t.available) entry["abs_error"] = t.abs_error;
    thresholds.push_back(entry);
  }
  j["thresholds"] = thresholds;

  j["min_p_value"] = r.min_p_value;
  j["significant_at"] = r.significant_at;
  if (include_p_values) j["p_values"] = r.p_values;
  if (include_samples) j["max_samples"] = r.max_samples;

  j["counts"] = {{"full_stat_evals", r.counts.full_stat_evals},
                 {"training_stat_evals", r.counts.training_stat_evals},
                 {"recovery_stat_evals", r.counts.recovery_stat_evals},
                 {"observed_stat_evals", r.counts.observed_stat_evals}};
  j["timings"] = {{"full_seconds", r.timings.full_seconds},
                  {"training_seconds", r.timings.training_seconds},
                  {"recovery_seconds", r.timings.recovery_seconds}};
  j["zero_variance_features"] = r.zero_variance_features;
  j["singular_trials"] = r.singular_trials;

  if (r.mode == "fast" || r.mode == "compare") {
    j["sigma2"] = r.sigma2;
    j["bias_shift"] = r.bias_shift;
    j["energy_per_pass"] = r.energy_per_pass;
  }
  if (r.mode == "compare") {
    j["kl_recovered"] = r.kl_recovered;
    j["bd_recovered"] = r.bd_recovered;
    j["kl_naive"] = r.kl_naive;
    j["bd_naive"] = r.bd_naive;
    j["wallclock_speedup"] = r.wallclock_speedup;
    j["eval_count_ratio"] = r.eval_count_ratio;
  }
  return j;
}

// Timing-free view used by determinism checks and tests.
inline nlohmann::json report_to_json_stable(const RunReport& r) {
  nlohmann::json j = report_to_json(r);
  j.erase("timings");
  if (j.contains("wallclock_speedup")) j.erase("wallclock_speedup");
  return j;
}

inline void write_report_json(const std::string& path, const RunReport& r) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCategory::io_error, "cannot open " + path + " for writing");
  out << report_to_json(r).dump(2) << '\n';
}

inline void write_thresholds_csv(const std::string& path, const RunReport& r) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCategory::io_error, "cannot open " + path + " for writing");
  out.precision(17);
  out << (r.mode == "compare" ? "alpha,threshold,abs_error\n" : "alpha,threshold\n");
  for (const ThresholdEntry& t : r.thresholds) {
    if (!t.available) continue;
    out << t.alpha << ',' << t.value;
    if (r.mode == "compare") out << ',' << t.abs_error;
    out << '\n';
  }
}

struct SweepRow {
  double rate = 0.0;
  double kl_recovered = 0.0, bd_recovered = 0.0;
  double kl_naive = 0.0, bd_naive = 0.0;
  double wallclock_speedup = 0.0;
  double eval_count_ratio = 0.0;
  std::vector<ThresholdEntry> thresholds;
};

inline void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCategory::io_error, "cannot open " + path + " for writing");
  out.precision(17);
  out << "rate,kl_recovered,bd_recovered,kl_naive,bd_naive,"
         "wallclock_speedup,eval_count_ratio";
  if (!rows.empty()) {
    for (const ThresholdEntry& t : rows.front().thresholds) {
      out << ",thr_err_alpha_" << t.alpha;
    }
  }
  out << '\n';
  for (const SweepRow& row : rows) {
    out << row.rate << ',' << row.kl_recovered << ',' << row.bd_recovered << ','
        << row.kl_naive << ',' << row.bd_naive << ',' << row.wallclock_speedup << ','
        << row.eval_count_ratio;
    for (const ThresholdEntry& t : row.thresholds) {
      out << ',' << (t.available ? t.abs_error : std::nan(""));
    }
    out << '\n';
  }
}

}  // namespace fastperm
