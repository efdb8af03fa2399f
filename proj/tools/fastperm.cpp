// Command-line driver for the permutation-testing pipeline:
//   full     exact permutation run (the oracle)
//   fast     training + sparse recovery run
//   compare  full and fast on the same seeds, with divergences and speedups
//   rmt      random-matrix scenario sweeps from a declarative config
//   synth    synthetic low-rank-plus-noise dataset generator
//
// Exit code 0 on success, otherwise the numeric error category printed in
// the structured message on stderr. Worker count is taken from
// FASTPERM_WORKERS when set.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fastperm/fastperm.hpp"

namespace {

using fastperm::RunConfig;

struct CommonArgs {
  std::string data_path;
  std::string label_path;
  std::string report_path;
  std::string thresholds_csv;
  std::string null_csv;
  std::string null_json;
  std::string p_values_csv;
  bool omit_samples = false;
  bool omit_p_values = false;
  bool welch = false;
  bool two_sided = false;
  bool absolute_max = false;
  std::string basis_init = "svd";
  RunConfig config;
};

void add_common_options(CLI::App* cmd, CommonArgs& args, bool needs_fast_knobs) {
  cmd->add_option("--data", args.data_path, "value matrix, subjects x features (.csv or binary)")
      ->required();
  cmd->add_option("--labels", args.label_path, "group labels, one 0/1 per line")->required();
  cmd->add_option("--trials,-T", args.config.trial_count, "number of permutation trials");
  cmd->add_option("--bin-width", args.config.bin_width, "null histogram bin width");
  cmd->add_option("--alpha", args.config.alpha_levels, "alpha levels for thresholds");
  cmd->add_option("--seed", args.config.master_seed, "master seed for label shuffles");
  cmd->add_option("--mask-seed", args.config.mask_seed, "seed for sampling masks");
  cmd->add_flag("--include-identity", args.config.include_identity,
                "make trial 0 the unpermuted labels");
  cmd->add_flag("--welch", args.welch, "Welch statistic instead of pooled-variance t");
  cmd->add_flag("--two-sided", args.two_sided, "threshold at the 1-alpha/2 quantile");
  cmd->add_flag("--absolute-max", args.absolute_max, "track max |t| instead of max t");
  cmd->add_option("--report", args.report_path, "write the JSON report here");
  cmd->add_option("--thresholds-csv", args.thresholds_csv, "write thresholds table here");
  cmd->add_option("--null-csv", args.null_csv, "write the null histogram here");
  cmd->add_option("--null-json", args.null_json, "write null samples + thresholds here");
  cmd->add_option("--p-values-csv", args.p_values_csv, "write per-feature p-values here");
  cmd->add_flag("--omit-samples", args.omit_samples, "drop max samples from the JSON report");
  cmd->add_flag("--omit-p-values", args.omit_p_values, "drop p-values from the JSON report");
  if (needs_fast_knobs) {
    cmd->add_option("--training-trials", args.config.training_trials,
                    "fully computed trials used for training");
    cmd->add_option("--rank", args.config.rank, "basis rank (default: subject count)");
    cmd->add_option("--rate", args.config.sampling_rate, "recovery sampling rate in (0,1]");
    cmd->add_option("--training-rate", args.config.training_rate,
                    "training-pass sampling rate (default: --rate)");
    cmd->add_option("--passes", args.config.passes, "training passes over the training set");
    cmd->add_option("--basis-init", args.basis_init, "basis init: svd or random")
        ->check(CLI::IsMember({"svd", "random"}));
  }
}

void finalize_config(CommonArgs& args) {
  args.config.statistic =
      args.welch ? fastperm::StatisticKind::welch_t : fastperm::StatisticKind::pooled_t;
  args.config.tail = args.two_sided ? fastperm::TailConvention::two_sided
                                    : fastperm::TailConvention::one_sided;
  args.config.absolute_max = args.absolute_max;
  args.config.basis_init = args.basis_init == "random" ? fastperm::BasisInit::random
                                                       : fastperm::BasisInit::svd_warm_start;
}

void write_p_values_csv(const std::string& path, const std::vector<double>& p_values) {
  std::ofstream out(path);
  if (!out) {
    throw fastperm::Error(fastperm::ErrorCategory::io_error,
                          "cannot open " + path + " for writing");
  }
  out.precision(17);
  out << "feature,p_value\n";
  for (size_t i = 0; i < p_values.size(); ++i) out << i << ',' << p_values[i] << '\n';
}

void emit_outputs(const CommonArgs& args, const fastperm::RunReport& report,
                  const std::vector<double>& max_samples) {
  if (!args.report_path.empty()) {
    nlohmann::json j =
        fastperm::report_to_json(report, !args.omit_samples, !args.omit_p_values);
    std::ofstream out(args.report_path);
    if (!out) {
      throw fastperm::Error(fastperm::ErrorCategory::io_error,
                            "cannot open " + args.report_path + " for writing");
    }
    out << j.dump(2) << '\n';
  }
  if (!args.thresholds_csv.empty()) fastperm::write_thresholds_csv(args.thresholds_csv, report);
  if (!args.null_csv.empty() || !args.null_json.empty()) {
    fastperm::MaxNullDistribution null(max_samples, report.config.bin_width);
    if (!args.null_csv.empty()) fastperm::write_null_csv(args.null_csv, null);
    if (!args.null_json.empty()) {
      std::ofstream out(args.null_json);
      if (!out) {
        throw fastperm::Error(fastperm::ErrorCategory::io_error,
                              "cannot open " + args.null_json + " for writing");
      }
      out << fastperm::null_to_json(null, report.config.alpha_levels, report.config.tail).dump(2)
          << '\n';
    }
  }
  if (!args.p_values_csv.empty()) write_p_values_csv(args.p_values_csv, report.p_values);
}

void print_summary(const fastperm::RunReport& report) {
  std::printf("mode=%s trials=%lld\n", report.mode.c_str(),
              static_cast<long long>(report.config.trial_count));
  for (const auto& t : report.thresholds) {
    if (t.available) {
      std::printf("  threshold[alpha=%g] = %.6f", t.alpha, t.value);
      if (report.mode == "compare") std::printf("  (abs error %.6f)", t.abs_error);
      std::printf("\n");
    } else {
      std::printf("  threshold[alpha=%g] unavailable (needs >= %.0f trials)\n", t.alpha,
                  1.0 / t.alpha);
    }
  }
  std::printf("  min corrected p-value = %.6g\n", report.min_p_value);
  if (report.mode == "fast" || report.mode == "compare") {
    std::printf("  sigma2=%.6g bias_shift=%.6g singular_trials=%lld\n", report.sigma2,
                report.bias_shift, static_cast<long long>(report.singular_trials));
    std::printf("  stat evals: training=%lld recovery=%lld\n",
                static_cast<long long>(report.counts.training_stat_evals),
                static_cast<long long>(report.counts.recovery_stat_evals));
  }
  if (report.mode == "compare") {
    std::printf("  KL(true||recovered)=%.6g BD=%.6g | KL(true||naive)=%.6g BD=%.6g\n",
                report.kl_recovered, report.bd_recovered, report.kl_naive, report.bd_naive);
    std::printf("  speedup: evaluations %.2fx, wall-clock %.2fx\n", report.eval_count_ratio,
                report.wallclock_speedup);
  }
}

int run_rmt(const std::string& config_path, const std::string& report_path,
            const std::string& csv_path) {
  std::ifstream in(config_path);
  if (!in) {
    throw fastperm::Error(fastperm::ErrorCategory::io_error, "cannot open " + config_path);
  }
  nlohmann::json cfg = nlohmann::json::parse(in, nullptr, false);
  if (cfg.is_discarded()) {
    throw fastperm::Error(fastperm::ErrorCategory::parse_error,
                          config_path + " is not valid JSON");
  }

  fastperm::SpectralScenario base;
  base.v = cfg.at("v").get<fastperm::Index>();
  base.t = cfg.at("t").get<fastperm::Index>();
  base.lambda = cfg.at("lambda").get<std::vector<double>>();
  base.r = static_cast<fastperm::Index>(base.lambda.size());
  base.delta = cfg.value("delta", 0.5);
  const auto sigma2_grid = cfg.at("sigma2_grid").get<std::vector<double>>();
  const int draws = cfg.value("draws", 100);
  const uint64_t seed = cfg.value("seed", 0ULL);

  nlohmann::json out_rows = nlohmann::json::array();
  std::ofstream csv;
  if (!csv_path.empty()) {
    csv.open(csv_path);
    csv.precision(17);
    csv << "sigma2,premise_holds,star_rate,mean_spike_rel_err,max_spike_rel_err,"
           "mp_lower,mp_upper,mp_lower_rel_err,mp_upper_rel_err\n";
  }

  for (double sigma2 : sigma2_grid) {
    fastperm::SpectralScenario sc = base;
    sc.sigma2 = sigma2;
    sc.validate();
    const fastperm::Vector predicted = fastperm::predicted_spike_eigenvalues(sc);
    int star_holds = 0;
    double mean_rel = 0.0, max_rel = 0.0;
    bool premise = false;
    double mp_lo_err = 0.0, mp_hi_err = 0.0;
    const auto [mp_lo, mp_hi] = fastperm::mp_support(sigma2, sc.v, sc.t);
    for (int d = 0; d < draws; ++d) {
      const uint64_t draw_seed = fastperm::derive_seed(seed, static_cast<uint64_t>(d));
      const fastperm::Vector eigs = fastperm::simulate_spiked_eigenvalues(sc, draw_seed);
      const auto report = fastperm::check_star_condition(sc, eigs);
      premise = report.premise_holds;
      if (report.all_satisfied()) ++star_holds;
      for (fastperm::Index i = 0; i < sc.r; ++i) {
        const double rel = std::abs(eigs[i] - predicted[i]) / predicted[i];
        mean_rel += rel;
        max_rel = std::max(max_rel, rel);
      }
      if (sigma2 > 0.0 && d == 0) {
        const fastperm::Vector noise_eigs =
            fastperm::simulate_noise_eigenvalues(sc.v, sc.t, sigma2, draw_seed);
        mp_hi_err = std::abs(noise_eigs[0] - mp_hi) / mp_hi;
        mp_lo_err = std::abs(noise_eigs[sc.v - 1] - mp_lo) / mp_lo;
      }
    }
    mean_rel /= static_cast<double>(draws) * static_cast<double>(sc.r);
    const double star_rate = static_cast<double>(star_holds) / static_cast<double>(draws);

    nlohmann::json row;
    row["sigma2"] = sigma2;
    row["premise_holds"] = premise;
    row["star_rate"] = star_rate;
    row["mean_spike_rel_err"] = mean_rel;
    row["max_spike_rel_err"] = max_rel;
    row["mp_support"] = {mp_lo, mp_hi};
    row["mp_lower_rel_err"] = mp_lo_err;
    row["mp_upper_rel_err"] = mp_hi_err;
    out_rows.push_back(row);
    if (csv.is_open()) {
      csv << sigma2 << ',' << (premise ? 1 : 0) << ',' << star_rate << ',' << mean_rel << ','
          << max_rel << ',' << mp_lo << ',' << mp_hi << ',' << mp_lo_err << ',' << mp_hi_err
          << '\n';
    }
    std::printf("sigma2=%g premise=%d star_rate=%.3f mean_spike_rel_err=%.4f\n", sigma2,
                premise ? 1 : 0, star_rate, mean_rel);
  }

  if (!report_path.empty()) {
    nlohmann::json j;
    j["schema_version"] = fastperm::kReportSchemaVersion;
    j["mode"] = "rmt";
    j["config"] = cfg;
    j["rows"] = out_rows;
    std::ofstream out(report_path);
    if (!out) {
      throw fastperm::Error(fastperm::ErrorCategory::io_error,
                            "cannot open " + report_path + " for writing");
    }
    out << j.dump(2) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Permutation testing with low-rank recovery of the max-statistic null"};
  app.require_subcommand(1);

  CommonArgs full_args, fast_args, compare_args;
  std::string model_out, model_in;
  std::vector<double> compare_rates;
  std::string sweep_csv, true_null_csv, recovered_null_csv, naive_null_csv;

  CLI::App* cmd_full = app.add_subcommand("full", "exact permutation run");
  add_common_options(cmd_full, full_args, false);

  CLI::App* cmd_fast = app.add_subcommand("fast", "training + sparse recovery run");
  add_common_options(cmd_fast, fast_args, true);
  cmd_fast->add_option("--model-out", model_out, "save the training bundle here");
  cmd_fast->add_option("--model-in", model_in, "reuse a saved training bundle");

  CLI::App* cmd_compare = app.add_subcommand("compare", "full vs fast on the same seeds");
  add_common_options(cmd_compare, compare_args, true);
  cmd_compare->add_option("--rates", compare_rates,
                          "sampling-rate sweep (overrides --rate when given)");
  cmd_compare->add_option("--sweep-csv", sweep_csv, "write one row per swept rate here");
  cmd_compare->add_option("--true-null-csv", true_null_csv, "exact null histogram");
  cmd_compare->add_option("--recovered-null-csv", recovered_null_csv,
                          "recovered null histogram");
  cmd_compare->add_option("--naive-null-csv", naive_null_csv, "naive-pooling null histogram");

  CLI::App* cmd_rmt = app.add_subcommand("rmt", "random-matrix scenario sweep");
  std::string rmt_config, rmt_report, rmt_csv;
  cmd_rmt->add_option("--config", rmt_config, "scenario sweep JSON")->required();
  cmd_rmt->add_option("--report", rmt_report, "write the JSON report here");
  cmd_rmt->add_option("--csv", rmt_csv, "write one CSV row per sigma2 here");

  CLI::App* cmd_synth = app.add_subcommand("synth", "generate a synthetic dataset");
  fastperm::SyntheticSpec synth_spec;
  std::string synth_data = "synthetic.fpm", synth_labels = "synthetic.labels";
  cmd_synth->add_option("--subjects", synth_spec.subjects, "subject count");
  cmd_synth->add_option("--features", synth_spec.features, "feature count");
  cmd_synth->add_option("--planted-rank", synth_spec.planted_rank, "planted basis rank");
  cmd_synth->add_option("--leading-scale", synth_spec.leading_scale,
                        "scale of the strongest component");
  cmd_synth->add_option("--decay", synth_spec.spectrum_decay, "geometric spectrum decay");
  cmd_synth->add_option("--noise", synth_spec.noise_scale, "i.i.d. feature noise sd");
  cmd_synth->add_option("--seed", synth_spec.seed, "generator seed");
  cmd_synth->add_option("--data-out", synth_data, "output matrix (.csv or binary)");
  cmd_synth->add_option("--labels-out", synth_labels, "output labels");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_full->parsed()) {
      finalize_config(full_args);
      const fastperm::LabeledDataset data =
          fastperm::ingest(full_args.data_path, full_args.label_path);
      fastperm::FullOutputs out = fastperm::run_full(data, full_args.config);
      emit_outputs(full_args, out.report, out.maxima);
      print_summary(out.report);
    } else if (cmd_fast->parsed()) {
      finalize_config(fast_args);
      const fastperm::LabeledDataset data =
          fastperm::ingest(fast_args.data_path, fast_args.label_path);
      std::optional<std::pair<fastperm::SubspaceModel, fastperm::ResidualModel>> pretrained;
      if (!model_in.empty()) pretrained = fastperm::load_model(model_in);
      fastperm::FastOutputs out = fastperm::run_fast(data, fast_args.config, pretrained);
      if (!model_out.empty()) fastperm::save_model(model_out, out.model, out.residual);
      emit_outputs(fast_args, out.report, out.maxima);
      print_summary(out.report);
    } else if (cmd_compare->parsed()) {
      finalize_config(compare_args);
      const fastperm::LabeledDataset data =
          fastperm::ingest(compare_args.data_path, compare_args.label_path);
      if (compare_rates.empty()) compare_rates.push_back(compare_args.config.sampling_rate);
      const fastperm::FullOutputs full = fastperm::run_full(data, compare_args.config);
      std::vector<fastperm::SweepRow> sweep;
      for (size_t i = 0; i < compare_rates.size(); ++i) {
        fastperm::RunConfig cfg = compare_args.config;
        cfg.sampling_rate = compare_rates[i];
        fastperm::CompareOutputs out = fastperm::run_compare_with_full(data, cfg, full);
        fastperm::SweepRow row;
        row.rate = compare_rates[i];
        row.kl_recovered = out.report.kl_recovered;
        row.bd_recovered = out.report.bd_recovered;
        row.kl_naive = out.report.kl_naive;
        row.bd_naive = out.report.bd_naive;
        row.wallclock_speedup = out.report.wallclock_speedup;
        row.eval_count_ratio = out.report.eval_count_ratio;
        row.thresholds = out.report.thresholds;
        sweep.push_back(row);
        std::printf("--- rate %g ---\n", compare_rates[i]);
        print_summary(out.report);
        if (i + 1 == compare_rates.size()) {
          emit_outputs(compare_args, out.report, out.recovered_maxima);
          if (!true_null_csv.empty()) {
            fastperm::write_null_csv(
                true_null_csv,
                fastperm::MaxNullDistribution(out.true_maxima, cfg.bin_width));
          }
          if (!recovered_null_csv.empty()) {
            fastperm::write_null_csv(
                recovered_null_csv,
                fastperm::MaxNullDistribution(out.recovered_maxima, cfg.bin_width));
          }
          if (!naive_null_csv.empty()) {
            fastperm::write_null_csv(
                naive_null_csv,
                fastperm::MaxNullDistribution(out.naive_maxima, cfg.bin_width));
          }
        }
      }
      if (!sweep_csv.empty()) fastperm::write_sweep_csv(sweep_csv, sweep);
    } else if (cmd_rmt->parsed()) {
      return run_rmt(rmt_config, rmt_report, rmt_csv);
    } else if (cmd_synth->parsed()) {
      const fastperm::LabeledDataset data = fastperm::make_synthetic(synth_spec);
      fastperm::io::write_matrix(synth_data, data.subject_rows());
      fastperm::io::write_labels(synth_labels, data.labels());
      std::printf("wrote %lld x %lld matrix to %s, labels to %s\n",
                  static_cast<long long>(data.subject_count()),
                  static_cast<long long>(data.feature_count()), synth_data.c_str(),
                  synth_labels.c_str());
    }
  } catch (const fastperm::Error& e) {
    nlohmann::json err;
    err["error"] = {{"category", fastperm::to_string(e.category())}, {"message", e.what()}};
    std::cerr << err.dump() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    nlohmann::json err;
    err["error"] = {{"category", "internal"}, {"message", e.what()}};
    std::cerr << err.dump() << '\n';
    return static_cast<int>(fastperm::ErrorCategory::internal);
  }
  return 0;
}
