// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// criterion fails. Criteria 3-5 share one synthetic experiment.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fastperm/fastperm.hpp"

using fastperm::Index;
using fastperm::LabeledDataset;
using fastperm::Matrix;
using fastperm::RunConfig;
using fastperm::Vector;

namespace {

struct CriterionResult {
  bool pass = true;
  std::string detail;
};

struct Check {
  bool ok = true;
  std::ostringstream detail;

  void require(bool condition, const std::string& label) {
    if (!condition) {
      ok = false;
      detail << " FAILED{" << label << "}";
    }
  }
};

// ---- criterion 1 --------------------------------------------------------

double oracle_pooled_t(const std::vector<double>& g0, const std::vector<double>& g1) {
  const double n0 = static_cast<double>(g0.size()), n1 = static_cast<double>(g1.size());
  double m0 = 0, m1 = 0;
  for (double x : g0) m0 += x;
  for (double x : g1) m1 += x;
  m0 /= n0;
  m1 /= n1;
  double ss0 = 0, ss1 = 0;
  for (double x : g0) ss0 += (x - m0) * (x - m0);
  for (double x : g1) ss1 += (x - m1) * (x - m1);
  const double sp2 = (ss0 + ss1) / (n0 + n1 - 2.0);
  if (sp2 <= 0.0) return 0.0;
  return (m0 - m1) / std::sqrt(sp2 * (1.0 / n0 + 1.0 / n1));
}

CriterionResult criterion1_exact_oracle() {
  Check check;
  Matrix values(6, 4);
  values << 1.2, -0.3, 0.5, 2.0,
            0.7, 0.9, -1.1, 0.4,
            -0.2, 1.5, 0.3, -0.6,
            2.1, 0.2, 1.0, 0.8,
            -1.0, -0.8, 0.6, 1.3,
            0.4, 1.1, -0.5, -0.9;
  LabeledDataset data(values, {0, 0, 0, 1, 1, 1});

  const auto assignments = fastperm::enumerate_assignments(data.labels());
  check.require(assignments.size() == 20, "20 distinct assignments");
  const auto perm = fastperm::exhaustive_permutation_test(data);

  double max_abs_diff = 0.0;
  for (size_t a = 0; a < assignments.size(); ++a) {
    for (Index f = 0; f < 4; ++f) {
      std::vector<double> g0, g1;
      for (Index s = 0; s < 6; ++s) {
        (assignments[a][static_cast<size_t>(s)] == 0 ? g0 : g1).push_back(data.value(s, f));
      }
      const double expect = oracle_pooled_t(g0, g1);
      max_abs_diff =
          std::max(max_abs_diff, std::abs(perm.stats(f, static_cast<Index>(a)) - expect));
    }
  }
  check.require(max_abs_diff <= 1e-12, "entrywise agreement at 1e-12");

  // Corrected p-values against exhaustive counting.
  std::vector<double> maxima(20);
  for (Index t = 0; t < 20; ++t) maxima[static_cast<size_t>(t)] = perm.stats.col(t).maxCoeff();
  fastperm::MaxNullDistribution null(maxima, 0.01);
  const auto observed = fastperm::t_statistic(data, data.labels());
  for (Index f = 0; f < 4; ++f) {
    int64_t count = 0;
    for (double m : maxima) {
      if (m >= observed.stats[f]) ++count;
    }
    const double expect = static_cast<double>(count + 1) / 21.0;
    check.require(fastperm::corrected_p_value(null, observed.stats[f]) == expect,
                  "p-value exact counting");
  }

  check.detail << "max entrywise diff " << max_abs_diff << ", p-values exact over 20 assignments";
  return {check.ok, check.detail.str()};
}

// ---- criterion 2 --------------------------------------------------------

CriterionResult criterion2_degenerate_rate() {
  Check check;
  fastperm::SyntheticSpec spec;
  spec.subjects = 12;
  spec.features = 2000;
  spec.planted_rank = 8;
  spec.noise_scale = 0.1;
  spec.seed = 2026;
  const LabeledDataset data = fastperm::make_synthetic(spec);

  RunConfig config;
  config.trial_count = 500;
  config.training_trials = 100;
  config.sampling_rate = 1.0;
  config.master_seed = 7;
  config.mask_seed = 8;

  const auto full = fastperm::run_full(data, config);
  const auto fast = fastperm::run_fast(data, config);
  check.require(fast.residual.bias_shift == 0.0, "bias is exactly zero");
  check.require(full.maxima.size() == fast.maxima.size(), "same trial count");
  int64_t mismatches = 0;
  for (size_t i = 0; i < full.maxima.size(); ++i) {
    if (full.maxima[i] != fast.maxima[i]) ++mismatches;
  }
  check.require(mismatches == 0, "bitwise-identical maxima");
  check.detail << "500 maxima bitwise identical, bias_shift = " << fast.residual.bias_shift;
  return {check.ok, check.detail.str()};
}

// ---- criteria 3-5 (one experiment) ---------------------------------------

struct FidelityOutcome {
  CriterionResult c3, c4, c5;
};

FidelityOutcome criteria_3_4_5_fidelity() {
  Check c3, c4, c5;
  const std::vector<double> rates = {0.005, 0.01, 0.05};
  const int n_seeds = 5;
  const Index v = 50'000;

  double worst_kl_gate = 0.0;           // max KL(true||rec) at rates >= 1%
  double worst_threshold_error = 0.0;   // max over seeds/rates/alphas
  bool recovered_always_beats_naive = true;
  double ratio_at_half_percent = 0.0;
  double wallclock_at_half_percent = 0.0;

  for (int seed = 0; seed < n_seeds; ++seed) {
    fastperm::SyntheticSpec spec;
    spec.subjects = 30;
    spec.features = v;
    spec.planted_rank = 20;
    spec.leading_scale = 1.0;
    spec.spectrum_decay = 0.9;
    spec.noise_scale = 0.1;
    spec.seed = 5000 + static_cast<uint64_t>(seed);
    const LabeledDataset data = fastperm::make_synthetic(spec);

    RunConfig config;
    config.trial_count = 2000;
    config.training_trials = 100;
    config.rank = 30;
    config.alpha_levels = {0.05, 0.01};
    config.master_seed = 90 + static_cast<uint64_t>(seed);
    config.mask_seed = 190 + static_cast<uint64_t>(seed);

    const auto full = fastperm::run_full(data, config);
    for (double rate : rates) {
      RunConfig cfg = config;
      cfg.sampling_rate = rate;
      const auto out = fastperm::run_compare_with_full(data, cfg, full);

      if (out.report.kl_recovered >= out.report.kl_naive) {
        recovered_always_beats_naive = false;
        c3.detail << " [seed " << seed << " rate " << rate << ": KL rec "
                  << out.report.kl_recovered << " >= naive " << out.report.kl_naive << "]";
      }
      if (rate >= 0.01) worst_kl_gate = std::max(worst_kl_gate, out.report.kl_recovered);
      for (const auto& entry : out.report.thresholds) {
        worst_threshold_error = std::max(worst_threshold_error, entry.abs_error);
      }
      if (rate == 0.005) {
        const int64_t expected_training = v * 100;
        const int64_t expected_recovery = 250 * 1900;
        c5.require(out.report.counts.training_stat_evals == expected_training,
                   "training eval count exact");
        c5.require(out.report.counts.recovery_stat_evals == expected_recovery,
                   "recovery eval count exact");
        ratio_at_half_percent = out.report.eval_count_ratio;
        wallclock_at_half_percent += out.report.wallclock_speedup / n_seeds;
        c5.require(out.report.eval_count_ratio >= 13.0, "eval-count ratio >= 13");
      }
    }
  }

  c3.require(recovered_always_beats_naive, "KL(true||rec) < KL(true||naive) at every rate");
  c3.require(worst_kl_gate <= 0.05, "KL(true||rec) <= 0.05 at rates >= 1%");
  c3.detail << "worst KL at rates >= 1%: " << worst_kl_gate << " (5 seeds, rates 0.5/1/5%)";

  c4.require(worst_threshold_error <= 0.2, "threshold error <= 0.2 at alpha 0.05/0.01");
  c4.detail << "worst |threshold error|: " << worst_threshold_error
            << " over 5 seeds x 3 rates x {0.95, 0.99}";

  c5.detail << "eval-count ratio " << ratio_at_half_percent
            << " (gate >= 13), mean wall-clock ratio " << wallclock_at_half_percent
            << "x (reported, not gated)";
  return {{c3.ok, c3.detail.str()}, {c4.ok, c4.detail.str()}, {c5.ok, c5.detail.str()}};
}

// ---- criterion 6 --------------------------------------------------------

CriterionResult criterion6_mp_edges() {
  Check check;
  const Index v = 200, t = 20'000;
  const auto [lo, hi] = fastperm::mp_support(1.0, v, t);
  const Vector eigs = fastperm::simulate_noise_eigenvalues(v, t, 1.0, 20'260'806);
  const double hi_err = std::abs(eigs[0] - hi) / hi;
  const double lo_err = std::abs(eigs[v - 1] - lo) / lo;
  check.require(hi_err <= 0.05, "upper edge within 5%");
  check.require(lo_err <= 0.05, "lower edge within 5%");
  check.detail << "edge errors: upper " << hi_err << ", lower " << lo_err;
  return {check.ok, check.detail.str()};
}

// ---- criterion 7 --------------------------------------------------------

CriterionResult criterion7_theorem1() {
  Check check;
  fastperm::SpectralScenario sc;
  sc.v = 200;
  sc.t = 20'000;
  sc.lambda = {2000.0, 1500.0, 1000.0, 600.0, 400.0};
  sc.r = 5;
  sc.delta = 0.5;
  sc.sigma2 = 0.006;  // premise bound is delta*lambda_r/t = 0.01
  sc.validate();
  check.require(sc.sigma2 < sc.delta * sc.lambda.back() / static_cast<double>(sc.t),
                "scenario satisfies the premise");

  const Vector predicted = fastperm::predicted_spike_eigenvalues(sc);
  const int draws = 100;
  int star_holds = 0, spikes_close = 0;
  double worst_rel = 0.0;
  for (int d = 0; d < draws; ++d) {
    const Vector eigs =
        fastperm::simulate_spiked_eigenvalues(sc, fastperm::derive_seed(777, d));
    const auto report = fastperm::check_star_condition(sc, eigs);
    if (report.all_satisfied()) ++star_holds;
    bool all_close = true;
    for (Index i = 0; i < sc.r; ++i) {
      const double rel = std::abs(eigs[i] - predicted[i]) / predicted[i];
      worst_rel = std::max(worst_rel, rel);
      if (rel > 0.10) all_close = false;
    }
    if (all_close) ++spikes_close;
  }
  check.require(star_holds >= 95, "star condition in >= 95/100 draws");
  check.require(spikes_close >= 95, "spikes within 10% of predictions in >= 95/100 draws");
  check.detail << "star " << star_holds << "/100, spike-match " << spikes_close
               << "/100, worst spike rel err " << worst_rel;
  return {check.ok, check.detail.str()};
}

// ---- criterion 8 --------------------------------------------------------

CriterionResult criterion8_theorem2() {
  Check check;
  fastperm::SyntheticSpec spec;
  spec.subjects = 12;
  spec.features = 2000;
  spec.planted_rank = 8;
  spec.noise_scale = 0.15;
  spec.seed = 808;
  const LabeledDataset data = fastperm::make_synthetic(spec);

  const int64_t trials = 2000, training = 100;
  const double rate = 0.02;  // 40 samples per trial, floor is 36
  fastperm::PermutationPlan plan{trials, 4141, false};
  const auto perm = fastperm::full_permutation_test(data, plan);

  const Matrix p_train = perm.stats.leftCols(training);
  const auto model = fastperm::train_basis(p_train, 12, rate, 515);
  const double sigma2 = fastperm::estimate_sigma2(model.training_residual);
  fastperm::SamplingMask mask(rate, 2000, trials, 616, 12);
  const uint64_t noise_seed = 717;
  const auto residual = fastperm::estimate_bias(p_train, model, mask, sigma2, noise_seed);

  // Recovery with measured entrywise error.
  fastperm::ColumnReconstructor rec(model);
  Vector estimate(2000), samples;
  std::vector<double> gaps;
  double eps = 0.0, mean_true = 0.0, mean_recovered = 0.0;
  for (int64_t t = training; t < trials; ++t) {
    const auto omega = mask.indices_for(t);
    samples.resize(static_cast<Index>(omega.size()));
    for (size_t i = 0; i < omega.size(); ++i) {
      samples[static_cast<Index>(i)] = perm.stats(omega[i], t);
    }
    bool singular = false;
    rec.reconstruct(omega, samples, sigma2, noise_seed, static_cast<uint64_t>(t), estimate,
                    &singular);
    eps = std::max(eps, (perm.stats.col(t) - estimate).cwiseAbs().maxCoeff());
    const double m = perm.stats.col(t).maxCoeff();
    const double m_hat = estimate.maxCoeff();
    gaps.push_back(m - m_hat);
    mean_true += m;
    mean_recovered += m_hat;
  }
  const auto held_out = static_cast<double>(trials - training);
  const double b = (mean_true - mean_recovered) / held_out;  // held-out bias
  const std::vector<double> ks = {2.0, 3.0, 5.0};
  const auto report =
      fastperm::chebyshev_bound_check(gaps, b, residual.bias_shift, eps, ks);
  for (const auto& row : report.rows) {
    std::ostringstream label;
    label << "Pr[gap > " << row.k << " eps] = " << row.exceedance_frequency << " <= "
          << row.bound + row.slack;
    check.require(row.pass, label.str());
  }

  // Algebraic identity on the training set.
  double train_true = 0.0, train_recovered = 0.0;
  for (int64_t t = 0; t < training; ++t) {
    const double m = p_train.col(t).maxCoeff();
    train_true += m;
    train_recovered += m - residual.per_trial_max_gap[static_cast<size_t>(t)];
  }
  train_true /= static_cast<double>(training);
  train_recovered = train_recovered / static_cast<double>(training) + residual.bias_shift;
  check.require(std::abs(train_recovered - train_true) <= 1e-10,
                "mean(m_hat + b_hat) = mean(m) on training");

  check.detail << "eps " << eps << ", b " << b << ", b_hat " << residual.bias_shift
               << ", exceedance (k=2,3,5): ";
  for (const auto& row : report.rows) check.detail << row.exceedance_frequency << " ";
  return {check.ok, check.detail.str()};
}

// ---- criterion 9 --------------------------------------------------------

CriterionResult criterion9_properties() {
  Check check;
  const int cases = 1000;

  {  // antisymmetry + scale invariance
    fastperm::Stream rng(901, 0);
    bool anti_ok = true, scale_ok = true;
    for (int c = 0; c < cases; ++c) {
      const Index n0 = 2 + static_cast<Index>(rng.next_below(3));
      const Index n1 = 2 + static_cast<Index>(rng.next_below(3));
      const Index n = n0 + n1, v = 1 + static_cast<Index>(rng.next_below(10));
      Matrix values(n, v);
      for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < v; ++j) values(i, j) = 2.0 * rng.next_normal();
      }
      std::vector<uint8_t> labels(static_cast<size_t>(n), 1);
      for (Index i = 0; i < n0; ++i) labels[static_cast<size_t>(i)] = 0;
      LabeledDataset data(values, labels);
      std::vector<uint8_t> flipped = labels;
      for (auto& l : flipped) l ^= 1;
      const auto a = fastperm::t_statistic(data, labels);
      const auto b = fastperm::t_statistic(data, flipped);
      for (Index i = 0; i < a.stats.size(); ++i) {
        if (a.stats[i] != -b.stats[i]) anti_ok = false;
      }
      const double scale = 0.1 + 9.9 * rng.next_double();
      LabeledDataset scaled(values * scale, labels);
      const auto s = fastperm::t_statistic(scaled, labels);
      for (Index i = 0; i < a.stats.size(); ++i) {
        if (std::abs(s.stats[i] - a.stats[i]) > 1e-12) scale_ok = false;
      }
    }
    check.require(anti_ok, "antisymmetry (1000 cases)");
    check.require(scale_ok, "scale invariance (1000 cases)");
  }

  {  // subset-max inequality
    fastperm::Stream rng(902, 0);
    bool ok = true;
    for (int c = 0; c < cases; ++c) {
      const size_t n = 1 + rng.next_below(80);
      std::vector<double> full(n);
      for (double& x : full) x = 4.0 * rng.next_normal();
      std::vector<double> subset;
      for (double x : full) {
        if (rng.next_double() < 0.3) subset.push_back(x);
      }
      if (subset.empty()) subset.push_back(full[rng.next_below(n)]);
      if (fastperm::column_max(subset) > fastperm::column_max(full)) ok = false;
    }
    check.require(ok, "subset-max inequality (1000 cases)");
  }

  {  // KL/BD non-negativity, zero iff identical
    fastperm::Stream rng(903, 0);
    bool ok = true;
    for (int c = 0; c < cases; ++c) {
      const size_t n = 5 + rng.next_below(50);
      std::vector<double> a(n), b(n);
      for (double& x : a) x = rng.next_normal();
      for (double& x : b) x = 0.25 + rng.next_normal();
      fastperm::MaxNullDistribution p(a, 0.01), q(b, 0.01);
      const double kl = fastperm::kl_divergence(p, q);
      const double bd = fastperm::bhattacharyya(p, q);
      if (kl < 0.0 || bd < 0.0) ok = false;
      if (fastperm::kl_divergence(p, p) != 0.0) ok = false;
      if (fastperm::bhattacharyya(p, p) > 1e-12) ok = false;
      const bool same = p.first_bin_index() == q.first_bin_index() && p.counts() == q.counts();
      if (!same && (kl <= 0.0 || bd <= 0.0)) ok = false;
    }
    check.require(ok, "KL/BD >= 0 and zero iff identical (1000 cases)");
  }

  {  // threshold monotone in alpha
    fastperm::Stream rng(904, 0);
    bool ok = true;
    for (int c = 0; c < cases; ++c) {
      const size_t n = 20 + rng.next_below(150);
      std::vector<double> samples(n);
      for (double& x : samples) x = 3.0 * rng.next_normal();
      fastperm::MaxNullDistribution null(samples, 0.01);
      double prev = std::numeric_limits<double>::infinity();
      for (double alpha : {0.06, 0.1, 0.25, 0.5, 0.75}) {
        const double thr = fastperm::threshold(null, alpha);
        if (thr > prev) ok = false;
        prev = thr;
      }
    }
    check.require(ok, "threshold monotone in alpha (1000 cases)");
  }

  {  // p-value monotone in the observed statistic
    fastperm::Stream rng(905, 0);
    bool ok = true;
    for (int c = 0; c < cases; ++c) {
      const size_t n = 5 + rng.next_below(80);
      std::vector<double> samples(n);
      for (double& x : samples) x = 2.0 * rng.next_normal();
      fastperm::MaxNullDistribution null(samples, 0.01);
      const double lo = rng.next_normal();
      const double hi = lo + rng.next_double();
      if (fastperm::corrected_p_value(null, hi) > fastperm::corrected_p_value(null, lo)) {
        ok = false;
      }
    }
    check.require(ok, "p-value monotone in observed stat (1000 cases)");
  }

  {  // seed determinism across worker counts
    fastperm::Stream rng(906, 0);
    bool ok = true;
    for (int c = 0; c < cases; ++c) {
      const Index n = 6;
      const Index v = 1 + static_cast<Index>(rng.next_below(8));
      Matrix values(n, v);
      for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < v; ++j) values(i, j) = rng.next_normal();
      }
      LabeledDataset data(values, {0, 0, 0, 1, 1, 1});
      fastperm::PermutationPlan plan{4, rng.next_u64(), false};
      const auto w1 = fastperm::full_permutation_test(data, plan, {}, 1);
      const auto w3 = fastperm::full_permutation_test(data, plan, {}, 3);
      for (Index j = 0; j < w1.stats.cols(); ++j) {
        for (Index i = 0; i < w1.stats.rows(); ++i) {
          if (w1.stats(i, j) != w3.stats(i, j)) ok = false;
        }
      }
    }
    check.require(ok, "worker-count determinism (1000 cases)");
  }

  check.detail << "7 property suites, 1000 cases each";
  return {check.ok, check.detail.str()};
}

}  // namespace

int main() {
  struct Entry {
    const char* name;
    std::function<CriterionResult()> fn;
  };

  FidelityOutcome fidelity;
  bool fidelity_ran = false;
  auto ensure_fidelity = [&]() {
    if (!fidelity_ran) {
      fidelity = criteria_3_4_5_fidelity();
      fidelity_ran = true;
    }
  };

  const std::vector<Entry> plan = {
      {"1 exact-oracle equivalence", criterion1_exact_oracle},
      {"2 degenerate-rate identity", criterion2_degenerate_rate},
      {"3 null-recovery fidelity", [&] { ensure_fidelity(); return fidelity.c3; }},
      {"4 threshold stability", [&] { ensure_fidelity(); return fidelity.c4; }},
      {"5 evaluation-count speedup", [&] { ensure_fidelity(); return fidelity.c5; }},
      {"6 Marchenko-Pastur edges", criterion6_mp_edges},
      {"7 spiked-spectrum predictions", criterion7_theorem1},
      {"8 max-gap concentration bound", criterion8_theorem2},
      {"9 property suites", criterion9_properties},
  };

  int failures = 0;
  for (const auto& entry : plan) {
    const auto start = std::chrono::steady_clock::now();
    CriterionResult result;
    try {
      result = entry.fn();
    } catch (const std::exception& e) {
      result.pass = false;
      result.detail = std::string("exception: ") + e.what();
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] criterion %s: %s [%.1fs]\n", result.pass ? "PASS" : "FAIL", entry.name,
                result.detail.c_str(), seconds);
    std::fflush(stdout);
    if (!result.pass) ++failures;
  }
  std::printf("%d/9 criteria passed\n", 9 - failures);
  return failures == 0 ? 0 : 1;
}
