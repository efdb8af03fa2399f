#pragma once

// Synthetic low-rank-plus-noise datasets for tests and demos: subject
// loadings on a planted basis with geometrically decaying scales, plus
// i.i.d. Gaussian feature noise. Group labels are balanced and carry no
// effect, so every statistic is a draw from the global null.

#include <cmath>
#include <cstdint>
#include <vector>

#include "fastperm/dataset.hpp"
#include "fastperm/rng.hpp"

namespace fastperm {

struct SyntheticSpec {
  Index subjects = 30;
  Index features = 50000;
  Index planted_rank = 20;
  double leading_scale = 1.0;    // loading scale of the first component
  double spectrum_decay = 0.9;   // geometric decay of component scales
  double noise_scale = 0.1;      // i.i.d. feature noise standard deviation
  uint64_t seed = 0;

  void validate() const {
    if (subjects < 4) {
      throw Error(ErrorCategory::invalid_config, "need at least 4 subjects");
    }
    if (features < 1 || planted_rank < 1 || planted_rank > subjects) {
      throw Error(ErrorCategory::invalid_config, "invalid feature count or planted rank");
    }
    if (!(spectrum_decay > 0.0 && spectrum_decay <= 1.0) || leading_scale <= 0.0 ||
        noise_scale < 0.0) {
      throw Error(ErrorCategory::invalid_config, "invalid synthetic scales");
    }
  }
};

inline LabeledDataset make_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const Index n = spec.subjects;
  const Index v = spec.features;
  const Index r = spec.planted_rank;

  Matrix loadings(n, r);
  Stream load_stream(derive_seed(spec.seed, 0x6c6f6164ULL), 0);
  double scale = spec.leading_scale;
  for (Index k = 0; k < r; ++k) {
    for (Index i = 0; i < n; ++i) loadings(i, k) = scale * load_stream.next_normal();
    scale *= spec.spectrum_decay;
  }

  Matrix basis(r, v);
  Stream basis_stream(derive_seed(spec.seed, 0x62617369ULL), 0);
  for (Index j = 0; j < v; ++j) {
    for (Index k = 0; k < r; ++k) basis(k, j) = basis_stream.next_normal();
  }

  Matrix values = loadings * basis;
  if (spec.noise_scale > 0.0) {
    Stream noise_stream(derive_seed(spec.seed, 0x6e6f6973ULL), 0);
    for (Index j = 0; j < v; ++j) {
      for (Index i = 0; i < n; ++i) values(i, j) += spec.noise_scale * noise_stream.next_normal();
    }
  }

  std::vector<uint8_t> labels(static_cast<size_t>(n), 1);
  for (Index i = 0; i < n / 2; ++i) labels[static_cast<size_t>(i)] = 0;
  return LabeledDataset(values, std::move(labels));
}

}  // namespace fastperm
