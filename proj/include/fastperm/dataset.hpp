#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fastperm/error.hpp"

namespace fastperm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Subject-labeled measurement matrix. Values are held feature-major
// (features x subjects) so that per-trial group accumulation walks
// contiguous columns; the constructor takes the natural subjects x features
// orientation.
class LabeledDataset {
 public:
  LabeledDataset(const Matrix& subject_rows, std::vector<uint8_t> labels)
      : labels_(std::move(labels)) {
    if (static_cast<Index>(labels_.size()) != subject_rows.rows()) {
      throw Error(ErrorCategory::dimension_mismatch,
                  "label count " + std::to_string(labels_.size()) +
                      " does not match subject rows " + std::to_string(subject_rows.rows()));
    }
    Index n0 = 0, n1 = 0;
    for (size_t i = 0; i < labels_.size(); ++i) {
      if (labels_[i] > 1) {
        throw Error(ErrorCategory::parse_error,
                    "label at row " + std::to_string(i) + " is not 0/1");
      }
      (labels_[i] == 0 ? n0 : n1)++;
    }
    if (n0 < 2 || n1 < 2) {
      throw Error(ErrorCategory::degenerate_labels,
                  "both groups need at least 2 subjects (got " + std::to_string(n0) + " and " +
                      std::to_string(n1) + ")");
    }
    for (Index i = 0; i < subject_rows.rows(); ++i) {
      for (Index j = 0; j < subject_rows.cols(); ++j) {
        if (!std::isfinite(subject_rows(i, j))) {
          throw Error(ErrorCategory::non_finite_value,
                      "non-finite value at subject " + std::to_string(i) + ", feature " +
                          std::to_string(j));
        }
      }
    }
    values_ = subject_rows.transpose();
    squares_ = values_.cwiseProduct(values_);
  }

  Index subject_count() const { return values_.cols(); }
  Index feature_count() const { return values_.rows(); }
  const std::vector<uint8_t>& labels() const { return labels_; }

  // feature-major views used by the statistic kernels
  const Matrix& values() const { return values_; }
  const Matrix& squares() const { return squares_; }

  double value(Index subject, Index feature) const { return values_(feature, subject); }

  Matrix subject_rows() const { return values_.transpose(); }

 private:
  Matrix values_;   // v x n
  Matrix squares_;  // v x n, elementwise values^2
  std::vector<uint8_t> labels_;
};

}  // namespace fastperm
