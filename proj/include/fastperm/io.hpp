#pragma once

// File formats: CSV matrices for human-scale data, a flat little-endian
// binary matrix with a 32-byte header for large ones, label files, the
// training-model artifact, and null-distribution exports.

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fastperm/dataset.hpp"
#include "fastperm/error.hpp"
#include "fastperm/nulldist.hpp"
#include "fastperm/residual.hpp"
#include "fastperm/subspace.hpp"

namespace fastperm {

using json = nlohmann::json;

namespace io {

constexpr std::array<char, 8> kMatrixMagic = {'F', 'P', 'M', 'A', 'T', 'R', 'I', 'X'};
constexpr uint32_t kMatrixVersion = 1;
constexpr uint32_t kDtypeFloat64 = 1;

constexpr std::array<char, 8> kModelMagic = {'F', 'P', 'M', 'O', 'D', 'E', 'L', '1'};
constexpr uint32_t kModelVersion = 1;

inline bool has_suffix(const std::string& path, const std::string& suffix) {
  return path.size() >= suffix.size() &&
         path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// ---- binary matrix ------------------------------------------------------

inline void write_matrix_binary(const std::string& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::io_error, "cannot open " + path + " for writing");
  out.write(kMatrixMagic.data(), kMatrixMagic.size());
  const uint32_t version = kMatrixVersion, dtype = kDtypeFloat64;
  const uint64_t rows = static_cast<uint64_t>(m.rows()), cols = static_cast<uint64_t>(m.cols());
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(reinterpret_cast<const char*>(&dtype), sizeof dtype);
  out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
  out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
  std::vector<double> row(static_cast<size_t>(m.cols()));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) row[static_cast<size_t>(j)] = m(i, j);
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(double)));
  }
  if (!out) throw Error(ErrorCategory::io_error, "short write to " + path);
}

inline Matrix read_matrix_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::io_error, "cannot open " + path);
  std::array<char, 8> magic{};
  uint32_t version = 0, dtype = 0;
  uint64_t rows = 0, cols = 0;
  in.read(magic.data(), magic.size());
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&dtype), sizeof dtype);
  in.read(reinterpret_cast<char*>(&rows), sizeof rows);
  in.read(reinterpret_cast<char*>(&cols), sizeof cols);
  if (!in || magic != kMatrixMagic) {
    throw Error(ErrorCategory::parse_error, path + " is not a matrix file (bad magic)");
  }
  if (version != kMatrixVersion) {
    throw Error(ErrorCategory::parse_error,
                "unsupported matrix version " + std::to_string(version));
  }
  if (dtype != kDtypeFloat64) {
    throw Error(ErrorCategory::parse_error, "unsupported matrix dtype " + std::to_string(dtype));
  }
  Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  std::vector<double> row(static_cast<size_t>(cols));
  for (uint64_t i = 0; i < rows; ++i) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(double)));
    if (!in) {
      throw Error(ErrorCategory::parse_error, path + " truncated at row " + std::to_string(i));
    }
    for (uint64_t j = 0; j < cols; ++j) {
      m(static_cast<Index>(i), static_cast<Index>(j)) = row[static_cast<size_t>(j)];
    }
  }
  return m;
}

// ---- CSV matrix ----------------------------------------------------------

inline void write_matrix_csv(const std::string& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCategory::io_error, "cannot open " + path + " for writing");
  out.precision(17);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << m(i, j);
    }
    out << '\n';
  }
}

inline Matrix read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io_error, "cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      ++col;
      try {
        size_t used = 0;
        row.push_back(std::stod(cell, &used));
        while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw Error(ErrorCategory::parse_error, path + ": bad number at row " +
                                                    std::to_string(line_no) + ", column " +
                                                    std::to_string(col));
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error(ErrorCategory::parse_error,
                  path + ": row " + std::to_string(line_no) + " has " +
                      std::to_string(row.size()) + " columns, expected " +
                      std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorCategory::parse_error, path + " is empty");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t j = 0; j < rows[i].size(); ++j) {
      m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    }
  }
  return m;
}

inline Matrix read_matrix(const std::string& path) {
  return has_suffix(path, ".csv") ? read_matrix_csv(path) : read_matrix_binary(path);
}

inline void write_matrix(const std::string& path, const Matrix& m) {
  if (has_suffix(path, ".csv")) {
    write_matrix_csv(path, m);
  } else {
    write_matrix_binary(path, m);
  }
}

// ---- labels --------------------------------------------------------------

inline std::vector<uint8_t> read_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io_error, "cannot open " + path);
  std::vector<uint8_t> labels;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line == "0") {
      labels.push_back(0);
    } else if (line == "1") {
      labels.push_back(1);
    } else {
      throw Error(ErrorCategory::parse_error,
                  path + ": label at line " + std::to_string(line_no) + " must be 0 or 1");
    }
  }
  if (labels.empty()) throw Error(ErrorCategory::parse_error, path + " holds no labels");
  return labels;
}

inline void write_labels(const std::string& path, const std::vector<uint8_t>& labels) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCategory::io_error, "cannot open " + path + " for writing");
  for (uint8_t l : labels) out << static_cast<int>(l) << '\n';
}

}  // namespace io

// Validated dataset from a value matrix file (subjects x features) and a
// label file (one 0/1 per line).
inline LabeledDataset ingest(const std::string& data_path, const std::string& label_path) {
  const Matrix values = io::read_matrix(data_path);
  std::vector<uint8_t> labels = io::read_labels(label_path);
  return LabeledDataset(values, std::move(labels));
}

// ---- model artifact --------------------------------------------------

// Single training bundle: subspace basis plus the residual model, stored as
// a JSON metadata block followed by the raw basis, so training and recovery
// can run as separate invocations.
inline void save_model(const std::string& path, const SubspaceModel& model,
                       const ResidualModel& residual) {
  json meta;
  meta["feature_count"] = model.basis.rows();
  meta["rank"] = model.rank;
  meta["training_trials"] = model.training_trials;
  meta["passes_requested"] = model.passes_requested;
  meta["passes_run"] = model.passes_run;
  meta["converged"] = model.converged;
  meta["training_rate"] = model.training_rate;
  meta["train_seed"] = model.train_seed;
  meta["energy_per_pass"] = model.energy_per_pass;
  meta["sigma2"] = residual.sigma2;
  meta["bias_shift"] = residual.bias_shift;
  meta["per_trial_max_gap"] = residual.per_trial_max_gap;
  const std::string blob = meta.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::io_error, "cannot open " + path + " for writing");
  out.write(io::kModelMagic.data(), io::kModelMagic.size());
  const uint32_t version = io::kModelVersion;
  const uint64_t json_len = blob.size();
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(reinterpret_cast<const char*>(&json_len), sizeof json_len);
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  for (Index j = 0; j < model.basis.cols(); ++j) {
    out.write(reinterpret_cast<const char*>(model.basis.col(j).data()),
              static_cast<std::streamsize>(model.basis.rows() * sizeof(double)));
  }
  if (!out) throw Error(ErrorCategory::io_error, "short write to " + path);
}

inline std::pair<SubspaceModel, ResidualModel> load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::io_error, "cannot open " + path);
  std::array<char, 8> magic{};
  uint32_t version = 0;
  uint64_t json_len = 0;
  in.read(magic.data(), magic.size());
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&json_len), sizeof json_len);
  if (!in || magic != io::kModelMagic) {
    throw Error(ErrorCategory::parse_error, path + " is not a model artifact (bad magic)");
  }
  if (version != io::kModelVersion) {
    throw Error(ErrorCategory::parse_error,
                "unsupported model version " + std::to_string(version));
  }
  std::string blob(json_len, '\0');
  in.read(blob.data(), static_cast<std::streamsize>(json_len));
  if (!in) throw Error(ErrorCategory::parse_error, path + " truncated metadata");
  json meta = json::parse(blob, nullptr, false);
  if (meta.is_discarded()) {
    throw Error(ErrorCategory::parse_error, path + " has corrupt metadata");
  }

  SubspaceModel model;
  model.rank = meta.at("rank").get<Index>();
  model.training_trials = meta.at("training_trials").get<int64_t>();
  model.passes_requested = meta.at("passes_requested").get<int>();
  model.passes_run = meta.at("passes_run").get<int>();
  model.converged = meta.at("converged").get<bool>();
  model.training_rate = meta.at("training_rate").get<double>();
  model.train_seed = meta.at("train_seed").get<uint64_t>();
  model.energy_per_pass = meta.at("energy_per_pass").get<std::vector<double>>();
  const auto v = meta.at("feature_count").get<Index>();
  model.basis.resize(v, model.rank);
  for (Index j = 0; j < model.rank; ++j) {
    in.read(reinterpret_cast<char*>(model.basis.col(j).data()),
            static_cast<std::streamsize>(v * sizeof(double)));
  }
  if (!in) throw Error(ErrorCategory::parse_error, path + " truncated basis data");

  ResidualModel residual;
  residual.sigma2 = meta.at("sigma2").get<double>();
  residual.bias_shift = meta.at("bias_shift").get<double>();
  residual.training_trials = model.training_trials;
  residual.per_trial_max_gap = meta.at("per_trial_max_gap").get<std::vector<double>>();
  return {std::move(model), std::move(residual)};
}

// ---- null distribution exports ----------------------------------------

inline void write_null_csv(const std::string& path, const MaxNullDistribution& null) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCategory::io_error, "cannot open " + path + " for writing");
  out.precision(17);
  out << "bin_left,bin_right,count\n";
  for (size_t i = 0; i < null.counts().size(); ++i) {
    out << null.bin_left(i) << ',' << null.bin_right(i) << ',' << null.counts()[i] << '\n';
  }
}

inline json null_to_json(const MaxNullDistribution& null,
                         const std::vector<double>& alpha_levels,
                         TailConvention tail = TailConvention::one_sided) {
  json j;
  j["samples"] = null.samples();
  j["bin_width"] = null.bin_width();
  json thresholds = json::object();
  for (double alpha : alpha_levels) {
    if (static_cast<double>(null.trial_count()) >= 1.0 / alpha) {
      thresholds[std::to_string(alpha)] = threshold(null, alpha, tail);
    }
  }
  j["thresholds"] = thresholds;
  return j;
}

}  // namespace fastperm
