#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccm/common.hpp"

namespace ccm {

// Indexing conventions used throughout the library:
//   * rows are 0-based,
//   * variable indices are 1-based values in 1..d,
//   * modality codes are 1-based values in 1..m_j.

/// Immutable table of integer-coded categorical observations.
class Dataset {
 public:
  /// `codes` is row-major n x d with entries in 1..m_j. Names and labels are
  /// optional; defaults are "V1".."Vd" and "1".."m_j".
  Dataset(std::vector<int> codes, std::vector<int> modality_counts,
          std::vector<std::string> variable_names = {},
          std::vector<std::vector<std::string>> modality_labels = {});

  int n() const { return n_; }
  int d() const { return d_; }

  /// Code of `row` (0-based) for variable `var` (1-based).
  int code(int row, int var) const { return codes_[static_cast<std::size_t>(row) * d_ + (var - 1)]; }

  int modalities(int var) const { return m_[var - 1]; }
  const std::vector<int>& modality_counts() const { return m_; }

  const std::string& variable_name(int var) const { return names_[var - 1]; }
  const std::vector<std::string>& variable_names() const { return names_; }
  const std::vector<std::string>& modality_labels(int var) const { return labels_[var - 1]; }
  const std::string& label_of(int var, int code) const { return labels_[var - 1][code - 1]; }

  const std::vector<int>& codes() const { return codes_; }

 private:
  int n_ = 0;
  int d_ = 0;
  std::vector<int> codes_;
  std::vector<int> m_;
  std::vector<std::string> names_;
  std::vector<std::vector<std::string>> labels_;
};

/// Weighted co-occurrence table of one variable pair.
struct ContingencyTable {
  std::vector<std::vector<double>> counts;  // m_j x m_j2
  std::vector<double> row_totals;
  std::vector<double> col_totals;
  double total = 0.0;
};

struct CsvOptions {
  bool header = false;
};

struct SchemaColumn {
  std::string name;
  std::vector<std::string> modalities;  // coding order: code = position + 1
};

/// Read a comma-separated file. Without a schema, modalities are inferred
/// from the distinct observed values of each column and coded in
/// lexicographic label order; with a schema, the declared order is used.
/// Missing values (empty fields) are rejected.
Dataset load_csv(const std::string& path, const CsvOptions& opts = {},
                 const std::optional<std::vector<SchemaColumn>>& schema = std::nullopt);

/// Schema file: JSON list of {"name": ..., "modalities": [labels]} in column order.
std::vector<SchemaColumn> load_schema(const std::string& path);

/// Write header + label-valued rows; the exact inverse of load_csv with the
/// matching schema.
void save_csv(const Dataset& data, const std::string& path);
std::string schema_json(const Dataset& data);

ContingencyTable contingency_table(const Dataset& data, int j, int j2,
                                   std::span<const double> weights = {});

/// Cramer's V of variables j and j2 (1-based), optionally row-weighted.
/// Result is clamped to [0, 1]; cells with zero expected count contribute 0.
double cramers_v(const Dataset& data, int j, int j2, std::span<const double> weights = {});

/// d x d symmetric matrix of pairwise Cramer's V with unit diagonal.
std::vector<std::vector<double>> pairwise_v_matrix(const Dataset& data,
                                                   std::span<const double> weights = {});

}  // namespace ccm
