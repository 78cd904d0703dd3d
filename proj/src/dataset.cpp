#include "ccm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace ccm {

Dataset::Dataset(std::vector<int> codes, std::vector<int> modality_counts,
                 std::vector<std::string> variable_names,
                 std::vector<std::vector<std::string>> modality_labels)
    : codes_(std::move(codes)), m_(std::move(modality_counts)),
      names_(std::move(variable_names)), labels_(std::move(modality_labels)) {
  d_ = static_cast<int>(m_.size());
  if (d_ < 1) throw InputError("dataset: needs at least one variable");
  if (codes_.empty() || codes_.size() % m_.size() != 0)
    throw InputError("dataset: code matrix size is not a multiple of d");
  n_ = static_cast<int>(codes_.size() / m_.size());
  for (int j = 0; j < d_; ++j) {
    if (m_[j] < 2)
      throw InputError("dataset: degenerate variable " + std::to_string(j + 1) +
                       " (fewer than two modalities)");
  }
  for (int i = 0; i < n_; ++i) {
    for (int j = 0; j < d_; ++j) {
      const int c = codes_[static_cast<std::size_t>(i) * d_ + j];
      if (c < 1 || c > m_[j])
        throw InputError("dataset: code out of range at row " + std::to_string(i + 1) +
                         ", variable " + std::to_string(j + 1));
    }
  }
  if (names_.empty()) {
    names_.reserve(d_);
    for (int j = 0; j < d_; ++j) names_.push_back("V" + std::to_string(j + 1));
  } else if (static_cast<int>(names_.size()) != d_) {
    throw InputError("dataset: variable name count does not match d");
  }
  if (labels_.empty()) {
    labels_.resize(d_);
    for (int j = 0; j < d_; ++j)
      for (int h = 1; h <= m_[j]; ++h) labels_[j].push_back(std::to_string(h));
  } else {
    if (static_cast<int>(labels_.size()) != d_)
      throw InputError("dataset: modality label lists do not match d");
    for (int j = 0; j < d_; ++j)
      if (static_cast<int>(labels_[j].size()) != m_[j])
        throw InputError("dataset: label count mismatch for variable " + std::to_string(j + 1));
  }
}

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

}  // namespace

std::vector<SchemaColumn> load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("schema: cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("schema: invalid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw InputError("schema: expected a JSON array of columns");
  std::vector<SchemaColumn> out;
  for (const auto& col : doc) {
    SchemaColumn sc;
    sc.name = col.value("name", "V" + std::to_string(out.size() + 1));
    if (!col.contains("modalities") || !col["modalities"].is_array())
      throw InputError("schema: column '" + sc.name + "' is missing the modalities list");
    for (const auto& m : col["modalities"]) sc.modalities.push_back(m.get<std::string>());
    if (sc.modalities.size() < 2)
      throw InputError("schema: column '" + sc.name + "' declares fewer than two modalities");
    out.push_back(std::move(sc));
  }
  return out;
}

Dataset load_csv(const std::string& path, const CsvOptions& opts,
                 const std::optional<std::vector<SchemaColumn>>& schema) {
  std::ifstream in(path);
  if (!in) throw InputError("csv: cannot open " + path);

  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (first && opts.header) {
      header = fields;
      first = false;
      continue;
    }
    first = false;
    rows.push_back(std::move(fields));
  }
  if (rows.empty()) throw InputError("csv: no data rows in " + path);

  const std::size_t d = rows.front().size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != d)
      throw InputError("csv: ragged row " + std::to_string(i + 1) + " in " + path);
    for (const auto& v : rows[i])
      if (v.empty())
        throw InputError("csv: missing value in row " + std::to_string(i + 1) +
                         " (missing data is not supported)");
  }
  if (schema && schema->size() != d)
    throw InputError("csv: schema declares " + std::to_string(schema->size()) +
                     " columns but file has " + std::to_string(d));
  if (opts.header && header.size() != d) throw InputError("csv: header width mismatch");

  std::vector<std::string> names;
  std::vector<std::vector<std::string>> labels(d);
  std::vector<int> m(d);
  std::vector<std::map<std::string, int>> code_of(d);

  for (std::size_t j = 0; j < d; ++j) {
    if (schema) {
      const auto& sc = (*schema)[j];
      names.push_back(sc.name);
      labels[j] = sc.modalities;
    } else {
      names.push_back(opts.header ? header[j] : "V" + std::to_string(j + 1));
      std::map<std::string, int> distinct;  // ordered: lexicographic coding
      for (const auto& row : rows) distinct.emplace(row[j], 0);
      if (distinct.size() < 2)
        throw InputError("csv: degenerate variable '" + names.back() +
                         "' (a single observed modality and no schema)");
      for (const auto& [label, _] : distinct) labels[j].push_back(label);
    }
    m[j] = static_cast<int>(labels[j].size());
    for (int h = 0; h < m[j]; ++h) code_of[j].emplace(labels[j][h], h + 1);
  }

  std::vector<int> codes;
  codes.reserve(rows.size() * d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      auto it = code_of[j].find(rows[i][j]);
      if (it == code_of[j].end())
        throw InputError("csv: value '" + rows[i][j] + "' in row " + std::to_string(i + 1) +
                         " is not among the declared modalities of '" + names[j] + "'");
      codes.push_back(it->second);
    }
  }
  return Dataset(std::move(codes), std::move(m), std::move(names), std::move(labels));
}

void save_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("csv: cannot write " + path);
  for (int j = 1; j <= data.d(); ++j) out << (j > 1 ? "," : "") << data.variable_name(j);
  out << "\n";
  for (int i = 0; i < data.n(); ++i) {
    for (int j = 1; j <= data.d(); ++j)
      out << (j > 1 ? "," : "") << data.label_of(j, data.code(i, j));
    out << "\n";
  }
}

std::string schema_json(const Dataset& data) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (int j = 1; j <= data.d(); ++j) {
    nlohmann::ordered_json col;
    col["name"] = data.variable_name(j);
    col["modalities"] = data.modality_labels(j);
    doc.push_back(col);
  }
  return doc.dump(2) + "\n";
}

ContingencyTable contingency_table(const Dataset& data, int j, int j2,
                                   std::span<const double> weights) {
  if (j == j2) throw InputError("contingency table: identical variables");
  if (j < 1 || j > data.d() || j2 < 1 || j2 > data.d())
    throw InputError("contingency table: variable index out of range");
  if (!weights.empty() && static_cast<int>(weights.size()) != data.n())
    throw InputError("contingency table: weight vector length mismatch");

  const int a = data.modalities(j);
  const int b = data.modalities(j2);
  ContingencyTable t;
  t.counts.assign(a, std::vector<double>(b, 0.0));
  t.row_totals.assign(a, 0.0);
  t.col_totals.assign(b, 0.0);
  for (int i = 0; i < data.n(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    if (w < 0.0) throw InputError("contingency table: negative weight");
    t.counts[data.code(i, j) - 1][data.code(i, j2) - 1] += w;
  }
  for (int h = 0; h < a; ++h)
    for (int h2 = 0; h2 < b; ++h2) {
      t.row_totals[h] += t.counts[h][h2];
      t.col_totals[h2] += t.counts[h][h2];
      t.total += t.counts[h][h2];
    }
  return t;
}

double cramers_v(const Dataset& data, int j, int j2, std::span<const double> weights) {
  if (j > j2) std::swap(j, j2);  // exact symmetry in the two arguments
  const ContingencyTable t = contingency_table(data, j, j2, weights);
  if (t.total <= 0.0) throw InputError("cramers_v: total weight is zero");
  double chi2 = 0.0;
  for (std::size_t h = 0; h < t.counts.size(); ++h) {
    for (std::size_t h2 = 0; h2 < t.counts[h].size(); ++h2) {
      const double expected = t.row_totals[h] * t.col_totals[h2] / t.total;
      if (expected <= 0.0) continue;
      const double diff = t.counts[h][h2] - expected;
      chi2 += diff * diff / expected;
    }
  }
  const int q = std::min(data.modalities(j), data.modalities(j2)) - 1;
  const double v = std::sqrt(chi2 / (t.total * q));
  return std::clamp(v, 0.0, 1.0);
}

std::vector<std::vector<double>> pairwise_v_matrix(const Dataset& data,
                                                   std::span<const double> weights) {
  if (data.d() < 2) throw InputError("pairwise_v_matrix: needs at least two variables");
  const int d = data.d();
  std::vector<std::vector<double>> v(d, std::vector<double>(d, 1.0));
  for (int j = 1; j <= d; ++j)
    for (int j2 = j + 1; j2 <= d; ++j2) v[j - 1][j2 - 1] = v[j2 - 1][j - 1] = cramers_v(data, j, j2, weights);
  return v;
}

}  // namespace ccm
