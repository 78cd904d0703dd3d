#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "ccm/estim.hpp"
#include "ccm/model.hpp"

namespace testutil {

inline std::string write_temp(const std::string& name, const std::string& content) {
  const auto dir = std::filesystem::temp_directory_path() / "ccm_tests";
  std::filesystem::create_directories(dir);
  const auto path = (dir / name).string();
  std::ofstream out(path, std::ios::binary);
  out << content;
  return path;
}

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

/// Random valid model: random modality counts, random per-component
/// partitions, random block parameters.
inline ccm::CcmModel random_model(int d_max, int m_max, int g_max, ccm::Rng& rng) {
  const int d = rng.uniform_int(1, d_max);
  const int g = rng.uniform_int(1, g_max);
  std::vector<int> m(d);
  for (auto& mj : m) mj = rng.uniform_int(2, m_max);

  ccm::CcmModel model;
  model.g = g;
  model.m = m;
  std::vector<ccm::BlockPartition::ComponentBlocks> raw(g);
  for (int k = 0; k < g; ++k) {
    // random partition: assign each variable to one of ceil(d/2) urns
    const int urns = std::max(1, rng.uniform_int(1, d));
    std::vector<std::vector<int>> blocks(urns);
    for (int j = 1; j <= d; ++j) blocks[rng.uniform_int(0, urns - 1)].push_back(j);
    for (auto& blk : blocks)
      if (!blk.empty()) raw[k].push_back(blk);
  }
  model.partition = ccm::BlockPartition::canonical(raw, m);
  model.pi = rng.simplex(g);
  ccm::clamp_simplex(model.pi);
  model.blocks.assign(g, {});
  for (int k = 0; k < g; ++k)
    for (int b = 0; b < model.partition.n_blocks(k); ++b) {
      auto mb = model.block_modalities(k, b);
      model.blocks[k][b] = ccm::random_block_params(mb, rng);
    }
  model.validate();
  return model;
}

/// Brute-force sum of exp(mixture_log_pdf) over the whole product space.
inline double total_mass(const ccm::CcmModel& model) {
  const int d = model.d();
  std::vector<int> cell(d, 1);
  double total = 0.0;
  while (true) {
    total += std::exp(ccm::mixture_log_pdf(cell, model));
    int pos = 0;
    while (pos < d && ++cell[pos] > model.m[pos]) cell[pos++] = 1;
    if (pos == d) break;
  }
  return total;
}

/// Brute-force sum of exp(block_log_pdf) over a block's cells.
inline double block_total_mass(const ccm::BlockParams& theta, const std::vector<int>& mb) {
  std::vector<int> cell(mb.size(), 1);
  double total = 0.0;
  while (true) {
    total += std::exp(ccm::block_log_pdf(cell, theta));
    std::size_t pos = 0;
    while (pos < mb.size() && ++cell[pos] > mb[pos]) cell[pos++] = 1;
    if (pos == mb.size()) break;
  }
  return total;
}

inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  const int n = static_cast<int>(a.size());
  const int ka = *std::max_element(a.begin(), a.end());
  const int kb = *std::max_element(b.begin(), b.end());
  std::vector<std::vector<long long>> table(ka + 1, std::vector<long long>(kb + 1, 0));
  for (int i = 0; i < n; ++i) ++table[a[i]][b[i]];
  auto choose2 = [](long long x) { return x * (x - 1) / 2; };
  long long sum_ij = 0, sum_a = 0, sum_b = 0;
  for (int i = 1; i <= ka; ++i) {
    long long row = 0;
    for (int j = 1; j <= kb; ++j) {
      sum_ij += choose2(table[i][j]);
      row += table[i][j];
    }
    sum_a += choose2(row);
  }
  for (int j = 1; j <= kb; ++j) {
    long long col = 0;
    for (int i = 1; i <= ka; ++i) col += table[i][j];
    sum_b += choose2(col);
  }
  const double expected = static_cast<double>(sum_a) * sum_b / choose2(n);
  const double maximum = 0.5 * (sum_a + sum_b);
  return (sum_ij - expected) / (maximum - expected);
}

inline double median(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return 0.0;
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace testutil
