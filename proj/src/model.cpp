#include "ccm/model.hpp"

#include <algorithm>
#include <cmath>

namespace ccm {

std::vector<int> CcmModel::block_modalities(int k, int b) const {
  const auto& vars = partition.block(k, b);
  std::vector<int> mb;
  mb.reserve(vars.size());
  for (int j : vars) mb.push_back(m[j - 1]);
  return mb;
}

namespace {

void validate_prob_vector(const std::vector<double>& v, const char* what) {
  if (v.empty()) throw InputError(std::string(what) + ": empty probability vector");
  double total = 0.0;
  for (double x : v) {
    if (!(x > 0.0)) throw InputError(std::string(what) + ": non-positive entry");
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-8)
    throw InputError(std::string(what) + ": entries do not sum to 1");
}

void validate_links(const MaxDepParams& p, const std::vector<int>& mb) {
  if (static_cast<int>(p.tau.size()) != mb[0])
    throw InputError("maxdep: tau length does not match the first variable");
  validate_prob_vector(p.tau, "maxdep tau");
  if (p.links.size() + 1 != mb.size())
    throw InputError("maxdep: one image table expected per subsequent variable");
  for (std::size_t t = 0; t < p.links.size(); ++t) {
    const int mj = mb[t + 1];
    const auto& img = p.links[t];
    if (static_cast<int>(img.size()) != mb[0])
      throw InputError("maxdep: image table length does not match the first variable");
    std::vector<char> hit(mj + 1, 0);
    for (int v : img) {
      if (v < 1 || v > mj) throw InputError("maxdep: image out of range");
      hit[v] = 1;
    }
    for (int v = 1; v <= mj; ++v)
      if (!hit[v]) throw InputError("maxdep: image table is not surjective");
  }
}

}  // namespace

void CcmModel::validate() const {
  if (g < 1) throw InputError("model: g must be at least 1");
  if (static_cast<int>(pi.size()) != g) throw InputError("model: pi length mismatch");
  validate_prob_vector(pi, "model pi");
  partition.validate(m);
  if (partition.g() != g) throw InputError("model: partition component count mismatch");
  if (static_cast<int>(blocks.size()) != g) throw InputError("model: block array mismatch");
  for (int k = 0; k < g; ++k) {
    if (static_cast<int>(blocks[k].size()) != partition.n_blocks(k))
      throw InputError("model: block count mismatch in component");
    for (int b = 0; b < partition.n_blocks(k); ++b) {
      const auto mb = block_modalities(k, b);
      const auto& th = blocks[k][b];
      if (th.alpha.size() != mb.size())
        throw InputError("model: alpha count does not match block size");
      for (std::size_t t = 0; t < mb.size(); ++t) {
        if (static_cast<int>(th.alpha[t].size()) != mb[t])
          throw InputError("model: alpha length does not match modality count");
        validate_prob_vector(th.alpha[t], "block alpha");
      }
      if (!(th.rho >= 0.0 && th.rho <= 1.0)) throw InputError("model: rho out of [0,1]");
      if (mb.size() == 1) {
        if (th.rho != 0.0) throw InputError("model: single-variable block with rho > 0");
        if (th.maxdep) throw InputError("model: single-variable block with maxdep parameters");
      } else {
        if (th.rho > 0.0 && !th.maxdep)
          throw InputError("model: rho > 0 but maximum dependency parameters absent");
        if (th.maxdep) validate_links(*th.maxdep, mb);
      }
    }
  }
}

double indep_log_pdf(std::span<const int> codes, const std::vector<std::vector<double>>& alpha) {
  if (codes.size() != alpha.size()) throw InvariantError("indep_log_pdf: size mismatch");
  double acc = 0.0;
  for (std::size_t t = 0; t < codes.size(); ++t) {
    const int c = codes[t];
    if (c < 1 || c > static_cast<int>(alpha[t].size()))
      throw InvariantError("indep_log_pdf: code out of range");
    acc += std::log(alpha[t][c - 1]);
  }
  return acc;
}

double maxdep_log_pdf(std::span<const int> codes, const MaxDepParams& p) {
  const int h = codes[0];
  if (h < 1 || h > static_cast<int>(p.tau.size()))
    throw InvariantError("maxdep_log_pdf: code out of range");
  for (std::size_t t = 0; t + 1 < codes.size(); ++t)
    if (p.links[t][h - 1] != codes[t + 1]) return kNegInf;
  return std::log(p.tau[h - 1]);
}

double block_log_pdf(std::span<const int> codes, const BlockParams& theta) {
  if (theta.rho <= 0.0 || !theta.maxdep) return indep_log_pdf(codes, theta.alpha);
  const double lm = std::log(theta.rho) + maxdep_log_pdf(codes, *theta.maxdep);
  if (theta.rho >= 1.0) return lm;
  const double li = std::log1p(-theta.rho) + indep_log_pdf(codes, theta.alpha);
  return log_sum_exp(li, lm);
}

double component_log_pdf(std::span<const int> row_codes, const CcmModel& model, int k) {
  double acc = 0.0;
  std::vector<int> buf;
  for (int b = 0; b < model.partition.n_blocks(k); ++b) {
    const auto& vars = model.partition.block(k, b);
    buf.resize(vars.size());
    for (std::size_t t = 0; t < vars.size(); ++t) buf[t] = row_codes[vars[t] - 1];
    acc += block_log_pdf(buf, model.blocks[k][b]);
    if (acc == kNegInf) return kNegInf;
  }
  return acc;
}

double mixture_log_pdf(std::span<const int> row_codes, const CcmModel& model) {
  if (static_cast<int>(row_codes.size()) != model.d())
    throw InvariantError("mixture_log_pdf: row length mismatch");
  double best = kNegInf;
  std::vector<double> terms(model.g);
  for (int k = 0; k < model.g; ++k) {
    terms[k] = std::log(model.pi[k]) + component_log_pdf(row_codes, model, k);
    best = std::max(best, terms[k]);
  }
  if (best == kNegInf) return kNegInf;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - best);
  return best + std::log(s);
}

double mixture_log_pdf(const Dataset& data, int row, const CcmModel& model) {
  std::vector<int> codes(data.d());
  for (int j = 1; j <= data.d(); ++j) codes[j - 1] = data.code(row, j);
  return mixture_log_pdf(codes, model);
}

long long nu_cim(int g, std::span<const int> m) {
  long long s = 0;
  for (int mj : m) s += mj - 1;
  return (g - 1) + static_cast<long long>(g) * s;
}

long long nu_ccm(int g, const BlockPartition& partition, std::span<const int> m) {
  long long nu = nu_cim(g, m);
  for (int k = 0; k < partition.g(); ++k) {
    for (int b = 0; b < partition.n_blocks(k); ++b) {
      const auto& vars = partition.block(k, b);
      if (vars.size() > 1) nu += m[vars.front() - 1];
    }
  }
  return nu;
}

long long nu_ccm(const CcmModel& model) { return nu_ccm(model.g, model.partition, model.m); }

uint64_t surjection_count(int a, int b) {
  if (a < 1 || b < 1 || a < b) return 0;
  // inclusion-exclusion: sum_i (-1)^i C(b,i) (b-i)^a
  long double total = 0.0L;
  long double binom = 1.0L;
  for (int i = 0; i <= b; ++i) {
    const long double term = binom * std::pow(static_cast<long double>(b - i), a);
    total += (i % 2 == 0) ? term : -term;
    binom = binom * (b - i) / (i + 1);
  }
  if (total < 0.5L || total > static_cast<long double>(UINT64_MAX))
    throw NumericalError("surjection_count: out of range");
  return static_cast<uint64_t>(total + 0.5L);
}

std::vector<std::vector<int>> enumerate_surjections(int a, int b) {
  if (a < b) throw InvariantError("enumerate_surjections: no surjection when a < b");
  std::vector<std::vector<int>> out;
  std::vector<int> img(a, 1);
  while (true) {
    std::vector<char> hit(b + 1, 0);
    for (int v : img) hit[v] = 1;
    bool onto = true;
    for (int v = 1; v <= b; ++v) onto = onto && hit[v];
    if (onto) out.push_back(img);
    int pos = a - 1;
    while (pos >= 0 && img[pos] == b) img[pos--] = 1;
    if (pos < 0) break;
    ++img[pos];
  }
  return out;
}

uint64_t surjection_space_size(std::span<const int> m_block) {
  if (m_block.size() < 2) throw InputError("surjection_space_size: block has fewer than two variables");
  const int m1 = m_block[0];
  uint64_t total = 1;
  for (std::size_t t = 1; t < m_block.size(); ++t) {
    if (m_block[t] > m1)
      throw InvariantError("surjection_space_size: block ordering broken (m_1 < m_j)");
    const uint64_t s = surjection_count(m1, m_block[t]);
    if (s != 0 && total > UINT64_MAX / s) return UINT64_MAX;  // saturate
    total *= s;
  }
  return total;
}

SampleResult sample(const CcmModel& model, int n, Rng& rng) {
  model.validate();
  if (n < 1) throw InputError("sample: n must be at least 1");
  const int d = model.d();
  std::vector<int> codes(static_cast<std::size_t>(n) * d, 0);
  std::vector<int> labels(n, 0);
  std::vector<std::vector<int>> y(n);
  for (int i = 0; i < n; ++i) {
    const int k = rng.categorical(model.pi);
    labels[i] = k + 1;
    y[i].assign(model.partition.n_blocks(k), 0);
    for (int b = 0; b < model.partition.n_blocks(k); ++b) {
      const auto& vars = model.partition.block(k, b);
      const auto& th = model.blocks[k][b];
      const bool from_maxdep = th.rho > 0.0 && th.maxdep && rng.next_double() < th.rho;
      y[i][b] = from_maxdep ? 1 : 0;
      if (from_maxdep) {
        const int h = rng.categorical(th.maxdep->tau) + 1;
        codes[static_cast<std::size_t>(i) * d + vars[0] - 1] = h;
        for (std::size_t t = 1; t < vars.size(); ++t)
          codes[static_cast<std::size_t>(i) * d + vars[t] - 1] = th.maxdep->links[t - 1][h - 1];
      } else {
        for (std::size_t t = 0; t < vars.size(); ++t)
          codes[static_cast<std::size_t>(i) * d + vars[t] - 1] = rng.categorical(th.alpha[t]) + 1;
      }
    }
  }
  return SampleResult{Dataset(std::move(codes), model.m), std::move(labels), std::move(y)};
}

}  // namespace ccm
