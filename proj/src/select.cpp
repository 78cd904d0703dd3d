#include "ccm/select.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include "json.hpp"

namespace ccm {

std::vector<std::vector<int>> hac_init(const std::vector<std::vector<double>>& v_matrix,
                                       Linkage linkage) {
  const int d = static_cast<int>(v_matrix.size());
  if (d == 0) throw InputError("hac_init: empty matrix");
  if (d == 1) return {{1}};

  std::vector<std::vector<int>> members(d);
  for (int i = 0; i < d; ++i) members[i] = {i + 1};
  std::vector<char> active(d, 1);
  std::vector<std::vector<double>> dist(d, std::vector<double>(d, 0.0));
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) dist[i][j] = 1.0 - v_matrix[i][j];

  auto snapshot = [&]() {
    std::vector<std::vector<int>> blocks;
    for (int i = 0; i < d; ++i)
      if (active[i]) {
        auto blk = members[i];
        std::sort(blk.begin(), blk.end());
        blocks.push_back(std::move(blk));
      }
    std::sort(blocks.begin(), blocks.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    return blocks;
  };

  std::vector<std::vector<int>> best = snapshot();  // all singletons, always feasible
  for (int merge = 0; merge < d - 1; ++merge) {
    int bi = -1, bj = -1;
    double bd = std::numeric_limits<double>::infinity();
    for (int i = 0; i < d; ++i) {
      if (!active[i]) continue;
      for (int j = i + 1; j < d; ++j) {
        if (!active[j]) continue;
        if (dist[i][j] < bd) {
          bd = dist[i][j];
          bi = i;
          bj = j;
        }
      }
    }
    const double si = static_cast<double>(members[bi].size());
    const double sj = static_cast<double>(members[bj].size());
    for (int t = 0; t < d; ++t) {
      if (!active[t] || t == bi || t == bj) continue;
      double nd = 0.0;
      switch (linkage) {
        case Linkage::average: nd = (si * dist[bi][t] + sj * dist[bj][t]) / (si + sj); break;
        case Linkage::single: nd = std::min(dist[bi][t], dist[bj][t]); break;
        case Linkage::complete: nd = std::max(dist[bi][t], dist[bj][t]); break;
      }
      dist[bi][t] = dist[t][bi] = nd;
    }
    members[bi].insert(members[bi].end(), members[bj].begin(), members[bj].end());
    active[bj] = 0;
    if (members[bi].size() > 4) break;  // clusters only grow; later stages stay infeasible
    best = snapshot();
  }
  return best;
}

double bic_score(double loglik, long long nu, int n) {
  return loglik - 0.5 * static_cast<double>(nu) * std::log(static_cast<double>(n));
}

std::vector<BlockPartition> sigma_candidates(const BlockPartition& sigma,
                                             const std::vector<int>& m, int k, int b_from,
                                             std::optional<int> b_other) {
  std::vector<BlockPartition> out;
  out.push_back(sigma);
  auto push_unique = [&](BlockPartition cand) {
    for (const auto& existing : out)
      if (existing == cand) return;
    out.push_back(std::move(cand));
  };

  std::vector<int> targets;  // index into blocks, -1 = new block
  if (b_other) targets.push_back(*b_other);
  targets.push_back(-1);

  const auto& from_block = sigma.block(k, b_from);
  for (int j : from_block) {
    for (int target : targets) {
      auto raw = sigma.components();
      auto& comp = raw[k];
      auto& src = comp[b_from];
      src.erase(std::find(src.begin(), src.end(), j));
      if (target >= 0)
        comp[target].push_back(j);
      else
        comp.push_back({j});
      if (src.empty()) comp.erase(comp.begin() + b_from);
      push_unique(BlockPartition::canonical(std::move(raw), m));
    }
  }
  return out;
}

SigmaNeighborhood sigma_neighborhood(const BlockPartition& sigma, const std::vector<int>& m,
                                     Rng& rng) {
  const int d = static_cast<int>(m.size());
  SigmaNeighborhood nb;
  for (int attempt = 0; attempt < std::max(1, d); ++attempt) {
    const int k = static_cast<int>(rng.index(sigma.g()));
    const int n_blocks = sigma.n_blocks(k);
    const int b_from = static_cast<int>(rng.index(n_blocks));
    std::optional<int> b_other;
    if (n_blocks >= 2) {
      int b = static_cast<int>(rng.index(n_blocks - 1));
      if (b >= b_from) ++b;
      b_other = b;
    }
    nb.k = k;
    nb.candidates = sigma_candidates(sigma, m, k, b_from, b_other);
    if (nb.candidates.size() > 1) return nb;
  }
  return nb;  // stationary draw accepted
}

namespace {

CcmModel blank_model(const Dataset& data, int g, const BlockPartition& sigma) {
  CcmModel model;
  model.g = g;
  model.m = data.modality_counts();
  model.partition = sigma;
  model.pi.assign(g, 1.0 / g);
  model.blocks.assign(g, {});
  for (int k = 0; k < g; ++k) model.blocks[k].resize(sigma.n_blocks(k));
  return model;
}

// Random continuous parameters plus sequentially sampled image tables,
// weighted by the given responsibilities.
BlockParams init_block(const Dataset& data, const std::vector<int>& vars,
                       std::span<const double> weights, Rng& rng) {
  BlockData bd = collapse_block(data, vars, weights);
  BlockParams p = random_block_params(bd.m, rng);
  if (bd.m.size() >= 2 && bd.total_weight > 0.0)
    p.maxdep->links = sample_delta_sequential(bd, p.rho, p.alpha, p.maxdep->tau, rng);
  return p;
}

// Warm start: blocks whose variable sets are unchanged keep the incumbent's
// parameters; modified blocks get fresh random continuous parameters and
// sequentially sampled image tables under the incumbent's responsibilities.
CcmModel warm_start(const Dataset& data, const CcmModel& incumbent,
                    const BlockPartition& cand, Rng& rng) {
  CcmModel model = blank_model(data, incumbent.g, cand);
  model.pi = incumbent.pi;
  const int n = data.n();
  std::vector<double> wk(n);
  for (int k = 0; k < incumbent.g; ++k) {
    for (int b = 0; b < cand.n_blocks(k); ++b) {
      const auto& vars = cand.block(k, b);
      int match = -1;
      for (int b2 = 0; b2 < incumbent.partition.n_blocks(k); ++b2)
        if (incumbent.partition.block(k, b2) == vars) {
          match = b2;
          break;
        }
      if (match >= 0) {
        model.blocks[k][b] = incumbent.blocks[k][match];
      } else {
        for (int i = 0; i < n; ++i)
          wk[i] = incumbent.meta->z[static_cast<std::size_t>(i) * incumbent.g + k];
        model.blocks[k][b] = init_block(data, vars, wk, rng);
      }
    }
  }
  return model;
}

bool better_fit(double bic_a, long long nu_a, const BlockPartition& sig_a, double bic_b,
                long long nu_b, const BlockPartition& sig_b) {
  if (bic_a != bic_b) return bic_a > bic_b;
  if (nu_a != nu_b) return nu_a < nu_b;
  return sig_a < sig_b;
}

template <typename Fn>
void parallel_for(int n_tasks, int threads, Fn&& fn) {
  threads = std::max(1, std::min(threads, n_tasks));
  if (threads == 1) {
    for (int i = 0; i < n_tasks; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&]() {
      for (int i = next.fetch_add(1); i < n_tasks; i = next.fetch_add(1)) fn(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace

CcmModel initial_model(const Dataset& data, int g, const BlockPartition& sigma, Rng& rng) {
  CcmModel model = blank_model(data, g, sigma);
  const std::vector<double> uniform_w(data.n(), 1.0 / g);
  for (int k = 0; k < g; ++k)
    for (int b = 0; b < sigma.n_blocks(k); ++b)
      model.blocks[k][b] = init_block(data, sigma.block(k, b), uniform_w, rng);
  return model;
}

ChainResult gibbs_chain(const Dataset& data, int g, const BlockPartition& init_sigma,
                        const SearchConfig& cfg, Rng& rng) {
  init_sigma.validate(data.modality_counts());
  if (init_sigma.g() != g) throw InputError("gibbs_chain: partition does not match g");
  EstimOptions eopts;
  eopts.rules = cfg.rules;
  eopts.exhaustive_cap = cfg.exhaustive_cap;

  ChainResult res;
  CcmModel cur = gem_fit(data, initial_model(data, g, init_sigma, rng), eopts, rng);
  res.best_model = cur;
  res.best_bic = cur.meta->bic;
  res.trace_best.push_back(res.best_bic);
  res.trace_current.push_back(cur.meta->bic);

  const int q_max = cfg.rules.q_max_for(data.d());
  constexpr double kImprovementTol = 1e-6;
  int stall = 0;
  while (stall < q_max && res.iterations < cfg.max_iterations) {
    ++res.iterations;
    SigmaNeighborhood nb = sigma_neighborhood(cur.partition, data.modality_counts(), rng);

    std::vector<CcmModel> fits;
    std::vector<double> bics;
    fits.reserve(nb.candidates.size());
    for (const auto& cand : nb.candidates) {
      CcmModel fit = cand == cur.partition
                         ? gem_fit(data, cur, eopts, rng)
                         : gem_fit(data, warm_start(data, cur, cand, rng), eopts, rng);
      bics.push_back(fit.meta->bic);
      fits.push_back(std::move(fit));
    }

    bool improved = false;
    for (std::size_t e = 0; e < fits.size(); ++e) {
      if (bics[e] > res.best_bic + kImprovementTol) improved = true;
      if (better_fit(bics[e], fits[e].meta->nu, fits[e].partition, res.best_bic,
                     res.best_model.meta->nu, res.best_model.partition)) {
        res.best_bic = bics[e];
        res.best_model = fits[e];
      }
    }
    stall = improved ? 0 : stall + 1;

    // Pattern step: sample the next state within the neighborhood with
    // probability proportional to exp(BIC - max BIC).
    const double mx = *std::max_element(bics.begin(), bics.end());
    std::vector<double> w(bics.size());
    for (std::size_t e = 0; e < bics.size(); ++e) w[e] = std::exp(bics[e] - mx);
    const int pick = rng.categorical(w);
    cur = std::move(fits[pick]);
    res.trace_current.push_back(bics[pick]);
    res.trace_best.push_back(res.best_bic);
  }
  return res;
}

SelectionResult select_model(const Dataset& data, const SearchConfig& cfg) {
  if (cfg.g_min < 1 || cfg.g_max < cfg.g_min) throw InputError("select_model: bad g range");
  if (cfg.chains < 1) throw InputError("select_model: chains must be at least 1");

  std::vector<std::vector<int>> tpl;
  if (data.d() >= 2)
    tpl = hac_init(pairwise_v_matrix(data), cfg.linkage);
  else
    tpl = {{1}};

  SelectionResult sel;
  for (int g = cfg.g_min; g <= cfg.g_max; ++g) {
    const auto t0 = std::chrono::steady_clock::now();
    const BlockPartition sigma0 = BlockPartition::replicate(tpl, g, data.modality_counts());
    std::vector<ChainResult> chains(cfg.chains);
    std::vector<uint64_t> seeds(cfg.chains);
    for (int c = 0; c < cfg.chains; ++c) {
      uint64_t x = cfg.seed ^ (0x9e3779b97f4a7c15ULL * static_cast<uint64_t>(g * 1000003 + c + 1));
      seeds[c] = detail::splitmix64(x);
    }
    parallel_for(cfg.chains, cfg.threads, [&](int c) {
      Rng rng(seeds[c]);
      chains[c] = gibbs_chain(data, g, sigma0, cfg, rng);
      chains[c].seed = seeds[c];
    });

    GSearchResult gres;
    gres.g = g;
    int best_c = 0;
    for (int c = 0; c < cfg.chains; ++c) {
      gres.chain_bics.push_back(chains[c].best_bic);
      if (c > 0 && better_fit(chains[c].best_bic, chains[c].best_model.meta->nu,
                              chains[c].best_model.partition, chains[best_c].best_bic,
                              chains[best_c].best_model.meta->nu,
                              chains[best_c].best_model.partition))
        best_c = c;
    }
    gres.best = std::move(chains[best_c]);
    gres.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    sel.per_g.push_back(std::move(gres));
  }

  sel.best_index = 0;
  for (std::size_t i = 1; i < sel.per_g.size(); ++i) {
    const auto& a = sel.per_g[i].best;
    const auto& b = sel.per_g[sel.best_index].best;
    if (better_fit(a.best_bic, a.best_model.meta->nu, a.best_model.partition, b.best_bic,
                   b.best_model.meta->nu, b.best_model.partition))
      sel.best_index = static_cast<int>(i);
  }
  return sel;
}

std::string search_report_json(const SelectionResult& sel) {
  nlohmann::ordered_json doc;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& gres : sel.per_g) {
    nlohmann::ordered_json row;
    row["g"] = gres.g;
    row["bic"] = gres.best.best_bic;
    row["loglik"] = gres.best.best_model.meta->loglik;
    row["nu"] = gres.best.best_model.meta->nu;
    row["seconds"] = gres.seconds;
    nlohmann::ordered_json part = nlohmann::ordered_json::array();
    const auto& sigma = gres.best.best_model.partition;
    for (int k = 0; k < sigma.g(); ++k) {
      nlohmann::ordered_json comp = nlohmann::ordered_json::array();
      for (int b = 0; b < sigma.n_blocks(k); ++b) comp.push_back(sigma.block(k, b));
      part.push_back(comp);
    }
    row["sigma"] = part;
    nlohmann::ordered_json chains = nlohmann::ordered_json::array();
    for (double bic : gres.chain_bics) chains.push_back(bic);
    row["chain_bics"] = chains;
    row["trace_best"] = gres.best.trace_best;
    rows.push_back(row);
  }
  doc["per_g"] = rows;
  doc["best_g"] = sel.best().g;
  doc["best_bic"] = sel.best().best.best_bic;
  return doc.dump(2) + "\n";
}

}  // namespace ccm
