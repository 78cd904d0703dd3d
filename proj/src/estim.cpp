#include "ccm/estim.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "ccm/select.hpp"

namespace ccm {

BlockData collapse_block(const Dataset& data, std::span<const int> vars,
                         std::span<const double> row_weights) {
  if (vars.empty()) throw InvariantError("collapse_block: empty variable list");
  if (!row_weights.empty() && static_cast<int>(row_weights.size()) != data.n())
    throw InvariantError("collapse_block: weight length mismatch");
  BlockData bd;
  bd.vars.assign(vars.begin(), vars.end());
  for (int j : vars) bd.m.push_back(data.modalities(j));
  std::map<std::vector<int>, double> acc;
  std::vector<int> key(vars.size());
  for (int i = 0; i < data.n(); ++i) {
    const double w = row_weights.empty() ? 1.0 : row_weights[i];
    if (w < 0.0) throw InvariantError("collapse_block: negative weight");
    if (w == 0.0) continue;
    for (std::size_t t = 0; t < vars.size(); ++t) key[t] = data.code(i, vars[t]);
    acc[key] += w;
  }
  bd.patterns.reserve(acc.size());
  bd.weight.reserve(acc.size());
  for (auto& [pattern, w] : acc) {
    bd.patterns.push_back(pattern);
    bd.weight.push_back(w);
    bd.total_weight += w;
  }
  return bd;
}

double weighted_block_loglik(const BlockData& bd, const BlockParams& theta) {
  double acc = 0.0;
  for (std::size_t p = 0; p < bd.patterns.size(); ++p)
    acc += bd.weight[p] * block_log_pdf(bd.patterns[p], theta);
  return acc;
}

namespace {

std::vector<std::vector<int>> default_links(std::span<const int> m_block) {
  std::vector<std::vector<int>> links;
  for (std::size_t t = 1; t < m_block.size(); ++t) {
    std::vector<int> img(m_block[0]);
    for (int h = 1; h <= m_block[0]; ++h) img[h - 1] = (h - 1) % m_block[t] + 1;
    links.push_back(std::move(img));
  }
  return links;
}

void ensure_maxdep(BlockParams& theta, std::span<const int> m_block) {
  if (m_block.size() < 2) return;
  if (!theta.maxdep) {
    MaxDepParams mp;
    mp.tau.assign(m_block[0], 1.0 / m_block[0]);
    mp.links = default_links(m_block);
    theta.maxdep = std::move(mp);
  }
}

bool surjective(const std::vector<int>& img, int mj) {
  std::vector<char> hit(mj + 1, 0);
  for (int v : img) {
    if (v < 1 || v > mj) return false;
    hit[v] = 1;
  }
  for (int v = 1; v <= mj; ++v)
    if (!hit[v]) return false;
  return true;
}

}  // namespace

BlockFit inner_em(const BlockData& bd, const std::vector<std::vector<int>>& links,
                  const BlockParams& init, int t_max, std::vector<double>* trace) {
  const std::size_t dkb = bd.m.size();
  if (dkb < 2) throw InvariantError("inner_em: needs a multi-variable block");
  if (!(bd.total_weight > 0.0)) throw InputError("inner_em: total weight is zero");
  if (links.size() + 1 != dkb) throw InvariantError("inner_em: image table count mismatch");

  const int m1 = bd.m[0];
  double rho = std::clamp(init.rho, 0.0, 1.0 - 1e-9);
  // rho == 0 is a fixed point of EM; nudge so the maxdep component can
  // re-activate when the data supports it.
  if (rho < 1e-6) rho = 1e-3;

  std::vector<std::vector<double>> alpha = init.alpha;
  if (alpha.size() != dkb) throw InvariantError("inner_em: alpha count mismatch");
  for (std::size_t t = 0; t < dkb; ++t) {
    if (static_cast<int>(alpha[t].size()) != bd.m[t])
      throw InvariantError("inner_em: alpha length mismatch");
    clamp_simplex(alpha[t]);
  }
  std::vector<double> tau =
      init.maxdep ? init.maxdep->tau : std::vector<double>(m1, 1.0 / m1);
  if (static_cast<int>(tau.size()) != m1) throw InvariantError("inner_em: tau length mismatch");
  clamp_simplex(tau);

  const std::size_t P = bd.patterns.size();
  std::vector<char> on_support(P, 0);
  std::vector<int> first(P, 0);
  for (std::size_t p = 0; p < P; ++p) {
    const auto& pat = bd.patterns[p];
    first[p] = pat[0];
    bool on = true;
    for (std::size_t t = 1; t < dkb && on; ++t) on = links[t - 1][pat[0] - 1] == pat[t];
    on_support[p] = on ? 1 : 0;
  }

  std::vector<double> y(P, 0.0);
  double loglik = kNegInf;
  auto e_pass = [&]() {
    double ll = 0.0;
    for (std::size_t p = 0; p < P; ++p) {
      const auto& pat = bd.patterns[p];
      double li = std::log1p(-rho);
      for (std::size_t t = 0; t < dkb; ++t) li += std::log(alpha[t][pat[t] - 1]);
      if (on_support[p]) {
        const double lm = std::log(rho) + std::log(tau[first[p] - 1]);
        const double lp = log_sum_exp(li, lm);
        y[p] = std::exp(lm - lp);
        ll += bd.weight[p] * lp;
      } else {
        y[p] = 0.0;
        ll += bd.weight[p] * li;
      }
    }
    return ll;
  };

  for (int t = 0; t < t_max; ++t) {
    loglik = e_pass();
    if (trace) trace->push_back(loglik);
    double n_md = 0.0;
    std::vector<double> tau_acc(m1, 0.0);
    std::vector<std::vector<double>> alpha_acc(dkb);
    for (std::size_t v = 0; v < dkb; ++v) alpha_acc[v].assign(bd.m[v], 0.0);
    for (std::size_t p = 0; p < P; ++p) {
      const double wy = bd.weight[p] * y[p];
      const double wn = bd.weight[p] - wy;
      n_md += wy;
      tau_acc[first[p] - 1] += wy;
      for (std::size_t v = 0; v < dkb; ++v) alpha_acc[v][bd.patterns[p][v] - 1] += wn;
    }
    rho = n_md / bd.total_weight;
    if (n_md > 0.0) {
      for (int h = 0; h < m1; ++h) tau[h] = tau_acc[h] / n_md;
      clamp_simplex(tau);
    }
    const double n_ind = bd.total_weight - n_md;
    if (n_ind > 0.0) {
      for (std::size_t v = 0; v < dkb; ++v) {
        for (int h = 0; h < bd.m[v]; ++h) alpha[v][h] = alpha_acc[v][h] / n_ind;
        clamp_simplex(alpha[v]);
      }
    }
    rho = std::min(rho, 1.0 - 1e-12);
  }
  loglik = e_pass();
  if (trace) trace->push_back(loglik);

  BlockFit fit;
  fit.params.rho = rho;
  fit.params.alpha = std::move(alpha);
  fit.params.maxdep = MaxDepParams{std::move(tau), links};
  fit.loglik = loglik;
  return fit;
}

BlockFit inner_em_multistart(const BlockData& bd, const std::vector<std::vector<int>>& links,
                             const BlockParams& init, int t_max, int starts, Rng& rng) {
  BlockFit best = inner_em(bd, links, init, t_max);
  for (int s = 1; s < starts; ++s) {
    BlockParams p;
    p.rho = rng.uniform(0.05, 0.95);
    for (int mj : bd.m) {
      auto v = rng.simplex(mj);
      clamp_simplex(v);
      p.alpha.push_back(std::move(v));
    }
    auto tau = rng.simplex(bd.m[0]);
    clamp_simplex(tau);
    p.maxdep = MaxDepParams{std::move(tau), links};
    BlockFit fit = inner_em(bd, links, p, t_max);
    if (fit.loglik > best.loglik) best = std::move(fit);
  }
  return best;
}

std::vector<std::vector<std::vector<int>>> delta_neighborhood(
    const std::vector<std::vector<int>>& links, std::span<const int> m_block) {
  const int m1 = m_block[0];
  const int tables = static_cast<int>(links.size());
  if (tables != static_cast<int>(m_block.size()) - 1)
    throw InvariantError("delta_neighborhood: table count mismatch");

  std::vector<std::vector<std::vector<int>>> out;
  const int n_slots = tables * m1;
  auto slot_table = [&](int s) { return s / m1; };
  auto slot_row = [&](int s) { return s % m1; };  // source modality - 1

  // one image entry changed
  for (int s = 0; s < n_slots; ++s) {
    const int t = slot_table(s), h = slot_row(s);
    const int mj = m_block[t + 1];
    for (int v = 1; v <= mj; ++v) {
      if (v == links[t][h]) continue;
      auto cand = links;
      cand[t][h] = v;
      if (surjective(cand[t], mj)) out.push_back(std::move(cand));
    }
  }
  // two image entries changed
  for (int s1 = 0; s1 < n_slots; ++s1) {
    const int t1 = slot_table(s1), h1 = slot_row(s1);
    const int mj1 = m_block[t1 + 1];
    for (int s2 = s1 + 1; s2 < n_slots; ++s2) {
      const int t2 = slot_table(s2), h2 = slot_row(s2);
      const int mj2 = m_block[t2 + 1];
      for (int v1 = 1; v1 <= mj1; ++v1) {
        if (v1 == links[t1][h1]) continue;
        for (int v2 = 1; v2 <= mj2; ++v2) {
          if (v2 == links[t2][h2]) continue;
          auto cand = links;
          cand[t1][h1] = v1;
          cand[t2][h2] = v2;
          if (!surjective(cand[t1], mj1)) continue;
          if (t2 != t1 && !surjective(cand[t2], mj2)) continue;
          out.push_back(std::move(cand));
        }
      }
    }
  }
  return out;
}

double mh_log_acceptance(double cand_loglik, std::size_t cand_nbhd_size, double cur_loglik,
                         std::size_t cur_nbhd_size) {
  const double r = (cand_loglik - cur_loglik) +
                   std::log(static_cast<double>(cand_nbhd_size)) -
                   std::log(static_cast<double>(cur_nbhd_size));
  return std::min(0.0, r);
}

MhResult mh_delta(const BlockData& bd, const BlockParams& init, const MhOptions& opt, Rng& rng) {
  if (bd.m.size() < 2) throw InvariantError("mh_delta: needs a multi-variable block");
  BlockParams start = init;
  ensure_maxdep(start, bd.m);

  MhResult res;
  // The initial parameters themselves count as a visited state, so the
  // result can never be worse than them.
  res.best = BlockFit{start, weighted_block_loglik(bd, start)};
  BlockFit cur = inner_em(bd, start.maxdep->links, start, opt.t_max);
  if (cur.loglik > res.best.loglik) res.best = cur;
  if (res.best.loglik >= opt.stop_when_loglik_ge) {
    res.hit_iteration = 0;
    return res;
  }

  auto nbhd_cur = delta_neighborhood(cur.params.maxdep->links, bd.m);
  for (int s = 0; s < opt.s_max; ++s) {
    if (nbhd_cur.empty()) break;
    ++res.iterations;
    const auto& cand_links = nbhd_cur[rng.index(nbhd_cur.size())];
    BlockFit cand = inner_em(bd, cand_links, cur.params, opt.t_max);
    auto nbhd_cand = delta_neighborhood(cand_links, bd.m);
    if (cand.loglik > res.best.loglik) res.best = cand;
    const double log_mu =
        mh_log_acceptance(cand.loglik, nbhd_cand.size(), cur.loglik, nbhd_cur.size());
    if (std::log(rng.next_double()) < log_mu) {
      cur = std::move(cand);
      nbhd_cur = std::move(nbhd_cand);
    }
    if (res.hit_iteration < 0 && res.best.loglik >= opt.stop_when_loglik_ge) {
      res.hit_iteration = res.iterations;
      break;
    }
  }
  return res;
}

BlockFit mh_delta_exhaustive(const BlockData& bd, const BlockParams& init, int t_max,
                             long long cap) {
  if (bd.m.size() < 2) throw InvariantError("mh_delta_exhaustive: needs a multi-variable block");
  const uint64_t space = surjection_space_size(bd.m);
  if (space > static_cast<uint64_t>(cap))
    throw InputError("mh_delta_exhaustive: image-table space too large (" +
                     std::to_string(space) + " > " + std::to_string(cap) + ")");
  BlockParams start = init;
  ensure_maxdep(start, bd.m);

  std::vector<std::vector<std::vector<int>>> per_var;
  for (std::size_t t = 1; t < bd.m.size(); ++t)
    per_var.push_back(enumerate_surjections(bd.m[0], bd.m[t]));

  BlockFit best = BlockFit{start, weighted_block_loglik(bd, start)};
  std::vector<std::size_t> idx(per_var.size(), 0);
  std::vector<std::vector<int>> links(per_var.size());
  while (true) {
    for (std::size_t t = 0; t < per_var.size(); ++t) links[t] = per_var[t][idx[t]];
    BlockFit fit = inner_em(bd, links, start, t_max);
    if (fit.loglik > best.loglik) best = std::move(fit);
    std::size_t pos = 0;
    while (pos < idx.size() && ++idx[pos] == per_var[pos].size()) idx[pos++] = 0;
    if (pos == idx.size()) break;
  }
  return best;
}

namespace {

// EM over (alpha, tau) with rho held fixed; returns the profiled weighted
// log-likelihood and leaves the fitted parameters in theta.
double profile_at_rho(const BlockData& bd, double rho, BlockParams& theta, int iters) {
  const std::size_t dkb = bd.m.size();
  const int m1 = bd.m[0];
  const auto& links = theta.maxdep->links;
  const std::size_t P = bd.patterns.size();
  std::vector<char> on_support(P, 0);
  for (std::size_t p = 0; p < P; ++p) {
    const auto& pat = bd.patterns[p];
    bool on = true;
    for (std::size_t t = 1; t < dkb && on; ++t) on = links[t - 1][pat[0] - 1] == pat[t];
    on_support[p] = on ? 1 : 0;
  }
  double ll = kNegInf;
  std::vector<double> y(P, 0.0);
  for (int it = 0; it <= iters; ++it) {
    ll = 0.0;
    for (std::size_t p = 0; p < P; ++p) {
      const auto& pat = bd.patterns[p];
      double li = rho < 1.0 ? std::log1p(-rho) : kNegInf;
      for (std::size_t t = 0; t < dkb; ++t) li += std::log(theta.alpha[t][pat[t] - 1]);
      double lp = li;
      if (on_support[p] && rho > 0.0) {
        const double lm = std::log(rho) + std::log(theta.maxdep->tau[pat[0] - 1]);
        lp = log_sum_exp(li, lm);
        y[p] = std::exp(lm - lp);
      } else {
        y[p] = 0.0;
      }
      ll += bd.weight[p] * lp;
    }
    if (it == iters || ll == kNegInf) break;
    double n_md = 0.0;
    std::vector<double> tau_acc(m1, 0.0);
    std::vector<std::vector<double>> alpha_acc(dkb);
    for (std::size_t v = 0; v < dkb; ++v) alpha_acc[v].assign(bd.m[v], 0.0);
    for (std::size_t p = 0; p < P; ++p) {
      const double wy = bd.weight[p] * y[p];
      n_md += wy;
      tau_acc[bd.patterns[p][0] - 1] += wy;
      for (std::size_t v = 0; v < dkb; ++v)
        alpha_acc[v][bd.patterns[p][v] - 1] += bd.weight[p] - wy;
    }
    if (n_md > 0.0) {
      for (int h = 0; h < m1; ++h) theta.maxdep->tau[h] = tau_acc[h] / n_md;
      clamp_simplex(theta.maxdep->tau);
    }
    if (bd.total_weight - n_md > 0.0) {
      for (std::size_t v = 0; v < dkb; ++v) {
        for (int h = 0; h < bd.m[v]; ++h)
          theta.alpha[v][h] = alpha_acc[v][h] / (bd.total_weight - n_md);
        clamp_simplex(theta.alpha[v]);
      }
    }
  }
  return ll;
}

}  // namespace

BlockFit fit_rho_constrained(const BlockData& bd, const BlockParams& incumbent,
                             int profile_iters) {
  if (bd.m.size() != 2 || bd.m[1] != 2)
    throw InvariantError("fit_rho_constrained: applies to two-variable blocks with a binary second variable");
  BlockParams inc = incumbent;
  ensure_maxdep(inc, bd.m);
  const double inc_ll = weighted_block_loglik(bd, inc);

  constexpr double kStep = 1e-3;
  constexpr double kFlatTol = 1e-8;

  // Profiled likelihood at the incumbent's own rho, warm-started there.
  BlockParams inc_refit = inc;
  const double inc_refit_ll = profile_at_rho(bd, inc.rho, inc_refit, profile_iters);

  // Warm-started grid scan over [0, 1].
  BlockParams warm = inc;
  std::vector<double> grid_ll(1001, kNegInf);
  std::vector<BlockParams> grid_params(1001);
  double best_ll = inc_refit_ll;
  for (int i = 0; i <= 1000; ++i) {
    const double rho = i * kStep;
    warm.rho = rho;
    grid_ll[i] = profile_at_rho(bd, rho, warm, profile_iters);
    grid_params[i] = warm;
    grid_params[i].rho = rho;
    best_ll = std::max(best_ll, grid_ll[i]);
  }

  int hi = -1;
  for (int i = 1000; i >= 0; --i) {
    if (grid_ll[i] >= best_ll - kFlatTol) {
      hi = i;
      break;
    }
  }
  if (hi < 0) {
    // Only the incumbent's own rho attains the maximum.
    if (inc_refit_ll < inc_ll) return BlockFit{inc, inc_ll};
    return BlockFit{inc_refit, inc_refit_ll};
  }

  BlockParams chosen = grid_params[hi];
  double chosen_ll = grid_ll[hi];
  if (hi < 1000) {
    // Refine the right boundary of the flat argmax set within one grid step.
    double lo_rho = hi * kStep, hi_rho = (hi + 1) * kStep;
    BlockParams probe = grid_params[hi];
    for (int it = 0; it < 20; ++it) {
      const double mid = 0.5 * (lo_rho + hi_rho);
      BlockParams at_mid = probe;
      const double ll = profile_at_rho(bd, mid, at_mid, profile_iters);
      if (ll >= best_ll - kFlatTol) {
        lo_rho = mid;
        probe = at_mid;
        probe.rho = mid;
        chosen = probe;
        chosen_ll = ll;
      } else {
        hi_rho = mid;
      }
    }
  }
  if (inc_refit_ll >= best_ll - kFlatTol && inc_refit.rho > chosen.rho) {
    chosen = inc_refit;
    chosen_ll = inc_refit_ll;
  }

  if (chosen_ll < inc_ll) return BlockFit{inc, inc_ll};
  return BlockFit{chosen, chosen_ll};
}

BlockFit update_block(const BlockData& bd, const BlockParams& incumbent,
                      const EstimOptions& opts, Rng& rng) {
  if (bd.m.size() == 1) {
    BlockParams p;
    std::vector<double> freq(bd.m[0], 0.0);
    for (std::size_t i = 0; i < bd.patterns.size(); ++i)
      freq[bd.patterns[i][0] - 1] += bd.weight[i];
    for (auto& f : freq) f /= bd.total_weight;
    clamp_simplex(freq);
    p.alpha.push_back(std::move(freq));
    return BlockFit{p, weighted_block_loglik(bd, p)};
  }

  BlockParams inc = incumbent;
  ensure_maxdep(inc, bd.m);
  const uint64_t space = surjection_space_size(bd.m);
  BlockFit fit;
  if (space <= static_cast<uint64_t>(opts.exhaustive_cap)) {
    fit = mh_delta_exhaustive(bd, inc, opts.rules.t_max, opts.exhaustive_cap);
  } else {
    MhOptions mo;
    mo.s_max = opts.rules.s_max;
    mo.t_max = opts.rules.t_max;
    fit = mh_delta(bd, inc, mo, rng).best;
  }
  if (opts.inner_multistart > 1) {
    BlockFit extra = inner_em_multistart(bd, fit.params.maxdep->links, fit.params,
                                         opts.rules.t_max, opts.inner_multistart, rng);
    if (extra.loglik > fit.loglik) fit = std::move(extra);
  }
  if (bd.m.size() == 2 && bd.m[1] == 2) {
    BlockFit constrained = fit_rho_constrained(bd, fit.params);
    // Prefer the larger rho whenever the likelihood ties within noise.
    if (constrained.loglik >= fit.loglik - 1e-9) fit = std::move(constrained);
  }
  return fit;
}

double e_step(const Dataset& data, const CcmModel& model, std::vector<double>& z,
              std::vector<double>* row_loglik) {
  const int n = data.n();
  const int g = model.g;
  z.assign(static_cast<std::size_t>(n) * g, 0.0);
  if (row_loglik) row_loglik->assign(n, 0.0);
  std::vector<int> codes(data.d());
  std::vector<double> terms(g);
  std::vector<double> log_pi(g);
  for (int k = 0; k < g; ++k) log_pi[k] = std::log(model.pi[k]);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 1; j <= data.d(); ++j) codes[j - 1] = data.code(i, j);
    double mx = kNegInf;
    for (int k = 0; k < g; ++k) {
      terms[k] = log_pi[k] + component_log_pdf(codes, model, k);
      mx = std::max(mx, terms[k]);
    }
    if (mx == kNegInf)
      throw InvariantError("e_step: a row has zero density under every component");
    double s = 0.0;
    for (int k = 0; k < g; ++k) s += std::exp(terms[k] - mx);
    const double ll = mx + std::log(s);
    total += ll;
    if (row_loglik) (*row_loglik)[i] = ll;
    double norm = 0.0;
    for (int k = 0; k < g; ++k) {
      z[static_cast<std::size_t>(i) * g + k] = std::exp(terms[k] - ll);
      norm += z[static_cast<std::size_t>(i) * g + k];
    }
    for (int k = 0; k < g; ++k) z[static_cast<std::size_t>(i) * g + k] /= norm;
  }
  return total;
}

namespace {

// Nearly empty components are re-seeded on the worst-fit rows instead of
// aborting the whole fit.
void reseed_empty_classes(std::vector<double>& z, const std::vector<double>& row_loglik, int n,
                          int g) {
  std::vector<double> nk(g, 0.0);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < g; ++k) nk[k] += z[static_cast<std::size_t>(i) * g + k];
  std::vector<int> order;
  std::size_t next_batch_start = 0;
  for (int k = 0; k < g; ++k) {
    if (nk[k] >= 1.0) continue;
    if (order.empty()) {
      order.resize(n);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](int a, int b) { return row_loglik[a] < row_loglik[b]; });
    }
    const int batch = std::max(2, n / (10 * g));
    for (int t = 0; t < batch && next_batch_start < order.size(); ++t) {
      const int i = order[next_batch_start++];
      double* zi = &z[static_cast<std::size_t>(i) * g];
      const double rest = 1.0 - zi[k];
      for (int k2 = 0; k2 < g; ++k2)
        zi[k2] = (k2 == k) ? 0.9 : (rest > 0.0 ? zi[k2] / rest * 0.1 : 0.1 / (g - 1));
    }
  }
}

}  // namespace

CcmModel gem_fit(const Dataset& data, const CcmModel& init, const EstimOptions& opts, Rng& rng) {
  CcmModel model = init;
  if (model.m != data.modality_counts())
    throw InputError("gem_fit: model and data modality structures differ");
  model.validate();
  for (int k = 0; k < model.g; ++k)
    for (int b = 0; b < model.partition.n_blocks(k); ++b) {
      auto mb = model.block_modalities(k, b);
      ensure_maxdep(model.blocks[k][b], mb);
      model.blocks[k][b].rho = std::min(model.blocks[k][b].rho, 1.0 - 1e-9);
    }

  const int n = data.n();
  const int g = model.g;
  std::vector<double> z, row_ll;
  std::vector<double> trace;
  double loglik = e_step(data, model, z, &row_ll);
  trace.push_back(loglik);

  std::vector<double> wk(n);
  for (int r = 0; r < opts.rules.r_max; ++r) {
    reseed_empty_classes(z, row_ll, n, g);
    std::vector<double> nk(g, 0.0);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < g; ++k) nk[k] += z[static_cast<std::size_t>(i) * g + k];
    for (int k = 0; k < g; ++k) model.pi[k] = nk[k] / n;
    clamp_simplex(model.pi);

    for (int k = 0; k < g; ++k) {
      for (int i = 0; i < n; ++i) wk[i] = z[static_cast<std::size_t>(i) * g + k];
      for (int b = 0; b < model.partition.n_blocks(k); ++b) {
        BlockData bd = collapse_block(data, model.partition.block(k, b), wk);
        if (!(bd.total_weight > 0.0)) continue;  // guarded above; belt and braces
        model.blocks[k][b] = update_block(bd, model.blocks[k][b], opts, rng).params;
      }
    }
    loglik = e_step(data, model, z, &row_ll);
    if (!std::isfinite(loglik)) throw NumericalError("gem_fit: non-finite log-likelihood");
    trace.push_back(loglik);
  }

  FitMeta meta;
  meta.loglik = loglik;
  meta.nu = nu_ccm(model);
  meta.bic = bic_score(loglik, meta.nu, n);
  meta.n = n;
  meta.z = std::move(z);
  meta.loglik_trace = std::move(trace);
  model.meta = std::move(meta);
  return model;
}

CcmModel cim_fit(const Dataset& data, int g, const CimInit& init, int r_max,
                 std::vector<double>* trace) {
  const int n = data.n();
  const int d = data.d();
  if (g < 1) throw InputError("cim_fit: g must be at least 1");
  if (static_cast<int>(init.pi.size()) != g || static_cast<int>(init.alpha.size()) != g)
    throw InputError("cim_fit: init size mismatch");

  std::vector<double> pi = init.pi;
  clamp_simplex(pi);
  auto alpha = init.alpha;
  for (int k = 0; k < g; ++k) {
    if (static_cast<int>(alpha[k].size()) != d) throw InputError("cim_fit: init alpha mismatch");
    for (int j = 0; j < d; ++j) {
      if (static_cast<int>(alpha[k][j].size()) != data.modality_counts()[j])
        throw InputError("cim_fit: init alpha modality mismatch");
      clamp_simplex(alpha[k][j]);
    }
  }

  std::vector<double> z(static_cast<std::size_t>(n) * g, 0.0);
  std::vector<double> row_ll(n, 0.0);
  std::vector<double> terms(g);

  auto e_pass = [&]() {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double mx = kNegInf;
      for (int k = 0; k < g; ++k) {
        double t = std::log(pi[k]);
        for (int j = 1; j <= d; ++j) t += std::log(alpha[k][j - 1][data.code(i, j) - 1]);
        terms[k] = t;
        mx = std::max(mx, t);
      }
      double s = 0.0;
      for (int k = 0; k < g; ++k) s += std::exp(terms[k] - mx);
      const double ll = mx + std::log(s);
      total += ll;
      row_ll[i] = ll;
      for (int k = 0; k < g; ++k) z[static_cast<std::size_t>(i) * g + k] = std::exp(terms[k] - ll);
    }
    return total;
  };

  double loglik = e_pass();
  if (trace) trace->push_back(loglik);
  for (int r = 0; r < r_max; ++r) {
    reseed_empty_classes(z, row_ll, n, g);
    std::vector<double> nk(g, 0.0);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < g; ++k) nk[k] += z[static_cast<std::size_t>(i) * g + k];
    for (int k = 0; k < g; ++k) {
      pi[k] = nk[k] / n;
      for (int j = 0; j < d; ++j) {
        std::vector<double> freq(data.modality_counts()[j], 0.0);
        for (int i = 0; i < n; ++i)
          freq[data.code(i, j + 1) - 1] += z[static_cast<std::size_t>(i) * g + k];
        for (auto& f : freq) f /= nk[k];
        clamp_simplex(freq);
        alpha[k][j] = std::move(freq);
      }
    }
    clamp_simplex(pi);
    loglik = e_pass();
    if (!std::isfinite(loglik)) throw NumericalError("cim_fit: non-finite log-likelihood");
    if (trace) trace->push_back(loglik);
  }

  CcmModel model;
  model.g = g;
  model.m = data.modality_counts();
  model.partition = BlockPartition::all_singletons(g, d);
  model.pi = pi;
  model.blocks.assign(g, {});
  for (int k = 0; k < g; ++k) {
    model.blocks[k].resize(d);
    for (int j = 0; j < d; ++j) model.blocks[k][j].alpha.push_back(alpha[k][j]);
  }
  FitMeta meta;
  meta.loglik = loglik;
  meta.nu = nu_cim(g, model.m);
  meta.bic = bic_score(loglik, meta.nu, n);
  meta.n = n;
  meta.z = std::move(z);
  model.meta = std::move(meta);
  return model;
}

std::vector<std::vector<int>> sample_delta_sequential(
    const BlockData& bd, double rho, const std::vector<std::vector<double>>& alpha,
    const std::vector<double>& tau, Rng& rng, long long enum_cap) {
  const std::size_t dkb = bd.m.size();
  if (dkb < 2) throw InvariantError("sample_delta_sequential: needs a multi-variable block");
  const int m1 = bd.m[0];
  std::vector<std::vector<int>> links;

  for (std::size_t t = 1; t < dkb; ++t) {
    const int mj = bd.m[t];
    // Weighted pair contingency of (first variable, variable t).
    std::vector<std::vector<double>> pair(m1, std::vector<double>(mj, 0.0));
    for (std::size_t p = 0; p < bd.patterns.size(); ++p)
      pair[bd.patterns[p][0] - 1][bd.patterns[p][t] - 1] += bd.weight[p];

    const uint64_t n_tables = surjection_count(m1, mj);
    if (n_tables <= static_cast<uint64_t>(enum_cap)) {
      auto tables = enumerate_surjections(m1, mj);
      std::vector<double> ll(tables.size(), 0.0);
      double mx = kNegInf;
      for (std::size_t c = 0; c < tables.size(); ++c) {
        double acc = 0.0;
        for (int h = 1; h <= m1; ++h) {
          for (int h2 = 1; h2 <= mj; ++h2) {
            const double w = pair[h - 1][h2 - 1];
            if (w == 0.0) continue;
            double p2 = (1.0 - rho) * alpha[0][h - 1] * alpha[t][h2 - 1];
            if (tables[c][h - 1] == h2) p2 += rho * tau[h - 1];
            acc += w * std::log(std::max(p2, 1e-300));
          }
        }
        ll[c] = acc;
        mx = std::max(mx, acc);
      }
      std::vector<double> w(tables.size());
      for (std::size_t c = 0; c < tables.size(); ++c) w[c] = std::exp(ll[c] - mx);
      links.push_back(tables[rng.categorical(w)]);
    } else {
      // Greedy: map each source modality to its heaviest partner, then
      // repair surjectivity at the cheapest reassignment.
      std::vector<int> img(m1, 1);
      for (int h = 0; h < m1; ++h) {
        int best = 0;
        for (int h2 = 1; h2 < mj; ++h2)
          if (pair[h][h2] > pair[h][best]) best = h2;
        img[h] = best + 1;
      }
      std::vector<int> preimage_count(mj + 1, 0);
      for (int v : img) ++preimage_count[v];
      for (int v = 1; v <= mj; ++v) {
        if (preimage_count[v] > 0) continue;
        int pick = -1;
        double best_cost = std::numeric_limits<double>::infinity();
        for (int h = 0; h < m1; ++h) {
          if (preimage_count[img[h]] < 2) continue;
          const double cost = pair[h][img[h] - 1] - pair[h][v - 1];
          if (cost < best_cost) {
            best_cost = cost;
            pick = h;
          }
        }
        if (pick < 0) throw InvariantError("sample_delta_sequential: repair failed");
        --preimage_count[img[pick]];
        img[pick] = v;
        ++preimage_count[v];
      }
      links.push_back(std::move(img));
    }
  }
  return links;
}

BlockParams random_block_params(std::span<const int> m_block, Rng& rng) {
  BlockParams p;
  for (int mj : m_block) {
    auto v = rng.simplex(mj);
    clamp_simplex(v);
    p.alpha.push_back(std::move(v));
  }
  if (m_block.size() < 2) return p;
  p.rho = rng.uniform(0.2, 0.8);
  MaxDepParams mp;
  mp.tau = rng.simplex(m_block[0]);
  clamp_simplex(mp.tau);
  const int m1 = m_block[0];
  for (std::size_t t = 1; t < m_block.size(); ++t) {
    const int mj = m_block[t];
    // Random surjection: first cover every target once, then fill the rest.
    std::vector<int> img(m1, 0);
    std::vector<int> sources(m1);
    std::iota(sources.begin(), sources.end(), 0);
    for (int v = 1; v <= mj; ++v) {
      const std::size_t pick = rng.index(sources.size());
      img[sources[pick]] = v;
      sources.erase(sources.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    for (int h = 0; h < m1; ++h)
      if (img[h] == 0) img[h] = rng.uniform_int(1, mj);
    mp.links.push_back(std::move(img));
  }
  p.maxdep = std::move(mp);
  return p;
}

}  // namespace ccm
