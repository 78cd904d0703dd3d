#include "ccm/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"

namespace ccm {

CcmModel scenario_model(int d, double u) {
  if (d < 2 || d % 2 != 0) throw InputError("scenario: d must be even and at least 2");
  if (!(u >= 0.0 && u < 1.0)) throw InputError("scenario: u must lie in [0, 1)");

  CcmModel model;
  model.g = 2;
  model.m.assign(d, 3);
  BlockPartition::ComponentBlocks tpl;
  for (int b = 0; b < d / 2; ++b) tpl.push_back({2 * b + 1, 2 * b + 2});
  model.partition = BlockPartition::replicate(tpl, 2, model.m);
  model.pi = {0.5, 0.5};

  const double rho = 0.6 * (1.0 - u);
  const std::vector<double> tau = {0.60, 0.20, 0.20};
  const std::vector<double> a1 = {0.20, 0.20, 0.60};
  // class-2 targets, repeated cyclically across pairs
  const std::vector<double> t_first = {0.075, 0.850, 0.075};
  const std::vector<double> t_second = {0.850, 0.075, 0.075};
  auto lerp = [&](const std::vector<double>& from, const std::vector<double>& to) {
    std::vector<double> v(3);
    for (int h = 0; h < 3; ++h) v[h] = from[h] * (1.0 - u) + to[h] * u;
    return v;
  };

  model.blocks.assign(2, {});
  for (int k = 0; k < 2; ++k) {
    for (int b = 0; b < d / 2; ++b) {
      BlockParams th;
      th.rho = rho;
      if (k == 0) {
        th.alpha = {a1, a1};
      } else {
        th.alpha = {lerp(a1, t_first), lerp(a1, t_second)};
      }
      MaxDepParams mp;
      mp.tau = tau;
      mp.links = {k == 0 ? std::vector<int>{1, 2, 3} : std::vector<int>{2, 3, 1}};
      th.maxdep = std::move(mp);
      model.blocks[k].push_back(std::move(th));
    }
  }
  model.validate();
  return model;
}

namespace {

std::vector<std::vector<int>> permutations_of(int g) {
  std::vector<int> base(g);
  std::iota(base.begin(), base.end(), 0);
  std::vector<std::vector<int>> out;
  do {
    out.push_back(base);
  } while (std::next_permutation(base.begin(), base.end()));
  return out;
}

CcmModel permute_components(const CcmModel& model, const std::vector<int>& perm) {
  CcmModel out = model;
  std::vector<BlockPartition::ComponentBlocks> raw;
  for (int k = 0; k < model.g; ++k) {
    raw.push_back(model.partition.component(perm[k]));
    out.pi[k] = model.pi[perm[k]];
    out.blocks[k] = model.blocks[perm[k]];
  }
  out.partition = BlockPartition::canonical(std::move(raw), model.m);
  out.meta.reset();
  return out;
}

double kl_exact_one(const CcmModel& truth, const CcmModel& est) {
  const int d = truth.d();
  std::vector<int> cell(d, 1);
  double kl = 0.0;
  while (true) {
    const double lp = mixture_log_pdf(cell, truth);
    if (lp != kNegInf) {
      const double lq = mixture_log_pdf(cell, est);
      if (lq == kNegInf) return std::numeric_limits<double>::infinity();
      kl += std::exp(lp) * (lp - lq);
    }
    int pos = 0;
    while (pos < d && ++cell[pos] > truth.m[pos]) cell[pos++] = 1;
    if (pos == d) break;
  }
  return std::max(kl, 0.0);
}

}  // namespace

double kl_divergence(const CcmModel& truth, const CcmModel& est, KlMode mode, long n_mc,
                     Rng* rng) {
  if (truth.m != est.m) throw InputError("kl_divergence: modality structures differ");
  if (est.g > 7) throw InputError("kl_divergence: too many components for permutation resolution");

  if (mode == KlMode::exact) {
    double cells = 1.0;
    for (int mj : truth.m) cells *= mj;
    if (cells > 1e6) throw InputError("kl_divergence: product space too large for exact mode");
    double best = std::numeric_limits<double>::infinity();
    for (const auto& perm : permutations_of(est.g))
      best = std::min(best, kl_exact_one(truth, permute_components(est, perm)));
    return best;
  }

  if (n_mc < 1 || rng == nullptr) throw InputError("kl_divergence: monte-carlo mode needs n_mc and rng");
  SampleResult draw = sample(truth, static_cast<int>(n_mc), *rng);
  std::vector<double> lp(n_mc);
  std::vector<int> codes(truth.d());
  for (long i = 0; i < n_mc; ++i) {
    for (int j = 1; j <= truth.d(); ++j) codes[j - 1] = draw.data.code(static_cast<int>(i), j);
    lp[i] = mixture_log_pdf(codes, truth);
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& perm : permutations_of(est.g)) {
    const CcmModel permuted = permute_components(est, perm);
    double acc = 0.0;
    for (long i = 0; i < n_mc; ++i) {
      for (int j = 1; j <= truth.d(); ++j) codes[j - 1] = draw.data.code(static_cast<int>(i), j);
      const double lq = mixture_log_pdf(codes, permuted);
      if (lq == kNegInf) {
        acc = std::numeric_limits<double>::infinity();
        break;
      }
      acc += lp[i] - lq;
    }
    best = std::min(best, acc == std::numeric_limits<double>::infinity()
                              ? acc
                              : std::max(acc / static_cast<double>(n_mc), 0.0));
  }
  return best;
}

double bayes_error_mc(const CcmModel& model, long n_mc, Rng& rng) {
  SampleResult draw = sample(model, static_cast<int>(n_mc), rng);
  long wrong = 0;
  std::vector<int> codes(model.d());
  for (long i = 0; i < n_mc; ++i) {
    for (int j = 1; j <= model.d(); ++j) codes[j - 1] = draw.data.code(static_cast<int>(i), j);
    int arg = 0;
    double best = kNegInf;
    for (int k = 0; k < model.g; ++k) {
      const double t = std::log(model.pi[k]) + component_log_pdf(codes, model, k);
      if (t > best) {
        best = t;
        arg = k;
      }
    }
    if (arg + 1 != draw.labels[i]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(n_mc);
}

double calibrate_u(double target_error, int d, long mc_size, Rng& rng) {
  if (!(target_error > 0.0 && target_error < 0.5))
    throw InputError("calibrate_u: target error must lie in (0, 0.5)");
  const uint64_t eval_seed = rng.next_u64();
  auto error_at = [&](double u) {
    Rng local(eval_seed);  // common random numbers across u
    return bayes_error_mc(scenario_model(d, u), mc_size, local);
  };

  constexpr double kGrid = 0.05;
  double prev_u = 0.0;
  double prev_e = error_at(0.0);
  if (std::abs(prev_e - target_error) <= 0.005) return 0.0;
  double lo_u = -1.0, hi_u = -1.0, lo_e = 0.0, hi_e = 0.0;
  for (double u = kGrid; u < 1.0 - 1e-9; u += kGrid) {
    const double e = error_at(u);
    if ((prev_e - target_error) * (e - target_error) <= 0.0) {
      lo_u = prev_u;
      hi_u = u;
      lo_e = prev_e;
      hi_e = e;
      break;
    }
    prev_u = u;
    prev_e = e;
  }
  if (lo_u < 0.0) throw InputError("calibrate_u: target error unreachable on u in [0, 1)");

  double mid = lo_u, mid_e = lo_e;
  for (int it = 0; it < 40; ++it) {
    mid = 0.5 * (lo_u + hi_u);
    mid_e = error_at(mid);
    if (std::abs(mid_e - target_error) <= 0.005) return mid;
    if ((lo_e - target_error) * (mid_e - target_error) <= 0.0) {
      hi_u = mid;
      hi_e = mid_e;
    } else {
      lo_u = mid;
      lo_e = mid_e;
    }
  }
  if (std::abs(mid_e - target_error) <= 0.005) return mid;
  throw InputError("calibrate_u: bisection did not reach the target tolerance");
}

namespace {

std::vector<double> constrained_simplex(int k, double min_entry, Rng& rng) {
  for (int attempt = 0; attempt < 10000; ++attempt) {
    auto v = rng.simplex(k);
    if (*std::min_element(v.begin(), v.end()) >= min_entry) return v;
  }
  throw InvariantError("constrained_simplex: rejection sampling failed");
}

std::vector<int> uniform_random_surjection(int a, int b, Rng& rng) {
  while (true) {
    std::vector<int> img(a);
    for (int h = 0; h < a; ++h) img[h] = rng.uniform_int(1, b);
    std::vector<char> hit(b + 1, 0);
    for (int v : img) hit[v] = 1;
    bool onto = true;
    for (int v = 1; v <= b; ++v) onto = onto && hit[v];
    if (onto) return img;
  }
}

}  // namespace

std::vector<RecoveryRow> run_delta_recovery(std::span<const int> modalities,
                                            std::span<const int> n_vars, int replicates,
                                            Rng& rng, int s_cap) {
  constexpr int kSampleSize = 200;
  constexpr double kRho = 0.5;
  std::vector<RecoveryRow> rows;
  for (int nv : n_vars) {
    for (int nm : modalities) {
      if (nv < 2) throw InputError("run_delta_recovery: blocks need at least two variables");
      for (int rep = 0; rep < replicates; ++rep) {
        // Single-class generating model over one block of nv variables.
        CcmModel truth;
        truth.g = 1;
        truth.m.assign(nv, nm);
        BlockPartition::ComponentBlocks tpl;
        tpl.push_back({});
        for (int j = 1; j <= nv; ++j) tpl[0].push_back(j);
        truth.partition = BlockPartition::replicate(tpl, 1, truth.m);
        truth.pi = {1.0};
        BlockParams th;
        th.rho = kRho;
        for (int t = 0; t < nv; ++t) th.alpha.push_back(constrained_simplex(nm, 0.05, rng));
        MaxDepParams mp;
        mp.tau = constrained_simplex(nm, 0.05, rng);
        for (int t = 1; t < nv; ++t) mp.links.push_back(uniform_random_surjection(nm, nm, rng));
        th.maxdep = std::move(mp);
        truth.blocks = {{th}};
        truth.validate();

        SampleResult draw = sample(truth, kSampleSize, rng);
        std::vector<int> vars(nv);
        std::iota(vars.begin(), vars.end(), 1);
        BlockData bd = collapse_block(draw.data, vars);
        const double target = weighted_block_loglik(bd, th);

        // Shared random continuous starting point for both init modes.
        BlockParams start = random_block_params(bd.m, rng);
        BlockParams smart = start;
        smart.maxdep->links =
            sample_delta_sequential(bd, start.rho, start.alpha, start.maxdep->tau, rng);
        BlockParams blind = start;
        for (int t = 1; t < nv; ++t)
          blind.maxdep->links[t - 1] = uniform_random_surjection(nm, nm, rng);

        for (int mode = 0; mode < 2; ++mode) {
          MhOptions opt;
          opt.s_max = s_cap;
          opt.t_max = 5;
          opt.stop_when_loglik_ge = target;
          MhResult res = mh_delta(bd, mode == 0 ? smart : blind, opt, rng);
          RecoveryRow row;
          row.n_vars = nv;
          row.n_modalities = nm;
          row.smart_init = mode == 0;
          row.replicate = rep;
          row.iterations = res.hit_iteration >= 0 ? res.hit_iteration : s_cap;
          rows.push_back(row);
        }
      }
    }
  }
  return rows;
}

KlReport run_kl_study(std::span<const int> d_list, std::span<const int> n_list, int replicates,
                      const KlStudyConfig& cfg, Rng& rng) {
  KlReport report;
  report.seed = rng.next_u64();
  if (replicates <= 0) return report;
  for (int d : d_list) {
    Rng calib = rng.fork(static_cast<uint64_t>(d));
    const double u = calibrate_u(cfg.target_error, d, cfg.calib_mc, calib);
    report.calibrated_u.emplace_back(d, u);
    const CcmModel truth = scenario_model(d, u);
    for (int n : n_list) {
      std::vector<double> kls;
      for (int rep = 0; rep < replicates; ++rep) {
        Rng local = rng.fork(uint64_t(d) * 1000003u + uint64_t(n) * 1009u + uint64_t(rep));
        const uint64_t rep_seed = local.next_u64();
        Rng sampler(rep_seed);
        SampleResult draw = sample(truth, n, sampler);

        SearchConfig sc;
        sc.g_min = 2;
        sc.g_max = 2;
        sc.chains = cfg.chains;
        sc.rules = cfg.rules;
        sc.seed = rep_seed;
        sc.threads = cfg.threads;
        SelectionResult sel = select_model(draw.data, sc);
        const double kl = kl_divergence(truth, sel.best().best.best_model, KlMode::exact);

        KlRow row;
        row.d = d;
        row.n = n;
        row.replicate = rep;
        row.seed = rep_seed;
        row.kl = kl;
        report.rows.push_back(row);
        kls.push_back(kl);
      }
      KlCell cell;
      cell.d = d;
      cell.n = n;
      cell.replicates = replicates;
      cell.mean = std::accumulate(kls.begin(), kls.end(), 0.0) / kls.size();
      double ss = 0.0;
      for (double x : kls) ss += (x - cell.mean) * (x - cell.mean);
      cell.sd = kls.size() > 1 ? std::sqrt(ss / (kls.size() - 1)) : 0.0;
      report.cells.push_back(cell);
    }
  }
  return report;
}

void write_recovery_csv(const std::vector<RecoveryRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("recovery report: cannot write " + path);
  out << "n_vars,n_modalities,init,replicate,iterations\n";
  for (const auto& r : rows)
    out << r.n_vars << ',' << r.n_modalities << ',' << (r.smart_init ? "sequential" : "random")
        << ',' << r.replicate << ',' << r.iterations << "\n";
}

void write_kl_report_csv(const KlReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("kl report: cannot write " + path);
  out << "d,n,replicate,seed,kl\n";
  for (const auto& r : report.rows)
    out << r.d << ',' << r.n << ',' << r.replicate << ',' << r.seed << ',' << r.kl << "\n";
}

void write_kl_report_json(const KlReport& report, const std::string& path) {
  nlohmann::ordered_json doc;
  doc["seed"] = report.seed;
  nlohmann::ordered_json calib = nlohmann::ordered_json::array();
  for (const auto& [d, u] : report.calibrated_u) calib.push_back({{"d", d}, {"u", u}});
  doc["calibrated_u"] = calib;
  nlohmann::ordered_json grid = nlohmann::ordered_json::array();
  for (const auto& c : report.cells)
    grid.push_back({{"d", c.d}, {"n", c.n}, {"mean", c.mean}, {"sd", c.sd},
                    {"replicates", c.replicates}});
  doc["grid"] = grid;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("kl report: cannot write " + path);
  out << doc.dump(2) << "\n";
}

}  // namespace ccm
