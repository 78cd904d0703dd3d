#pragma once

#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "ccm/common.hpp"
#include "ccm/dataset.hpp"
#include "ccm/model.hpp"

namespace ccm {

/// Iteration caps of the interlocked estimation stack.
struct StoppingRules {
  int r_max = 10;  // global GEM iterations
  int s_max = 1;   // Metropolis-Hastings moves per block update
  int t_max = 5;   // inner EM iterations
  int q_max = 0;   // Gibbs stall limit; 0 = automatic 20*d
  int q_max_for(int d) const { return q_max > 0 ? q_max : 20 * d; }
};

/// One block's data restricted to its variables and collapsed over identical
/// rows; weight holds the summed row weights of each distinct pattern.
struct BlockData {
  std::vector<int> vars;                   // 1-based variable indices, block order
  std::vector<int> m;                      // modality counts, block order
  std::vector<std::vector<int>> patterns;  // distinct code tuples (1-based)
  std::vector<double> weight;
  double total_weight = 0.0;
};

BlockData collapse_block(const Dataset& data, std::span<const int> vars,
                         std::span<const double> row_weights = {});

struct BlockFit {
  BlockParams params;
  double loglik = kNegInf;  // weighted block log-likelihood
};

double weighted_block_loglik(const BlockData& bd, const BlockParams& theta);

/// Weighted EM over the continuous block parameters (rho, alpha, tau) with
/// the image tables held fixed. The weighted block log-likelihood is
/// non-decreasing across iterations; `trace` (optional) receives it at the
/// initial point and after every iteration.
BlockFit inner_em(const BlockData& bd, const std::vector<std::vector<int>>& links,
                  const BlockParams& init, int t_max, std::vector<double>* trace = nullptr);

/// inner_em from `init` plus `starts - 1` random restarts; best fit wins.
BlockFit inner_em_multistart(const BlockData& bd, const std::vector<std::vector<int>>& links,
                             const BlockParams& init, int t_max, int starts, Rng& rng);

/// All valid image tables differing from `links` in at most two (h, j)
/// entries, excluding `links` itself.
std::vector<std::vector<std::vector<int>>> delta_neighborhood(
    const std::vector<std::vector<int>>& links, std::span<const int> m_block);

/// Log acceptance probability of a Metropolis-Hastings move, including the
/// neighborhood-size correction.
double mh_log_acceptance(double cand_loglik, std::size_t cand_nbhd_size, double cur_loglik,
                         std::size_t cur_nbhd_size);

struct MhOptions {
  int s_max = 1;
  int t_max = 5;
  // Early stop once the best visited log-likelihood reaches this level.
  double stop_when_loglik_ge = std::numeric_limits<double>::infinity();
};

struct MhResult {
  BlockFit best;
  int iterations = 0;      // moves executed
  int hit_iteration = -1;  // first iteration at which best crossed the stop level
};

/// Random walk over the image tables. Each move refits the continuous
/// parameters by inner_em; the returned fit is the best over all evaluated
/// states and never worse than the (refitted) initial point.
MhResult mh_delta(const BlockData& bd, const BlockParams& init, const MhOptions& opt, Rng& rng);

/// Enumerates the whole image-table space (must be <= cap) and keeps the
/// best inner_em fit.
BlockFit mh_delta_exhaustive(const BlockData& bd, const BlockParams& init, int t_max,
                             long long cap = 5000);

/// Two-variable blocks whose second variable is binary are not identifiable:
/// among rho values attaining the maximal weighted log-likelihood, pick the
/// largest (grid scan plus boundary refinement). Never returns a fit worse
/// than `incumbent`.
BlockFit fit_rho_constrained(const BlockData& bd, const BlockParams& incumbent,
                             int profile_iters = 12);

struct EstimOptions {
  StoppingRules rules{};
  long long exhaustive_cap = 5000;
  int inner_multistart = 1;
};

/// One GM-step block update: closed form for singleton blocks, exhaustive
/// search or Metropolis-Hastings over image tables otherwise, plus the
/// constrained-rho pass where identifiability requires it.
BlockFit update_block(const BlockData& bd, const BlockParams& incumbent,
                      const EstimOptions& opts, Rng& rng);

/// Global GEM for fixed (g, sigma). `init` supplies g, the partition and the
/// starting parameters. The observed-data log-likelihood is non-decreasing
/// across iterations (slack 1e-8) and is recorded in meta.loglik_trace.
CcmModel gem_fit(const Dataset& data, const CcmModel& init, const EstimOptions& opts, Rng& rng);

struct CimInit {
  std::vector<double> pi;
  std::vector<std::vector<std::vector<double>>> alpha;  // [component][variable][modality]
};

/// Plain latent class EM (conditional independence model), coded
/// independently of the block machinery. Returns an all-singleton CcmModel.
CcmModel cim_fit(const Dataset& data, int g, const CimInit& init, int r_max,
                 std::vector<double>* trace = nullptr);

/// Sequential initialization of the image tables: for each subsequent
/// variable, a table is drawn with probability proportional to the weighted
/// likelihood of the (first, j) variable pair under the given continuous
/// parameters. Falls back to greedy assignment with surjectivity repair when
/// the per-pair table space exceeds `enum_cap`.
std::vector<std::vector<int>> sample_delta_sequential(
    const BlockData& bd, double rho, const std::vector<std::vector<double>>& alpha,
    const std::vector<double>& tau, Rng& rng, long long enum_cap = 5000);

/// Random valid block parameters for the given modality structure.
BlockParams random_block_params(std::span<const int> m_block, Rng& rng);

/// Posterior memberships of every row under `model`; returns the observed
/// log-likelihood and fills z (n x g, row-major). Optionally captures the
/// per-row mixture log-densities.
double e_step(const Dataset& data, const CcmModel& model, std::vector<double>& z,
              std::vector<double>* row_loglik = nullptr);

}  // namespace ccm
