#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ccm/common.hpp"
#include "ccm/dataset.hpp"
#include "ccm/estim.hpp"
#include "ccm/model.hpp"

namespace ccm {

enum class Linkage { average, single, complete };

/// Agglomerative clustering of the variables on dissimilarity 1 - V.
/// Among the merge stages whose largest cluster holds at most four
/// variables, the one with the fewest blocks wins. Returns the block
/// template (lists of 1-based variable indices) replicated for every
/// component. d = 1 yields a single singleton.
std::vector<std::vector<int>> hac_init(const std::vector<std::vector<double>>& v_matrix,
                                       Linkage linkage = Linkage::average);

/// L - (nu / 2) * ln(n), natural log.
double bic_score(double loglik, long long nu, int n);

/// Candidates obtained by moving exactly one variable of block `b_from` of
/// component `k` to block `b_other` (when given) or to a new block, plus
/// sigma itself (listed first). Canonicalized; duplicates dropped in
/// generation order.
std::vector<BlockPartition> sigma_candidates(const BlockPartition& sigma,
                                             const std::vector<int>& m, int k, int b_from,
                                             std::optional<int> b_other);

struct SigmaNeighborhood {
  int k = 0;
  std::vector<BlockPartition> candidates;
};

/// Draws (component, source block, optional target block) uniformly and
/// builds the stochastic neighborhood; a draw that degenerates to {sigma}
/// alone is redrawn up to d times.
SigmaNeighborhood sigma_neighborhood(const BlockPartition& sigma, const std::vector<int>& m,
                                     Rng& rng);

struct SearchConfig {
  int g_min = 1;
  int g_max = 1;
  int chains = 20;
  StoppingRules rules{};
  uint64_t seed = 0;
  long long exhaustive_cap = 5000;
  Linkage linkage = Linkage::average;
  int threads = 1;
  long max_iterations = 200000;  // hard safety cap per chain
};

struct ChainResult {
  CcmModel best_model;
  double best_bic = kNegInf;
  std::vector<double> trace_best;     // non-decreasing
  std::vector<double> trace_current;  // BIC of the sampled state
  long iterations = 0;
  uint64_t seed = 0;
};

/// Chain starting point for a fixed structure: random continuous parameters
/// and sequentially sampled image tables under uniform responsibilities.
CcmModel initial_model(const Dataset& data, int g, const BlockPartition& sigma, Rng& rng);

/// One Gibbs chain over block structures at fixed g, warm-starting the GEM
/// fit of every candidate from the incumbent. Stops once q_max successive
/// iterations fail to improve the best BIC.
ChainResult gibbs_chain(const Dataset& data, int g, const BlockPartition& init_sigma,
                        const SearchConfig& cfg, Rng& rng);

struct GSearchResult {
  int g = 0;
  ChainResult best;
  double seconds = 0.0;
  std::vector<double> chain_bics;  // per chain, in chain order
};

struct SelectionResult {
  std::vector<GSearchResult> per_g;
  int best_index = 0;  // into per_g
  const GSearchResult& best() const { return per_g[best_index]; }
};

/// Runs `chains` independent Gibbs chains per g in g_min..g_max, all started
/// from the shared HAC template; keeps the max-BIC result per g and picks
/// the global winner (ties: smaller nu, then lexicographically smaller
/// partition).
SelectionResult select_model(const Dataset& data, const SearchConfig& cfg);

std::string search_report_json(const SelectionResult& sel);

}  // namespace ccm
