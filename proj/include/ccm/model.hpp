#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccm/common.hpp"
#include "ccm/dataset.hpp"
#include "ccm/partition.hpp"

namespace ccm {

/// Maximum dependency distribution of one block: multinomial weights on the
/// first (largest-modality) variable plus one surjective image table per
/// subsequent variable. links[t][h-1] is the modality that variable t+2 of
/// the block takes when the first variable takes modality h.
struct MaxDepParams {
  std::vector<double> tau;
  std::vector<std::vector<int>> links;
};

/// Bi-component block distribution: (1-rho) * independence + rho * maximum
/// dependency. `alpha` holds one probability vector per block variable, in
/// block order. For single-variable blocks rho is 0 and maxdep is absent.
/// A block may keep maxdep parameters with rho == 0 in memory (warm
/// restarts); serialization drops them.
struct BlockParams {
  double rho = 0.0;
  std::vector<std::vector<double>> alpha;
  std::optional<MaxDepParams> maxdep;
};

struct FitMeta {
  double loglik = 0.0;
  double bic = 0.0;
  long long nu = 0;
  int n = 0;
  uint64_t seed = 0;
  std::vector<double> z;  // n x g posterior memberships, row-major
  std::vector<double> loglik_trace;
};

struct CcmModel {
  int g = 0;
  std::vector<int> m;  // per-variable modality counts
  BlockPartition partition;
  std::vector<double> pi;
  std::vector<std::vector<BlockParams>> blocks;  // [component][block]
  std::optional<FitMeta> meta;

  int d() const { return static_cast<int>(m.size()); }
  std::vector<int> block_modalities(int k, int b) const;
  void validate() const;
};

double indep_log_pdf(std::span<const int> codes, const std::vector<std::vector<double>>& alpha);

/// Log-density of the maximum dependency distribution; -inf off support.
double maxdep_log_pdf(std::span<const int> codes, const MaxDepParams& p);

double block_log_pdf(std::span<const int> codes, const BlockParams& theta);

/// log p(x | component k) = sum of block log-densities.
double component_log_pdf(std::span<const int> row_codes, const CcmModel& model, int k);

/// log p(x) via log-sum-exp over components. `row_codes` has length d.
double mixture_log_pdf(std::span<const int> row_codes, const CcmModel& model);
double mixture_log_pdf(const Dataset& data, int row, const CcmModel& model);

/// Continuous parameter count of the conditional independence model.
long long nu_cim(int g, std::span<const int> m);

/// Continuous parameter count of the conditionally correlated model:
/// nu_cim plus, for every block with more than one variable, the modality
/// count of its first variable.
long long nu_ccm(int g, const BlockPartition& partition, std::span<const int> m);
long long nu_ccm(const CcmModel& model);

/// Number of surjections from an a-set onto a b-set; exact, throws on overflow.
uint64_t surjection_count(int a, int b);

/// All image tables of surjections 1..a -> 1..b, lexicographic order.
std::vector<std::vector<int>> enumerate_surjections(int a, int b);

/// Size of the discrete search space of a block's image tables:
/// product over subsequent variables j of S(m_1, m_j). Saturates at
/// UINT64_MAX. Throws if the ordering invariant m_1 >= m_j is broken.
uint64_t surjection_space_size(std::span<const int> m_block);

struct SampleResult {
  Dataset data;
  std::vector<int> labels;              // 1-based component of each row
  std::vector<std::vector<int>> y;      // per row: 0/1 per block of its component
};

/// Draw n rows from the model. Deterministic given the rng state.
SampleResult sample(const CcmModel& model, int n, Rng& rng);

// --- model file (JSON) ---
std::string model_to_json(const CcmModel& model);
CcmModel model_from_json(const std::string& text);
void save_model(const CcmModel& model, const std::string& path);
CcmModel load_model(const std::string& path);

}  // namespace ccm
