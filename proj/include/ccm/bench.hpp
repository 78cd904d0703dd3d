#pragma once

#include <span>
#include <string>
#include <vector>

#include "ccm/common.hpp"
#include "ccm/estim.hpp"
#include "ccm/model.hpp"
#include "ccm/select.hpp"

namespace ccm {

/// Two-component simulation scenario over d ternary variables (d even):
/// consecutive-pair blocks in both classes, rho = 0.6(1-u),
/// tau = (0.60, 0.20, 0.20), identity links in class 1 and cyclic links
/// (1->2, 2->3, 3->1) in class 2. The class-2 independence parameters are
/// pulled from the class-1 ones toward fixed targets as u grows; u in [0, 1)
/// controls the class overlap.
CcmModel scenario_model(int d, double u);

enum class KlMode { exact, monte_carlo };

/// Kullback-Leibler divergence KL(truth || est) between the two mixture
/// distributions, minimized over class permutations of `est`. Exact mode
/// enumerates the full product space (cell count <= 1e6); Monte-Carlo mode
/// averages log-density ratios over n_mc draws from `truth`. Returns +inf
/// if `est` puts zero mass on a truth-support cell.
double kl_divergence(const CcmModel& truth, const CcmModel& est, KlMode mode = KlMode::exact,
                     long n_mc = 0, Rng* rng = nullptr);

/// Misclassification rate of the optimal (true-posterior) classifier,
/// estimated on n_mc draws from the model.
double bayes_error_mc(const CcmModel& model, long n_mc, Rng& rng);

/// Bisection on u so that the scenario's Bayes error hits
/// `target_error` within 0.005. Common random numbers across evaluations.
double calibrate_u(double target_error, int d, long mc_size, Rng& rng);

struct RecoveryRow {
  int n_vars = 0;
  int n_modalities = 0;
  bool smart_init = false;
  int replicate = 0;
  int iterations = 0;  // censored at the cap when the level was never reached
};

/// Single-class delta-recovery experiment: samples of size 200 from a
/// rho = 0.5 block, Metropolis-Hastings run until the fitted likelihood
/// reaches the level of the true parameters. Both the sequential (pair
/// likelihood) initialization and a uniform-random one are timed.
std::vector<RecoveryRow> run_delta_recovery(std::span<const int> modalities,
                                            std::span<const int> n_vars, int replicates,
                                            Rng& rng, int s_cap = 1000);

struct KlStudyConfig {
  double target_error = 0.10;
  long calib_mc = 200000;
  int chains = 4;
  int threads = 1;
  StoppingRules rules{};
};

struct KlCell {
  int d = 0;
  int n = 0;
  double mean = 0.0;
  double sd = 0.0;
  int replicates = 0;
};

struct KlRow {
  int d = 0;
  int n = 0;
  int replicate = 0;
  uint64_t seed = 0;
  double kl = 0.0;
};

struct KlReport {
  std::vector<KlCell> cells;
  std::vector<KlRow> rows;
  std::vector<std::pair<int, double>> calibrated_u;  // per d
  uint64_t seed = 0;
};

/// Consistency study: per (d, n), data are generated from the calibrated
/// scenario, the block structure is searched at fixed g = 2, and the exact
/// KL divergence to the generating model is aggregated.
KlReport run_kl_study(std::span<const int> d_list, std::span<const int> n_list, int replicates,
                      const KlStudyConfig& cfg, Rng& rng);

void write_recovery_csv(const std::vector<RecoveryRow>& rows, const std::string& path);
void write_kl_report_csv(const KlReport& report, const std::string& path);
void write_kl_report_json(const KlReport& report, const std::string& path);

}  // namespace ccm
