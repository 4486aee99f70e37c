#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "xpv/estimate.hpp"

namespace xpv::resample {

struct BootstrapConfig {
    int n_resamples = 400;  // paper band 250-500
    std::uint64_t seed = 0;
};

struct BootstrapErrors {
    double se_f_max = 0;
    double se_f_gm = 0;
    double se_overlap = 0;
    double se_purity_1 = 0;
    double se_purity_2 = 0;
};

struct BiasEstimate {
    double bias_f_max = 0;
    double bias_f_gm = 0;
};

/// Resample unitary indices with replacement (size N_U), re-estimate, and
/// take the standard deviation of the resampled statistics. Deterministic
/// given cfg.seed.
BootstrapErrors bootstrap_se(const estimate::CorrelatorTables& tables,
                             const BootstrapConfig& cfg);
BootstrapErrors bootstrap_se(const measure::MeasurementDataset& ds_1,
                             const measure::MeasurementDataset& ds_2,
                             const estimate::HammingKernel& kernel,
                             estimate::Variant variant, const BootstrapConfig& cfg);

/// Bias = (mean of resampled fidelities) - (point estimate); the corrected
/// value is point - bias (first order in 1/N_U).
BiasEstimate bias_correct(const estimate::CorrelatorTables& tables,
                          const BootstrapConfig& cfg);
/// Dataset overload: hierarchical bootstrap. Unitaries are resampled with
/// replacement and the counts of each drawn unitary are re-sampled from
/// their empirical frequencies, so shot-level estimator bias (e.g. the
/// plug-in purity inflation) is captured, not just unitary-sampling bias.
BiasEstimate bias_correct(const measure::MeasurementDataset& ds_1,
                          const measure::MeasurementDataset& ds_2,
                          const estimate::HammingKernel& kernel,
                          estimate::Variant variant, const BootstrapConfig& cfg);

/// One call fills the SE/bias fields of a report and applies the correction.
estimate::EstimateReport annotate_report(estimate::EstimateReport report,
                                         const estimate::CorrelatorTables& tables,
                                         const BootstrapConfig& cfg);

struct BudgetStep {
    int n_u = 0;
    int n_m = 0;
    double se = 0;
    std::string decision;  // "grow_nm", "grow_nu", "done", "cap"
};

struct BudgetState {
    int n_u = 0;
    int n_m = 0;
    int step = 10;  // n: block of unitaries or shots moved per iteration
    double target_se = 0.05;
    std::vector<BudgetStep> history;
    bool converged = false;
};

struct DatasetPair {
    measure::MeasurementDataset ds_1;
    measure::MeasurementDataset ds_2;
};

/// Produces a dataset pair at the requested allocation; the budget loop
/// calls it both to shrink (jackknife comparison) and to grow.
using AcquireFn = std::function<DatasetPair(int n_u, int n_m)>;

/// Iterative allocation: compare the SE of the full data against data minus
/// n unitaries and data minus n shots per unitary; grow the direction whose
/// removal hurt most (ties grow N_M). Stops at target_se or budget_cap total
/// runs (N_U * N_M).
BudgetState allocate_budget(const AcquireFn& acquire,
                            const estimate::HammingKernel& kernel,
                            estimate::Variant variant, BudgetState start,
                            const BootstrapConfig& cfg,
                            long long budget_cap = 1'000'000);

void write_budget_history_csv(std::ostream& out, const BudgetState& state);

}  // namespace xpv::resample
