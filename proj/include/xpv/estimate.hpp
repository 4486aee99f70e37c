#pragma once

#include <string>
#include <vector>

#include "xpv/measure.hpp"

namespace xpv::estimate {

enum class KernelMode { Local, Global };
enum class Variant { PlugIn, UStatistic };

/// Pair weight: Local  d^N * (-d)^(-D[s,s'])  with D the site-wise Hamming
/// distance; Global  D_A * (-D_A)^(-D_G) with D_G in {0, 1}.
struct HammingKernel {
    KernelMode mode = KernelMode::Local;
    int d = 2;
    int n = 1;
};

/// Second-order correlator for one unitary. Cross terms pair two independent
/// datasets; auto terms (same physical record) use the chosen variant:
/// PlugIn multiplies empirical frequencies, UStatistic removes the O(1/N_M)
/// self-correlation bias via n_s(n_s - 1) on the diagonal.
double pair_correlator(const measure::OutcomeRecord& rec_i,
                       const measure::OutcomeRecord& rec_j,
                       const HammingKernel& kernel, Variant variant,
                       bool same_dataset);

/// Per-unitary correlators for a dataset pair (same_dataset selects the auto
/// path). This is the resampling substrate: every downstream statistic is a
/// function of these tables.
std::vector<double> correlator_table(const measure::MeasurementDataset& ds_i,
                                     const measure::MeasurementDataset& ds_j,
                                     const HammingKernel& kernel, Variant variant);

/// Mean of pair_correlator over the shared unitaries. ds_i == ds_j (same
/// platform data) yields the purity estimate.
double estimate_overlap(const measure::MeasurementDataset& ds_i,
                        const measure::MeasurementDataset& ds_j,
                        const HammingKernel& kernel, Variant variant);

struct EstimateReport {
    double overlap_12 = 0;
    double purity_1 = 0;
    double purity_2 = 0;
    double f_max = 0;
    double f_gm = 0;
    double se_f_max = 0;
    double se_f_gm = 0;
    double bias_f_max = 0;
    double bias_f_gm = 0;
    int n_u = 0;
    std::uint64_t n_m1 = 0;
    std::uint64_t n_m2 = 0;
    Variant estimator_variant = Variant::UStatistic;
    bool unreliable = false;  // nonpositive purity estimate at finite N_M

    std::string to_json() const;
    static EstimateReport from_json(const std::string& text);
    std::string to_table() const;
};

/// Point estimates only; SE/bias fields are filled by resample hooks.
EstimateReport estimate_fidelities(const measure::MeasurementDataset& ds_1,
                                   const measure::MeasurementDataset& ds_2,
                                   const HammingKernel& kernel, Variant variant);

struct GlobalCorrelationEstimate {
    double f_gm_pearson = 0;
    double f_max_maxnorm = 0;
};

/// Pearson / max-normalized correlation of {P_U^(1)(s), P_U^(2)(s)} across
/// unitaries for a fixed reference basis string. Global-mode exact datasets
/// only; agrees with kernel-based fidelities up to O(1/D_A).
GlobalCorrelationEstimate global_correlation_form(const measure::MeasurementDataset& ds_1,
                                                  const measure::MeasurementDataset& ds_2,
                                                  std::uint64_t reference_string = 0);

/// Intermediates needed to rebuild fidelities under resampling.
struct CorrelatorTables {
    std::vector<double> cross;
    std::vector<double> auto_1;
    std::vector<double> auto_2;
    // True when the two datasets are statistically exchangeable (both exact
    // or both sampled), which permits pooling the purity estimates in the
    // F_max denominator when they are indistinguishable. max{p,p} = p, so
    // the pooled mean is the lower-variance estimator of the max on the
    // diagonal; it also cancels the shot noise shared with the cross term.
    bool pool_allowed = false;
};

CorrelatorTables fidelity_tables(const measure::MeasurementDataset& ds_1,
                                 const measure::MeasurementDataset& ds_2,
                                 const HammingKernel& kernel, Variant variant);

struct FidelityPoint {
    double overlap_12 = 0;
    double purity_1 = 0;
    double purity_2 = 0;
    double f_max = 0;
    double f_gm = 0;
    bool unreliable = false;
};

/// Fidelities from table means over an index subset (empty = all indices,
/// in order). Summation is in index order for bit-stable results.
FidelityPoint fidelities_from_tables(const CorrelatorTables& tables,
                                     const std::vector<int>& indices = {});

}  // namespace xpv::estimate
