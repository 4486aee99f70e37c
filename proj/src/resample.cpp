#include "xpv/resample.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

namespace xpv::resample {

namespace {

struct ResampledStats {
    std::vector<double> f_max;
    std::vector<double> f_gm;
    std::vector<double> overlap;
    std::vector<double> purity_1;
    std::vector<double> purity_2;
};

ResampledStats run_resamples(const estimate::CorrelatorTables& tables,
                             const BootstrapConfig& cfg) {
    if (cfg.n_resamples < 50) throw ProtocolError("need at least 50 bootstrap resamples");
    const int n_u = static_cast<int>(tables.cross.size());
    if (n_u < 2) throw ProtocolError("bootstrap needs N_U >= 2");
    randsrc::RngStream rng(cfg.seed);
    std::uniform_int_distribution<int> pick(0, n_u - 1);
    ResampledStats stats;
    std::vector<int> indices(static_cast<std::size_t>(n_u));
    for (int b = 0; b < cfg.n_resamples; ++b) {
        for (int& idx : indices) idx = pick(rng);
        const estimate::FidelityPoint point = estimate::fidelities_from_tables(tables, indices);
        stats.overlap.push_back(point.overlap_12);
        stats.purity_1.push_back(point.purity_1);
        stats.purity_2.push_back(point.purity_2);
        if (!point.unreliable) {
            stats.f_max.push_back(point.f_max);
            stats.f_gm.push_back(point.f_gm);
        }
    }
    return stats;
}

double sd(const std::vector<double>& values) {
    if (values.size() < 2) return 0;
    const double mean =
        std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    double ss = 0;
    for (const double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

double mean_of(const std::vector<double>& values) {
    return values.empty() ? 0
                          : std::accumulate(values.begin(), values.end(), 0.0) /
                                static_cast<double>(values.size());
}

}  // namespace

BootstrapErrors bootstrap_se(const estimate::CorrelatorTables& tables,
                             const BootstrapConfig& cfg) {
    const ResampledStats stats = run_resamples(tables, cfg);
    BootstrapErrors errors;
    errors.se_f_max = sd(stats.f_max);
    errors.se_f_gm = sd(stats.f_gm);
    errors.se_overlap = sd(stats.overlap);
    errors.se_purity_1 = sd(stats.purity_1);
    errors.se_purity_2 = sd(stats.purity_2);
    return errors;
}

BootstrapErrors bootstrap_se(const measure::MeasurementDataset& ds_1,
                             const measure::MeasurementDataset& ds_2,
                             const estimate::HammingKernel& kernel, estimate::Variant variant,
                             const BootstrapConfig& cfg) {
    return bootstrap_se(estimate::fidelity_tables(ds_1, ds_2, kernel, variant), cfg);
}

BiasEstimate bias_correct(const estimate::CorrelatorTables& tables, const BootstrapConfig& cfg) {
    const estimate::FidelityPoint point = estimate::fidelities_from_tables(tables);
    const ResampledStats stats = run_resamples(tables, cfg);
    BiasEstimate bias;
    bias.bias_f_max = mean_of(stats.f_max) - point.f_max;
    bias.bias_f_gm = mean_of(stats.f_gm) - point.f_gm;
    return bias;
}

namespace {

measure::OutcomeRecord resample_record(const measure::OutcomeRecord& rec,
                                       randsrc::RngStream& rng) {
    if (rec.exact || rec.counts.empty()) return rec;
    std::vector<std::uint64_t> keys;
    std::vector<double> weights;
    keys.reserve(rec.counts.size());
    weights.reserve(rec.counts.size());
    for (const auto& [key, count] : rec.counts) {
        keys.push_back(key);
        weights.push_back(static_cast<double>(count));
    }
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    measure::OutcomeRecord out;
    out.unitary_index = rec.unitary_index;
    out.shots = rec.shots;
    for (std::uint64_t shot = 0; shot < rec.shots; ++shot) ++out.counts[keys[pick(rng)]];
    return out;
}

}  // namespace

BiasEstimate bias_correct(const measure::MeasurementDataset& ds_1,
                          const measure::MeasurementDataset& ds_2,
                          const estimate::HammingKernel& kernel, estimate::Variant variant,
                          const BootstrapConfig& cfg) {
    if (cfg.n_resamples < 50) throw ProtocolError("need at least 50 bootstrap resamples");
    const estimate::CorrelatorTables point_tables =
        estimate::fidelity_tables(ds_1, ds_2, kernel, variant);
    const estimate::FidelityPoint point = estimate::fidelities_from_tables(point_tables);
    const int n_u = static_cast<int>(point_tables.cross.size());
    if (n_u < 2) throw ProtocolError("bootstrap needs N_U >= 2");

    randsrc::RngStream rng(cfg.seed);
    std::uniform_int_distribution<int> pick(0, n_u - 1);
    std::vector<double> f_max, f_gm;
    for (int b = 0; b < cfg.n_resamples; ++b) {
        estimate::CorrelatorTables tables;
        tables.pool_allowed = point_tables.pool_allowed;
        for (int k = 0; k < n_u; ++k) {
            const std::size_t u = static_cast<std::size_t>(pick(rng));
            const measure::OutcomeRecord rec_1 = resample_record(ds_1.records[u], rng);
            const measure::OutcomeRecord rec_2 = resample_record(ds_2.records[u], rng);
            tables.cross.push_back(estimate::pair_correlator(rec_1, rec_2, kernel,
                                                             estimate::Variant::PlugIn, false));
            tables.auto_1.push_back(estimate::pair_correlator(rec_1, rec_1, kernel, variant, true));
            tables.auto_2.push_back(estimate::pair_correlator(rec_2, rec_2, kernel, variant, true));
        }
        const estimate::FidelityPoint resampled = estimate::fidelities_from_tables(tables);
        if (!resampled.unreliable) {
            f_max.push_back(resampled.f_max);
            f_gm.push_back(resampled.f_gm);
        }
    }
    BiasEstimate bias;
    bias.bias_f_max = mean_of(f_max) - point.f_max;
    bias.bias_f_gm = mean_of(f_gm) - point.f_gm;
    return bias;
}

estimate::EstimateReport annotate_report(estimate::EstimateReport report,
                                         const estimate::CorrelatorTables& tables,
                                         const BootstrapConfig& cfg) {
    const BootstrapErrors errors = bootstrap_se(tables, cfg);
    const BiasEstimate bias = bias_correct(tables, cfg);
    report.se_f_max = errors.se_f_max;
    report.se_f_gm = errors.se_f_gm;
    report.bias_f_max = bias.bias_f_max;
    report.bias_f_gm = bias.bias_f_gm;
    // Reported fidelities are the first-order bias-corrected values.
    report.f_max -= bias.bias_f_max;
    report.f_gm -= bias.bias_f_gm;
    return report;
}

namespace {

double se_for(const DatasetPair& pair, const estimate::HammingKernel& kernel,
              estimate::Variant variant, const BootstrapConfig& cfg) {
    return bootstrap_se(pair.ds_1, pair.ds_2, kernel, variant, cfg).se_f_max;
}

}  // namespace

BudgetState allocate_budget(const AcquireFn& acquire, const estimate::HammingKernel& kernel,
                            estimate::Variant variant, BudgetState start,
                            const BootstrapConfig& cfg, long long budget_cap) {
    BudgetState state = std::move(start);
    if (state.n_u < 2 || state.n_m < 2) throw ProtocolError("budget needs N_U, N_M >= 2");

    DatasetPair pair = acquire(state.n_u, state.n_m);
    double se = se_for(pair, kernel, variant, cfg);
    state.history.push_back({state.n_u, state.n_m, se, ""});

    while (true) {
        if (se <= state.target_se) {
            state.history.back().decision = "done";
            state.converged = true;
            return state;
        }
        if (static_cast<long long>(state.n_u) * state.n_m >= budget_cap) {
            state.history.back().decision = "cap";
            state.converged = false;
            return state;
        }
        const int n = state.step;
        const int reduced_u = std::max(2, state.n_u - n);
        const int reduced_m = std::max(2, state.n_m - n);
        const double se_minus_u = se_for(acquire(reduced_u, state.n_m), kernel, variant, cfg);
        const double se_minus_m = se_for(acquire(state.n_u, reduced_m), kernel, variant, cfg);
        // Grow the direction whose removal hurt most; ties grow N_M.
        if (se_minus_u > se_minus_m) {
            state.history.back().decision = "grow_nu";
            state.n_u += n;
        } else {
            state.history.back().decision = "grow_nm";
            state.n_m += n;
        }
        pair = acquire(state.n_u, state.n_m);
        se = se_for(pair, kernel, variant, cfg);
        state.history.push_back({state.n_u, state.n_m, se, ""});
    }
}

void write_budget_history_csv(std::ostream& out, const BudgetState& state) {
    out << "step,n_u,n_m,se,decision\n";
    for (std::size_t i = 0; i < state.history.size(); ++i) {
        const BudgetStep& step = state.history[i];
        out << i << ',' << step.n_u << ',' << step.n_m << ',' << step.se << ',' << step.decision
            << '\n';
    }
}

}  // namespace xpv::resample
