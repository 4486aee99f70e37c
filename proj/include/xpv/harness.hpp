#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "xpv/dynamics.hpp"
#include "xpv/estimate.hpp"
#include "xpv/noise.hpp"
#include "xpv/resample.hpp"

namespace xpv::harness {

enum class Study { ErrorVsNm, BudgetExponent, NoiseSweep, QuenchFidelity, GlobalVsLocal };

struct ExperimentPlan {
    Study study = Study::ErrorVsNm;
    qcore::StateSpec state_1;
    qcore::StateSpec state_2;
    std::vector<int> n_a_grid;
    std::vector<int> n_u_grid;
    std::vector<std::uint64_t> n_m_grid;  // 0 = exact-probability sentinel
    std::vector<double> eta_sq_grid;
    std::vector<double> p_d_grid;
    std::vector<double> times;
    int trials = 50;
    double epsilon = 0.05;
    std::uint64_t master_seed = 1;
    randsrc::Ensemble ensemble = randsrc::Ensemble::HaarCUE;
    bool theory_side_exact = false;  // one platform keeps exact probabilities
    estimate::Variant variant = estimate::Variant::UStatistic;
};

struct ErrorRow {
    int n_a = 0;
    int n_u = 0;
    std::uint64_t n_m = 0;
    double mean_abs_error = 0;
    double se_of_mean = 0;
    double oracle_fidelity = 1.0;
    int trials = 0;
};

/// Mean over trials of |F_max_hat - F_oracle| on a unit-fidelity pair;
/// exact-mode records when n_m == 0.
std::vector<ErrorRow> run_error_vs_nm(const ExperimentPlan& plan);

struct ScalingFit {
    double exponent = 0;
    double prefactor = 0;
    double stderr_exponent = 0;
    double r_squared = 0;
    int points = 0;
};

/// Least-squares fit of log(y) = log(prefactor) + exponent * log(x).
ScalingFit fit_power_law(const std::vector<double>& x, const std::vector<double>& y);
/// Fit of the budget law N_M ~ prefactor * 2^(b N_A) / p2, where p2 is the
/// state purity at each N_A (a known offset, not part of the exponent).
/// The exponent comes from regressing log2(N_M * p2) on N_A; the prefactor is
/// the raw-N_M level at that slope.  For pure families (p2 = 1) this is the
/// plain log2(N_M) fit.
ScalingFit fit_budget_exponent(const std::vector<int>& n_a, const std::vector<double>& n_m,
                               const std::vector<double>& purity);

struct BudgetPoint {
    int n_a = 0;
    std::uint64_t n_m_required = 0;
    double purity = 1.0;
    bool capped = false;
};

struct BudgetExponentResult {
    std::vector<BudgetPoint> points;
    ScalingFit fit;
};

/// For each N_A, bisect to the smallest N_M whose mean error over
/// plan.trials runs is <= epsilon (fixed N_U), then fit b.
BudgetExponentResult run_budget_exponent(const ExperimentPlan& plan,
                                         const qcore::StateSpec& family_template);

/// Same sweeps with one side exact (theory-experiment mode).
std::vector<ErrorRow> run_theory_experiment_mode(const ExperimentPlan& plan);

struct NoiseRow {
    double eta_sq = 0;
    double p_d = 0;
    double mean_f_max = 0;
    double mean_f_gm = 0;
    double se_f_max = 0;
    double se_f_gm = 0;
    double predicted_delta_f_max = 0;
    double predicted_delta_f_gm = 0;
    int trials = 0;
};

std::vector<NoiseRow> run_noise_sweep(const ExperimentPlan& plan);

struct QuenchRow {
    double t = 0;  // seconds; t - t1 for two-time rows
    int n_a = 0;
    double f_max_hat = 0;
    double se = 0;
    double f_max_oracle = 0;
};

struct QuenchPlan {
    dynamics::XYModel model;
    double t1 = 0.0;
    std::vector<double> time_offsets;  // t - t1 values
    std::vector<int> n_a_grid;
    int n_u = 200;
    std::optional<std::uint64_t> n_m;  // nullopt = exact
    noise::NoiseProfile profile_1;
    noise::NoiseProfile profile_2;
    std::uint64_t master_seed = 1;
};

/// Theory-vs-theory analog of the quench studies: both platforms simulate
/// rho(t1) vs rho(t1 + dt) and subsystem fidelities are estimated for
/// connected partitions [0 -> N_A).
std::vector<QuenchRow> run_quench_fidelity(const QuenchPlan& plan);

void write_error_rows_csv(std::ostream& out, const std::vector<ErrorRow>& rows);
void write_noise_rows_csv(std::ostream& out, const std::vector<NoiseRow>& rows);
void write_quench_rows_csv(std::ostream& out, const std::vector<QuenchRow>& rows);

/// Run-manifest JSON: seeds and parameters for bit-exact reruns.
std::string plan_manifest(const ExperimentPlan& plan);

/// One simulated estimation trial on a state pair: acquire both datasets
/// (n_m == 0 -> exact) and return the fidelity point. The building block of
/// every study above.
estimate::FidelityPoint simulate_trial(const qcore::StateSpec& spec_1,
                                       const qcore::StateSpec& spec_2, int n_a, int n_u,
                                       std::uint64_t n_m, std::uint64_t trial_seed,
                                       randsrc::Ensemble ensemble,
                                       estimate::Variant variant, bool theory_side_exact);

}  // namespace xpv::harness
