#include "xpv/harness.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace xpv::harness {

namespace {

// A state prepared once per grid point; the pure-state measurement path is
// an order of magnitude cheaper, use it whenever the family allows.
struct PreparedState {
    std::optional<qcore::PureState> pure;
    qcore::DensityMatrix rho;
};

PreparedState prepare(const qcore::StateSpec& spec) {
    PreparedState state;
    switch (spec.kind) {
        case qcore::StateKind::Neel:
        case qcore::StateKind::PureProduct:
        case qcore::StateKind::PureHaarRandom:
            state.pure = qcore::build_pure_state(spec);
            state.rho = qcore::to_density(*state.pure);
            break;
        default:
            state.rho = qcore::build_state(spec);
            break;
    }
    return state;
}

measure::MeasurementDataset acquire(const PreparedState& state,
                                    const randsrc::UnitarySchedule& schedule,
                                    std::optional<std::uint64_t> shots, std::uint64_t seed,
                                    const std::string& platform_id) {
    if (state.pure)
        return measure::acquire_dataset(*state.pure, schedule, shots, seed, platform_id);
    return measure::acquire_dataset(state.rho, schedule, shots, seed, platform_id);
}

estimate::FidelityPoint run_trial(const PreparedState& s1, const PreparedState& s2, int n_a,
                                  int d, int n_u, std::uint64_t n_m, std::uint64_t trial_seed,
                                  randsrc::Ensemble ensemble, estimate::Variant variant,
                                  bool theory_side_exact) {
    randsrc::SchedulePlan plan;
    plan.mode = randsrc::ScheduleMode::Local;
    plan.ensemble = ensemble;
    plan.n_u = n_u;
    plan.n = n_a;
    plan.d = d;
    plan.master_seed = randsrc::derive_seed(trial_seed, 1, 0);
    const randsrc::UnitarySchedule schedule = randsrc::sample_schedule(plan);

    const std::optional<std::uint64_t> shots =
        n_m == 0 ? std::nullopt : std::optional<std::uint64_t>(n_m);
    const auto ds_1 = acquire(s1, schedule,
                              theory_side_exact ? std::nullopt : shots,
                              randsrc::derive_seed(trial_seed, 2, 0), "platform1");
    const auto ds_2 =
        acquire(s2, schedule, shots, randsrc::derive_seed(trial_seed, 3, 0), "platform2");
    const estimate::HammingKernel kernel{estimate::KernelMode::Local, d, n_a};
    return estimate::fidelities_from_tables(
        estimate::fidelity_tables(ds_1, ds_2, kernel, variant));
}

double sd_of_mean(const std::vector<double>& values) {
    if (values.size() < 2) return 0;
    const double mean =
        std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    double ss = 0;
    for (const double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / (static_cast<double>(values.size()) *
                           static_cast<double>(values.size() - 1)));
}

}  // namespace

estimate::FidelityPoint simulate_trial(const qcore::StateSpec& spec_1,
                                       const qcore::StateSpec& spec_2, int n_a, int n_u,
                                       std::uint64_t n_m, std::uint64_t trial_seed,
                                       randsrc::Ensemble ensemble, estimate::Variant variant,
                                       bool theory_side_exact) {
    qcore::StateSpec s1 = spec_1;
    qcore::StateSpec s2 = spec_2;
    s1.num_sites = n_a;
    s2.num_sites = n_a;
    return run_trial(prepare(s1), prepare(s2), n_a, s1.local_dim, n_u, n_m, trial_seed, ensemble,
                     variant, theory_side_exact);
}

namespace {

std::vector<ErrorRow> error_sweep(const ExperimentPlan& plan, bool theory_side_exact) {
    std::vector<int> n_a_grid = plan.n_a_grid;
    if (n_a_grid.empty()) n_a_grid.push_back(plan.state_1.num_sites);
    std::vector<ErrorRow> rows;
    for (const int n_a : n_a_grid) {
        qcore::StateSpec s1 = plan.state_1;
        qcore::StateSpec s2 = plan.state_2;
        s1.num_sites = n_a;
        s2.num_sites = n_a;
        const PreparedState state_1 = prepare(s1);
        const PreparedState state_2 = prepare(s2);
        const double oracle = qcore::fidelity_max(state_1.rho, state_2.rho);
        for (const int n_u : plan.n_u_grid)
            for (const std::uint64_t n_m : plan.n_m_grid) {
                std::vector<double> errors;
                errors.reserve(static_cast<std::size_t>(plan.trials));
                for (int trial = 0; trial < plan.trials; ++trial) {
                    const std::uint64_t trial_seed = randsrc::derive_seed(
                        plan.master_seed,
                        (static_cast<std::uint64_t>(n_a) << 40) ^
                            (static_cast<std::uint64_t>(n_u) << 20) ^ n_m,
                        static_cast<std::uint64_t>(trial));
                    const estimate::FidelityPoint point =
                        run_trial(state_1, state_2, n_a, s1.local_dim, n_u, n_m, trial_seed,
                                  plan.ensemble, plan.variant, theory_side_exact);
                    if (point.unreliable) continue;  // counted via trials - errors.size()
                    errors.push_back(std::abs(point.f_max - oracle));
                }
                ErrorRow row;
                row.n_a = n_a;
                row.n_u = n_u;
                row.n_m = n_m;
                row.trials = static_cast<int>(errors.size());
                row.oracle_fidelity = oracle;
                row.mean_abs_error = errors.empty() ? 0
                                                    : std::accumulate(errors.begin(), errors.end(),
                                                                      0.0) /
                                                          static_cast<double>(errors.size());
                row.se_of_mean = sd_of_mean(errors);
                rows.push_back(row);
            }
    }
    return rows;
}

}  // namespace

std::vector<ErrorRow> run_error_vs_nm(const ExperimentPlan& plan) {
    return error_sweep(plan, plan.theory_side_exact);
}

std::vector<ErrorRow> run_theory_experiment_mode(const ExperimentPlan& plan) {
    return error_sweep(plan, true);
}

ScalingFit fit_power_law(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 4)
        throw ProtocolError("power-law fit needs at least 4 points");
    const auto n = static_cast<double>(x.size());
    std::vector<double> lx(x.size()), ly(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
    }
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    ScalingFit fit;
    fit.points = static_cast<int>(x.size());
    fit.exponent = sxy / sxx;
    fit.prefactor = std::exp(my - fit.exponent * mx);
    double ss_res = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double pred = my + fit.exponent * (lx[i] - mx);
        ss_res += (ly[i] - pred) * (ly[i] - pred);
    }
    fit.r_squared = syy > 0 ? 1.0 - ss_res / syy : 1.0;
    fit.stderr_exponent =
        x.size() > 2 ? std::sqrt(ss_res / (n - 2.0) / sxx) : 0.0;
    return fit;
}

ScalingFit fit_budget_exponent(const std::vector<int>& n_a, const std::vector<double>& n_m,
                               const std::vector<double>& purity) {
    // Budget law N_M ~ C * 2^(b N_A) / p2.  The 1/p2 purity factor is a known
    // offset of the model, so the exponent is the slope of log2(N_M * p2)
    // against N_A; the prefactor is the raw-N_M level at that slope.
    if (n_a.size() != n_m.size() || n_a.size() != purity.size() || n_a.size() < 4)
        throw ProtocolError("budget exponent fit needs at least 4 points");
    const auto n = static_cast<double>(n_a.size());
    std::vector<double> x(n_a.size()), z(n_a.size()), raw(n_a.size());
    for (std::size_t i = 0; i < n_a.size(); ++i) {
        x[i] = static_cast<double>(n_a[i]);
        raw[i] = std::log2(n_m[i]);
        z[i] = std::log2(n_m[i] * purity[i]);
    }
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double mz = std::accumulate(z.begin(), z.end(), 0.0) / n;
    const double mraw = std::accumulate(raw.begin(), raw.end(), 0.0) / n;
    double sxx = 0, sxz = 0, szz = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxz += (x[i] - mx) * (z[i] - mz);
        szz += (z[i] - mz) * (z[i] - mz);
    }
    ScalingFit fit;
    fit.points = static_cast<int>(x.size());
    fit.exponent = sxz / sxx;
    fit.prefactor = std::exp2(mraw - fit.exponent * mx);
    double ss_res = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double pred = mz + fit.exponent * (x[i] - mx);
        ss_res += (z[i] - pred) * (z[i] - pred);
    }
    fit.r_squared = szz > 0 ? 1.0 - ss_res / szz : 1.0;
    fit.stderr_exponent = std::sqrt(ss_res / (n - 2.0) / sxx);
    return fit;
}

BudgetExponentResult run_budget_exponent(const ExperimentPlan& plan,
                                         const qcore::StateSpec& family_template) {
    if (plan.n_a_grid.size() < 4) throw ProtocolError("budget exponent needs >= 4 N_A points");
    const int n_u = plan.n_u_grid.empty() ? 100 : plan.n_u_grid.front();
    constexpr std::uint64_t kNmCap = 1 << 14;

    BudgetExponentResult result;
    for (const int n_a : plan.n_a_grid) {
        qcore::StateSpec spec = family_template;
        spec.num_sites = n_a;
        const PreparedState state = prepare(spec);
        const double oracle = 1.0;  // identical platforms

        auto mean_error = [&](std::uint64_t n_m) {
            double sum = 0;
            int used = 0;
            for (int trial = 0; trial < plan.trials; ++trial) {
                // Same trial seeds across candidate N_M values: common random
                // numbers keep the bisection from flapping on noise.
                const std::uint64_t trial_seed =
                    randsrc::derive_seed(plan.master_seed, static_cast<std::uint64_t>(n_a),
                                         static_cast<std::uint64_t>(trial));
                const estimate::FidelityPoint point =
                    run_trial(state, state, n_a, spec.local_dim, n_u, n_m, trial_seed,
                              plan.ensemble, plan.variant, plan.theory_side_exact);
                if (point.unreliable) {
                    sum += 1.0;  // an unusable estimate counts as a full miss
                    ++used;
                    continue;
                }
                sum += std::abs(point.f_max - oracle);
                ++used;
            }
            return used > 0 ? sum / used : 1.0;
        };

        BudgetPoint point;
        point.n_a = n_a;
        point.purity = qcore::purity(state.rho);
        std::uint64_t lo = 2, hi = 4;
        while (hi <= kNmCap && mean_error(hi) > plan.epsilon) {
            lo = hi;
            hi *= 2;
        }
        if (hi > kNmCap) {
            point.n_m_required = kNmCap;
            point.capped = true;
        } else {
            while (hi - lo > 1) {
                const std::uint64_t mid = (lo + hi) / 2;
                if (mean_error(mid) <= plan.epsilon)
                    hi = mid;
                else
                    lo = mid;
            }
            point.n_m_required = hi;
        }
        result.points.push_back(point);
    }

    std::vector<int> n_a;
    std::vector<double> n_m, purity;
    for (const BudgetPoint& p : result.points)
        if (!p.capped) {
            n_a.push_back(p.n_a);
            n_m.push_back(static_cast<double>(p.n_m_required));
            purity.push_back(p.purity);
        }
    result.fit = fit_budget_exponent(n_a, n_m, purity);
    return result;
}

std::vector<NoiseRow> run_noise_sweep(const ExperimentPlan& plan) {
    qcore::StateSpec spec = plan.state_1;
    const PreparedState state = prepare(spec);
    const int n_a = spec.num_sites;
    const int n_u = plan.n_u_grid.empty() ? 500 : plan.n_u_grid.front();
    const std::uint64_t n_m = plan.n_m_grid.empty() ? 0 : plan.n_m_grid.front();
    const estimate::HammingKernel kernel{estimate::KernelMode::Local, spec.local_dim, n_a};

    randsrc::SchedulePlan sched_plan;
    sched_plan.ensemble = plan.ensemble;
    sched_plan.n_u = n_u;
    sched_plan.n = n_a;
    sched_plan.d = spec.local_dim;

    std::vector<NoiseRow> rows;
    auto sweep_point = [&](double eta_sq, double p_d) {
        std::vector<double> f_max_vals, f_gm_vals;
        noise::NoiseProfile clean;
        noise::NoiseProfile noisy;
        noisy.eta = std::sqrt(eta_sq);
        noisy.p_depol = p_d;
        for (int trial = 0; trial < plan.trials; ++trial) {
            sched_plan.master_seed =
                randsrc::derive_seed(plan.master_seed, 0xe7a, static_cast<std::uint64_t>(trial));
            noisy.seed = randsrc::derive_seed(plan.master_seed, 0x6e, trial);
            const randsrc::UnitarySchedule schedule = randsrc::sample_schedule(sched_plan);
            const auto [ds_1, ds_2] = noise::simulate_imperfect_protocol(
                state.rho, state.rho, schedule, clean, noisy,
                n_m == 0 ? std::nullopt : std::optional<std::uint64_t>(n_m),
                randsrc::derive_seed(plan.master_seed, 0x73, trial));
            const estimate::FidelityPoint point = estimate::fidelities_from_tables(
                estimate::fidelity_tables(ds_1, ds_2, kernel, plan.variant));
            if (point.unreliable) continue;
            f_max_vals.push_back(point.f_max);
            f_gm_vals.push_back(point.f_gm);
        }
        const noise::FidelityShift shift =
            noise::predict_fidelity_shift(state.rho, state.rho, clean, noisy);
        NoiseRow row;
        row.eta_sq = eta_sq;
        row.p_d = p_d;
        row.trials = static_cast<int>(f_max_vals.size());
        row.mean_f_max = f_max_vals.empty()
                             ? 0
                             : std::accumulate(f_max_vals.begin(), f_max_vals.end(), 0.0) /
                                   static_cast<double>(f_max_vals.size());
        row.mean_f_gm = f_gm_vals.empty()
                            ? 0
                            : std::accumulate(f_gm_vals.begin(), f_gm_vals.end(), 0.0) /
                                  static_cast<double>(f_gm_vals.size());
        row.se_f_max = sd_of_mean(f_max_vals);
        row.se_f_gm = sd_of_mean(f_gm_vals);
        row.predicted_delta_f_max = shift.delta_f_max;
        row.predicted_delta_f_gm = shift.delta_f_gm;
        rows.push_back(row);
    };

    for (const double eta_sq : plan.eta_sq_grid) sweep_point(eta_sq, 0.0);
    for (const double p_d : plan.p_d_grid) sweep_point(0.0, p_d);
    return rows;
}

std::vector<QuenchRow> run_quench_fidelity(const QuenchPlan& plan) {
    const int n = plan.model.n_sites;
    std::vector<double> times;
    times.push_back(plan.t1);
    for (const double dt : plan.time_offsets) times.push_back(plan.t1 + dt);
    const dynamics::QuenchResult quench = dynamics::quench_series(plan.model, times);
    const qcore::DensityMatrix rho_ref = qcore::to_density(quench.states.front());

    randsrc::SchedulePlan sched_plan;
    sched_plan.n_u = plan.n_u;
    sched_plan.n = n;
    sched_plan.d = 2;
    sched_plan.master_seed = plan.master_seed;
    const randsrc::UnitarySchedule schedule = randsrc::sample_schedule(sched_plan);

    const bool noisy = plan.profile_1.eta > 0 || plan.profile_1.p_depol > 0 ||
                       plan.profile_2.eta > 0 || plan.profile_2.p_depol > 0;

    std::vector<QuenchRow> rows;
    for (std::size_t ti = 1; ti < times.size(); ++ti) {
        const qcore::DensityMatrix rho_t = qcore::to_density(quench.states[ti]);
        measure::MeasurementDataset ds_1, ds_2;
        if (noisy) {
            auto pair = noise::simulate_imperfect_protocol(
                rho_ref, rho_t, schedule, plan.profile_1, plan.profile_2, plan.n_m,
                randsrc::derive_seed(plan.master_seed, 0x71, ti));
            ds_1 = std::move(pair.first);
            ds_2 = std::move(pair.second);
        } else {
            ds_1 = measure::acquire_dataset(quench.states.front(), schedule, plan.n_m,
                                            randsrc::derive_seed(plan.master_seed, 0x71, ti),
                                            "platform1");
            ds_2 = measure::acquire_dataset(quench.states[ti], schedule, plan.n_m,
                                            randsrc::derive_seed(plan.master_seed, 0x72, ti),
                                            "platform2");
        }
        for (const int n_a : plan.n_a_grid) {
            std::vector<int> keep(static_cast<std::size_t>(n_a));
            std::iota(keep.begin(), keep.end(), 0);
            const auto m_1 = measure::marginalize_dataset(ds_1, keep);
            const auto m_2 = measure::marginalize_dataset(ds_2, keep);
            const estimate::HammingKernel kernel{estimate::KernelMode::Local, 2, n_a};
            const estimate::CorrelatorTables tables =
                estimate::fidelity_tables(m_1, m_2, kernel, estimate::Variant::UStatistic);
            const estimate::FidelityPoint point = estimate::fidelities_from_tables(tables);
            resample::BootstrapConfig cfg;
            cfg.seed = randsrc::derive_seed(plan.master_seed, 0xb0075, ti * 100 + n_a);
            const resample::BootstrapErrors errors = resample::bootstrap_se(tables, cfg);
            QuenchRow row;
            row.t = times[ti] - plan.t1;
            row.n_a = n_a;
            row.f_max_hat = point.f_max;
            row.se = errors.se_f_max;
            row.f_max_oracle =
                qcore::fidelity_max(qcore::partial_trace(rho_ref, keep),
                                    qcore::partial_trace(rho_t, keep));
            rows.push_back(row);
        }
    }
    return rows;
}

void write_error_rows_csv(std::ostream& out, const std::vector<ErrorRow>& rows) {
    out << "n_a,n_u,n_m,mean_abs_error,se_of_mean,oracle_fidelity,trials\n";
    for (const ErrorRow& r : rows)
        out << r.n_a << ',' << r.n_u << ',' << r.n_m << ',' << r.mean_abs_error << ','
            << r.se_of_mean << ',' << r.oracle_fidelity << ',' << r.trials << '\n';
}

void write_noise_rows_csv(std::ostream& out, const std::vector<NoiseRow>& rows) {
    out << "eta_sq,p_d,mean_f_max,mean_f_gm,se_f_max,se_f_gm,predicted_delta_f_max,"
           "predicted_delta_f_gm,trials\n";
    for (const NoiseRow& r : rows)
        out << r.eta_sq << ',' << r.p_d << ',' << r.mean_f_max << ',' << r.mean_f_gm << ','
            << r.se_f_max << ',' << r.se_f_gm << ',' << r.predicted_delta_f_max << ','
            << r.predicted_delta_f_gm << ',' << r.trials << '\n';
}

void write_quench_rows_csv(std::ostream& out, const std::vector<QuenchRow>& rows) {
    out << "dt,n_a,f_max_hat,se,f_max_oracle\n";
    for (const QuenchRow& r : rows)
        out << r.t << ',' << r.n_a << ',' << r.f_max_hat << ',' << r.se << ',' << r.f_max_oracle
            << '\n';
}

std::string plan_manifest(const ExperimentPlan& plan) {
    nlohmann::json j;
    const char* names[] = {"error_vs_nm", "budget_exponent", "noise_sweep", "quench_fidelity",
                           "global_vs_local"};
    j["study"] = names[static_cast<int>(plan.study)];
    j["n_a_grid"] = plan.n_a_grid;
    j["n_u_grid"] = plan.n_u_grid;
    j["n_m_grid"] = plan.n_m_grid;
    j["eta_sq_grid"] = plan.eta_sq_grid;
    j["p_d_grid"] = plan.p_d_grid;
    j["times"] = plan.times;
    j["trials"] = plan.trials;
    j["epsilon"] = plan.epsilon;
    j["master_seed"] = plan.master_seed;
    j["ensemble"] = plan.ensemble == randsrc::Ensemble::HaarCUE ? "haar_cue" : "clifford_1q";
    j["theory_side_exact"] = plan.theory_side_exact;
    j["variant"] = plan.variant == estimate::Variant::PlugIn ? "plugin" : "ustat";
    j["state_seed_1"] = plan.state_1.seed;
    j["state_seed_2"] = plan.state_2.seed;
    return j.dump(2);
}

}  // namespace xpv::harness
