#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "xpv/harness.hpp"
#include "xpv/xverify.hpp"

namespace {

using nlohmann::json;

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return json::parse(in);
}

xpv::qcore::StateKind parse_state_kind(const std::string& name) {
    if (name == "pure_product") return xpv::qcore::StateKind::PureProduct;
    if (name == "pure_haar") return xpv::qcore::StateKind::PureHaarRandom;
    if (name == "mixed_random") return xpv::qcore::StateKind::MixedRandom;
    if (name == "neel") return xpv::qcore::StateKind::Neel;
    if (name == "maximally_mixed") return xpv::qcore::StateKind::MaximallyMixed;
    if (name == "dephased") return xpv::qcore::StateKind::DephasedMixture;
    throw std::runtime_error("unknown state kind " + name);
}

xpv::qcore::StateSpec parse_state_spec(const json& j) {
    xpv::qcore::StateSpec spec;
    spec.kind = parse_state_kind(j.at("kind").get<std::string>());
    spec.num_sites = j.at("n").get<int>();
    spec.local_dim = j.value("d", 2);
    spec.seed = j.value("seed", std::uint64_t{0});
    spec.traced_sites = j.value("traced_sites", 0);
    spec.lambda = j.value("lambda", 1.0);
    return spec;
}

/// Accepts either inline JSON or a path to a JSON file.
json spec_or_file(const std::string& arg) {
    if (!arg.empty() && (arg.front() == '{' || arg.front() == '[')) return json::parse(arg);
    return load_json_file(arg);
}

xpv::estimate::HammingKernel parse_kernel(const std::string& mode, int d, int n) {
    xpv::estimate::HammingKernel kernel;
    kernel.mode = mode == "global" ? xpv::estimate::KernelMode::Global
                                   : xpv::estimate::KernelMode::Local;
    kernel.d = d;
    kernel.n = n;
    return kernel;
}

xpv::estimate::Variant parse_variant(const std::string& name) {
    if (name == "plugin") return xpv::estimate::Variant::PlugIn;
    if (name == "ustat") return xpv::estimate::Variant::UStatistic;
    throw std::runtime_error("unknown estimator variant " + name);
}

xpv::harness::ExperimentPlan parse_experiment_plan(const json& j) {
    xpv::harness::ExperimentPlan plan;
    if (j.contains("state_1")) plan.state_1 = parse_state_spec(j.at("state_1"));
    if (j.contains("state_2")) plan.state_2 = parse_state_spec(j.at("state_2"));
    plan.n_a_grid = j.value("n_a_grid", plan.n_a_grid);
    plan.n_u_grid = j.value("n_u_grid", plan.n_u_grid);
    plan.n_m_grid = j.value("n_m_grid", plan.n_m_grid);
    plan.eta_sq_grid = j.value("eta_sq_grid", plan.eta_sq_grid);
    plan.p_d_grid = j.value("p_d_grid", plan.p_d_grid);
    plan.times = j.value("times", plan.times);
    plan.trials = j.value("trials", plan.trials);
    plan.epsilon = j.value("epsilon", plan.epsilon);
    plan.master_seed = j.value("master_seed", plan.master_seed);
    plan.theory_side_exact = j.value("theory_side_exact", plan.theory_side_exact);
    if (j.value("ensemble", "haar_cue") == "clifford_1q")
        plan.ensemble = xpv::randsrc::Ensemble::CliffordSingleQubit;
    plan.variant = parse_variant(j.value("variant", "ustat"));
    return plan;
}

xpv::dynamics::XYModel parse_model(const json& j) {
    xpv::dynamics::XYModel model;
    model.n_sites = j.at("n").get<int>();
    model.j0 = j.value("j0", model.j0);
    model.alpha = j.value("alpha", model.alpha);
    model.b_field = j.value("b", model.b_field);
    if (j.contains("disorder_bound")) {
        model.disorder = xpv::dynamics::sample_disorder(
            model.n_sites, j.at("disorder_bound").get<double>(),
            j.value("disorder_seed", std::uint64_t{0}));
    }
    return model;
}

xpv::noise::NoiseProfile parse_profile(const json& j, double eta, double p_d,
                                       std::uint64_t seed) {
    xpv::noise::NoiseProfile profile;
    profile.eta = j.value("eta", eta);
    profile.p_depol = j.value("p_depol", p_d);
    profile.seed = j.value("seed", seed);
    return profile;
}

xpv::randsrc::SchedulePlan parse_schedule_plan(const json& j) {
    xpv::randsrc::SchedulePlan plan;
    plan.mode = j.value("mode", "local") == "global" ? xpv::randsrc::ScheduleMode::Global
                                                     : xpv::randsrc::ScheduleMode::Local;
    plan.ensemble = j.value("ensemble", "haar_cue") == "clifford_1q"
                        ? xpv::randsrc::Ensemble::CliffordSingleQubit
                        : xpv::randsrc::Ensemble::HaarCUE;
    plan.n_u = j.at("n_u").get<int>();
    plan.n = j.at("n").get<int>();
    plan.d = j.value("d", 2);
    plan.master_seed = j.value("master_seed", std::uint64_t{0});
    return plan;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

int run_scaling(const std::string& study, const std::string& config_path,
                const std::string& out_dir) {
    const json config = load_json_file(config_path);
    xpv::harness::ExperimentPlan plan = parse_experiment_plan(config);
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);
    write_file(dir / "manifest.json", xpv::harness::plan_manifest(plan));

    if (study == "error_vs_nm" || study == "theory_experiment") {
        plan.study = xpv::harness::Study::ErrorVsNm;
        const std::vector<xpv::harness::ErrorRow> rows =
            study == "theory_experiment" ? xpv::harness::run_theory_experiment_mode(plan)
                                         : xpv::harness::run_error_vs_nm(plan);
        std::ofstream csv(dir / (study + ".csv"));
        xpv::harness::write_error_rows_csv(csv, rows);
        std::vector<double> x, y;
        for (const auto& row : rows) {
            if (row.n_m == 0) continue;
            x.push_back(static_cast<double>(row.n_m));
            y.push_back(row.mean_abs_error);
        }
        const xpv::harness::ScalingFit fit = xpv::harness::fit_power_law(x, y);
        std::cout << "study=" << study << " exponent=" << fit.exponent
                  << " r2=" << fit.r_squared << " points=" << fit.points << '\n';
    } else if (study == "budget_exponent") {
        plan.study = xpv::harness::Study::BudgetExponent;
        const xpv::harness::BudgetExponentResult result =
            xpv::harness::run_budget_exponent(plan, plan.state_1);
        std::ofstream csv(dir / "budget_exponent.csv");
        csv << "n_a,n_m_required,purity,capped\n";
        for (const auto& point : result.points)
            csv << point.n_a << ',' << point.n_m_required << ',' << point.purity << ','
                << point.capped << '\n';
        std::cout << "study=budget_exponent b=" << result.fit.exponent
                  << " r2=" << result.fit.r_squared << '\n';
    } else if (study == "noise") {
        plan.study = xpv::harness::Study::NoiseSweep;
        const std::vector<xpv::harness::NoiseRow> rows = xpv::harness::run_noise_sweep(plan);
        std::ofstream csv(dir / "noise.csv");
        xpv::harness::write_noise_rows_csv(csv, rows);
        std::cout << "study=noise rows=" << rows.size() << '\n';
    } else {
        std::cerr << "unknown study " << study
                  << " (expected error_vs_nm, theory_experiment, budget_exponent, noise)\n";
        return 2;
    }
    return 0;
}

int run_estimate(const std::string& ds1_path, const std::string& ds2_path,
                 const std::string& kernel_mode, const std::string& variant_name,
                 int n_resamples, std::uint64_t bootstrap_seed) {
    std::ifstream in1(ds1_path), in2(ds2_path);
    if (!in1) throw std::runtime_error("cannot open " + ds1_path);
    if (!in2) throw std::runtime_error("cannot open " + ds2_path);
    const xpv::measure::MeasurementDataset ds1 = xpv::measure::read_dataset(in1);
    const xpv::measure::MeasurementDataset ds2 = xpv::measure::read_dataset(in2);
    const xpv::estimate::HammingKernel kernel =
        parse_kernel(kernel_mode, ds1.local_dim, ds1.num_sites);
    const xpv::estimate::Variant variant = parse_variant(variant_name);
    const xpv::estimate::CorrelatorTables tables =
        xpv::estimate::fidelity_tables(ds1, ds2, kernel, variant);
    xpv::estimate::EstimateReport report =
        xpv::estimate::estimate_fidelities(ds1, ds2, kernel, variant);
    xpv::resample::BootstrapConfig cfg;
    cfg.n_resamples = n_resamples;
    cfg.seed = bootstrap_seed;
    report = xpv::resample::annotate_report(report, tables, cfg);
    std::cout << report.to_table();
    return 0;
}

int run_quench(const std::string& config_path, const std::string& out_path) {
    const json config = load_json_file(config_path);
    xpv::harness::QuenchPlan plan;
    plan.model = parse_model(config.at("model"));
    plan.t1 = config.value("t1", 0.0);
    plan.time_offsets = config.at("time_offsets").get<std::vector<double>>();
    plan.n_a_grid = config.at("n_a_grid").get<std::vector<int>>();
    plan.n_u = config.value("n_u", 200);
    if (config.contains("n_m")) plan.n_m = config.at("n_m").get<std::uint64_t>();
    plan.profile_1 = parse_profile(config.value("profile_1", json::object()), 0, 0, 11);
    plan.profile_2 = parse_profile(config.value("profile_2", json::object()), 0, 0, 12);
    plan.master_seed = config.value("master_seed", std::uint64_t{1});
    const std::vector<xpv::harness::QuenchRow> rows = xpv::harness::run_quench_fidelity(plan);
    std::ofstream csv(out_path);
    xpv::harness::write_quench_rows_csv(csv, rows);
    std::cout << "quench rows=" << rows.size() << " -> " << out_path << '\n';
    return 0;
}

int run_simulate(const std::string& state_arg, std::uint64_t schedule_seed, int n_u,
                 std::uint64_t n_m, std::uint64_t sampling_seed,
                 const std::string& platform_id, const std::string& out_path) {
    const xpv::qcore::StateSpec spec = parse_state_spec(spec_or_file(state_arg));
    xpv::randsrc::SchedulePlan plan;
    plan.ensemble = xpv::randsrc::Ensemble::HaarCUE;
    plan.n_u = n_u;
    plan.n = spec.num_sites;
    plan.d = spec.local_dim;
    plan.master_seed = schedule_seed;
    const xpv::randsrc::UnitarySchedule schedule = xpv::randsrc::sample_schedule(plan);
    const xpv::qcore::DensityMatrix rho = xpv::qcore::build_state(spec);
    const std::optional<std::uint64_t> shots =
        n_m == 0 ? std::nullopt : std::optional<std::uint64_t>(n_m);
    const xpv::measure::MeasurementDataset ds =
        xpv::measure::acquire_dataset(rho, schedule, shots, sampling_seed, platform_id);
    std::ofstream out(out_path);
    xpv::measure::write_dataset(out, ds);
    std::cout << "wrote " << ds.records.size() << " records (schedule_ref=" << ds.schedule_ref
              << ") -> " << out_path << '\n';
    return 0;
}

std::pair<std::string, int> split_address(const std::string& addr) {
    const auto pos = addr.rfind(':');
    if (pos == std::string::npos) throw std::runtime_error("address must be host:port");
    return {addr.substr(0, pos), std::stoi(addr.substr(pos + 1))};
}

int run_serve(const std::string& bind_addr, const std::string& config_path) {
    const json config = load_json_file(config_path);
    xpv::xverify::SessionConfig session;
    session.schedule_plan = parse_schedule_plan(config.at("schedule"));
    session.kernel = parse_kernel(config.value("kernel", "local"), session.schedule_plan.d,
                                  session.schedule_plan.n);
    session.variant = parse_variant(config.value("variant", "ustat"));
    session.bootstrap.n_resamples = config.value("bootstrap_resamples", 400);
    session.bootstrap.seed = config.value("bootstrap_seed", std::uint64_t{0});
    session.transcript_path = config.value("transcript", "");
    session.offer_matrices = config.value("offer_matrices", true);
    const auto [host, port] = split_address(bind_addr);
    xpv::xverify::Verifier verifier(session);
    const int bound = verifier.bind(host, port);
    std::cout << "listening on " << host << ':' << bound << '\n';
    const xpv::xverify::SessionState state = verifier.serve();
    if (!state.report) {
        std::cerr << "session failed before a report was produced\n";
        return 1;
    }
    std::cout << state.report->to_table();
    return 0;
}

int run_join(const std::string& connect_addr, const std::string& platform_id,
             const std::string& source_arg, std::uint64_t shots,
             std::uint64_t sampling_seed) {
    const auto [host, port] = split_address(connect_addr);
    xpv::xverify::ClientSource source;
    if (std::filesystem::exists(source_arg) && source_arg.front() != '{') {
        // NDJSON dataset files start with a header line, JSON specs with '{'.
        std::ifstream probe(source_arg);
        std::string first;
        std::getline(probe, first);
        const json header = json::parse(first);
        if (header.contains("schedule_ref")) {
            source.kind = xpv::xverify::ClientSourceKind::DatasetFile;
            source.dataset_path = source_arg;
        } else {
            source.state = parse_state_spec(header);
        }
    } else {
        source.state = parse_state_spec(spec_or_file(source_arg));
    }
    if (source.kind == xpv::xverify::ClientSourceKind::Simulator) {
        source.shots = shots == 0 ? std::nullopt : std::optional<std::uint64_t>(shots);
        source.sampling_seed = sampling_seed;
    }
    const xpv::estimate::EstimateReport report =
        xpv::xverify::client_run(host, port, platform_id, source);
    std::cout << report.to_table();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cross-platform fidelity estimation from randomized measurements"};
    app.require_subcommand(1);

    std::string study, config_path, out_dir = "out";
    CLI::App* scaling = app.add_subcommand("scaling", "Run a scaling study from a config file");
    scaling->add_option("--study", study, "error_vs_nm|theory_experiment|budget_exponent|noise")
        ->required();
    scaling->add_option("--config", config_path, "JSON config")->required();
    scaling->add_option("--out", out_dir, "output directory");

    std::string ds1_path, ds2_path, kernel_mode = "local", variant_name = "ustat";
    int n_resamples = 400;
    std::uint64_t bootstrap_seed = 0;
    CLI::App* estimate = app.add_subcommand("estimate", "Estimate fidelities from two datasets");
    estimate->add_option("--ds1", ds1_path)->required();
    estimate->add_option("--ds2", ds2_path)->required();
    estimate->add_option("--kernel", kernel_mode, "local|global");
    estimate->add_option("--variant", variant_name, "plugin|ustat");
    estimate->add_option("--bootstrap", n_resamples, "bootstrap resamples");
    estimate->add_option("--bootstrap-seed", bootstrap_seed);

    std::string quench_config, quench_out = "quench.csv";
    CLI::App* quench = app.add_subcommand("quench", "Quench-dynamics subsystem fidelities");
    quench->add_option("--config", quench_config, "JSON config")->required();
    quench->add_option("--out", quench_out, "output CSV");

    std::string state_arg, sim_out = "dataset.ndjson", sim_platform = "sim";
    std::uint64_t schedule_seed = 1, sim_nm = 0, sim_sampling_seed = 1;
    int sim_nu = 100;
    CLI::App* simulate = app.add_subcommand("simulate", "Acquire a simulated dataset");
    simulate->add_option("--state", state_arg, "state spec JSON (inline or file)")->required();
    simulate->add_option("--schedule-seed", schedule_seed)->required();
    simulate->add_option("--nu", sim_nu, "number of unitaries")->required();
    simulate->add_option("--nm", sim_nm, "shots per unitary (0 = exact probabilities)")
        ->required();
    simulate->add_option("--sampling-seed", sim_sampling_seed);
    simulate->add_option("--platform", sim_platform);
    simulate->add_option("--out", sim_out)->required();

    std::string bind_addr = "127.0.0.1:0", serve_config;
    CLI::App* serve = app.add_subcommand("serve", "Run a verification session as the verifier");
    serve->add_option("--bind", bind_addr, "host:port (port 0 = ephemeral)");
    serve->add_option("--config", serve_config, "JSON session config")->required();

    std::string connect_addr, join_platform, join_source;
    std::uint64_t join_shots = 0, join_sampling_seed = 1;
    CLI::App* join = app.add_subcommand("join", "Join a verification session as a platform");
    join->add_option("--connect", connect_addr, "host:port")->required();
    join->add_option("--platform", join_platform)->required();
    join->add_option("--source", join_source, "state spec JSON or dataset file")->required();
    join->add_option("--shots", join_shots, "shots per unitary (0 = exact)");
    join->add_option("--sampling-seed", join_sampling_seed);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*scaling) return run_scaling(study, config_path, out_dir);
        if (*estimate)
            return run_estimate(ds1_path, ds2_path, kernel_mode, variant_name, n_resamples,
                                bootstrap_seed);
        if (*quench) return run_quench(quench_config, quench_out);
        if (*simulate)
            return run_simulate(state_arg, schedule_seed, sim_nu, sim_nm, sim_sampling_seed,
                                sim_platform, sim_out);
        if (*serve) return run_serve(bind_addr, serve_config);
        if (*join)
            return run_join(connect_addr, join_platform, join_source, join_shots,
                            join_sampling_seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
