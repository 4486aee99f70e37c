#include <doctest.h>

#include <cmath>
#include <sstream>

#include "xpv/measure.hpp"

using namespace xpv;

namespace {

qcore::PureState haar_pure(int n, std::uint64_t seed) {
    qcore::StateSpec spec;
    spec.kind = qcore::StateKind::PureHaarRandom;
    spec.num_sites = n;
    spec.seed = seed;
    return qcore::build_pure_state(spec);
}

randsrc::UnitarySchedule small_schedule(int n_u, int n, std::uint64_t seed) {
    randsrc::SchedulePlan plan;
    plan.n_u = n_u;
    plan.n = n;
    plan.master_seed = seed;
    return randsrc::sample_schedule(plan);
}

// Brute-force oracle: probs[s] = <s| U rho U^dag |s> with the dense product
// unitary, computed entry by entry.
Eigen::VectorXd born_oracle(const qcore::DensityMatrix& rho, const randsrc::Mat& full_u) {
    const Eigen::Index dim = rho.dim();
    Eigen::VectorXd probs(dim);
    for (Eigen::Index s = 0; s < dim; ++s) {
        std::complex<double> acc = 0;
        for (Eigen::Index a = 0; a < dim; ++a)
            for (Eigen::Index b = 0; b < dim; ++b)
                acc += full_u(s, a) * rho.matrix(a, b) * std::conj(full_u(s, b));
        probs(s) = acc.real();
    }
    return probs;
}

}  // namespace

TEST_CASE("identity rotation of the Neel state is one-hot") {
    qcore::StateSpec spec;
    spec.kind = qcore::StateKind::Neel;
    spec.num_sites = 4;
    const qcore::DensityMatrix rho = qcore::build_state(spec);
    randsrc::LocalUnitary id;
    id.factors.assign(4, randsrc::Mat::Identity(2, 2));
    const measure::OutcomeDistribution dist = measure::born_probabilities(rho, id);
    for (int s = 0; s < 16; ++s) CHECK(dist.probs(s) == doctest::Approx(s == 5 ? 1.0 : 0.0));
}

TEST_CASE("maximally mixed state measures uniformly under any unitary") {
    qcore::StateSpec spec;
    spec.kind = qcore::StateKind::MaximallyMixed;
    spec.num_sites = 3;
    const qcore::DensityMatrix rho = qcore::build_state(spec);
    const randsrc::UnitarySchedule schedule = small_schedule(5, 3, 4);
    for (const randsrc::LocalUnitary& u : schedule.locals) {
        const measure::OutcomeDistribution dist = measure::born_probabilities(rho, u);
        for (int s = 0; s < 8; ++s) CHECK(dist.probs(s) == doctest::Approx(0.125).epsilon(1e-12));
    }
}

TEST_CASE("Hadamard on |0> gives a fair coin") {
    qcore::DensityMatrix rho;
    rho.num_sites = 1;
    rho.matrix = qcore::Mat::Zero(2, 2);
    rho.matrix(0, 0) = 1.0;
    randsrc::LocalUnitary h;
    randsrc::Mat had(2, 2);
    had << 1, 1, 1, -1;
    had /= std::sqrt(2.0);
    h.factors = {had};
    const measure::OutcomeDistribution dist = measure::born_probabilities(rho, h);
    CHECK(dist.probs(0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(dist.probs(1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("all four born-probability paths agree with the dense oracle") {
    const qcore::PureState psi = haar_pure(3, 8);
    const qcore::DensityMatrix rho = qcore::to_density(psi);
    const randsrc::UnitarySchedule schedule = small_schedule(3, 3, 9);
    for (const randsrc::LocalUnitary& u : schedule.locals) {
        const Eigen::VectorXd oracle = born_oracle(rho, u.full_matrix());
        const Eigen::VectorXd a = measure::born_probabilities(rho, u).probs;
        const Eigen::VectorXd b = measure::born_probabilities(psi, u).probs;
        const Eigen::VectorXd c = measure::born_probabilities(rho, u.full_matrix()).probs;
        const Eigen::VectorXd d = measure::born_probabilities(psi, u.full_matrix()).probs;
        CHECK((a - oracle).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((b - oracle).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((c - oracle).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((d - oracle).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(std::abs(oracle.sum() - 1.0) < 1e-10);
        CHECK(oracle.minCoeff() > -1e-12);
    }
}

TEST_CASE("product states factorize sitewise under local rotations") {
    qcore::StateSpec spec;
    spec.kind = qcore::StateKind::PureProduct;
    spec.num_sites = 3;
    spec.seed = 5;
    const qcore::PureState psi = qcore::build_pure_state(spec);
    const randsrc::UnitarySchedule schedule = small_schedule(2, 3, 6);
    for (const randsrc::LocalUnitary& u : schedule.locals) {
        const Eigen::VectorXd joint = measure::born_probabilities(psi, u).probs;
        // Single-site marginals.
        Eigen::MatrixXd marg = Eigen::MatrixXd::Zero(3, 2);
        for (int s = 0; s < 8; ++s)
            for (int k = 0; k < 3; ++k) marg(k, (s >> (2 - k)) & 1) += joint(s);
        for (int s = 0; s < 8; ++s) {
            double prod = 1;
            for (int k = 0; k < 3; ++k) prod *= marg(k, (s >> (2 - k)) & 1);
            CHECK(joint(s) == doctest::Approx(prod).epsilon(1e-10));
        }
    }
}

TEST_CASE("sampling respects one-hot distributions and shot counts") {
    measure::OutcomeDistribution dist;
    dist.num_sites = 2;
    dist.probs = Eigen::VectorXd::Zero(4);
    dist.probs(2) = 1.0;
    randsrc::RngStream rng = randsrc::make_stream(3, 0, 0);
    const measure::OutcomeRecord rec = measure::sample_counts(dist, 50, rng);
    CHECK(rec.shots == 50);
    REQUIRE(rec.counts.size() == 1);
    CHECK(rec.counts.at(2) == 50);

    const measure::OutcomeRecord one = measure::sample_counts(dist, 1, rng);
    CHECK(one.counts.size() == 1);
    CHECK(one.counts.begin()->second == 1);
}

TEST_CASE("uniform sampling stays within binomial error bars") {
    measure::OutcomeDistribution dist;
    dist.num_sites = 2;
    dist.probs = Eigen::VectorXd::Constant(4, 0.25);
    randsrc::RngStream rng = randsrc::make_stream(4, 0, 0);
    const std::uint64_t shots = 100000;
    const measure::OutcomeRecord rec = measure::sample_counts(dist, shots, rng);
    const double sigma = std::sqrt(shots * 0.25 * 0.75);
    std::uint64_t total = 0;
    for (const auto& [s, c] : rec.counts) {
        CHECK(std::abs(double(c) - shots * 0.25) < 5 * sigma);
        total += c;
    }
    CHECK(total == shots);
}

TEST_CASE("empirical frequencies converge to the exact probabilities") {
    const qcore::PureState psi = haar_pure(3, 12);
    const randsrc::UnitarySchedule schedule = small_schedule(1, 3, 13);
    const measure::OutcomeDistribution dist =
        measure::born_probabilities(psi, schedule.locals[0]);
    randsrc::RngStream rng = randsrc::make_stream(5, 0, 0);
    auto kl = [&](std::uint64_t shots) {
        const measure::OutcomeRecord rec = measure::sample_counts(dist, shots, rng);
        double acc = 0;
        for (const auto& [s, c] : rec.counts) {
            const double f = double(c) / double(shots);
            acc += f * std::log(f / dist.probs(Eigen::Index(s)));
        }
        return acc;
    };
    CHECK(kl(10000) < kl(100));
}

TEST_CASE("exact datasets reproduce born probabilities bit-exactly and are platform independent") {
    const qcore::PureState psi = haar_pure(3, 20);
    const qcore::DensityMatrix rho = qcore::to_density(psi);
    const randsrc::UnitarySchedule schedule = small_schedule(4, 3, 21);
    const measure::MeasurementDataset a =
        measure::acquire_dataset(rho, schedule, std::nullopt, 1, "alpha");
    const measure::MeasurementDataset b =
        measure::acquire_dataset(rho, schedule, std::nullopt, 99, "beta");
    REQUIRE(a.records.size() == 4);
    CHECK(a.exact);
    for (int u = 0; u < 4; ++u) {
        const Eigen::VectorXd direct =
            measure::born_probabilities(rho, schedule.locals[u]).probs;
        CHECK((a.records[u].probs - direct).cwiseAbs().maxCoeff() == 0.0);
        CHECK((a.records[u].probs - b.records[u].probs).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK(a.schedule_ref == b.schedule_ref);
}

TEST_CASE("sampled acquisition is deterministic in the sampling seed") {
    const qcore::PureState psi = haar_pure(2, 30);
    const qcore::DensityMatrix rho = qcore::to_density(psi);
    const randsrc::UnitarySchedule schedule = small_schedule(3, 2, 31);
    const measure::MeasurementDataset a = measure::acquire_dataset(rho, schedule, 40, 7, "p");
    const measure::MeasurementDataset b = measure::acquire_dataset(rho, schedule, 40, 7, "p");
    const measure::MeasurementDataset c = measure::acquire_dataset(rho, schedule, 40, 8, "p");
    bool any_diff = false;
    for (int u = 0; u < 3; ++u) {
        CHECK(a.records[u].counts == b.records[u].counts);
        if (a.records[u].counts != c.records[u].counts) any_diff = true;
    }
    CHECK(any_diff);
}

TEST_CASE("dataset NDJSON round trip is bit exact") {
    const qcore::PureState psi = haar_pure(2, 44);
    const qcore::DensityMatrix rho = qcore::to_density(psi);
    const randsrc::UnitarySchedule schedule = small_schedule(3, 2, 45);
    for (const bool exact : {false, true}) {
        const measure::MeasurementDataset ds = measure::acquire_dataset(
            rho, schedule, exact ? std::nullopt : std::optional<std::uint64_t>(25), 2, "rt");
        std::stringstream buf;
        measure::write_dataset(buf, ds);
        const measure::MeasurementDataset back = measure::read_dataset(buf);
        CHECK(back.platform_id == ds.platform_id);
        CHECK(back.schedule_ref == ds.schedule_ref);
        CHECK(back.num_sites == ds.num_sites);
        CHECK(back.exact == ds.exact);
        REQUIRE(back.records.size() == ds.records.size());
        for (std::size_t u = 0; u < ds.records.size(); ++u) {
            CHECK(back.records[u].unitary_index == ds.records[u].unitary_index);
            CHECK(back.records[u].shots == ds.records[u].shots);
            CHECK(back.records[u].counts == ds.records[u].counts);
            if (exact)
                CHECK((back.records[u].probs - ds.records[u].probs).cwiseAbs().maxCoeff() == 0.0);
        }
    }
}

TEST_CASE("marginalizing a dataset matches measuring the reduced state") {
    const qcore::PureState psi = haar_pure(4, 60);
    const qcore::DensityMatrix rho = qcore::to_density(psi);
    const randsrc::UnitarySchedule schedule = small_schedule(3, 4, 61);
    const std::vector<int> keep = {0, 2};

    // Exact mode: marginal probabilities == born probabilities of the
    // partial-traced state under the restricted schedule.
    const measure::MeasurementDataset full =
        measure::acquire_dataset(rho, schedule, std::nullopt, 1, "m");
    const measure::MeasurementDataset marg = measure::marginalize_dataset(full, keep);
    const qcore::DensityMatrix reduced = qcore::partial_trace(rho, keep);
    const randsrc::UnitarySchedule restricted = schedule.restricted(keep);
    for (int u = 0; u < 3; ++u) {
        const Eigen::VectorXd direct =
            measure::born_probabilities(reduced, restricted.locals[u]).probs;
        CHECK((marg.records[u].probs - direct).cwiseAbs().maxCoeff() < 1e-12);
    }
    CHECK(marg.num_sites == 2);
    CHECK(marg.schedule_ref != full.schedule_ref);

    // Counts mode: string-level marginalization oracle.
    const measure::MeasurementDataset sampled =
        measure::acquire_dataset(rho, schedule, 100, 3, "m");
    const measure::MeasurementDataset sampled_marg =
        measure::marginalize_dataset(sampled, keep);
    for (int u = 0; u < 3; ++u) {
        std::map<std::uint64_t, std::uint64_t> oracle;
        for (const auto& [s, c] : sampled.records[u].counts) {
            const std::uint64_t s0 = (s >> 3) & 1;  // site 0 of 4
            const std::uint64_t s2 = (s >> 1) & 1;  // site 2 of 4
            oracle[s0 * 2 + s2] += c;
        }
        CHECK(sampled_marg.records[u].counts == oracle);
        CHECK(sampled_marg.records[u].shots == sampled.records[u].shots);
    }
}
