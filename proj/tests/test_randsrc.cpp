#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "xpv/randsrc.hpp"

using namespace xpv;

namespace {

bool equal_up_to_phase(const randsrc::Mat& a, const randsrc::Mat& b) {
    // Align on the largest entry of a, then compare.
    Eigen::Index r = 0, c = 0;
    a.cwiseAbs().maxCoeff(&r, &c);
    if (std::abs(b(r, c)) < 1e-9) return false;
    const std::complex<double> phase = a(r, c) / b(r, c);
    return (a - phase * b).cwiseAbs().maxCoeff() < 1e-9;
}

}  // namespace

TEST_CASE("seed derivation is deterministic and argument sensitive") {
    CHECK(randsrc::derive_seed(1, 2, 3) == randsrc::derive_seed(1, 2, 3));
    std::set<std::uint64_t> seen;
    for (std::uint64_t m = 0; m < 4; ++m)
        for (std::uint64_t u = 0; u < 4; ++u)
            for (std::uint64_t k = 0; k < 4; ++k) seen.insert(randsrc::derive_seed(m, u, k));
    CHECK(seen.size() == 64);  // no collisions on a small grid
}

TEST_CASE("CUE samples are unitary") {
    randsrc::RngStream rng = randsrc::make_stream(9, 0, 0);
    for (int d : {2, 3, 4}) {
        for (int i = 0; i < 100; ++i) {
            const randsrc::Mat u = randsrc::sample_cue(d, rng);
            CHECK((u.adjoint() * u - randsrc::Mat::Identity(d, d)).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
}

TEST_CASE("CUE first and second moments match the Haar values") {
    randsrc::RngStream rng = randsrc::make_stream(10, 0, 0);
    const int samples = 100000;
    for (int d : {2, 3}) {
        double m1 = 0, m2 = 0;
        for (int i = 0; i < samples; ++i) {
            const double a = std::norm(randsrc::sample_cue(d, rng)(0, 0));
            m1 += a;
            m2 += a * a;
        }
        m1 /= samples;
        m2 /= samples;
        // |U_00|^2 is Beta(1, d-1): mean 1/d, and E|U_00|^4 = 2/(d(d+1)).
        CHECK(std::abs(m1 - 1.0 / d) < 5.0 / std::sqrt(double(samples)));
        CHECK(std::abs(m2 - 2.0 / (d * (d + 1.0))) < 5.0 / std::sqrt(double(samples)));
    }
}

TEST_CASE("single-qubit Clifford group has order 24, contains identity, closes") {
    const std::vector<randsrc::Mat>& group = randsrc::enumerate_clifford_1q();
    REQUIRE(group.size() == 24);

    bool has_identity = false;
    for (const randsrc::Mat& g : group)
        if (equal_up_to_phase(g, randsrc::Mat::Identity(2, 2))) has_identity = true;
    CHECK(has_identity);

    // Pairwise distinct up to phase.
    for (std::size_t i = 0; i < group.size(); ++i)
        for (std::size_t j = i + 1; j < group.size(); ++j)
            CHECK_FALSE(equal_up_to_phase(group[i], group[j]));

    // Closure: every product lands back in the set (up to phase).
    for (const randsrc::Mat& a : group) {
        for (const randsrc::Mat& b : group) {
            const randsrc::Mat p = a * b;
            bool found = false;
            for (const randsrc::Mat& g : group)
                if (equal_up_to_phase(p, g)) found = true;
            CHECK(found);
        }
    }
}

TEST_CASE("Clifford average of conjugated swap is the swap operator") {
    const std::vector<randsrc::Mat>& group = randsrc::enumerate_clifford_1q();
    randsrc::Mat swap = randsrc::Mat::Zero(4, 4);
    swap(0, 0) = swap(3, 3) = swap(1, 2) = swap(2, 1) = 1.0;
    randsrc::Mat avg = randsrc::Mat::Zero(4, 4);
    for (const randsrc::Mat& u : group) {
        randsrc::Mat uu = randsrc::Mat::Zero(4, 4);
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                for (int c = 0; c < 2; ++c)
                    for (int e = 0; e < 2; ++e) uu(2 * a + b, 2 * c + e) = u(a, c) * u(b, e);
        avg += uu.adjoint() * swap * uu;
    }
    avg /= double(group.size());
    CHECK((avg - swap).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("Clifford group reproduces Haar first and second moments exactly") {
    const std::vector<randsrc::Mat>& group = randsrc::enumerate_clifford_1q();
    double m1 = 0, m2 = 0;
    for (const randsrc::Mat& u : group) {
        const double a = std::norm(u(0, 0));
        m1 += a;
        m2 += a * a;
    }
    m1 /= group.size();
    m2 /= group.size();
    CHECK(m1 == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(m2 == doctest::Approx(1.0 / 3).epsilon(1e-12));
}

TEST_CASE("GUE second moments follow the delta-function normalization") {
    randsrc::RngStream rng = randsrc::make_stream(11, 0, 0);
    const int samples = 100000;
    double m_0110 = 0, m_0101 = 0, m_diag = 0;
    for (int i = 0; i < samples; ++i) {
        const randsrc::Mat h = randsrc::sample_gue(2, rng);
        CHECK((h - h.adjoint()).cwiseAbs().maxCoeff() < 1e-14);
        m_0110 += (h(0, 1) * h(1, 0)).real();
        m_0101 += (h(0, 1) * h(0, 1)).real();
        m_diag += (h(0, 0) * h(0, 0)).real();
    }
    m_0110 /= samples;
    m_0101 /= samples;
    m_diag /= samples;
    const double sigma = 3.0 / std::sqrt(double(samples));
    CHECK(std::abs(m_0110 - 1.0) < 3 * sigma);  // E[h_ab h_cd] = d_ad d_bc
    CHECK(std::abs(m_0101 - 0.0) < 3 * sigma);
    CHECK(std::abs(m_diag - 1.0) < 3 * sigma);
}

TEST_CASE("schedules are bit-identical given the same plan") {
    randsrc::SchedulePlan plan;
    plan.n_u = 10;
    plan.n = 3;
    plan.master_seed = 123;
    const randsrc::UnitarySchedule a = randsrc::sample_schedule(plan);
    const randsrc::UnitarySchedule b = randsrc::sample_schedule(plan);
    REQUIRE(a.locals.size() == 10);
    for (int u = 0; u < 10; ++u)
        for (int k = 0; k < 3; ++k)
            CHECK((a.locals[u].factors[k] - b.locals[u].factors[k]).cwiseAbs().maxCoeff() == 0.0);
    CHECK(randsrc::schedule_ref(a) == randsrc::schedule_ref(b));
}

TEST_CASE("schedule entries are independent across unitary index") {
    randsrc::SchedulePlan plan;
    plan.n_u = 2000;
    plan.n = 1;
    plan.master_seed = 7;
    const randsrc::UnitarySchedule s = randsrc::sample_schedule(plan);
    double corr = 0, mean = 0, var = 0;
    for (int u = 0; u + 1 < plan.n_u; ++u) {
        const double x = s.locals[u].factors[0](0, 0).real();
        const double y = s.locals[u + 1].factors[0](0, 0).real();
        corr += x * y;
        mean += x;
        var += x * x;
    }
    const int pairs = plan.n_u - 1;
    corr /= pairs;
    mean /= pairs;
    var = var / pairs - mean * mean;
    CHECK(std::abs(corr - mean * mean) < 5 * var / std::sqrt(double(pairs)) + 0.05);
}

TEST_CASE("global mode produces full-dimension unitaries") {
    randsrc::SchedulePlan plan;
    plan.mode = randsrc::ScheduleMode::Global;
    plan.n_u = 3;
    plan.n = 2;
    plan.master_seed = 5;
    const randsrc::UnitarySchedule s = randsrc::sample_schedule(plan);
    REQUIRE(s.globals.size() == 3);
    for (const randsrc::Mat& u : s.globals) {
        CHECK(u.rows() == 4);
        CHECK((u.adjoint() * u - randsrc::Mat::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("tensor product ordering puts site 0 in the most significant slot") {
    randsrc::LocalUnitary u;
    randsrc::Mat x = randsrc::Mat::Zero(2, 2);
    x(0, 1) = x(1, 0) = 1.0;  // bit flip on site 0
    u.factors = {x, randsrc::Mat::Identity(2, 2)};
    const randsrc::Mat full = u.full_matrix();
    // |00> (index 0) must map to |10> (index 2).
    CHECK(std::abs(full(2, 0) - std::complex<double>(1.0)) < 1e-14);
}

TEST_CASE("restricting a schedule keeps the requested factors") {
    randsrc::SchedulePlan plan;
    plan.n_u = 4;
    plan.n = 4;
    plan.master_seed = 99;
    const randsrc::UnitarySchedule s = randsrc::sample_schedule(plan);
    const randsrc::UnitarySchedule r = s.restricted({1, 3});
    CHECK(r.n == 2);
    for (int u = 0; u < 4; ++u) {
        CHECK((r.locals[u].factors[0] - s.locals[u].factors[1]).cwiseAbs().maxCoeff() == 0.0);
        CHECK((r.locals[u].factors[1] - s.locals[u].factors[3]).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK(randsrc::schedule_ref(r) != randsrc::schedule_ref(s));
}

TEST_CASE("schedule JSON round trip preserves the content hash") {
    randsrc::SchedulePlan plan;
    plan.n_u = 5;
    plan.n = 2;
    plan.master_seed = 31;
    const randsrc::UnitarySchedule s = randsrc::sample_schedule(plan);
    const randsrc::UnitarySchedule back = randsrc::schedule_from_json(randsrc::schedule_to_json(s));
    CHECK(randsrc::schedule_ref(back) == randsrc::schedule_ref(s));

    randsrc::SchedulePlan other = plan;
    other.master_seed = 32;
    CHECK(randsrc::schedule_ref(randsrc::sample_schedule(other)) != randsrc::schedule_ref(s));
}

TEST_CASE("Clifford-ensemble schedules draw only group elements") {
    randsrc::SchedulePlan plan;
    plan.ensemble = randsrc::Ensemble::CliffordSingleQubit;
    plan.n_u = 20;
    plan.n = 2;
    plan.master_seed = 17;
    const randsrc::UnitarySchedule s = randsrc::sample_schedule(plan);
    const std::vector<randsrc::Mat>& group = randsrc::enumerate_clifford_1q();
    for (const randsrc::LocalUnitary& u : s.locals) {
        for (const randsrc::Mat& f : u.factors) {
            bool found = false;
            for (const randsrc::Mat& g : group)
                if (equal_up_to_phase(f, g)) found = true;
            CHECK(found);
        }
    }
}
