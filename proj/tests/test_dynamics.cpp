#include <doctest.h>

#include <cmath>

#include "xpv/dynamics.hpp"

using namespace xpv;

namespace {

qcore::PureState neel(int n) {
    qcore::StateSpec spec;
    spec.kind = qcore::StateKind::Neel;
    spec.num_sites = n;
    return qcore::build_pure_state(spec);
}

double magnetization(const qcore::PureState& psi) {
    double m = 0;
    const int n = psi.num_sites;
    for (Eigen::Index s = 0; s < psi.dim(); ++s) {
        int up = 0;
        for (int k = 0; k < n; ++k) up += ((s >> k) & 1) ? -1 : 1;  // sz = +1 for digit 0
        m += up * std::norm(psi.amplitudes(s));
    }
    return m;
}

double energy(const Eigen::MatrixXcd& h, const qcore::PureState& psi) {
    return (psi.amplitudes.adjoint() * h * psi.amplitudes)(0, 0).real();
}

}  // namespace

TEST_CASE("two-site Hamiltonian couples |01> and |10> with the bare amplitude") {
    dynamics::XYModel model;
    model.n_sites = 2;
    model.j0 = 1.0;
    model.alpha = 3.0;
    const Eigen::MatrixXcd h = dynamics::build_hamiltonian(model);
    CHECK(std::abs(h(1, 2) - std::complex<double>(1.0)) < 1e-14);
    CHECK(std::abs(h(2, 1) - std::complex<double>(1.0)) < 1e-14);
    CHECK(std::abs(h(0, 3)) < 1e-14);
    CHECK((h - h.adjoint()).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("couplings follow the power law") {
    dynamics::XYModel model;
    model.n_sites = 4;
    model.j0 = 2.0;
    model.alpha = 1.5;
    const Eigen::MatrixXd j = model.couplings();
    CHECK(j(0, 1) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(j(0, 2) == doctest::Approx(2.0 / std::pow(2.0, 1.5)).epsilon(1e-12));
    CHECK(j(0, 3) == doctest::Approx(2.0 / std::pow(3.0, 1.5)).epsilon(1e-12));
    CHECK((j - j.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(j.diagonal().cwiseAbs().maxCoeff() == 0.0);

    // Large alpha suppresses beyond-nearest-neighbor couplings.
    model.alpha = 40.0;
    const Eigen::MatrixXd steep = model.couplings();
    CHECK(steep(0, 2) / steep(0, 1) == doctest::Approx(std::pow(2.0, -40.0)).epsilon(1e-10));
}

TEST_CASE("Hamiltonian commutes with total magnetization, disorder included") {
    dynamics::XYModel model;
    model.n_sites = 6;
    model.b_field = 0.3;
    model.disorder = dynamics::sample_disorder(6, 3 * model.j0, 5);
    const Eigen::MatrixXcd h = dynamics::build_hamiltonian(model);
    Eigen::MatrixXcd sz_total = Eigen::MatrixXcd::Zero(64, 64);
    for (Eigen::Index s = 0; s < 64; ++s) {
        int up = 0;
        for (int k = 0; k < 6; ++k) up += ((s >> k) & 1) ? -1 : 1;
        sz_total(s, s) = up;
    }
    CHECK((h * sz_total - sz_total * h).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("disorder samples are deterministic and bounded") {
    const Eigen::VectorXd a = dynamics::sample_disorder(8, 1260.0, 3);
    const Eigen::VectorXd b = dynamics::sample_disorder(8, 1260.0, 3);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.cwiseAbs().maxCoeff() <= 1260.0);
    CHECK(a.cwiseAbs().minCoeff() >= 0.0);
    CHECK((dynamics::sample_disorder(8, 1260.0, 4) - a).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("evolution at t = 0 is the identity") {
    dynamics::XYModel model;
    model.n_sites = 4;
    const qcore::PureState psi = neel(4);
    const qcore::PureState out = dynamics::evolve(model, psi, 0.0);
    CHECK((out.amplitudes - psi.amplitudes).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("two-spin flip-flop oscillates as cos^2(J t)") {
    dynamics::XYModel model;
    model.n_sites = 2;
    model.j0 = 1.7;
    model.b_field = 0.4;  // global phase inside the zero-magnetization sector
    const qcore::PureState psi = neel(2);  // |01>
    for (double t : {0.1, 0.5, 1.3, 2.9}) {
        const qcore::PureState out = dynamics::evolve(model, psi, t);
        const double p01 = std::norm(out.amplitudes(1));
        const double p10 = std::norm(out.amplitudes(2));
        CHECK(std::abs(p01 - std::pow(std::cos(model.j0 * t), 2)) < 1e-8);
        CHECK(std::abs(p01 + p10 - 1.0) < 1e-10);
    }
}

TEST_CASE("norm, energy, and magnetization are conserved for a disordered chain") {
    dynamics::XYModel model;
    model.n_sites = 8;
    model.j0 = 420.0;
    model.alpha = 1.24;
    model.disorder = dynamics::sample_disorder(8, 3 * 420.0, 11);
    const Eigen::MatrixXcd h = dynamics::build_hamiltonian(model);
    const qcore::PureState psi0 = neel(8);
    const double e0 = energy(h, psi0);
    const double m0 = magnetization(psi0);
    const dynamics::Propagator prop(model);
    for (double t : {0.0005, 0.001, 0.002, 0.005}) {
        const qcore::PureState psi = prop.evolve(psi0, t);
        CHECK(std::abs(psi.amplitudes.squaredNorm() - 1.0) < 1e-10);
        CHECK(std::abs(energy(h, psi) - e0) < 1e-10 * std::max(1.0, std::abs(e0)));
        CHECK(std::abs(magnetization(psi) - m0) < 1e-10);
    }
}

TEST_CASE("time reversal returns the initial state") {
    dynamics::XYModel model;
    model.n_sites = 5;
    model.j0 = 420.0;
    const qcore::PureState psi = neel(5);
    const qcore::PureState forward = dynamics::evolve(model, psi, 0.002);
    dynamics::XYModel reversed = model;
    reversed.j0 = -model.j0;
    reversed.b_field = -model.b_field;
    const qcore::PureState back = dynamics::evolve(reversed, forward, 0.002);
    CHECK((back.amplitudes - psi.amplitudes).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("quench series reuses one eigensolve and starts from the Neel state") {
    dynamics::XYModel model;
    model.n_sites = 6;
    const dynamics::QuenchResult result = dynamics::quench_series(model, {0.0, 0.001, 0.003});
    REQUIRE(result.states.size() == 3);
    const qcore::PureState expected = neel(6);
    CHECK((result.states[0].amplitudes - expected.amplitudes).cwiseAbs().maxCoeff() < 1e-12);
    for (const qcore::PureState& psi : result.states)
        CHECK(std::abs(psi.amplitudes.squaredNorm() - 1.0) < 1e-10);
    const qcore::PureState direct = dynamics::evolve(model, expected, 0.003);
    CHECK((result.states[2].amplitudes - direct.amplitudes).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("entanglement grows from the Neel state") {
    dynamics::XYModel model;
    model.n_sites = 8;
    const qcore::PureState psi = dynamics::evolve(model, neel(8), 0.001);
    const qcore::DensityMatrix half =
        qcore::partial_trace(qcore::to_density(psi), {0, 1, 2, 3});
    CHECK(qcore::purity(half) < 0.99);
    CHECK(std::abs(qcore::purity(qcore::to_density(psi)) - 1.0) < 1e-10);
}
