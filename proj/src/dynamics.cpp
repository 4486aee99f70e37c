#include "xpv/dynamics.hpp"

#include "xpv/randsrc.hpp"

#include <cmath>

namespace xpv::dynamics {

namespace {

Eigen::Index pow2(int n) { return Eigen::Index{1} << n; }

// Digit of site k (site 0 most significant); 0 = spin up (sigma_z = +1).
int digit(Eigen::Index s, int site, int n) { return (s >> (n - 1 - site)) & 1; }

}  // namespace

Eigen::MatrixXd XYModel::couplings() const {
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n_sites, n_sites);
    for (int a = 0; a < n_sites; ++a)
        for (int b = a + 1; b < n_sites; ++b) {
            j(a, b) = j0 / std::pow(std::abs(a - b), alpha);
            j(b, a) = j(a, b);
        }
    return j;
}

Eigen::VectorXd sample_disorder(int n_sites, double bound, std::uint64_t seed) {
    randsrc::RngStream rng = randsrc::make_stream(seed, 0, 0x6469736fULL);
    std::uniform_real_distribution<double> uniform(-bound, bound);
    Eigen::VectorXd delta(n_sites);
    for (int k = 0; k < n_sites; ++k) delta(k) = uniform(rng);
    return delta;
}

Eigen::MatrixXcd build_hamiltonian(const XYModel& model) {
    const int n = model.n_sites;
    const Eigen::Index dim = pow2(n);
    const Eigen::MatrixXd j = model.couplings();
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(dim, dim);
    for (Eigen::Index s = 0; s < dim; ++s) {
        double diag = 0;
        for (int k = 0; k < n; ++k) {
            const double z = digit(s, k, n) == 0 ? 1.0 : -1.0;
            diag += model.b_field * z;
            if (model.disorder) diag += (*model.disorder)(k) * z;
        }
        h(s, s) = diag;
        // flip-flop: |...0...1...> <-> |...1...0...>
        for (int a = 0; a < n; ++a)
            for (int b = a + 1; b < n; ++b) {
                if (digit(s, a, n) == digit(s, b, n)) continue;
                const Eigen::Index t = s ^ (Eigen::Index{1} << (n - 1 - a)) ^
                                       (Eigen::Index{1} << (n - 1 - b));
                if (t > s) h(s, t) = j(a, b);
            }
    }
    return h.selfadjointView<Eigen::Upper>();
}

Propagator::Propagator(const XYModel& model) : n_sites_(model.n_sites) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(build_hamiltonian(model));
    evals_ = solver.eigenvalues();
    evecs_ = solver.eigenvectors();
}

qcore::PureState Propagator::evolve(const qcore::PureState& initial, double t) const {
    if (initial.num_sites != n_sites_ || initial.local_dim != 2)
        throw ShapeError("state does not match the model");
    const Eigen::VectorXcd in_eigen = evecs_.adjoint() * initial.amplitudes;
    Eigen::VectorXcd phased(in_eigen.size());
    for (Eigen::Index i = 0; i < in_eigen.size(); ++i)
        phased(i) = in_eigen(i) * std::exp(std::complex<double>(0.0, -evals_(i) * t));
    qcore::PureState out = initial;
    out.amplitudes = evecs_ * phased;
    return out;
}

qcore::PureState evolve(const XYModel& model, const qcore::PureState& initial, double t) {
    return Propagator(model).evolve(initial, t);
}

QuenchResult quench_series(const XYModel& model, const std::vector<double>& times) {
    const Propagator propagator(model);
    qcore::StateSpec neel;
    neel.kind = qcore::StateKind::Neel;
    neel.num_sites = model.n_sites;
    const qcore::PureState initial = qcore::build_pure_state(neel);
    QuenchResult result;
    result.times = times;
    result.states.reserve(times.size());
    for (const double t : times) result.states.push_back(propagator.evolve(initial, t));
    return result;
}

}  // namespace xpv::dynamics
