#include "xpv/qcore.hpp"

#include "xpv/randsrc.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

namespace xpv::qcore {

namespace {

Eigen::Index pow_ll(int base, int exp) {
    Eigen::Index v = 1;
    for (int i = 0; i < exp; ++i) v *= base;
    return v;
}

}  // namespace

DensityMatrix to_density(const PureState& psi) {
    DensityMatrix rho;
    rho.matrix = psi.amplitudes * psi.amplitudes.adjoint();
    rho.num_sites = psi.num_sites;
    rho.local_dim = psi.local_dim;
    return rho;
}

DensityMatrix partial_trace(const DensityMatrix& rho, const std::vector<int>& keep) {
    const int n = rho.num_sites;
    const int d = rho.local_dim;
    if (keep.empty()) throw InvalidSubsystem("keep list must be nonempty");
    for (std::size_t i = 0; i < keep.size(); ++i) {
        if (keep[i] < 0 || keep[i] >= n) throw InvalidSubsystem("site index out of range");
        if (i > 0 && keep[i] <= keep[i - 1])
            throw InvalidSubsystem("keep list must be strictly increasing");
    }

    std::vector<int> traced;
    for (int k = 0, j = 0; k < n; ++k) {
        if (j < static_cast<int>(keep.size()) && keep[static_cast<std::size_t>(j)] == k)
            ++j;
        else
            traced.push_back(k);
    }

    // Site k occupies the digit with stride d^(n-1-k) of the full index.
    std::vector<Eigen::Index> stride(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) stride[static_cast<std::size_t>(k)] = pow_ll(d, n - 1 - k);

    const int nk = static_cast<int>(keep.size());
    const int nt = static_cast<int>(traced.size());
    const Eigen::Index dim_keep = pow_ll(d, nk);
    const Eigen::Index dim_traced = pow_ll(d, nt);

    auto expand = [&](Eigen::Index sub, const std::vector<int>& sites) {
        Eigen::Index full = 0;
        for (int j = static_cast<int>(sites.size()) - 1; j >= 0; --j) {
            full += (sub % d) * stride[static_cast<std::size_t>(sites[static_cast<std::size_t>(j)])];
            sub /= d;
        }
        return full;
    };

    std::vector<Eigen::Index> keep_offset(static_cast<std::size_t>(dim_keep));
    for (Eigen::Index a = 0; a < dim_keep; ++a) keep_offset[static_cast<std::size_t>(a)] = expand(a, keep);
    std::vector<Eigen::Index> traced_offset(static_cast<std::size_t>(dim_traced));
    for (Eigen::Index t = 0; t < dim_traced; ++t)
        traced_offset[static_cast<std::size_t>(t)] = expand(t, traced);

    DensityMatrix out;
    out.num_sites = nk;
    out.local_dim = d;
    out.matrix = Mat::Zero(dim_keep, dim_keep);
    for (Eigen::Index a = 0; a < dim_keep; ++a)
        for (Eigen::Index b = 0; b < dim_keep; ++b) {
            std::complex<double> sum = 0;
            for (Eigen::Index t = 0; t < dim_traced; ++t) {
                const Eigen::Index off = traced_offset[static_cast<std::size_t>(t)];
                sum += rho.matrix(keep_offset[static_cast<std::size_t>(a)] + off,
                                  keep_offset[static_cast<std::size_t>(b)] + off);
            }
            out.matrix(a, b) = sum;
        }
    return out;
}

double purity(const DensityMatrix& rho) {
    // Tr(rho^2) = sum_ij |rho_ij|^2 for Hermitian rho
    return rho.matrix.squaredNorm();
}

double overlap(const DensityMatrix& rho1, const DensityMatrix& rho2) {
    if (rho1.dim() != rho2.dim()) throw ShapeError("density matrix dimensions differ");
    // Tr(rho1 rho2) = sum_ij rho1_ij conj(rho2_ij) for Hermitian operands
    return rho1.matrix.cwiseProduct(rho2.matrix.conjugate()).sum().real();
}

double fidelity_max(const DensityMatrix& rho1, const DensityMatrix& rho2) {
    const double p1 = purity(rho1);
    const double p2 = purity(rho2);
    if (p1 <= 0 || p2 <= 0) throw DegenerateInput("zero purity");
    return overlap(rho1, rho2) / std::max(p1, p2);
}

double fidelity_gm(const DensityMatrix& rho1, const DensityMatrix& rho2) {
    const double p1 = purity(rho1);
    const double p2 = purity(rho2);
    if (p1 <= 0 || p2 <= 0) throw DegenerateInput("zero purity");
    return overlap(rho1, rho2) / std::sqrt(p1 * p2);
}

DensityMatrix dephase(const DensityMatrix& rho, double lambda) {
    if (lambda < 0.0 || lambda > 1.0) throw ChannelError("lambda must lie in [0, 1]");
    DensityMatrix out = rho;
    const auto dim = rho.dim();
    out.matrix = lambda * rho.matrix +
                 (1.0 - lambda) / static_cast<double>(dim) * Mat::Identity(dim, dim);
    return out;
}

namespace {

PureState neel_state(int n, int d) {
    PureState psi;
    psi.num_sites = n;
    psi.local_dim = d;
    psi.amplitudes = Vec::Zero(pow_ll(d, n));
    Eigen::Index idx = 0;
    for (int k = 0; k < n; ++k) idx = idx * d + (k % 2);
    psi.amplitudes(idx) = 1.0;
    return psi;
}

PureState product_haar_state(int n, int d, std::uint64_t seed) {
    PureState psi;
    psi.num_sites = n;
    psi.local_dim = d;
    psi.amplitudes = Vec::Ones(1);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int k = 0; k < n; ++k) {
        randsrc::RngStream rng = randsrc::make_stream(seed, 0, static_cast<std::uint64_t>(k));
        Vec site(d);
        for (int a = 0; a < d; ++a) {
            const double re = normal(rng);
            const double im = normal(rng);
            site(a) = {re, im};
        }
        site.normalize();
        Vec next(psi.amplitudes.size() * d);
        for (Eigen::Index i = 0; i < psi.amplitudes.size(); ++i)
            for (int a = 0; a < d; ++a) next(i * d + a) = psi.amplitudes(i) * site(a);
        psi.amplitudes = std::move(next);
    }
    return psi;
}

PureState haar_random_state(int n, int d, std::uint64_t seed) {
    const Eigen::Index dim = pow_ll(d, n);
    randsrc::RngStream rng = randsrc::make_stream(seed, 0, 0);
    const Mat u = randsrc::sample_cue(static_cast<int>(dim), rng);
    PureState psi;
    psi.num_sites = n;
    psi.local_dim = d;
    psi.amplitudes = u.col(0);  // global Haar unitary applied to |00...0>
    return psi;
}

}  // namespace

PureState build_pure_state(const StateSpec& spec) {
    switch (spec.kind) {
        case StateKind::Neel:
            return neel_state(spec.num_sites, spec.local_dim);
        case StateKind::PureProduct:
            return product_haar_state(spec.num_sites, spec.local_dim, spec.seed);
        case StateKind::PureHaarRandom:
            return haar_random_state(spec.num_sites, spec.local_dim, spec.seed);
        default:
            throw Unsupported("state kind has no pure-state form");
    }
}

DensityMatrix build_state(const StateSpec& spec) {
    switch (spec.kind) {
        case StateKind::Neel:
        case StateKind::PureProduct:
        case StateKind::PureHaarRandom:
            return to_density(build_pure_state(spec));
        case StateKind::MaximallyMixed: {
            DensityMatrix rho;
            rho.num_sites = spec.num_sites;
            rho.local_dim = spec.local_dim;
            const Eigen::Index dim = pow_ll(spec.local_dim, spec.num_sites);
            rho.matrix = Mat::Identity(dim, dim) / static_cast<double>(dim);
            return rho;
        }
        case StateKind::MixedRandom: {
            if (spec.traced_sites < 1) throw InvalidSubsystem("MixedRandom needs traced_sites >= 1");
            StateSpec parent = spec;
            parent.kind = StateKind::PureHaarRandom;
            parent.num_sites = spec.num_sites + spec.traced_sites;
            std::vector<int> keep(static_cast<std::size_t>(spec.num_sites));
            for (int k = 0; k < spec.num_sites; ++k) keep[static_cast<std::size_t>(k)] = k;
            return partial_trace(build_state(parent), keep);
        }
        case StateKind::DephasedMixture: {
            StateSpec base = spec;
            base.kind = StateKind::PureProduct;
            return dephase(build_state(base), spec.lambda);
        }
    }
    throw Unsupported("unknown state kind");
}

void write_density(std::ostream& out, const DensityMatrix& rho) {
    out.write("XPVRHO1", 7);
    const std::int32_t d = rho.local_dim;
    const std::int32_t n = rho.num_sites;
    out.write(reinterpret_cast<const char*>(&d), sizeof d);
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    for (Eigen::Index r = 0; r < rho.dim(); ++r)
        for (Eigen::Index c = 0; c < rho.dim(); ++c) {
            const double re = rho.matrix(r, c).real();
            const double im = rho.matrix(r, c).imag();
            out.write(reinterpret_cast<const char*>(&re), sizeof re);
            out.write(reinterpret_cast<const char*>(&im), sizeof im);
        }
}

DensityMatrix read_density(std::istream& in) {
    char magic[7];
    in.read(magic, 7);
    if (!in || std::memcmp(magic, "XPVRHO1", 7) != 0)
        throw ShapeError("bad density dump header");
    std::int32_t d = 0, n = 0;
    in.read(reinterpret_cast<char*>(&d), sizeof d);
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    DensityMatrix rho;
    rho.local_dim = d;
    rho.num_sites = n;
    const Eigen::Index dim = pow_ll(d, n);
    rho.matrix.resize(dim, dim);
    for (Eigen::Index r = 0; r < dim; ++r)
        for (Eigen::Index c = 0; c < dim; ++c) {
            double re = 0, im = 0;
            in.read(reinterpret_cast<char*>(&re), sizeof re);
            in.read(reinterpret_cast<char*>(&im), sizeof im);
            rho.matrix(r, c) = {re, im};
        }
    if (!in) throw ShapeError("truncated density dump");
    return rho;
}

}  // namespace xpv::qcore
