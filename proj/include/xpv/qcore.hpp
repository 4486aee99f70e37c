#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "xpv/errors.hpp"

namespace xpv::qcore {

using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;

/// Index convention: site 0 is the most significant digit, i.e. the basis
/// string s_0 s_1 ... s_{N-1} has index sum_k s_k * d^(N-1-k).

struct PureState {
    Vec amplitudes;
    int num_sites = 1;
    int local_dim = 2;

    Eigen::Index dim() const { return amplitudes.size(); }
};

struct DensityMatrix {
    Mat matrix;
    int num_sites = 1;
    int local_dim = 2;

    Eigen::Index dim() const { return matrix.rows(); }
};

DensityMatrix to_density(const PureState& psi);

enum class StateKind {
    PureProduct,     // independent Haar single-site states
    PureHaarRandom,  // global Haar unitary applied to a product state
    MixedRandom,     // PureHaarRandom on N + traced_sites sites, then traced
    Neel,            // |0101...>
    MaximallyMixed,
    DephasedMixture,  // lambda * rho_pure + (1 - lambda) * I / D
};

struct StateSpec {
    StateKind kind = StateKind::Neel;
    int num_sites = 1;
    int local_dim = 2;
    std::uint64_t seed = 0;
    int traced_sites = 0;  // MixedRandom
    double lambda = 1.0;   // DephasedMixture
};

/// Trace out every site not in `keep`; `keep` must be strictly increasing.
DensityMatrix partial_trace(const DensityMatrix& rho, const std::vector<int>& keep);

double purity(const DensityMatrix& rho);
double overlap(const DensityMatrix& rho1, const DensityMatrix& rho2);

/// F_max = Tr(rho1 rho2) / max{Tr rho1^2, Tr rho2^2}
double fidelity_max(const DensityMatrix& rho1, const DensityMatrix& rho2);
/// F_GM = Tr(rho1 rho2) / sqrt(Tr rho1^2 * Tr rho2^2); always >= F_max
double fidelity_gm(const DensityMatrix& rho1, const DensityMatrix& rho2);

/// Deterministic given spec.seed.
DensityMatrix build_state(const StateSpec& spec);
/// Pure-state form for the kinds that admit one (PureProduct, PureHaarRandom,
/// Neel); throws Unsupported otherwise.
PureState build_pure_state(const StateSpec& spec);

/// Global dephasing: lambda * rho + (1 - lambda) * I / D.
DensityMatrix dephase(const DensityMatrix& rho, double lambda);

/// Debug dump: "XPVRHO1" header, d, N, then row-major interleaved
/// real/imag little-endian doubles.
void write_density(std::ostream& out, const DensityMatrix& rho);
DensityMatrix read_density(std::istream& in);

}  // namespace xpv::qcore
