#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "xpv/errors.hpp"

namespace xpv::randsrc {

using Mat = Eigen::MatrixXcd;
using RngStream = std::mt19937_64;

/// Counter-based seed derivation: stream(master, u, k) is a pure function of
/// its arguments, so schedules can be generated in any order (or in parallel)
/// and still come out bit-identical.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t u, std::uint64_t k);
RngStream make_stream(std::uint64_t master, std::uint64_t u, std::uint64_t k);

/// Haar-distributed d x d unitary (CUE) via QR of a complex Ginibre matrix,
/// with the R-diagonal phase correction.
Mat sample_cue(int d, RngStream& rng);

/// GUE Hermitian matrix normalized so that E[h_ab h_cd] = delta_ad delta_bc:
/// off-diagonal real/imag parts i.i.d. N(0, 1/2), diagonal real N(0, 1).
Mat sample_gue(int d, RngStream& rng);

/// The 24-element single-qubit Clifford group, one representative per
/// phase-equivalence class. An exactly enumerable 2-design, used to turn
/// Monte Carlo checks into machine-precision identities.
const std::vector<Mat>& enumerate_clifford_1q();

struct LocalUnitary {
    std::vector<Mat> factors;  // U_1 ... U_N, one d x d block per site

    int num_sites() const { return static_cast<int>(factors.size()); }
    int local_dim() const { return factors.empty() ? 0 : static_cast<int>(factors.front().rows()); }
    /// Dense tensor product of the factors (site 0 = most significant digit).
    Mat full_matrix() const;
};

enum class ScheduleMode { Local, Global };
enum class Ensemble { HaarCUE, CliffordSingleQubit };

struct SchedulePlan {
    ScheduleMode mode = ScheduleMode::Local;
    Ensemble ensemble = Ensemble::HaarCUE;
    int n_u = 1;
    int n = 1;
    int d = 2;
    std::uint64_t master_seed = 0;
};

struct UnitarySchedule {
    ScheduleMode mode = ScheduleMode::Local;
    Ensemble ensemble = Ensemble::HaarCUE;
    std::uint64_t master_seed = 0;
    int n = 1;
    int d = 2;
    std::vector<LocalUnitary> locals;  // mode == Local
    std::vector<Mat> globals;          // mode == Global

    int size() const {
        return mode == ScheduleMode::Local ? static_cast<int>(locals.size())
                                           : static_cast<int>(globals.size());
    }
    /// Restrict a Local schedule to the given (strictly increasing) sites.
    UnitarySchedule restricted(const std::vector<int>& keep) const;
};

UnitarySchedule sample_schedule(const SchedulePlan& plan);

struct GuePerturbation {
    std::vector<Mat> generators;  // one Hermitian h_k per site
    double strength = 0.0;        // eta
};

/// Content hash binding datasets to the exact shared unitaries.
std::string schedule_ref(const UnitarySchedule& schedule);

/// Interoperable wire form: one JSON object per unitary with row-major
/// [re, im] entries. Returned/parsed as serialized strings to keep the
/// header light.
std::string schedule_to_json(const UnitarySchedule& schedule);
UnitarySchedule schedule_from_json(const std::string& text);

}  // namespace xpv::randsrc
