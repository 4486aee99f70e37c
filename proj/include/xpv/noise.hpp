#pragma once

#include <cstdint>
#include <optional>
#include <utility>

#include "xpv/measure.hpp"

namespace xpv::noise {

struct NoiseProfile {
    double eta = 0.0;      // unitary-error strength (eta_i >= 0)
    double p_depol = 0.0;  // single-qubit depolarization p_{D,i}
    std::uint64_t seed = 0;
};

/// Right-multiplies each factor by exp(i h eta) with a fresh GUE h per
/// (platform seed, unitary, site).
randsrc::LocalUnitary perturb_unitary(const randsrc::LocalUnitary& u,
                                      const NoiseProfile& profile, int unitary_index);

/// Local depolarization acting on every site:
/// (1 - 2 p N) rho + 2 p sum_k Tr_k(rho) (x) I_k / 2.
/// Requires 1 - 2 p N > 0 (ChannelError otherwise). d = 2 only.
qcore::DensityMatrix depolarize(const qcore::DensityMatrix& rho, double p_d);

struct FidelityShift {
    double delta_f_max = 0;
    double delta_f_gm = 0;
};

/// Closed-form first-order shifts for the rho1 == rho2 case. Convention:
/// platform 1 holds the larger purity estimate, so F_max picks up platform
/// 2's depolarization while F_GM is immune to p_D at first order.
FidelityShift predict_fidelity_shift(const qcore::DensityMatrix& rho1,
                                     const qcore::DensityMatrix& rho2,
                                     const NoiseProfile& profile_1,
                                     const NoiseProfile& profile_2);

/// Platform i measures depolarize(rho_i) rotated by its privately perturbed
/// unitaries; estimation downstream still assumes the clean shared schedule.
std::pair<measure::MeasurementDataset, measure::MeasurementDataset>
simulate_imperfect_protocol(const qcore::DensityMatrix& rho_1,
                            const qcore::DensityMatrix& rho_2,
                            const randsrc::UnitarySchedule& schedule,
                            const NoiseProfile& profile_1, const NoiseProfile& profile_2,
                            std::optional<std::uint64_t> shots,
                            std::uint64_t sampling_seed);

}  // namespace xpv::noise
