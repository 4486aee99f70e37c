#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "xpv/qcore.hpp"
#include "xpv/randsrc.hpp"

namespace xpv::measure {

struct OutcomeDistribution {
    Eigen::VectorXd probs;  // length d^N over computational basis strings
    int num_sites = 1;
    int local_dim = 2;
};

struct OutcomeRecord {
    int unitary_index = 0;
    std::uint64_t shots = 0;
    std::map<std::uint64_t, std::uint64_t> counts;  // basis index -> count
    bool exact = false;
    Eigen::VectorXd probs;  // populated iff exact
};

struct MeasurementDataset {
    std::string platform_id;
    std::string schedule_ref;
    int num_sites = 1;
    int local_dim = 2;
    bool exact = false;
    bool global_mode = false;  // measured under whole-register unitaries
    std::vector<OutcomeRecord> records;  // one per unitary, index ascending
};

OutcomeDistribution born_probabilities(const qcore::DensityMatrix& rho,
                                       const randsrc::LocalUnitary& u);
OutcomeDistribution born_probabilities(const qcore::DensityMatrix& rho,
                                       const randsrc::Mat& global_u);
/// O(N d D) pure-state path: rotate the vector, square the amplitudes.
OutcomeDistribution born_probabilities(const qcore::PureState& psi,
                                       const randsrc::LocalUnitary& u);
OutcomeDistribution born_probabilities(const qcore::PureState& psi,
                                       const randsrc::Mat& global_u);

/// Multinomial draw by inverse CDF, one uniform per shot.
OutcomeRecord sample_counts(const OutcomeDistribution& dist, std::uint64_t shots,
                            randsrc::RngStream& rng);
OutcomeRecord exact_record(const OutcomeDistribution& dist);

/// shots == nullopt selects exact mode (theory side: probabilities stored
/// losslessly instead of sampled counts).
MeasurementDataset acquire_dataset(const qcore::DensityMatrix& state,
                                   const randsrc::UnitarySchedule& schedule,
                                   std::optional<std::uint64_t> shots,
                                   std::uint64_t sampling_seed,
                                   const std::string& platform_id);
/// Pure-state fast path, same dataset contract.
MeasurementDataset acquire_dataset(const qcore::PureState& state,
                                   const randsrc::UnitarySchedule& schedule,
                                   std::optional<std::uint64_t> shots,
                                   std::uint64_t sampling_seed,
                                   const std::string& platform_id);

/// Marginalize counts/probs onto the kept (strictly increasing) sites.
MeasurementDataset marginalize_dataset(const MeasurementDataset& ds,
                                       const std::vector<int>& keep);

/// NDJSON dataset file: header line then one record per line. Bit-exact
/// round trip.
void write_dataset(std::ostream& out, const MeasurementDataset& ds);
MeasurementDataset read_dataset(std::istream& in);
std::string record_to_json(const OutcomeRecord& rec);
OutcomeRecord record_from_json(const std::string& line);

}  // namespace xpv::measure
