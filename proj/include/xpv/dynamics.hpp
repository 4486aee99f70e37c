#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

#include "xpv/qcore.hpp"

namespace xpv::dynamics {

/// Long-range XY chain: H = sum_{i<j} J_ij (s+_i s-_j + s-_i s+_j)
///                        + B sum_i sz_i + sum_j delta_j sz_j,
/// with J_ij = j0 / |i - j|^alpha and hbar = 1 (times in seconds).
struct XYModel {
    int n_sites = 2;
    double j0 = 420.0;  // s^-1, the documented default
    double alpha = 1.24;
    double b_field = 0.0;
    std::optional<Eigen::VectorXd> disorder;  // delta_j, same units as j0

    Eigen::MatrixXd couplings() const;
};

/// Uniform delta_j in [-bound, bound]; the paper's disorder draws use
/// bound = 3 * j0.
Eigen::VectorXd sample_disorder(int n_sites, double bound, std::uint64_t seed);

Eigen::MatrixXcd build_hamiltonian(const XYModel& model);

/// Shared eigendecomposition so a whole time series costs one solve.
class Propagator {
  public:
    explicit Propagator(const XYModel& model);

    qcore::PureState evolve(const qcore::PureState& initial, double t) const;
    const Eigen::VectorXd& eigenvalues() const { return evals_; }

  private:
    int n_sites_;
    Eigen::VectorXd evals_;
    Eigen::MatrixXcd evecs_;
};

qcore::PureState evolve(const XYModel& model, const qcore::PureState& initial, double t);

struct QuenchResult {
    std::vector<double> times;
    std::vector<qcore::PureState> states;
};

/// Néel initial state evolved to each time; one eigensolve total.
QuenchResult quench_series(const XYModel& model, const std::vector<double>& times);

}  // namespace xpv::dynamics
