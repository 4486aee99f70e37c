#include "xpv/randsrc.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstring>
#include <map>
#include <sstream>

namespace xpv::randsrc {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t u, std::uint64_t k) {
    // hash(master || u || k), mixed in three rounds
    std::uint64_t h = splitmix64(master);
    h = splitmix64(h ^ u);
    h = splitmix64(h ^ k);
    return h;
}

RngStream make_stream(std::uint64_t master, std::uint64_t u, std::uint64_t k) {
    return RngStream(derive_seed(master, u, k));
}

Mat sample_cue(int d, RngStream& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Mat ginibre(d, d);
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) {
            const double re = normal(rng);
            const double im = normal(rng);
            ginibre(r, c) = {re, im};
        }
    Eigen::HouseholderQR<Mat> qr(ginibre);
    Mat q = qr.householderQ();
    Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
    // Fix the gauge: without absorbing the R-diagonal phases, Q is not Haar.
    for (int c = 0; c < d; ++c) {
        const std::complex<double> rc = r(c, c);
        const double mag = std::abs(rc);
        const std::complex<double> phase = mag > 0 ? rc / mag : 1.0;
        q.col(c) *= phase;
    }
    return q;
}

Mat sample_gue(int d, RngStream& rng) {
    std::normal_distribution<double> diag(0.0, 1.0);
    std::normal_distribution<double> off(0.0, std::sqrt(0.5));
    Mat h = Mat::Zero(d, d);
    for (int r = 0; r < d; ++r) {
        h(r, r) = diag(rng);
        for (int c = r + 1; c < d; ++c) {
            const std::complex<double> z(off(rng), off(rng));
            h(r, c) = z;
            h(c, r) = std::conj(z);
        }
    }
    return h;
}

namespace {

// Canonical representative: first entry of significant magnitude made real
// positive, remaining entries rounded for keying.
Mat phase_canonical(const Mat& u) {
    std::complex<double> pivot = 0;
    for (int r = 0; r < u.rows() && pivot == 0.0; ++r)
        for (int c = 0; c < u.cols(); ++c)
            if (std::abs(u(r, c)) > 1e-8) {
                pivot = u(r, c);
                break;
            }
    return u * (std::conj(pivot) / std::abs(pivot));
}

std::string matrix_key(const Mat& u) {
    std::ostringstream key;
    for (int r = 0; r < u.rows(); ++r)
        for (int c = 0; c < u.cols(); ++c)
            key << llround(u(r, c).real() * 1e6) << ',' << llround(u(r, c).imag() * 1e6) << ';';
    return key.str();
}

std::vector<Mat> build_clifford_1q() {
    const double s = 1.0 / std::sqrt(2.0);
    Mat hadamard(2, 2), phase(2, 2);
    hadamard << s, s, s, -s;
    phase << 1.0, 0.0, 0.0, std::complex<double>(0.0, 1.0);

    std::map<std::string, Mat> group;
    const Mat identity = Mat::Identity(2, 2);
    group.emplace(matrix_key(identity), identity);

    bool grew = true;
    while (grew) {
        grew = false;
        std::vector<Mat> current;
        current.reserve(group.size());
        for (const auto& [key, m] : group) current.push_back(m);
        for (const Mat& m : current)
            for (const Mat* gen : {&hadamard, &phase}) {
                Mat next = phase_canonical(*gen * m);
                if (group.emplace(matrix_key(next), next).second) grew = true;
            }
    }
    std::vector<Mat> result;
    result.reserve(group.size());
    for (const auto& [key, m] : group) result.push_back(m);
    return result;
}

}  // namespace

const std::vector<Mat>& enumerate_clifford_1q() {
    static const std::vector<Mat> group = build_clifford_1q();
    return group;
}

Mat LocalUnitary::full_matrix() const {
    Mat full = Mat::Identity(1, 1);
    for (const Mat& f : factors) {
        Mat next(full.rows() * f.rows(), full.cols() * f.cols());
        for (Eigen::Index r = 0; r < full.rows(); ++r)
            for (Eigen::Index c = 0; c < full.cols(); ++c)
                next.block(r * f.rows(), c * f.cols(), f.rows(), f.cols()) = full(r, c) * f;
        full = std::move(next);
    }
    return full;
}

UnitarySchedule UnitarySchedule::restricted(const std::vector<int>& keep) const {
    if (mode != ScheduleMode::Local)
        throw ModeError("restricted() requires a Local schedule");
    UnitarySchedule out;
    out.mode = mode;
    out.ensemble = ensemble;
    out.master_seed = master_seed;
    out.n = static_cast<int>(keep.size());
    out.d = d;
    out.locals.reserve(locals.size());
    for (const LocalUnitary& u : locals) {
        LocalUnitary r;
        for (int site : keep) {
            if (site < 0 || site >= n) throw InvalidSubsystem("site index out of range");
            r.factors.push_back(u.factors[static_cast<std::size_t>(site)]);
        }
        out.locals.push_back(std::move(r));
    }
    return out;
}

UnitarySchedule sample_schedule(const SchedulePlan& plan) {
    if (plan.n_u < 1) throw InvalidSubsystem("schedule needs N_U >= 1");
    UnitarySchedule schedule;
    schedule.mode = plan.mode;
    schedule.ensemble = plan.ensemble;
    schedule.master_seed = plan.master_seed;
    schedule.n = plan.n;
    schedule.d = plan.d;

    if (plan.mode == ScheduleMode::Global) {
        schedule.globals.reserve(static_cast<std::size_t>(plan.n_u));
        Eigen::Index dim = 1;
        for (int k = 0; k < plan.n; ++k) dim *= plan.d;
        for (int u = 0; u < plan.n_u; ++u) {
            RngStream rng = make_stream(plan.master_seed, static_cast<std::uint64_t>(u), 0);
            schedule.globals.push_back(sample_cue(static_cast<int>(dim), rng));
        }
        return schedule;
    }

    const auto& clifford = enumerate_clifford_1q();
    schedule.locals.reserve(static_cast<std::size_t>(plan.n_u));
    for (int u = 0; u < plan.n_u; ++u) {
        LocalUnitary lu;
        lu.factors.reserve(static_cast<std::size_t>(plan.n));
        for (int k = 0; k < plan.n; ++k) {
            RngStream rng = make_stream(plan.master_seed, static_cast<std::uint64_t>(u),
                                        static_cast<std::uint64_t>(k));
            if (plan.ensemble == Ensemble::HaarCUE) {
                lu.factors.push_back(sample_cue(plan.d, rng));
            } else {
                if (plan.d != 2) throw Unsupported("Clifford ensemble is single-qubit only");
                std::uniform_int_distribution<std::size_t> pick(0, clifford.size() - 1);
                lu.factors.push_back(clifford[pick(rng)]);
            }
        }
        schedule.locals.push_back(std::move(lu));
    }
    return schedule;
}

namespace {

void fnv_bytes(std::uint64_t& h, const void* data, std::size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ULL;
    }
}

void fnv_matrix(std::uint64_t& h, const Mat& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const double re = m(r, c).real();
            const double im = m(r, c).imag();
            fnv_bytes(h, &re, sizeof re);
            fnv_bytes(h, &im, sizeof im);
        }
}

}  // namespace

std::string schedule_ref(const UnitarySchedule& schedule) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const int header[4] = {static_cast<int>(schedule.mode), schedule.n, schedule.d,
                           schedule.size()};
    fnv_bytes(h, header, sizeof header);
    if (schedule.mode == ScheduleMode::Local) {
        for (const LocalUnitary& u : schedule.locals)
            for (const Mat& f : u.factors) fnv_matrix(h, f);
    } else {
        for (const Mat& g : schedule.globals) fnv_matrix(h, g);
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

nlohmann::json matrix_to_json(const Mat& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            rows.push_back({m(r, c).real(), m(r, c).imag()});
    return rows;
}

Mat matrix_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols) {
    Mat m(rows, cols);
    Eigen::Index i = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c, ++i)
            m(r, c) = {j.at(i).at(0).get<double>(), j.at(i).at(1).get<double>()};
    return m;
}

}  // namespace

std::string schedule_to_json(const UnitarySchedule& schedule) {
    nlohmann::json j;
    j["mode"] = schedule.mode == ScheduleMode::Local ? "local" : "global";
    j["ensemble"] = schedule.ensemble == Ensemble::HaarCUE ? "haar_cue" : "clifford_1q";
    j["master_seed"] = schedule.master_seed;
    j["N"] = schedule.n;
    j["d"] = schedule.d;
    j["N_U"] = schedule.size();
    nlohmann::json entries = nlohmann::json::array();
    if (schedule.mode == ScheduleMode::Local) {
        for (std::size_t u = 0; u < schedule.locals.size(); ++u) {
            nlohmann::json entry;
            entry["u"] = u;
            nlohmann::json factors = nlohmann::json::array();
            for (const Mat& f : schedule.locals[u].factors) factors.push_back(matrix_to_json(f));
            entry["factors"] = std::move(factors);
            entries.push_back(std::move(entry));
        }
    } else {
        for (std::size_t u = 0; u < schedule.globals.size(); ++u) {
            nlohmann::json entry;
            entry["u"] = u;
            entry["matrix"] = matrix_to_json(schedule.globals[u]);
            entries.push_back(std::move(entry));
        }
    }
    j["unitaries"] = std::move(entries);
    return j.dump();
}

UnitarySchedule schedule_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    UnitarySchedule schedule;
    schedule.mode = j.at("mode").get<std::string>() == "local" ? ScheduleMode::Local
                                                               : ScheduleMode::Global;
    schedule.ensemble = j.at("ensemble").get<std::string>() == "haar_cue"
                            ? Ensemble::HaarCUE
                            : Ensemble::CliffordSingleQubit;
    schedule.master_seed = j.at("master_seed").get<std::uint64_t>();
    schedule.n = j.at("N").get<int>();
    schedule.d = j.at("d").get<int>();
    Eigen::Index dim = 1;
    for (int k = 0; k < schedule.n; ++k) dim *= schedule.d;
    for (const auto& entry : j.at("unitaries")) {
        if (schedule.mode == ScheduleMode::Local) {
            LocalUnitary u;
            for (const auto& f : entry.at("factors"))
                u.factors.push_back(matrix_from_json(f, schedule.d, schedule.d));
            schedule.locals.push_back(std::move(u));
        } else {
            schedule.globals.push_back(matrix_from_json(entry.at("matrix"), dim, dim));
        }
    }
    return schedule;
}

}  // namespace xpv::randsrc
