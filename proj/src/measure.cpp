#include "xpv/measure.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

namespace xpv::measure {

namespace {

Eigen::Index pow_ll(int base, int exp) {
    Eigen::Index v = 1;
    for (int i = 0; i < exp; ++i) v *= base;
    return v;
}

// In-place v -> (I (x) F (x) I) v with F acting on site k.
void apply_factor(qcore::Vec& v, const randsrc::Mat& f, int site, int n, int d) {
    const Eigen::Index inner = pow_ll(d, n - 1 - site);
    const Eigen::Index outer = v.size() / (inner * d);
    qcore::Vec block(d);
    for (Eigen::Index o = 0; o < outer; ++o)
        for (Eigen::Index i = 0; i < inner; ++i) {
            const Eigen::Index base = o * inner * d + i;
            for (int a = 0; a < d; ++a) block(a) = v(base + a * inner);
            for (int a = 0; a < d; ++a) {
                std::complex<double> sum = 0;
                for (int b = 0; b < d; ++b) sum += f(a, b) * block(b);
                v(base + a * inner) = sum;
            }
        }
}

qcore::Vec rotate_pure(const qcore::PureState& psi, const randsrc::LocalUnitary& u) {
    qcore::Vec v = psi.amplitudes;
    for (int k = 0; k < psi.num_sites; ++k)
        apply_factor(v, u.factors[static_cast<std::size_t>(k)], k, psi.num_sites, psi.local_dim);
    return v;
}

// rho -> (F_k on rows) rho, then the adjoint on columns, site by site.
qcore::Mat rotate_density(const qcore::Mat& rho, const randsrc::LocalUnitary& u, int n, int d) {
    qcore::Mat m = rho;
    const Eigen::Index dim = m.rows();
    qcore::Vec col(dim);
    for (int k = 0; k < n; ++k) {
        const randsrc::Mat& f = u.factors[static_cast<std::size_t>(k)];
        for (Eigen::Index c = 0; c < dim; ++c) {
            col = m.col(c);
            apply_factor(col, f, k, n, d);
            m.col(c) = col;
        }
        for (Eigen::Index r = 0; r < dim; ++r) {
            col = m.row(r).transpose().conjugate();
            apply_factor(col, f, k, n, d);
            m.row(r) = col.conjugate().transpose();
        }
    }
    return m;
}

OutcomeDistribution clamp_distribution(Eigen::VectorXd probs, int n, int d) {
    for (Eigen::Index i = 0; i < probs.size(); ++i)
        if (probs(i) < 0 && probs(i) > -1e-12) probs(i) = 0;
    OutcomeDistribution dist;
    dist.probs = std::move(probs);
    dist.num_sites = n;
    dist.local_dim = d;
    return dist;
}

}  // namespace

OutcomeDistribution born_probabilities(const qcore::PureState& psi,
                                       const randsrc::LocalUnitary& u) {
    if (u.num_sites() != psi.num_sites || u.local_dim() != psi.local_dim)
        throw ShapeError("unitary does not match state layout");
    return clamp_distribution(rotate_pure(psi, u).cwiseAbs2(), psi.num_sites, psi.local_dim);
}

OutcomeDistribution born_probabilities(const qcore::PureState& psi,
                                       const randsrc::Mat& global_u) {
    if (global_u.rows() != psi.dim()) throw ShapeError("unitary does not match state dimension");
    return clamp_distribution((global_u * psi.amplitudes).cwiseAbs2(), psi.num_sites,
                              psi.local_dim);
}

OutcomeDistribution born_probabilities(const qcore::DensityMatrix& rho,
                                       const randsrc::LocalUnitary& u) {
    if (u.num_sites() != rho.num_sites || u.local_dim() != rho.local_dim)
        throw ShapeError("unitary does not match state layout");
    const qcore::Mat rotated = rotate_density(rho.matrix, u, rho.num_sites, rho.local_dim);
    return clamp_distribution(rotated.diagonal().real(), rho.num_sites, rho.local_dim);
}

OutcomeDistribution born_probabilities(const qcore::DensityMatrix& rho,
                                       const randsrc::Mat& global_u) {
    if (global_u.rows() != rho.dim()) throw ShapeError("unitary does not match state dimension");
    // diag(U rho U+) without forming the full product
    Eigen::VectorXd probs(rho.dim());
    for (Eigen::Index s = 0; s < rho.dim(); ++s)
        probs(s) = (global_u.row(s) * rho.matrix * global_u.row(s).adjoint())(0, 0).real();
    return clamp_distribution(std::move(probs), rho.num_sites, rho.local_dim);
}

OutcomeRecord sample_counts(const OutcomeDistribution& dist, std::uint64_t shots,
                            randsrc::RngStream& rng) {
    if (shots < 1) throw ProtocolError("shots must be >= 1");
    Eigen::VectorXd cdf(dist.probs.size());
    double acc = 0;
    for (Eigen::Index i = 0; i < dist.probs.size(); ++i) {
        acc += dist.probs(i);
        cdf(i) = acc;
    }
    std::uniform_real_distribution<double> uniform(0.0, acc);
    OutcomeRecord rec;
    rec.shots = shots;
    const double* begin = cdf.data();
    const double* end = cdf.data() + cdf.size();
    for (std::uint64_t shot = 0; shot < shots; ++shot) {
        const double x = uniform(rng);
        const auto it = std::upper_bound(begin, end, x);
        const auto idx = static_cast<std::uint64_t>(std::min<std::ptrdiff_t>(
            it - begin, cdf.size() - 1));
        ++rec.counts[idx];
    }
    return rec;
}

OutcomeRecord exact_record(const OutcomeDistribution& dist) {
    OutcomeRecord rec;
    rec.exact = true;
    rec.shots = 0;
    rec.probs = dist.probs;
    return rec;
}

namespace {

template <typename State>
MeasurementDataset acquire_impl(const State& state, const randsrc::UnitarySchedule& schedule,
                                std::optional<std::uint64_t> shots, std::uint64_t sampling_seed,
                                const std::string& platform_id, int n, int d) {
    MeasurementDataset ds;
    ds.platform_id = platform_id;
    ds.schedule_ref = randsrc::schedule_ref(schedule);
    ds.num_sites = n;
    ds.local_dim = d;
    ds.exact = !shots.has_value();
    ds.global_mode = schedule.mode == randsrc::ScheduleMode::Global;
    ds.records.reserve(static_cast<std::size_t>(schedule.size()));
    for (int u = 0; u < schedule.size(); ++u) {
        const OutcomeDistribution dist =
            schedule.mode == randsrc::ScheduleMode::Local
                ? born_probabilities(state, schedule.locals[static_cast<std::size_t>(u)])
                : born_probabilities(state, schedule.globals[static_cast<std::size_t>(u)]);
        OutcomeRecord rec;
        if (ds.exact) {
            rec = exact_record(dist);
        } else {
            randsrc::RngStream rng =
                randsrc::make_stream(sampling_seed, static_cast<std::uint64_t>(u), 0);
            rec = sample_counts(dist, *shots, rng);
        }
        rec.unitary_index = u;
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

}  // namespace

MeasurementDataset acquire_dataset(const qcore::DensityMatrix& state,
                                   const randsrc::UnitarySchedule& schedule,
                                   std::optional<std::uint64_t> shots,
                                   std::uint64_t sampling_seed, const std::string& platform_id) {
    return acquire_impl(state, schedule, shots, sampling_seed, platform_id, state.num_sites,
                        state.local_dim);
}

MeasurementDataset acquire_dataset(const qcore::PureState& state,
                                   const randsrc::UnitarySchedule& schedule,
                                   std::optional<std::uint64_t> shots,
                                   std::uint64_t sampling_seed, const std::string& platform_id) {
    return acquire_impl(state, schedule, shots, sampling_seed, platform_id, state.num_sites,
                        state.local_dim);
}

MeasurementDataset marginalize_dataset(const MeasurementDataset& ds,
                                       const std::vector<int>& keep) {
    const int n = ds.num_sites;
    const int d = ds.local_dim;
    for (std::size_t i = 0; i < keep.size(); ++i) {
        if (keep[i] < 0 || keep[i] >= n) throw InvalidSubsystem("site index out of range");
        if (i > 0 && keep[i] <= keep[i - 1])
            throw InvalidSubsystem("keep list must be strictly increasing");
    }
    const int nk = static_cast<int>(keep.size());
    const Eigen::Index dim = pow_ll(d, n);
    const Eigen::Index dim_keep = pow_ll(d, nk);

    // index map: drop the digits of traced sites
    std::vector<std::uint64_t> remap(static_cast<std::size_t>(dim));
    for (Eigen::Index s = 0; s < dim; ++s) {
        std::uint64_t m = 0;
        for (int j = 0; j < nk; ++j) {
            const int site = keep[static_cast<std::size_t>(j)];
            const auto digit = (s / pow_ll(d, n - 1 - site)) % d;
            m = m * static_cast<std::uint64_t>(d) + static_cast<std::uint64_t>(digit);
        }
        remap[static_cast<std::size_t>(s)] = m;
    }

    MeasurementDataset out;
    out.platform_id = ds.platform_id;
    out.num_sites = nk;
    out.local_dim = d;
    out.exact = ds.exact;
    out.global_mode = ds.global_mode;
    out.schedule_ref = ds.schedule_ref + "|keep:";
    for (std::size_t i = 0; i < keep.size(); ++i)
        out.schedule_ref += (i ? "," : "") + std::to_string(keep[i]);
    out.records.reserve(ds.records.size());
    for (const OutcomeRecord& rec : ds.records) {
        OutcomeRecord m;
        m.unitary_index = rec.unitary_index;
        m.exact = rec.exact;
        m.shots = rec.shots;
        if (rec.exact) {
            m.probs = Eigen::VectorXd::Zero(dim_keep);
            for (Eigen::Index s = 0; s < dim; ++s)
                m.probs(static_cast<Eigen::Index>(remap[static_cast<std::size_t>(s)])) +=
                    rec.probs(s);
        } else {
            for (const auto& [s, c] : rec.counts) m.counts[remap[static_cast<std::size_t>(s)]] += c;
        }
        out.records.push_back(std::move(m));
    }
    return out;
}

std::string record_to_json(const OutcomeRecord& rec) {
    nlohmann::json j;
    j["u"] = rec.unitary_index;
    j["shots"] = rec.shots;
    if (rec.exact) {
        nlohmann::json probs = nlohmann::json::array();
        for (Eigen::Index i = 0; i < rec.probs.size(); ++i) probs.push_back(rec.probs(i));
        j["probs"] = std::move(probs);
    } else {
        nlohmann::json counts = nlohmann::json::object();
        for (const auto& [s, c] : rec.counts) counts[std::to_string(s)] = c;
        j["counts"] = std::move(counts);
    }
    return j.dump();
}

OutcomeRecord record_from_json(const std::string& line) {
    const nlohmann::json j = nlohmann::json::parse(line);
    OutcomeRecord rec;
    rec.unitary_index = j.at("u").get<int>();
    rec.shots = j.at("shots").get<std::uint64_t>();
    if (j.contains("probs")) {
        rec.exact = true;
        const auto& probs = j.at("probs");
        rec.probs.resize(static_cast<Eigen::Index>(probs.size()));
        for (std::size_t i = 0; i < probs.size(); ++i)
            rec.probs(static_cast<Eigen::Index>(i)) = probs.at(i).get<double>();
    } else {
        for (const auto& [key, value] : j.at("counts").items())
            rec.counts[std::stoull(key)] = value.get<std::uint64_t>();
    }
    return rec;
}

void write_dataset(std::ostream& out, const MeasurementDataset& ds) {
    nlohmann::json header;
    header["platform_id"] = ds.platform_id;
    header["schedule_ref"] = ds.schedule_ref;
    header["N"] = ds.num_sites;
    header["d"] = ds.local_dim;
    header["N_U"] = ds.records.size();
    header["exact"] = ds.exact;
    header["global"] = ds.global_mode;
    out << header.dump() << '\n';
    for (const OutcomeRecord& rec : ds.records) out << record_to_json(rec) << '\n';
}

MeasurementDataset read_dataset(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ProtocolError("empty dataset file");
    const nlohmann::json header = nlohmann::json::parse(line);
    MeasurementDataset ds;
    ds.platform_id = header.at("platform_id").get<std::string>();
    ds.schedule_ref = header.at("schedule_ref").get<std::string>();
    ds.num_sites = header.at("N").get<int>();
    ds.local_dim = header.at("d").get<int>();
    ds.exact = header.at("exact").get<bool>();
    ds.global_mode = header.value("global", false);
    const auto n_u = header.at("N_U").get<std::size_t>();
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ds.records.push_back(record_from_json(line));
    }
    if (ds.records.size() != n_u) throw ProtocolError("dataset record count does not match header");
    return ds;
}

}  // namespace xpv::measure
