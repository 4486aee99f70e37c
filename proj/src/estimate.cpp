#include "xpv/estimate.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <sstream>

namespace xpv::estimate {

namespace {

Eigen::Index pow_ll(int base, int exp) {
    Eigen::Index v = 1;
    for (int i = 0; i < exp; ++i) v *= base;
    return v;
}

int hamming_sites(std::uint64_t s, std::uint64_t t, int n, int d) {
    if (d == 2) return static_cast<int>(std::popcount(s ^ t));
    int dist = 0;
    for (int k = 0; k < n; ++k) {
        if (s % static_cast<std::uint64_t>(d) != t % static_cast<std::uint64_t>(d)) ++dist;
        s /= static_cast<std::uint64_t>(d);
        t /= static_cast<std::uint64_t>(d);
    }
    return dist;
}

// Site-factorized transform of the (-d)^(-D) kernel: applies
// M = (1 + 1/d) I - (1/d) J independently along each site axis, O(D N d).
Eigen::VectorXd kernel_transform(const Eigen::VectorXd& p, int n, int d) {
    Eigen::VectorXd v = p;
    const double inv_d = 1.0 / d;
    for (int k = 0; k < n; ++k) {
        const Eigen::Index inner = pow_ll(d, n - 1 - k);
        const Eigen::Index outer = v.size() / (inner * d);
        for (Eigen::Index o = 0; o < outer; ++o)
            for (Eigen::Index i = 0; i < inner; ++i) {
                const Eigen::Index base = o * inner * d + i;
                double group = 0;
                for (int a = 0; a < d; ++a) group += v(base + a * inner);
                for (int a = 0; a < d; ++a)
                    v(base + a * inner) = (1.0 + inv_d) * v(base + a * inner) - inv_d * group;
            }
    }
    return v;
}

struct SparseCounts {
    std::vector<std::uint64_t> keys;
    std::vector<double> values;  // raw counts
    double total = 0;
};

SparseCounts flatten(const measure::OutcomeRecord& rec) {
    SparseCounts s;
    s.keys.reserve(rec.counts.size());
    s.values.reserve(rec.counts.size());
    for (const auto& [key, count] : rec.counts) {
        s.keys.push_back(key);
        s.values.push_back(static_cast<double>(count));
        s.total += static_cast<double>(count);
    }
    return s;
}

double weight_scale(const HammingKernel& kernel) {
    return static_cast<double>(pow_ll(kernel.d, kernel.n));
}

// Raw second moment T = sum_{s,s'} w(s,s') n_s m_{s'} over sparse counts.
double sparse_pair_sum(const SparseCounts& a, const SparseCounts& b,
                       const HammingKernel& kernel) {
    const double dn = weight_scale(kernel);
    if (kernel.mode == KernelMode::Global) {
        // w = D for equal strings, -1 otherwise
        double dot = 0;
        std::size_t j = 0;
        for (std::size_t i = 0; i < a.keys.size(); ++i) {
            while (j < b.keys.size() && b.keys[j] < a.keys[i]) ++j;
            if (j < b.keys.size() && b.keys[j] == a.keys[i]) dot += a.values[i] * b.values[j];
        }
        return (dn + 1.0) * dot - a.total * b.total;
    }
    const double inv_d = 1.0 / kernel.d;
    double sum = 0;
    for (std::size_t i = 0; i < a.keys.size(); ++i) {
        double row = 0;
        for (std::size_t j = 0; j < b.keys.size(); ++j) {
            const int dist = hamming_sites(a.keys[i], b.keys[j], kernel.n, kernel.d);
            double w = 1.0;
            for (int q = 0; q < dist; ++q) w *= -inv_d;
            row += w * b.values[j];
        }
        sum += a.values[i] * row;
    }
    return dn * sum;
}

// Correlator of an exact-probability record against anything.
double exact_vs_any(const measure::OutcomeRecord& exact, const measure::OutcomeRecord& other,
                    const HammingKernel& kernel) {
    const double dn = weight_scale(kernel);
    if (kernel.mode == KernelMode::Global) {
        double dot = 0;
        if (other.exact) {
            dot = exact.probs.dot(other.probs);
        } else {
            for (const auto& [s, c] : other.counts)
                dot += exact.probs(static_cast<Eigen::Index>(s)) * static_cast<double>(c) /
                       static_cast<double>(other.shots);
        }
        return (dn + 1.0) * dot - 1.0;
    }
    const Eigen::VectorXd q = kernel_transform(exact.probs, kernel.n, kernel.d);
    double sum = 0;
    if (other.exact) {
        sum = q.dot(other.probs);
    } else {
        for (const auto& [s, c] : other.counts)
            sum += q(static_cast<Eigen::Index>(s)) * static_cast<double>(c) /
                   static_cast<double>(other.shots);
    }
    return dn * sum;
}

}  // namespace

double pair_correlator(const measure::OutcomeRecord& rec_i, const measure::OutcomeRecord& rec_j,
                       const HammingKernel& kernel, Variant variant, bool same_dataset) {
    if (rec_i.unitary_index != rec_j.unitary_index)
        throw ProtocolError("pair_correlator: mismatched unitary indices");
    if (rec_i.exact) return exact_vs_any(rec_i, rec_j, kernel);
    if (rec_j.exact) return exact_vs_any(rec_j, rec_i, kernel);

    const SparseCounts a = flatten(rec_i);
    if (!same_dataset) {
        const SparseCounts b = flatten(rec_j);
        return sparse_pair_sum(a, b, kernel) / (a.total * b.total);
    }
    const double t = sparse_pair_sum(a, a, kernel);
    if (variant == Variant::PlugIn) return t / (a.total * a.total);
    if (a.total < 2) throw ProtocolError("U-statistic needs at least 2 shots");
    // Replace the s = s' diagonal (weight d^N) by n_s (n_s - 1).
    return (t - weight_scale(kernel) * a.total) / (a.total * (a.total - 1.0));
}

namespace {

void check_compatible(const measure::MeasurementDataset& ds_i,
                      const measure::MeasurementDataset& ds_j) {
    if (ds_i.num_sites != ds_j.num_sites || ds_i.local_dim != ds_j.local_dim)
        throw ShapeError("datasets have different layouts");
    if (ds_i.schedule_ref != ds_j.schedule_ref)
        throw ProtocolError("schedule_ref mismatch: datasets were not measured with the same "
                            "shared unitaries");
}

}  // namespace

std::vector<double> correlator_table(const measure::MeasurementDataset& ds_i,
                                     const measure::MeasurementDataset& ds_j,
                                     const HammingKernel& kernel, Variant variant) {
    check_compatible(ds_i, ds_j);
    const bool same = ds_i.platform_id == ds_j.platform_id;
    std::map<int, const measure::OutcomeRecord*> by_index;
    for (const auto& rec : ds_j.records) by_index[rec.unitary_index] = &rec;
    std::vector<double> table;
    table.reserve(ds_i.records.size());
    for (const auto& rec : ds_i.records) {
        const auto it = by_index.find(rec.unitary_index);
        if (it == by_index.end()) continue;
        table.push_back(pair_correlator(rec, *it->second, kernel, variant, same));
    }
    if (table.empty()) throw ProtocolError("datasets share no unitary indices");
    return table;
}

double estimate_overlap(const measure::MeasurementDataset& ds_i,
                        const measure::MeasurementDataset& ds_j, const HammingKernel& kernel,
                        Variant variant) {
    const std::vector<double> table = correlator_table(ds_i, ds_j, kernel, variant);
    return std::accumulate(table.begin(), table.end(), 0.0) / static_cast<double>(table.size());
}

CorrelatorTables fidelity_tables(const measure::MeasurementDataset& ds_1,
                                 const measure::MeasurementDataset& ds_2,
                                 const HammingKernel& kernel, Variant variant) {
    CorrelatorTables tables;
    // Cross terms between independent datasets are already unbiased; the
    // variant only matters for the auto terms.
    tables.cross = correlator_table(ds_1, ds_2, kernel, Variant::PlugIn);
    tables.auto_1 = correlator_table(ds_1, ds_1, kernel, variant);
    tables.auto_2 = correlator_table(ds_2, ds_2, kernel, variant);
    tables.pool_allowed = ds_1.exact == ds_2.exact;
    return tables;
}

FidelityPoint fidelities_from_tables(const CorrelatorTables& tables,
                                     const std::vector<int>& indices) {
    auto mean_over = [&](const std::vector<double>& table) {
        double sum = 0;
        if (indices.empty()) {
            for (const double v : table) sum += v;
            return sum / static_cast<double>(table.size());
        }
        for (const int i : indices) sum += table[static_cast<std::size_t>(i)];
        return sum / static_cast<double>(indices.size());
    };
    FidelityPoint point;
    point.overlap_12 = mean_over(tables.cross);
    point.purity_1 = mean_over(tables.auto_1);
    point.purity_2 = mean_over(tables.auto_2);
    if (point.purity_1 <= 0 || point.purity_2 <= 0) {
        point.unreliable = true;  // finite-N_M fluctuation, counted not thrown
        return point;
    }
    double denom_max = std::max(point.purity_1, point.purity_2);
    if (tables.pool_allowed) {
        // When the two purity estimates are statistically indistinguishable
        // the pooled mean estimates max{p, p} = p with lower variance, and
        // its shot noise cancels against the cross term's. Judge
        // distinguishability by the standard error of the per-unitary
        // purity difference.
        double sum_d = 0, sum_d2 = 0;
        double count = 0;
        auto accumulate_diff = [&](int i) {
            const double d = tables.auto_1[static_cast<std::size_t>(i)] -
                             tables.auto_2[static_cast<std::size_t>(i)];
            sum_d += d;
            sum_d2 += d * d;
            count += 1.0;
        };
        if (indices.empty()) {
            for (int i = 0; i < static_cast<int>(tables.auto_1.size()); ++i) accumulate_diff(i);
        } else {
            for (const int i : indices) accumulate_diff(i);
        }
        if (count >= 2) {
            const double mean_d = sum_d / count;
            const double var_d = std::max(0.0, sum_d2 / count - mean_d * mean_d);
            const double se_diff = std::sqrt(var_d / (count - 1.0));
            if (std::abs(point.purity_1 - point.purity_2) <= 3.0 * se_diff)
                denom_max = 0.5 * (point.purity_1 + point.purity_2);
        } else if (point.purity_1 == point.purity_2) {
            denom_max = point.purity_1;
        }
    }
    point.f_max = point.overlap_12 / denom_max;
    point.f_gm = point.overlap_12 / std::sqrt(point.purity_1 * point.purity_2);
    return point;
}

EstimateReport estimate_fidelities(const measure::MeasurementDataset& ds_1,
                                   const measure::MeasurementDataset& ds_2,
                                   const HammingKernel& kernel, Variant variant) {
    const CorrelatorTables tables = fidelity_tables(ds_1, ds_2, kernel, variant);
    const FidelityPoint point = fidelities_from_tables(tables);
    EstimateReport report;
    report.overlap_12 = point.overlap_12;
    report.purity_1 = point.purity_1;
    report.purity_2 = point.purity_2;
    report.f_max = point.f_max;
    report.f_gm = point.f_gm;
    report.unreliable = point.unreliable;
    report.n_u = static_cast<int>(tables.cross.size());
    report.n_m1 = ds_1.records.empty() ? 0 : ds_1.records.front().shots;
    report.n_m2 = ds_2.records.empty() ? 0 : ds_2.records.front().shots;
    report.estimator_variant = variant;
    return report;
}

GlobalCorrelationEstimate global_correlation_form(const measure::MeasurementDataset& ds_1,
                                                  const measure::MeasurementDataset& ds_2,
                                                  std::uint64_t reference_string) {
    check_compatible(ds_1, ds_2);
    if (!ds_1.global_mode || !ds_2.global_mode)
        throw ModeError("global correlation form needs whole-register unitary data");
    if (!ds_1.exact || !ds_2.exact)
        throw ModeError("global correlation form needs exact probabilities");
    if (ds_1.records.size() != ds_2.records.size())
        throw ProtocolError("datasets cover different unitary counts");
    const auto n_u = ds_1.records.size();
    const auto s = static_cast<Eigen::Index>(reference_string);
    double mx = 0, my = 0;
    for (std::size_t u = 0; u < n_u; ++u) {
        mx += ds_1.records[u].probs(s);
        my += ds_2.records[u].probs(s);
    }
    mx /= static_cast<double>(n_u);
    my /= static_cast<double>(n_u);
    double cov = 0, vx = 0, vy = 0;
    for (std::size_t u = 0; u < n_u; ++u) {
        const double dx = ds_1.records[u].probs(s) - mx;
        const double dy = ds_2.records[u].probs(s) - my;
        cov += dx * dy;
        vx += dx * dx;
        vy += dy * dy;
    }
    if (vx <= 0 || vy <= 0) throw DegenerateInput("zero variance at reference string");
    GlobalCorrelationEstimate est;
    est.f_gm_pearson = cov / std::sqrt(vx * vy);
    est.f_max_maxnorm = cov / std::max(vx, vy);
    return est;
}

std::string EstimateReport::to_json() const {
    nlohmann::json j;
    j["overlap_12"] = overlap_12;
    j["purity_1"] = purity_1;
    j["purity_2"] = purity_2;
    j["f_max"] = f_max;
    j["f_gm"] = f_gm;
    j["se_f_max"] = se_f_max;
    j["se_f_gm"] = se_f_gm;
    j["bias_f_max"] = bias_f_max;
    j["bias_f_gm"] = bias_f_gm;
    j["n_u"] = n_u;
    j["n_m1"] = n_m1;
    j["n_m2"] = n_m2;
    j["estimator_variant"] = estimator_variant == Variant::PlugIn ? "plugin" : "ustat";
    j["unreliable"] = unreliable;
    return j.dump();
}

EstimateReport EstimateReport::from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    EstimateReport r;
    r.overlap_12 = j.at("overlap_12").get<double>();
    r.purity_1 = j.at("purity_1").get<double>();
    r.purity_2 = j.at("purity_2").get<double>();
    r.f_max = j.at("f_max").get<double>();
    r.f_gm = j.at("f_gm").get<double>();
    r.se_f_max = j.at("se_f_max").get<double>();
    r.se_f_gm = j.at("se_f_gm").get<double>();
    r.bias_f_max = j.at("bias_f_max").get<double>();
    r.bias_f_gm = j.at("bias_f_gm").get<double>();
    r.n_u = j.at("n_u").get<int>();
    r.n_m1 = j.at("n_m1").get<std::uint64_t>();
    r.n_m2 = j.at("n_m2").get<std::uint64_t>();
    r.estimator_variant =
        j.at("estimator_variant").get<std::string>() == "plugin" ? Variant::PlugIn
                                                                 : Variant::UStatistic;
    r.unreliable = j.at("unreliable").get<bool>();
    return r;
}

std::string EstimateReport::to_table() const {
    std::ostringstream out;
    char line[128];
    auto row = [&](const char* name, double value) {
        std::snprintf(line, sizeof line, "%-12s %14.8f\n", name, value);
        out << line;
    };
    row("overlap_12", overlap_12);
    row("purity_1", purity_1);
    row("purity_2", purity_2);
    row("f_max", f_max);
    row("f_gm", f_gm);
    row("se_f_max", se_f_max);
    row("se_f_gm", se_f_gm);
    row("bias_f_max", bias_f_max);
    row("bias_f_gm", bias_f_gm);
    std::snprintf(line, sizeof line, "%-12s %14d\n", "n_u", n_u);
    out << line;
    std::snprintf(line, sizeof line, "%-12s %14llu\n", "n_m1",
                  static_cast<unsigned long long>(n_m1));
    out << line;
    std::snprintf(line, sizeof line, "%-12s %14llu\n", "n_m2",
                  static_cast<unsigned long long>(n_m2));
    out << line;
    if (unreliable) out << "flag         UNRELIABLE\n";
    return out.str();
}

}  // namespace xpv::estimate
