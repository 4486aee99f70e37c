#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <future>
#include <sstream>
#include <thread>

#include "xpv/xverify.hpp"

using namespace xpv;
using nlohmann::json;

namespace {

xverify::SessionConfig base_config(int n, int n_u) {
    xverify::SessionConfig config;
    config.schedule_plan.n = n;
    config.schedule_plan.n_u = n_u;
    config.schedule_plan.master_seed = 99;
    config.kernel = estimate::HammingKernel{estimate::KernelMode::Local, 2, n};
    config.variant = estimate::Variant::UStatistic;
    config.bootstrap.n_resamples = 100;
    config.bootstrap.seed = 7;
    return config;
}

qcore::StateSpec product_spec(int n, std::uint64_t seed) {
    qcore::StateSpec spec;
    spec.kind = qcore::StateKind::PureProduct;
    spec.num_sites = n;
    spec.seed = seed;
    return spec;
}

// Minimal blocking NDJSON socket for driving the protocol by hand.
struct RawClient {
    int fd = -1;
    std::string buffer;

    void connect_to(int port) {
        fd = ::socket(AF_INET, SOCK_STREAM, 0);
        REQUIRE(fd >= 0);
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(static_cast<std::uint16_t>(port));
        inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
        REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
    }
    void send_json(const json& j) {
        const std::string line = j.dump() + "\n";
        REQUIRE(::send(fd, line.data(), line.size(), 0) == ssize_t(line.size()));
    }
    json recv_json() {
        while (true) {
            const auto pos = buffer.find('\n');
            if (pos != std::string::npos) {
                const std::string line = buffer.substr(0, pos);
                buffer.erase(0, pos + 1);
                return json::parse(line);
            }
            char chunk[4096];
            const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
            REQUIRE(n > 0);
            buffer.append(chunk, std::size_t(n));
        }
    }
    ~RawClient() {
        if (fd >= 0) ::close(fd);
    }
};

}  // namespace

TEST_CASE("a full session reproduces the in-process estimate bit for bit") {
    const int n = 3, n_u = 40;
    xverify::SessionConfig config = base_config(n, n_u);
    config.transcript_path = "test_session_transcript.ndjson";

    xverify::Verifier verifier(config);
    const int port = verifier.bind("127.0.0.1", 0);
    auto server = std::async(std::launch::async, [&] { return verifier.serve(); });

    xverify::ClientSource source_1;
    source_1.state = product_spec(n, 5);
    source_1.shots = 200;
    source_1.sampling_seed = 11;
    xverify::ClientSource source_2;
    source_2.state = product_spec(n, 5);
    source_2.shots = 200;
    source_2.sampling_seed = 12;

    auto client_1 = std::async(std::launch::async, [&] {
        return xverify::client_run("127.0.0.1", port, "platformA", source_1);
    });
    auto client_2 = std::async(std::launch::async, [&] {
        return xverify::client_run("127.0.0.1", port, "platformB", source_2);
    });

    const estimate::EstimateReport report_1 = client_1.get();
    const estimate::EstimateReport report_2 = client_2.get();
    const xverify::SessionState session = server.get();

    REQUIRE(session.report.has_value());
    CHECK(report_1.to_json() == report_2.to_json());
    CHECK(report_1.to_json() == session.report->to_json());
    CHECK(std::abs(report_1.f_max - 1.0) < 5 * std::max(report_1.se_f_max, 0.02) + 0.05);

    // In-process pipeline on the identical records.
    const randsrc::UnitarySchedule schedule = randsrc::sample_schedule(config.schedule_plan);
    const qcore::DensityMatrix rho = qcore::build_state(source_1.state);
    const measure::MeasurementDataset ds_a =
        measure::acquire_dataset(rho, schedule, source_1.shots, source_1.sampling_seed,
                                 "platformA");
    const measure::MeasurementDataset ds_b =
        measure::acquire_dataset(rho, schedule, source_2.shots, source_2.sampling_seed,
                                 "platformB");
    const estimate::CorrelatorTables tables =
        estimate::fidelity_tables(ds_a, ds_b, config.kernel, config.variant);
    const estimate::EstimateReport direct = resample::annotate_report(
        estimate::estimate_fidelities(ds_a, ds_b, config.kernel, config.variant), tables,
        config.bootstrap);
    CHECK(report_1.to_json() == direct.to_json());

    // The transcript is a complete replay log.
    const estimate::EstimateReport replayed =
        xverify::replay_transcript(config.transcript_path, config);
    CHECK(replayed.to_json() == report_1.to_json());

    // No platform-to-platform forwarding: outbound messages carry only the
    // schedule, acks, and the final report.
    std::ifstream transcript(config.transcript_path);
    std::string line;
    while (std::getline(transcript, line)) {
        const json entry = json::parse(line);
        if (entry.at("dir") == "out") {
            const std::string type = entry.at("msg").at("type").get<std::string>();
            CHECK((type == "schedule_offer" || type == "ack" || type == "report"));
        }
    }
    std::remove(config.transcript_path.c_str());
}

TEST_CASE("records for a foreign schedule are rejected with no report") {
    const int n = 2, n_u = 8;
    const xverify::SessionConfig config = base_config(n, n_u);

    // Dataset acquired under a different schedule -> different content hash.
    randsrc::SchedulePlan foreign_plan = config.schedule_plan;
    foreign_plan.master_seed = 12345;
    const randsrc::UnitarySchedule foreign = randsrc::sample_schedule(foreign_plan);
    const qcore::DensityMatrix rho = qcore::build_state(product_spec(n, 3));
    const measure::MeasurementDataset ds =
        measure::acquire_dataset(rho, foreign, 50, 1, "rogue");
    const std::string path = "test_foreign_dataset.ndjson";
    {
        std::ofstream out(path);
        measure::write_dataset(out, ds);
    }

    xverify::Verifier verifier(config);
    const int port = verifier.bind("127.0.0.1", 0);
    auto server = std::async(std::launch::async, [&] { return verifier.serve(); });

    xverify::ClientSource source;
    source.kind = xverify::ClientSourceKind::DatasetFile;
    source.dataset_path = path;
    CHECK_THROWS_AS(xverify::client_run("127.0.0.1", port, "rogue", source), ProtocolError);

    const xverify::SessionState session = server.get();
    CHECK_FALSE(session.report.has_value());
    std::remove(path.c_str());
}

TEST_CASE("a third platform is turned away while the session still completes") {
    const int n = 2, n_u = 6;
    const xverify::SessionConfig config = base_config(n, n_u);

    xverify::Verifier verifier(config);
    const int port = verifier.bind("127.0.0.1", 0);
    auto server = std::async(std::launch::async, [&] { return verifier.serve(); });

    RawClient a, b;
    a.connect_to(port);
    b.connect_to(port);
    a.send_json({{"type", "hello"}, {"platform_id", "A"}, {"protocol_version", 1}});
    const json offer_a = a.recv_json();
    REQUIRE(offer_a.at("type") == "schedule_offer");
    b.send_json({{"type", "hello"}, {"platform_id", "B"}, {"protocol_version", 1}});
    const json offer_b = b.recv_json();
    REQUIRE(offer_b.at("type") == "schedule_offer");

    // Both platform slots are now taken.
    RawClient c;
    c.connect_to(port);
    c.send_json({{"type", "hello"}, {"platform_id", "C"}, {"protocol_version", 1}});
    const json rejection = c.recv_json();
    CHECK(rejection.at("type") == "error");
    CHECK(rejection.at("code") == "SESSION_FULL");

    // A and B finish the protocol normally.
    const randsrc::UnitarySchedule schedule =
        randsrc::schedule_from_json(offer_a.at("schedule").dump());
    const std::string ref = offer_a.at("schedule_ref").get<std::string>();
    const qcore::DensityMatrix rho = qcore::build_state(product_spec(n, 4));
    auto stream_records = [&](RawClient& client, std::uint64_t seed, const std::string& id) {
        const measure::MeasurementDataset ds =
            measure::acquire_dataset(rho, schedule, 30, seed, id);
        json records = json::array();
        for (const measure::OutcomeRecord& rec : ds.records)
            records.push_back(json::parse(measure::record_to_json(rec)));
        client.send_json({{"type", "records"}, {"schedule_ref", ref}, {"records", records}});
        CHECK(client.recv_json().at("type") == "ack");
        client.send_json({{"type", "complete"}});
    };
    stream_records(a, 21, "A");
    stream_records(b, 22, "B");
    CHECK(a.recv_json().at("type") == "report");
    CHECK(b.recv_json().at("type") == "report");

    const xverify::SessionState session = server.get();
    CHECK(session.report.has_value());
}

TEST_CASE("theory and experiment clients can mix exact and sampled records") {
    const int n = 2, n_u = 30;
    const xverify::SessionConfig config = base_config(n, n_u);
    xverify::Verifier verifier(config);
    const int port = verifier.bind("127.0.0.1", 0);
    auto server = std::async(std::launch::async, [&] { return verifier.serve(); });

    xverify::ClientSource theory;
    theory.state = product_spec(n, 6);
    theory.shots = std::nullopt;  // exact probabilities
    xverify::ClientSource experiment;
    experiment.state = product_spec(n, 6);
    experiment.shots = 300;
    experiment.sampling_seed = 31;

    auto client_1 = std::async(std::launch::async, [&] {
        return xverify::client_run("127.0.0.1", port, "theory", theory);
    });
    auto client_2 = std::async(std::launch::async, [&] {
        return xverify::client_run("127.0.0.1", port, "experiment", experiment);
    });
    const estimate::EstimateReport r1 = client_1.get();
    const estimate::EstimateReport r2 = client_2.get();
    server.get();
    CHECK(r1.to_json() == r2.to_json());
    CHECK(std::abs(r1.f_max - 1.0) < 0.2);
}
