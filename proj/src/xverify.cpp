#include "xpv/xverify.hpp"

#include <nlohmann/json.hpp>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <condition_variable>
#include <fstream>
#include <mutex>
#include <thread>

namespace xpv::xverify {

std::string error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::ScheduleMismatch: return "SCHEDULE_MISMATCH";
        case ErrorCode::SessionFull: return "SESSION_FULL";
        case ErrorCode::BadMessage: return "BAD_MESSAGE";
    }
    return "UNKNOWN";
}

namespace {

class LineSocket {
  public:
    explicit LineSocket(int fd) : fd_(fd) {}
    LineSocket(const LineSocket&) = delete;
    LineSocket& operator=(const LineSocket&) = delete;
    ~LineSocket() { close(); }

    void close() {
        if (fd_ >= 0) {
            ::shutdown(fd_, SHUT_RDWR);
            ::close(fd_);
            fd_ = -1;
        }
    }

    bool send_line(const std::string& line) {
        std::string framed = line;
        framed.push_back('\n');
        std::size_t sent = 0;
        while (sent < framed.size()) {
            const ssize_t n = ::send(fd_, framed.data() + sent, framed.size() - sent, MSG_NOSIGNAL);
            if (n <= 0) return false;
            sent += static_cast<std::size_t>(n);
        }
        return true;
    }

    bool recv_line(std::string& line) {
        line.clear();
        while (true) {
            const auto pos = buffer_.find('\n');
            if (pos != std::string::npos) {
                line = buffer_.substr(0, pos);
                buffer_.erase(0, pos + 1);
                return true;
            }
            char chunk[4096];
            const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
            if (n <= 0) return false;
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

  private:
    int fd_;
    std::string buffer_;
};

std::string error_message(ErrorCode code, const std::string& detail) {
    nlohmann::json j;
    j["type"] = "error";
    j["code"] = error_code_name(code);
    j["detail"] = detail;
    return j.dump();
}

struct Transcript {
    std::ofstream file;
    std::mutex mutex;

    void log(const std::string& direction, const std::string& platform,
             const std::string& message) {
        if (!file.is_open()) return;
        std::lock_guard lock(mutex);
        nlohmann::json j;
        j["dir"] = direction;
        j["platform"] = platform;
        j["ts"] = std::chrono::duration_cast<std::chrono::microseconds>(
                      std::chrono::system_clock::now().time_since_epoch())
                      .count();
        j["msg"] = nlohmann::json::parse(message);
        file << j.dump() << '\n';
    }
};

estimate::EstimateReport compute_report(
    std::map<std::string, measure::MeasurementDataset> datasets, const SessionConfig& config) {
    if (datasets.size() != 2) throw ProtocolError("report needs exactly two platform datasets");
    // Deterministic role assignment: platforms sorted by id.
    auto it = datasets.begin();
    const measure::MeasurementDataset& ds_1 = it->second;
    const measure::MeasurementDataset& ds_2 = std::next(it)->second;
    const estimate::CorrelatorTables tables =
        estimate::fidelity_tables(ds_1, ds_2, config.kernel, config.variant);
    estimate::EstimateReport report =
        estimate::estimate_fidelities(ds_1, ds_2, config.kernel, config.variant);
    return resample::annotate_report(report, tables, config.bootstrap);
}

}  // namespace

Verifier::Verifier(SessionConfig config) : config_(std::move(config)) {}

Verifier::~Verifier() {
    if (listen_fd_ >= 0) ::close(listen_fd_);
}

int Verifier::bind(const std::string& address, int port) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw ProtocolError("socket() failed");
    const int one = 1;
    setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (inet_pton(AF_INET, address.c_str(), &addr.sin_addr) != 1)
        throw ProtocolError("bad bind address");
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
        throw ProtocolError("bind() failed");
    if (::listen(listen_fd_, 8) != 0) throw ProtocolError("listen() failed");
    socklen_t len = sizeof addr;
    getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    return port_;
}

SessionState Verifier::serve() {
    if (listen_fd_ < 0) throw ProtocolError("serve() before bind()");

    SessionState session;
    session.session_id = "session-" + std::to_string(port_);
    session.schedule = randsrc::sample_schedule(config_.schedule_plan);
    const std::string ref = randsrc::schedule_ref(session.schedule);
    const std::string schedule_json = randsrc::schedule_to_json(session.schedule);

    Transcript transcript;
    if (!config_.transcript_path.empty()) transcript.file.open(config_.transcript_path);

    std::mutex session_mutex;
    std::condition_variable session_cv;
    std::map<std::string, measure::MeasurementDataset> datasets;
    std::map<std::string, std::map<int, measure::OutcomeRecord>> staged;
    int active_platforms = 0;
    bool failed = false;

    auto handle_client = [&](int fd) {
        LineSocket sock(fd);
        std::string line;
        std::string platform_id = "?";
        auto fail = [&](ErrorCode code, const std::string& detail) {
            const std::string msg = error_message(code, detail);
            transcript.log("out", platform_id, msg);
            sock.send_line(msg);
            std::lock_guard lock(session_mutex);
            failed = true;
            session_cv.notify_all();
        };

        try {
            if (!sock.recv_line(line)) return;
            const nlohmann::json hello = nlohmann::json::parse(line);
            if (hello.at("type") != "hello") {
                fail(ErrorCode::BadMessage, "expected hello");
                return;
            }
            platform_id = hello.at("platform_id").get<std::string>();
            transcript.log("in", platform_id, line);

            {
                std::lock_guard lock(session_mutex);
                if (active_platforms >= 2 || staged.count(platform_id)) {
                    const std::string msg =
                        error_message(ErrorCode::SessionFull, "session already has two platforms");
                    transcript.log("out", platform_id, msg);
                    sock.send_line(msg);
                    return;
                }
                ++active_platforms;
                staged[platform_id];
            }

            nlohmann::json offer;
            offer["type"] = "schedule_offer";
            if (config_.offer_matrices) {
                offer["schedule"] = nlohmann::json::parse(schedule_json);
            } else {
                offer["ensemble"] = config_.schedule_plan.ensemble == randsrc::Ensemble::HaarCUE
                                        ? "haar_cue"
                                        : "clifford_1q";
                offer["master_seed"] = config_.schedule_plan.master_seed;
                offer["N_U"] = config_.schedule_plan.n_u;
                offer["N"] = config_.schedule_plan.n;
                offer["d"] = config_.schedule_plan.d;
            }
            offer["schedule_ref"] = ref;
            const std::string offer_text = offer.dump();
            transcript.log("out", platform_id, offer_text);
            if (!sock.send_line(offer_text)) return;

            bool done = false;
            bool record_exact = false;
            while (!done) {
                if (!sock.recv_line(line)) return;
                nlohmann::json msg;
                try {
                    msg = nlohmann::json::parse(line);
                } catch (const nlohmann::json::exception&) {
                    fail(ErrorCode::BadMessage, "malformed JSON");
                    return;
                }
                transcript.log("in", platform_id, line);
                const std::string type = msg.value("type", "");
                if (type == "records") {
                    if (msg.at("schedule_ref").get<std::string>() != ref) {
                        fail(ErrorCode::ScheduleMismatch,
                             "records refer to a different unitary schedule");
                        return;
                    }
                    std::lock_guard lock(session_mutex);
                    auto& slot = staged[platform_id];
                    int last = -1;
                    for (const auto& entry : msg.at("records")) {
                        measure::OutcomeRecord rec = measure::record_from_json(entry.dump());
                        record_exact |= rec.exact;
                        last = rec.unitary_index;
                        slot.emplace(rec.unitary_index, std::move(rec));  // at-most-once
                    }
                    nlohmann::json ack;
                    ack["type"] = "ack";
                    ack["last_u"] = last;
                    const std::string ack_text = ack.dump();
                    transcript.log("out", platform_id, ack_text);
                    if (!sock.send_line(ack_text)) return;
                } else if (type == "complete") {
                    done = true;
                } else {
                    fail(ErrorCode::BadMessage, "unexpected message type " + type);
                    return;
                }
            }

            std::unique_lock lock(session_mutex);
            {
                measure::MeasurementDataset ds;
                ds.platform_id = platform_id;
                ds.schedule_ref = ref;
                ds.num_sites = session.schedule.n;
                ds.local_dim = session.schedule.d;
                ds.exact = record_exact;
                for (auto& [u, rec] : staged[platform_id]) ds.records.push_back(std::move(rec));
                datasets[platform_id] = std::move(ds);
                session.platforms[platform_id] = {
                    static_cast<int>(datasets[platform_id].records.size()), true};
            }
            if (datasets.size() == 2 && !session.report) {
                session.report = compute_report(datasets, config_);
                session_cv.notify_all();
            } else {
                session_cv.wait(lock, [&] { return session.report.has_value() || failed; });
            }
            if (session.report) {
                nlohmann::json report_msg;
                report_msg["type"] = "report";
                report_msg["report"] = nlohmann::json::parse(session.report->to_json());
                const std::string text = report_msg.dump();
                transcript.log("out", platform_id, text);
                lock.unlock();
                sock.send_line(text);
            }
        } catch (const std::exception& e) {
            fail(ErrorCode::BadMessage, e.what());
        }
    };

    std::vector<std::thread> workers;
    while (true) {
        {
            std::unique_lock lock(session_mutex);
            if (session.report || failed) break;
        }
        // Poll so the loop can exit once the session is settled even if no
        // further connection ever arrives.
        pollfd pfd{listen_fd_, POLLIN, 0};
        const int ready = ::poll(&pfd, 1, 50);
        if (ready < 0) break;
        if (ready == 0) continue;
        sockaddr_in peer{};
        socklen_t len = sizeof peer;
        const int fd = ::accept(listen_fd_, reinterpret_cast<sockaddr*>(&peer), &len);
        if (fd < 0) break;
        workers.emplace_back(handle_client, fd);
    }
    for (std::thread& worker : workers) worker.join();
    return session;
}

estimate::EstimateReport client_run(const std::string& address, int port,
                                    const std::string& platform_id, const ClientSource& source) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw ProtocolError("socket() failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (inet_pton(AF_INET, address.c_str(), &addr.sin_addr) != 1)
        throw ProtocolError("bad connect address");
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        ::close(fd);
        throw ProtocolError("connect() failed");
    }
    LineSocket sock(fd);

    nlohmann::json hello;
    hello["type"] = "hello";
    hello["platform_id"] = platform_id;
    hello["protocol_version"] = kProtocolVersion;
    if (!sock.send_line(hello.dump())) throw ProtocolError("send failed");

    std::string line;
    if (!sock.recv_line(line)) throw ProtocolError("verifier closed the connection");
    nlohmann::json offer = nlohmann::json::parse(line);
    if (offer.at("type") == "error")
        throw ProtocolError("verifier error: " + offer.at("code").get<std::string>());
    if (offer.at("type") != "schedule_offer") throw ProtocolError("expected schedule_offer");

    measure::MeasurementDataset ds;
    if (source.kind == ClientSourceKind::Simulator) {
        randsrc::UnitarySchedule schedule;
        if (offer.contains("schedule")) {
            schedule = randsrc::schedule_from_json(offer.at("schedule").dump());
        } else {
            randsrc::SchedulePlan plan;
            plan.ensemble = offer.at("ensemble").get<std::string>() == "haar_cue"
                                ? randsrc::Ensemble::HaarCUE
                                : randsrc::Ensemble::CliffordSingleQubit;
            plan.master_seed = offer.at("master_seed").get<std::uint64_t>();
            plan.n_u = offer.at("N_U").get<int>();
            plan.n = offer.at("N").get<int>();
            plan.d = offer.at("d").get<int>();
            schedule = randsrc::sample_schedule(plan);
        }
        const qcore::DensityMatrix rho = qcore::build_state(source.state);
        ds = measure::acquire_dataset(rho, schedule, source.shots, source.sampling_seed,
                                      platform_id);
    } else {
        std::ifstream in(source.dataset_path);
        if (!in) throw ProtocolError("cannot open dataset file " + source.dataset_path);
        ds = measure::read_dataset(in);
    }

    for (std::size_t start = 0; start < ds.records.size(); start += kRecordBatchSize) {
        nlohmann::json batch;
        batch["type"] = "records";
        batch["schedule_ref"] = ds.schedule_ref;
        nlohmann::json records = nlohmann::json::array();
        const std::size_t stop = std::min(ds.records.size(), start + kRecordBatchSize);
        for (std::size_t i = start; i < stop; ++i)
            records.push_back(nlohmann::json::parse(measure::record_to_json(ds.records[i])));
        batch["records"] = std::move(records);
        if (!sock.send_line(batch.dump())) throw ProtocolError("send failed mid-stream");
        if (!sock.recv_line(line)) throw ProtocolError("verifier closed mid-stream");
        const nlohmann::json reply = nlohmann::json::parse(line);
        if (reply.at("type") == "error")
            throw ProtocolError("verifier error: " + reply.at("code").get<std::string>());
        if (reply.at("type") != "ack") throw ProtocolError("expected ack");
    }

    nlohmann::json complete;
    complete["type"] = "complete";
    if (!sock.send_line(complete.dump())) throw ProtocolError("send failed");

    if (!sock.recv_line(line)) throw ProtocolError("verifier closed before report");
    const nlohmann::json reply = nlohmann::json::parse(line);
    if (reply.at("type") == "error")
        throw ProtocolError("verifier error: " + reply.at("code").get<std::string>());
    if (reply.at("type") != "report") throw ProtocolError("expected report");
    return estimate::EstimateReport::from_json(reply.at("report").dump());
}

estimate::EstimateReport replay_transcript(const std::string& transcript_path,
                                           const SessionConfig& config) {
    std::ifstream in(transcript_path);
    if (!in) throw ProtocolError("cannot open transcript " + transcript_path);
    std::map<std::string, std::map<int, measure::OutcomeRecord>> staged;
    std::map<std::string, bool> exact;
    std::string ref;
    int n = config.schedule_plan.n;
    int d = config.schedule_plan.d;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const nlohmann::json entry = nlohmann::json::parse(line);
        const nlohmann::json& msg = entry.at("msg");
        const std::string type = msg.value("type", "");
        if (entry.at("dir") == "out" && type == "schedule_offer") {
            ref = msg.at("schedule_ref").get<std::string>();
        } else if (entry.at("dir") == "in" && type == "records") {
            const std::string platform = entry.at("platform").get<std::string>();
            for (const auto& r : msg.at("records")) {
                measure::OutcomeRecord rec = measure::record_from_json(r.dump());
                exact[platform] = exact[platform] || rec.exact;
                staged[platform].emplace(rec.unitary_index, std::move(rec));
            }
        }
    }
    std::map<std::string, measure::MeasurementDataset> datasets;
    for (auto& [platform, records] : staged) {
        measure::MeasurementDataset ds;
        ds.platform_id = platform;
        ds.schedule_ref = ref;
        ds.num_sites = n;
        ds.local_dim = d;
        ds.exact = exact[platform];
        for (auto& [u, rec] : records) ds.records.push_back(std::move(rec));
        datasets[platform] = std::move(ds);
    }
    return compute_report(std::move(datasets), config);
}

}  // namespace xpv::xverify
