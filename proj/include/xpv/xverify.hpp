#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "xpv/estimate.hpp"
#include "xpv/resample.hpp"

namespace xpv::xverify {

inline constexpr int kProtocolVersion = 1;
inline constexpr int kRecordBatchSize = 64;

/// Wire protocol: newline-terminated JSON objects over TCP, each with a
/// "type" field. Types: hello, schedule_offer, records, complete, report,
/// error, ack.
enum class ErrorCode { ScheduleMismatch, SessionFull, BadMessage };
std::string error_code_name(ErrorCode code);

struct SessionConfig {
    randsrc::SchedulePlan schedule_plan;
    estimate::HammingKernel kernel;
    estimate::Variant variant = estimate::Variant::UStatistic;
    resample::BootstrapConfig bootstrap;
    std::string transcript_path;  // empty = no transcript
    bool offer_matrices = true;   // matrices-on-the-wire (interoperable form)
};

struct PlatformProgress {
    int received_records = 0;
    bool complete = false;
};

struct SessionState {
    std::string session_id;
    randsrc::UnitarySchedule schedule;
    std::map<std::string, PlatformProgress> platforms;
    std::optional<estimate::EstimateReport> report;
};

/// The verifier of the two-platform topology: accepts exactly two platform
/// connections, offers the schedule, ingests records, and on both Complete
/// computes the fidelity report and sends it to both sides.
class Verifier {
  public:
    explicit Verifier(SessionConfig config);
    ~Verifier();

    /// Bind to address:port (port 0 = ephemeral); returns the bound port.
    int bind(const std::string& address, int port);
    /// Blocks until the session completes (or fails); returns final state.
    SessionState serve();
    int port() const { return port_; }

  private:
    SessionConfig config_;
    int listen_fd_ = -1;
    int port_ = 0;
};

enum class ClientSourceKind { Simulator, DatasetFile };

struct ClientSource {
    ClientSourceKind kind = ClientSourceKind::Simulator;
    qcore::StateSpec state;                // Simulator
    std::optional<std::uint64_t> shots;    // Simulator; nullopt = exact (theory side)
    std::uint64_t sampling_seed = 0;       // Simulator
    std::string dataset_path;              // DatasetFile
};

/// Hello -> schedule -> acquire/load -> stream records in batches -> Complete
/// -> Report.
estimate::EstimateReport client_run(const std::string& address, int port,
                                    const std::string& platform_id,
                                    const ClientSource& source);

/// Recompute the report from a transcript file; the report is a pure
/// function of the transcript.
estimate::EstimateReport replay_transcript(const std::string& transcript_path,
                                           const SessionConfig& config);

}  // namespace xpv::xverify
