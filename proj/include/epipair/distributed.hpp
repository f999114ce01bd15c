#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "epipair/engine.hpp"

namespace epipair {

// Wire framing: 4-byte big-endian length, then 1 kind byte plus body.
// Integers big-endian, doubles as IEEE-754 bit patterns, strings u32-length
// prefixed. The length covers the kind byte and body.
enum class MsgKind : std::uint8_t {
    Hello = 1,        // worker -> coord: version, thread capability
    Assign = 2,       // coord -> worker: worker id, mode, run config, file names
    DataBlock = 3,    // coord -> worker: raw labels/genotype file bytes
    TaskRange = 4,    // coord -> worker: [begin, end) of the enumeration
    ResultBlock = 5,  // worker -> coord: PairResults for part of the range
    Done = 6,         // worker -> coord carries StageTimings; reply is empty
    Abort = 7         // either direction: error string
};

constexpr std::uint8_t kProtocolVersion = 1;

enum class DistributionMode : std::uint8_t { ShipOnRun = 0, Preloaded = 1 };

struct ClusterConfig {
    std::string listen_host = "127.0.0.1";
    std::uint16_t listen_port = 0;  // 0 picks an ephemeral port
    unsigned expected_workers = 1;
    DistributionMode mode = DistributionMode::ShipOnRun;
    unsigned worker_threads = 0;  // 0: each worker uses its own setting
    double timeout_seconds = 120.0;  // max silent gap per connection
};

struct WorkerReport {
    std::uint32_t worker_id = 0;
    std::uint64_t tasks = 0;
    StageTimings timings;
};

struct ClusterReport {
    std::vector<PairResult> results;  // global enumeration order
    std::vector<WorkerReport> workers;
    double parse_seconds = 0.0;         // coordinator-side input loading
    double distribution_seconds = 0.0;  // DataBlock transmission, summed
    double collect_seconds = 0.0;       // handshake to last result, wall
    double total_seconds = 0.0;
};

// Binds and listens at construction so callers can learn the port before
// starting workers; run() accepts expected_workers connections and drives
// the protocol to completion. Any worker failure aborts the whole run.
class Coordinator {
public:
    Coordinator(ClusterConfig cfg, RunManifest manifest);
    ~Coordinator();
    Coordinator(const Coordinator&) = delete;
    Coordinator& operator=(const Coordinator&) = delete;

    std::uint16_t port() const { return port_; }
    ClusterReport run();

private:
    ClusterConfig cfg_;
    RunManifest manifest_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
};

ClusterReport coordinate(const ClusterConfig& cfg, const RunManifest& manifest);

struct WorkerOptions {
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;
    std::optional<std::filesystem::path> data_dir;  // required for Preloaded
    unsigned n_threads = 0;  // capability advertised in Hello; 0 = cores
    double timeout_seconds = 120.0;
    int connect_attempts = 50;  // spaced 100 ms apart
};

// Serves one coordinator session to completion; throws ClusterError
// subclasses on connection or protocol failures, DataError on bad inputs.
void run_worker(const WorkerOptions& opt);

} // namespace epipair
