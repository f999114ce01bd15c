#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "epipair/engine.hpp"

namespace epipair {

struct CycleMetrics {
    double frequency_hz = 0.0;
    double cycles_load = 0.0;
    double cycles_compute = 0.0;
    double cycles_save = 0.0;
    double cycles_total = 0.0;
};

// seconds * Hz, per stage.
CycleMetrics to_cycles(const StageTimings& timings, double frequency_hz);

// subject.cycles_total / baseline.cycles_total; ZeroBaseline when the
// baseline has no cycles.
double slowdown(const CycleMetrics& subject, const CycleMetrics& baseline);

// Order-sensitive FNV-1a over pair coordinates and fold errors rounded to
// 1e-12, so independently produced result vectors can be compared cheaply.
std::uint64_t result_checksum(const std::vector<PairResult>& results);

const char* kernel_name(Kernel k);
Kernel kernel_from_name(std::string_view name);

// EPI_FREQ_HZ when set and positive, otherwise 1e9.
double default_frequency_hz();

double median(std::vector<double> values);

struct ExperimentGrid {
    std::vector<unsigned> file_counts;    // prefix lengths of manifest.files
    std::vector<unsigned> thread_counts;
    std::vector<unsigned> worker_counts;  // 1 = plain in-process run
    std::vector<Kernel> kernels;
    unsigned repetitions = 3;
    double frequency_hz = 1e9;
    RunManifest manifest;  // template carrying the full file list
    std::filesystem::path scratch_dir;  // per-cell result files; temp if empty
};

struct BenchRecord {
    unsigned files = 0;
    unsigned threads = 0;
    unsigned workers = 0;
    Kernel kernel = Kernel::BitPacked;
    unsigned rep = 0;
    StageTimings timings;
    CycleMetrics cycles;
    std::uint64_t checksum = 0;
    std::string status = "ok";
};

struct BenchEnvironment {
    std::string host;
    double frequency_hz = 0.0;
    std::string timestamp;  // UTC, second resolution
};

struct BenchReport {
    BenchEnvironment environment;
    std::vector<BenchRecord> records;
};

// Runs every grid cell `repetitions` times, strictly sequentially so the
// timings stay honest. A failing cell is recorded with its reason and the
// grid moves on. Cells with workers > 1 run through a loopback cluster.
BenchReport run_grid(const ExperimentGrid& grid);

void emit_report_csv(const BenchReport& report,
                     const std::filesystem::path& path);
void emit_report_json(const BenchReport& report,
                      const std::filesystem::path& path);
BenchReport load_report_json(const std::filesystem::path& path);

} // namespace epipair
