#include "epipair/bench.hpp"

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <thread>

#include <nlohmann/json.hpp>

#include "epipair/distributed.hpp"
#include "epipair/errors.hpp"
#include "epipair/text_io.hpp"

namespace epipair {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string host_name() {
    char buf[256] = {};
    if (::gethostname(buf, sizeof buf - 1) != 0)
        return "unknown";
    return buf;
}

std::string checksum_hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(v));
    return buf;
}

} // namespace

CycleMetrics to_cycles(const StageTimings& timings, double frequency_hz) {
    if (!(frequency_hz > 0.0))
        throw InvalidConfig("frequency must be positive");
    CycleMetrics m;
    m.frequency_hz = frequency_hz;
    m.cycles_load = timings.load_seconds * frequency_hz;
    m.cycles_compute = timings.compute_seconds * frequency_hz;
    m.cycles_save = timings.save_seconds * frequency_hz;
    m.cycles_total = timings.total_seconds * frequency_hz;
    return m;
}

double slowdown(const CycleMetrics& subject, const CycleMetrics& baseline) {
    if (!(baseline.cycles_total > 0.0))
        throw ZeroBaseline("baseline run has no cycles");
    return subject.cycles_total / baseline.cycles_total;
}

std::uint64_t result_checksum(const std::vector<PairResult>& results) {
    std::uint64_t h = 14695981039346656037ULL;
    auto mix = [&h](std::uint64_t v, int bytes) {
        for (int i = 0; i < bytes; ++i) {
            h ^= (v >> (8 * i)) & 0xFF;
            h *= 1099511628211ULL;
        }
    };
    for (const PairResult& r : results) {
        mix(r.pair.file_a, 4);
        mix(r.pair.index_a, 4);
        mix(r.pair.file_b, 4);
        mix(r.pair.index_b, 4);
        for (double e : r.fold_errors)
            mix(static_cast<std::uint64_t>(std::llround(e * 1e12)), 8);
    }
    return h;
}

const char* kernel_name(Kernel k) {
    return k == Kernel::Scalar ? "scalar" : "bitpacked";
}

Kernel kernel_from_name(std::string_view name) {
    if (name == "scalar")
        return Kernel::Scalar;
    if (name == "bitpacked")
        return Kernel::BitPacked;
    throw InvalidConfig("unknown kernel '" + std::string(name) + "'");
}

double default_frequency_hz() {
    if (const char* env = std::getenv("EPI_FREQ_HZ")) {
        const double v = std::atof(env);
        if (v > 0.0)
            return v;
    }
    return 1e9;
}

double median(std::vector<double> values) {
    if (values.empty())
        throw InvalidConfig("median of no values");
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    if (values.size() % 2 == 1)
        return values[mid];
    return 0.5 * (values[mid - 1] + values[mid]);
}

namespace {

struct CellOutcome {
    StageTimings timings;
    std::uint64_t checksum = 0;
};

CellOutcome run_local_cell(const RunManifest& manifest,
                           const std::filesystem::path& out_path) {
    CellOutcome out;
    const auto t_total = Clock::now();

    const auto t_load = Clock::now();
    const LoadedInputs data = load_inputs(manifest);
    out.timings.load_seconds = seconds_since(t_load);

    const auto t_compute = Clock::now();
    std::vector<std::uint64_t> counts;
    for (const GenotypeFile& f : data.files)
        counts.push_back(f.variants.size());
    const std::uint64_t total = count_tasks(counts, manifest.pair_mode);
    std::vector<PairResult> results =
        run_task_range(data, manifest.mdr, manifest.pair_mode, 0, total,
                       manifest.n_threads, manifest.partitions_per_thread);
    results = select_top_pairs(std::move(results), manifest.mdr);
    out.timings.compute_seconds = seconds_since(t_compute);

    const auto t_save = Clock::now();
    write_results_csv(results, out_path);
    out.timings.save_seconds = seconds_since(t_save);

    out.timings.total_seconds = seconds_since(t_total);
    out.checksum = result_checksum(results);
    return out;
}

CellOutcome run_cluster_cell(const RunManifest& manifest, unsigned workers,
                             unsigned threads_per_worker,
                             const std::filesystem::path& out_path) {
    CellOutcome out;
    const auto t_total = Clock::now();

    ClusterConfig cluster;
    cluster.expected_workers = workers;
    cluster.mode = DistributionMode::ShipOnRun;
    cluster.worker_threads = threads_per_worker;

    Coordinator coord(cluster, manifest);
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> worker_errors(workers);
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&coord, &worker_errors, w] {
            try {
                WorkerOptions opt;
                opt.port = coord.port();
                run_worker(opt);
            } catch (...) {
                worker_errors[w] = std::current_exception();
            }
        });

    ClusterReport report;
    std::exception_ptr coord_error;
    try {
        report = coord.run();
    } catch (...) {
        coord_error = std::current_exception();
    }
    for (std::thread& th : pool)
        th.join();
    if (coord_error)
        std::rethrow_exception(coord_error);
    for (const std::exception_ptr& e : worker_errors)
        if (e)
            std::rethrow_exception(e);

    out.timings.load_seconds = report.parse_seconds;

    const auto t_select = Clock::now();
    const std::vector<PairResult> ranked =
        select_top_pairs(std::move(report.results), manifest.mdr);
    out.timings.compute_seconds = report.collect_seconds + seconds_since(t_select);

    const auto t_save = Clock::now();
    write_results_csv(ranked, out_path);
    out.timings.save_seconds = seconds_since(t_save);

    out.timings.total_seconds = seconds_since(t_total);
    out.checksum = result_checksum(ranked);
    return out;
}

std::string sanitize_status(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '\n' || c == '\r')
            c = ';';
    return s;
}

} // namespace

BenchReport run_grid(const ExperimentGrid& grid) {
    if (grid.file_counts.empty() || grid.thread_counts.empty() ||
        grid.worker_counts.empty() || grid.kernels.empty())
        throw InvalidConfig("every grid dimension needs at least one value");
    if (grid.repetitions == 0)
        throw InvalidConfig("repetitions must be at least 1");
    if (!(grid.frequency_hz > 0.0))
        throw InvalidConfig("frequency must be positive");
    for (unsigned fc : grid.file_counts)
        if (fc == 0 || fc > grid.manifest.files.size())
            throw InvalidConfig("file count " + std::to_string(fc) +
                                " outside the manifest's " +
                                std::to_string(grid.manifest.files.size()) +
                                " files");

    std::filesystem::path scratch = grid.scratch_dir;
    if (scratch.empty())
        scratch = std::filesystem::temp_directory_path() /
                  ("epipair-bench-" + std::to_string(::getpid()));
    std::error_code ec;
    std::filesystem::create_directories(scratch, ec);
    if (ec)
        throw IoError("cannot create " + scratch.string() + ": " + ec.message());

    BenchReport report;
    report.environment.host = host_name();
    report.environment.frequency_hz = grid.frequency_hz;
    report.environment.timestamp = utc_timestamp();

    for (unsigned files : grid.file_counts) {
        RunManifest manifest = grid.manifest;
        manifest.files.assign(grid.manifest.files.begin(),
                              grid.manifest.files.begin() + files);
        for (unsigned threads : grid.thread_counts)
            for (unsigned workers : grid.worker_counts)
                for (Kernel kernel : grid.kernels)
                    for (unsigned rep = 0; rep < grid.repetitions; ++rep) {
                        manifest.mdr.kernel = kernel;
                        manifest.n_threads = threads;

                        BenchRecord rec;
                        rec.files = files;
                        rec.threads = threads;
                        rec.workers = workers;
                        rec.kernel = kernel;
                        rec.rep = rep;

                        char cell[96];
                        std::snprintf(cell, sizeof cell,
                                      "results_f%u_t%u_w%u_%s_r%u.csv", files,
                                      threads, workers, kernel_name(kernel),
                                      rep);
                        try {
                            const CellOutcome outcome =
                                workers <= 1
                                    ? run_local_cell(manifest, scratch / cell)
                                    : run_cluster_cell(manifest, workers,
                                                       threads,
                                                       scratch / cell);
                            rec.timings = outcome.timings;
                            rec.checksum = outcome.checksum;
                            rec.cycles =
                                to_cycles(outcome.timings, grid.frequency_hz);
                        } catch (const std::exception& e) {
                            rec.status = sanitize_status(
                                std::string("failed: ") + e.what());
                        }
                        report.records.push_back(std::move(rec));
                    }
    }
    return report;
}

void emit_report_csv(const BenchReport& report,
                     const std::filesystem::path& path) {
    std::string text =
        "files,threads,workers,kernel,rep,load_s,compute_s,save_s,total_s,"
        "freq_hz,cycles_total,checksum,status\n";
    char buf[256];
    for (const BenchRecord& r : report.records) {
        std::snprintf(buf, sizeof buf,
                      "%u,%u,%u,%s,%u,%.6f,%.6f,%.6f,%.6f,%.9g,%.0f,%s,%s\n",
                      r.files, r.threads, r.workers, kernel_name(r.kernel),
                      r.rep, r.timings.load_seconds, r.timings.compute_seconds,
                      r.timings.save_seconds, r.timings.total_seconds,
                      report.environment.frequency_hz, r.cycles.cycles_total,
                      checksum_hex(r.checksum).c_str(), r.status.c_str());
        text += buf;
    }
    write_text_file(path, text);
}

void emit_report_json(const BenchReport& report,
                      const std::filesystem::path& path) {
    nlohmann::json j;
    j["environment"] = {{"host", report.environment.host},
                        {"frequency_hz", report.environment.frequency_hz},
                        {"timestamp", report.environment.timestamp}};
    j["records"] = nlohmann::json::array();
    for (const BenchRecord& r : report.records) {
        j["records"].push_back({{"files", r.files},
                                {"threads", r.threads},
                                {"workers", r.workers},
                                {"kernel", kernel_name(r.kernel)},
                                {"rep", r.rep},
                                {"load_s", r.timings.load_seconds},
                                {"compute_s", r.timings.compute_seconds},
                                {"save_s", r.timings.save_seconds},
                                {"total_s", r.timings.total_seconds},
                                {"cycles_load", r.cycles.cycles_load},
                                {"cycles_compute", r.cycles.cycles_compute},
                                {"cycles_save", r.cycles.cycles_save},
                                {"cycles_total", r.cycles.cycles_total},
                                {"checksum", checksum_hex(r.checksum)},
                                {"status", r.status}});
    }
    write_text_file(path, j.dump(2) + "\n");
}

BenchReport load_report_json(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw MalformedRow(path.string() + ": " + e.what());
    }
    BenchReport report;
    try {
        const auto& env = j.at("environment");
        report.environment.host = env.at("host").get<std::string>();
        report.environment.frequency_hz = env.at("frequency_hz").get<double>();
        report.environment.timestamp = env.at("timestamp").get<std::string>();
        for (const auto& rj : j.at("records")) {
            BenchRecord r;
            r.files = rj.at("files").get<unsigned>();
            r.threads = rj.at("threads").get<unsigned>();
            r.workers = rj.at("workers").get<unsigned>();
            r.kernel = kernel_from_name(rj.at("kernel").get<std::string>());
            r.rep = rj.at("rep").get<unsigned>();
            r.timings.load_seconds = rj.at("load_s").get<double>();
            r.timings.compute_seconds = rj.at("compute_s").get<double>();
            r.timings.save_seconds = rj.at("save_s").get<double>();
            r.timings.total_seconds = rj.at("total_s").get<double>();
            r.cycles.frequency_hz = report.environment.frequency_hz;
            r.cycles.cycles_load = rj.at("cycles_load").get<double>();
            r.cycles.cycles_compute = rj.at("cycles_compute").get<double>();
            r.cycles.cycles_save = rj.at("cycles_save").get<double>();
            r.cycles.cycles_total = rj.at("cycles_total").get<double>();
            r.checksum = std::stoull(rj.at("checksum").get<std::string>(),
                                     nullptr, 16);
            r.status = rj.at("status").get<std::string>();
            report.records.push_back(std::move(r));
        }
    } catch (const nlohmann::json::exception& e) {
        throw MalformedRow(path.string() + ": " + e.what());
    }
    return report;
}

} // namespace epipair
