#include <chrono>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>

#include "epipair/bench.hpp"
#include "epipair/distributed.hpp"
#include "epipair/engine.hpp"
#include "epipair/errors.hpp"
#include "epipair/generator.hpp"
#include "epipair/genotype.hpp"
#include "epipair/mdr.hpp"

namespace {

using namespace epipair;

std::pair<std::string, std::uint16_t> split_host_port(const std::string& addr) {
    const std::size_t colon = addr.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == addr.size())
        throw CLI::ValidationError("address", "expected host:port, got '" + addr + "'");
    const std::string host = addr.substr(0, colon);
    unsigned long port = 0;
    try {
        port = std::stoul(addr.substr(colon + 1));
    } catch (const std::exception&) {
        throw CLI::ValidationError("address", "bad port in '" + addr + "'");
    }
    if (port > 65535)
        throw CLI::ValidationError("address", "port out of range in '" + addr + "'");
    return {host, static_cast<std::uint16_t>(port)};
}

PairMode pair_mode_from(const std::string& name) {
    return name == "distinct" ? PairMode::DistinctOnly : PairMode::CrossProduct;
}

void print_timings(const StageTimings& t) {
    std::fprintf(stderr,
                 "timings: load=%.3fs compute=%.3fs save=%.3fs total=%.3fs\n",
                 t.load_seconds, t.compute_seconds, t.save_seconds,
                 t.total_seconds);
}

struct RunFlags {
    std::vector<std::string> files;
    std::string labels;
    std::string out;
    MdrConfig mdr;
    std::string kernel = "bitpacked";
    std::string mode = "cross";
    std::string empty_cell = "low";
    std::string tie = "low";
    unsigned threads = 0;
    unsigned partitions_per_thread = 4;
    bool timings = false;
};

// Shared by run/serve/bench so their defaults stay aligned.
void add_mdr_flags(CLI::App& cmd, RunFlags& f, bool with_threads) {
    cmd.add_option("--files", f.files, "genotype CSV files, in file-id order")
        ->required()
        ->expected(-1);
    cmd.add_option("--labels", f.labels, "patient_id,status label CSV")
        ->required();
    cmd.add_option("--k", f.mdr.k, "cross-validation folds")
        ->capture_default_str();
    cmd.add_option("--top-fraction", f.mdr.top_fraction,
                   "fraction of pairs marked per fold")
        ->capture_default_str();
    cmd.add_option("--kernel", f.kernel, "counting kernel")
        ->check(CLI::IsMember({"scalar", "bitpacked"}))
        ->capture_default_str();
    cmd.add_option("--mode", f.mode,
                   "pair enumeration: cross (file pairs, self included) or "
                   "distinct (each variant pair once)")
        ->check(CLI::IsMember({"cross", "distinct"}))
        ->capture_default_str();
    cmd.add_option("--empty-cell", f.empty_cell,
                   "risk label for cells with no training patients")
        ->check(CLI::IsMember({"low", "high"}))
        ->capture_default_str();
    cmd.add_option("--tie", f.tie, "risk label when a cell ratio equals the threshold")
        ->check(CLI::IsMember({"low", "high"}))
        ->capture_default_str();
    cmd.add_option("--seed", f.mdr.seed, "fold-assignment seed")
        ->capture_default_str();
    if (with_threads)
        cmd.add_option("--threads", f.threads, "worker threads (0 = all cores)")
            ->capture_default_str();
}

RunManifest manifest_from(const RunFlags& f) {
    RunManifest m;
    for (const std::string& p : f.files)
        m.files.emplace_back(p);
    m.labels_path = f.labels;
    m.mdr = f.mdr;
    m.mdr.kernel = kernel_from_name(f.kernel);
    m.mdr.empty_cell_policy =
        f.empty_cell == "high" ? CellPolicy::HighRisk : CellPolicy::LowRisk;
    m.mdr.tie_policy = f.tie == "high" ? TiePolicy::High : TiePolicy::Low;
    m.pair_mode = pair_mode_from(f.mode);
    m.n_threads = f.threads;
    m.partitions_per_thread = f.partitions_per_thread;
    return m;
}

int dispatch(CLI::App& app, int argc, char** argv) {
    try {
        app.parse(argc, argv);
        return 0;
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ClusterError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"pairwise epistasis scan: MDR over every variant pair"};
    app.require_subcommand(1);

    // generate ---------------------------------------------------------------
    auto* gen = app.add_subcommand("generate", "write a synthetic cohort");
    auto gen_cfg = std::make_shared<GeneratorConfig>();
    auto gen_out = std::make_shared<std::string>();
    auto gen_no_gzip = std::make_shared<bool>(false);
    auto gen_plant = std::make_shared<std::vector<std::uint32_t>>();
    auto gen_cells = std::make_shared<std::vector<int>>(std::vector<int>{0, 4, 8});
    auto gen_p_high = std::make_shared<double>(0.9);
    auto gen_p_low = std::make_shared<double>(0.1);
    gen->add_option("--files", gen_cfg->n_files, "genotype files to write")
        ->capture_default_str();
    gen->add_option("--variants", gen_cfg->variants_per_file, "variants per file")
        ->capture_default_str();
    gen->add_option("--patients", gen_cfg->n_patients, "cohort size")
        ->capture_default_str();
    gen->add_option("--case-fraction", gen_cfg->case_fraction,
                    "case probability when no signal is planted")
        ->capture_default_str();
    gen->add_option("--seed", gen_cfg->seed, "generator seed")
        ->capture_default_str();
    gen->add_option("--out", *gen_out, "output directory")->required();
    gen->add_flag("--no-gzip", *gen_no_gzip, "write plain .csv files");
    gen->add_option("--plant", *gen_plant,
                    "plant a signal pair: file_a,index_a,file_b,index_b")
        ->delimiter(',');
    gen->add_option("--plant-cells", *gen_cells,
                    "high-risk cell indices (0..8) for the planted pair")
        ->delimiter(',')
        ->capture_default_str();
    gen->add_option("--p-high", *gen_p_high,
                    "case probability inside high-risk cells")
        ->capture_default_str();
    gen->add_option("--p-low", *gen_p_low,
                    "case probability outside high-risk cells")
        ->capture_default_str();
    gen->callback([=] {
        GeneratorConfig cfg = *gen_cfg;
        cfg.gzip = !*gen_no_gzip;
        if (!gen_plant->empty()) {
            if (gen_plant->size() != 4)
                throw CLI::ValidationError(
                    "--plant", "needs exactly file_a,index_a,file_b,index_b");
            PlantedSignal sig;
            sig.file_a = (*gen_plant)[0];
            sig.index_a = (*gen_plant)[1];
            sig.file_b = (*gen_plant)[2];
            sig.index_b = (*gen_plant)[3];
            sig.high_risk_cells = *gen_cells;
            sig.p_case_high = *gen_p_high;
            sig.p_case_low = *gen_p_low;
            cfg.planted = sig;
        }
        const CohortManifest manifest = generate_cohort(cfg, *gen_out);
        const std::filesystem::path cwd = std::filesystem::current_path();
        for (const std::filesystem::path& p : manifest.genotype_files)
            std::cout << p.lexically_proximate(cwd).generic_string() << "\n";
        std::cout << manifest.labels_file.lexically_proximate(cwd).generic_string()
                  << "\n";
    });

    // run ---------------------------------------------------------------------
    auto* run = app.add_subcommand("run", "score every pair and rank the best");
    auto run_flags = std::make_shared<RunFlags>();
    auto run_out = std::make_shared<std::string>();
    add_mdr_flags(*run, *run_flags, /*with_threads=*/true);
    run->add_option("--out", *run_out, "ranked results CSV path")->required();
    run->add_option("--partitions-per-thread", run_flags->partitions_per_thread,
                    "work partitions per thread")
        ->capture_default_str();
    run->add_flag("--timings", run_flags->timings, "print stage timings to stderr");
    run->callback([=] {
        RunManifest manifest = manifest_from(*run_flags);
        RunProgress progress;
        RunOutput out;
        try {
            out = run_all(manifest, &progress);
        } catch (...) {
            std::cerr << "run aborted after " << progress.completed_partitions
                      << " of " << progress.total_partitions
                      << " partitions\n";
            throw;
        }
        const std::vector<PairResult> ranked =
            select_top_pairs(std::move(out.results), manifest.mdr);
        const auto t_save = std::chrono::steady_clock::now();
        write_results_csv(ranked, *run_out);
        out.timings.save_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                          t_save)
                .count();
        out.timings.total_seconds = out.timings.load_seconds +
                                    out.timings.compute_seconds +
                                    out.timings.save_seconds;
        if (run_flags->timings)
            print_timings(out.timings);
        std::cerr << ranked.size() << " pairs written to " << *run_out << "\n";
    });

    // select -------------------------------------------------------------------
    auto* sel = app.add_subcommand(
        "select", "re-rank an existing results CSV without recomputing");
    auto sel_in = std::make_shared<std::string>();
    auto sel_out = std::make_shared<std::string>();
    auto sel_fraction = std::make_shared<double>(0.2);
    sel->add_option("--in", *sel_in, "results CSV to re-rank")->required();
    sel->add_option("--out", *sel_out, "ranked output CSV")->required();
    sel->add_option("--top-fraction", *sel_fraction,
                    "fraction of pairs marked per fold")
        ->capture_default_str();
    sel->callback([=] {
        const ParsedResults parsed = parse_results_csv(*sel_in);
        MdrConfig cfg;
        cfg.k = parsed.k;
        cfg.top_fraction = *sel_fraction;
        validate(cfg);
        const std::vector<PairResult> ranked =
            select_top_pairs(parsed.results, cfg);
        write_results_csv(ranked, *sel_out);
        std::cerr << ranked.size() << " pairs written to " << *sel_out << "\n";
    });

    // bench ---------------------------------------------------------------------
    auto* bench = app.add_subcommand(
        "bench", "run a files x threads x workers scaling grid");
    auto bench_flags = std::make_shared<RunFlags>();
    auto bench_file_counts = std::make_shared<std::vector<unsigned>>(
        std::vector<unsigned>{1});
    auto bench_threads = std::make_shared<std::vector<unsigned>>(
        std::vector<unsigned>{1});
    auto bench_workers = std::make_shared<std::vector<unsigned>>(
        std::vector<unsigned>{1});
    auto bench_kernels = std::make_shared<std::vector<std::string>>(
        std::vector<std::string>{"bitpacked"});
    auto bench_reps = std::make_shared<unsigned>(3);
    auto bench_freq = std::make_shared<double>(default_frequency_hz());
    auto bench_out_csv = std::make_shared<std::string>();
    auto bench_out_json = std::make_shared<std::string>();
    auto bench_scratch = std::make_shared<std::string>();
    add_mdr_flags(*bench, *bench_flags, /*with_threads=*/false);
    bench->add_option("--file-counts", *bench_file_counts,
                      "file-count axis (prefixes of --files)")
        ->delimiter(',')
        ->capture_default_str();
    bench->add_option("--thread-counts", *bench_threads, "thread axis")
        ->delimiter(',')
        ->capture_default_str();
    bench->add_option("--worker-counts", *bench_workers,
                      "worker axis (1 = no cluster)")
        ->delimiter(',')
        ->capture_default_str();
    bench->add_option("--kernels", *bench_kernels, "kernel axis")
        ->delimiter(',')
        ->capture_default_str();
    bench->add_option("--reps", *bench_reps, "repetitions per cell")
        ->capture_default_str();
    bench->add_option("--freq-hz", *bench_freq,
                      "processor frequency for cycle normalization "
                      "(default: EPI_FREQ_HZ or 1e9)")
        ->capture_default_str();
    bench->add_option("--out-csv", *bench_out_csv, "report CSV path");
    bench->add_option("--out-json", *bench_out_json, "report JSON path");
    bench->add_option("--scratch", *bench_scratch,
                      "directory for per-cell result files");
    bench->callback([=] {
        if (bench_out_csv->empty() && bench_out_json->empty())
            throw CLI::ValidationError("bench",
                                       "need --out-csv and/or --out-json");
        ExperimentGrid grid;
        grid.manifest = manifest_from(*bench_flags);
        grid.file_counts = *bench_file_counts;
        grid.thread_counts = *bench_threads;
        grid.worker_counts = *bench_workers;
        for (const std::string& name : *bench_kernels)
            grid.kernels.push_back(kernel_from_name(name));
        grid.repetitions = *bench_reps;
        grid.frequency_hz = *bench_freq;
        grid.scratch_dir = *bench_scratch;
        const BenchReport report = run_grid(grid);
        if (!bench_out_csv->empty())
            emit_report_csv(report, *bench_out_csv);
        if (!bench_out_json->empty())
            emit_report_json(report, *bench_out_json);
        unsigned failed = 0;
        for (const BenchRecord& r : report.records)
            if (r.status != "ok")
                ++failed;
        std::cerr << report.records.size() << " records ("
                  << failed << " failed)\n";
    });

    // serve ---------------------------------------------------------------------
    auto* serve = app.add_subcommand(
        "serve", "coordinate a worker cluster over TCP");
    auto serve_flags = std::make_shared<RunFlags>();
    auto serve_listen = std::make_shared<std::string>("127.0.0.1:0");
    auto serve_workers = std::make_shared<unsigned>(1);
    auto serve_mode = std::make_shared<std::string>("ship");
    auto serve_out = std::make_shared<std::string>();
    auto serve_timeout = std::make_shared<double>(120.0);
    add_mdr_flags(*serve, *serve_flags, /*with_threads=*/true);
    serve->add_option("--listen", *serve_listen, "host:port (port 0 = ephemeral)")
        ->capture_default_str();
    serve->add_option("--workers", *serve_workers, "workers to wait for")
        ->capture_default_str();
    serve->add_option("--dist-mode", *serve_mode,
                      "ship: transmit data; preloaded: workers read local copies")
        ->check(CLI::IsMember({"ship", "preloaded"}))
        ->capture_default_str();
    serve->add_option("--out", *serve_out, "ranked results CSV path")->required();
    serve->add_option("--timeout", *serve_timeout,
                      "max silent seconds per connection")
        ->capture_default_str();
    serve->callback([=] {
        const auto [host, port] = split_host_port(*serve_listen);
        ClusterConfig cluster;
        cluster.listen_host = host;
        cluster.listen_port = port;
        cluster.expected_workers = *serve_workers;
        cluster.mode = *serve_mode == "preloaded" ? DistributionMode::Preloaded
                                                  : DistributionMode::ShipOnRun;
        cluster.worker_threads = serve_flags->threads;
        cluster.timeout_seconds = *serve_timeout;
        const RunManifest manifest = manifest_from(*serve_flags);

        Coordinator coord(cluster, manifest);
        std::cout << "listening on " << host << ":" << coord.port() << std::endl;
        ClusterReport report = coord.run();
        const std::vector<PairResult> ranked =
            select_top_pairs(std::move(report.results), manifest.mdr);
        write_results_csv(ranked, *serve_out);
        std::cerr << ranked.size() << " pairs written to " << *serve_out
                  << " (parse=" << report.parse_seconds
                  << "s distribution=" << report.distribution_seconds
                  << "s collect=" << report.collect_seconds << "s)\n";
        for (const WorkerReport& w : report.workers)
            std::cerr << "worker " << w.worker_id << ": " << w.tasks
                      << " tasks, compute=" << w.timings.compute_seconds
                      << "s\n";
    });

    // work ---------------------------------------------------------------------
    auto* work = app.add_subcommand("work", "join a cluster as a worker");
    auto work_connect = std::make_shared<std::string>();
    auto work_data = std::make_shared<std::string>();
    auto work_threads = std::make_shared<unsigned>(0);
    auto work_timeout = std::make_shared<double>(120.0);
    work->add_option("--connect", *work_connect, "coordinator host:port")
        ->required();
    work->add_option("--data", *work_data,
                     "local data directory (preloaded mode)");
    work->add_option("--threads", *work_threads, "compute threads (0 = all cores)")
        ->capture_default_str();
    work->add_option("--timeout", *work_timeout,
                     "max silent seconds on the connection")
        ->capture_default_str();
    work->callback([=] {
        const auto [host, port] = split_host_port(*work_connect);
        WorkerOptions opt;
        opt.host = host;
        opt.port = port;
        if (!work_data->empty())
            opt.data_dir = std::filesystem::path(*work_data);
        opt.n_threads = *work_threads;
        opt.timeout_seconds = *work_timeout;
        run_worker(opt);
    });

    // report ---------------------------------------------------------------------
    auto* rep = app.add_subcommand("report", "summarize a bench JSON report");
    auto rep_in = std::make_shared<std::string>();
    rep->add_option("--in", *rep_in, "bench report JSON")->required();
    rep->callback([=] {
        const BenchReport report = load_report_json(*rep_in);
        std::cout << "host " << report.environment.host << ", "
                  << report.environment.frequency_hz << " Hz, "
                  << report.environment.timestamp << "\n";
        // median compute time per cell
        std::map<std::tuple<unsigned, unsigned, unsigned, std::string>,
                 std::vector<double>>
            cells;
        std::map<unsigned, std::set<std::uint64_t>> checksums_by_files;
        for (const BenchRecord& r : report.records) {
            if (r.status != "ok") {
                std::cout << "cell files=" << r.files << " threads=" << r.threads
                          << " workers=" << r.workers << " kernel="
                          << kernel_name(r.kernel) << " rep=" << r.rep << ": "
                          << r.status << "\n";
                continue;
            }
            cells[{r.files, r.threads, r.workers, kernel_name(r.kernel)}]
                .push_back(r.timings.compute_seconds);
            checksums_by_files[r.files].insert(r.checksum);
        }
        for (auto& [key, times] : cells) {
            const auto& [files, threads, workers, kernel] = key;
            std::printf(
                "files=%u threads=%u workers=%u kernel=%s median_compute=%.6fs "
                "(%zu reps)\n",
                files, threads, workers, kernel.c_str(), median(times),
                times.size());
        }
        for (const auto& [files, sums] : checksums_by_files)
            std::printf("files=%u checksums %s\n", files,
                        sums.size() == 1 ? "agree" : "DISAGREE");
    });

    return dispatch(app, argc, argv);
}
