#include "epipair/engine.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

#include "epipair/errors.hpp"
#include "epipair/text_io.hpp"

namespace epipair {

namespace {

std::uint64_t checked_u64(unsigned __int128 v, const char* what) {
    if (v > static_cast<unsigned __int128>(UINT64_MAX))
        throw InvalidConfig(std::string(what) + " overflows 64 bits");
    return static_cast<std::uint64_t>(v);
}

// Materialized task lists are meant for desk-scale runs; whole-genome counts
// go through count_tasks instead.
constexpr std::uint64_t kMaxMaterializedTasks = 200'000'000;

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
}

} // namespace

std::uint64_t count_tasks(const std::vector<std::uint64_t>& variants_per_file,
                          PairMode mode) {
    unsigned __int128 total_variants = 0;
    unsigned __int128 sum_squares = 0;
    for (std::uint64_t m : variants_per_file) {
        total_variants += m;
        sum_squares += static_cast<unsigned __int128>(m) * m;
    }
    if (mode == PairMode::CrossProduct) {
        // sum over i<=j of m_i*m_j
        const unsigned __int128 s2 = total_variants * total_variants;
        return checked_u64((s2 + sum_squares) / 2, "cross-product task count");
    }
    return checked_u64(total_variants * (total_variants - 1) / 2,
                       "distinct task count");
}

std::vector<PairKey> enumerate_pairs(const std::vector<GenotypeFile>& files,
                                     PairMode mode) {
    std::vector<std::uint64_t> counts;
    counts.reserve(files.size());
    for (const GenotypeFile& f : files)
        counts.push_back(f.variants.size());
    const std::uint64_t total = count_tasks(counts, mode);
    if (total > kMaxMaterializedTasks)
        throw InvalidConfig("task list of " + std::to_string(total) +
                            " pairs is too large to materialize");

    std::vector<PairKey> tasks;
    tasks.reserve(static_cast<std::size_t>(total));
    const std::uint32_t n_files = static_cast<std::uint32_t>(files.size());
    if (mode == PairMode::CrossProduct) {
        for (std::uint32_t i = 0; i < n_files; ++i)
            for (std::uint32_t j = i; j < n_files; ++j)
                for (std::uint32_t a = 0; a < counts[i]; ++a)
                    for (std::uint32_t b = 0; b < counts[j]; ++b)
                        tasks.push_back({i, a, j, b});
        return tasks;
    }
    // DistinctOnly: unordered pairs of distinct global variants, file-major.
    for (std::uint32_t i = 0; i < n_files; ++i)
        for (std::uint32_t a = 0; a < counts[i]; ++a) {
            for (std::uint32_t b = a + 1; b < counts[i]; ++b)
                tasks.push_back({i, a, i, b});
            for (std::uint32_t j = i + 1; j < n_files; ++j)
                for (std::uint32_t b = 0; b < counts[j]; ++b)
                    tasks.push_back({i, a, j, b});
        }
    return tasks;
}

std::vector<Partition> partition_tasks(std::uint64_t total,
                                       std::uint64_t n_partitions) {
    if (n_partitions == 0)
        throw InvalidConfig("partition count must be positive");
    std::vector<Partition> parts;
    parts.reserve(static_cast<std::size_t>(n_partitions));
    const std::uint64_t base = total / n_partitions;
    const std::uint64_t rem = total % n_partitions;
    std::uint64_t begin = 0;
    for (std::uint64_t p = 0; p < n_partitions; ++p) {
        const std::uint64_t size = base + (p < rem ? 1 : 0);
        parts.push_back({p, begin, begin + size});
        begin += size;
    }
    return parts;
}

unsigned resolve_threads(unsigned requested) {
    if (requested > 0)
        return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

LoadedInputs load_inputs(const RunManifest& manifest) {
    if (manifest.files.empty())
        throw InvalidConfig("no genotype files given");
    LoadedInputs data;
    data.labels = parse_labels(manifest.labels_path);
    data.files.reserve(manifest.files.size());
    for (std::size_t i = 0; i < manifest.files.size(); ++i) {
        GenotypeFile f = parse_genotype_file(manifest.files[i],
                                             data.labels.size());
        f.file_id = static_cast<std::uint32_t>(i);
        data.files.push_back(std::move(f));
    }
    return data;
}

std::vector<PairResult> run_task_range(const LoadedInputs& data,
                                       const MdrConfig& cfg, PairMode mode,
                                       std::uint64_t begin, std::uint64_t end,
                                       unsigned n_threads,
                                       unsigned partitions_per_thread,
                                       RunProgress* progress) {
    if (begin > end)
        throw InvalidConfig("task range begin exceeds end");
    const std::vector<PairKey> tasks = enumerate_pairs(data.files, mode);
    if (end > tasks.size())
        throw InvalidConfig("task range exceeds " +
                            std::to_string(tasks.size()) + " enumerated tasks");

    const MdrContext ctx(data.labels, cfg);
    std::vector<std::vector<PackedVariant>> packed;
    if (cfg.kernel == Kernel::BitPacked) {
        packed.resize(data.files.size());
        for (std::size_t i = 0; i < data.files.size(); ++i) {
            packed[i].reserve(data.files[i].variants.size());
            for (const VariantRecord& rec : data.files[i].variants)
                packed[i].push_back(pack_variant(rec));
        }
    }

    const unsigned threads = resolve_threads(n_threads);
    const std::uint64_t span = end - begin;
    const std::uint64_t n_parts = std::max<std::uint64_t>(
        1, static_cast<std::uint64_t>(threads) *
               std::max(1u, partitions_per_thread));
    const std::vector<Partition> parts = partition_tasks(span, n_parts);
    if (progress) {
        progress->total_partitions = parts.size();
        progress->completed_partitions = 0;
    }

    std::vector<std::vector<PairResult>> buffers(parts.size());
    std::atomic<std::uint64_t> next_partition{0};
    std::atomic<std::uint64_t> completed{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&] {
        try {
            for (;;) {
                const std::uint64_t p =
                    next_partition.fetch_add(1, std::memory_order_relaxed);
                if (p >= parts.size() || failed.load(std::memory_order_relaxed))
                    return;
                const Partition& part = parts[p];
                std::vector<PairResult>& out = buffers[p];
                out.reserve(part.size());
                for (std::uint64_t t = part.begin; t != part.end; ++t) {
                    if (failed.load(std::memory_order_relaxed))
                        return;
                    const PairKey key = tasks[static_cast<std::size_t>(begin + t)];
                    const VariantRecord& va =
                        data.files[key.file_a].variants[key.index_a];
                    const VariantRecord& vb =
                        data.files[key.file_b].variants[key.index_b];
                    out.push_back(
                        cfg.kernel == Kernel::BitPacked
                            ? mdr_pair_packed(ctx, packed[key.file_a][key.index_a],
                                              packed[key.file_b][key.index_b], key)
                            : mdr_pair_scalar(ctx, va, vb, key));
                }
                completed.fetch_add(1, std::memory_order_relaxed);
            }
        } catch (...) {
            std::scoped_lock lock(error_mutex);
            if (!failed.exchange(true))
                first_error = std::current_exception();
        }
    };

    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (unsigned i = 0; i < threads; ++i)
            pool.emplace_back(worker);
        for (std::thread& th : pool)
            th.join();
    }

    if (progress)
        progress->completed_partitions = completed.load();
    if (first_error)
        std::rethrow_exception(first_error);

    std::vector<PairResult> results;
    results.reserve(static_cast<std::size_t>(span));
    for (std::vector<PairResult>& buf : buffers) {
        for (PairResult& r : buf)
            results.push_back(std::move(r));
        buf.clear();
        buf.shrink_to_fit();
    }
    return results;
}

RunOutput run_all(const RunManifest& manifest, RunProgress* progress) {
    validate(manifest.mdr);
    RunOutput out;

    const auto t_load = std::chrono::steady_clock::now();
    const LoadedInputs data = load_inputs(manifest);
    out.timings.load_seconds = seconds_since(t_load);

    const auto t_compute = std::chrono::steady_clock::now();
    std::vector<std::uint64_t> counts;
    for (const GenotypeFile& f : data.files)
        counts.push_back(f.variants.size());
    const std::uint64_t total = count_tasks(counts, manifest.pair_mode);
    out.results = run_task_range(data, manifest.mdr, manifest.pair_mode, 0,
                                 total, manifest.n_threads,
                                 manifest.partitions_per_thread, progress);
    out.timings.compute_seconds = seconds_since(t_compute);
    out.timings.total_seconds =
        out.timings.load_seconds + out.timings.compute_seconds;
    return out;
}

void write_results_csv(const std::vector<PairResult>& results,
                       const std::filesystem::path& path) {
    const std::size_t k = results.empty() ? 0 : results.front().fold_errors.size();
    std::string text = "file_a,index_a,file_b,index_b";
    for (std::size_t f = 0; f < k; ++f)
        text += ",err_fold" + std::to_string(f);
    text += ",mean_error,consistency,self_pair\n";

    char buf[64];
    for (const PairResult& r : results) {
        text += std::to_string(r.pair.file_a) + ',' +
                std::to_string(r.pair.index_a) + ',' +
                std::to_string(r.pair.file_b) + ',' +
                std::to_string(r.pair.index_b);
        for (double e : r.fold_errors) {
            std::snprintf(buf, sizeof buf, ",%.6f", e);
            text += buf;
        }
        std::snprintf(buf, sizeof buf, ",%.6f", r.mean_error);
        text += buf;
        text += ',' + std::to_string(r.consistency) + ',' +
                (r.pair.is_self() ? "1" : "0") + '\n';
    }
    write_text_file(path, text);
}

namespace {

std::uint64_t parse_u64_field(std::string_view s, const std::filesystem::path& path,
                              std::size_t line_no) {
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw MalformedRow(path.string() + ":" + std::to_string(line_no) +
                           ": expected integer, got '" + std::string(s) + "'");
    return v;
}

double parse_double_field(std::string_view s, const std::filesystem::path& path,
                          std::size_t line_no) {
    double v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw MalformedRow(path.string() + ":" + std::to_string(line_no) +
                           ": expected number, got '" + std::string(s) + "'");
    return v;
}

} // namespace

ParsedResults parse_results_csv(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    const std::vector<std::string_view> lines = split_lines(text);
    if (lines.empty())
        throw MalformedRow(path.string() + ": empty results file");

    std::vector<std::string_view> fields;
    split_fields(lines[0], ',', fields);
    int k = 0;
    for (const std::string_view f : fields)
        if (f.substr(0, 8) == "err_fold")
            ++k;
    const std::size_t expected_fields = 4 + static_cast<std::size_t>(k) + 3;
    if (k == 0 || fields.size() != expected_fields)
        throw MalformedRow(path.string() + ": unrecognized results header");

    ParsedResults out;
    out.k = k;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        split_fields(lines[i], ',', fields);
        if (fields.size() != expected_fields)
            throw MalformedRow(path.string() + ":" + std::to_string(i + 1) +
                               ": expected " + std::to_string(expected_fields) +
                               " fields, got " + std::to_string(fields.size()));
        PairResult r;
        r.pair.file_a = static_cast<std::uint32_t>(
            parse_u64_field(fields[0], path, i + 1));
        r.pair.index_a = static_cast<std::uint32_t>(
            parse_u64_field(fields[1], path, i + 1));
        r.pair.file_b = static_cast<std::uint32_t>(
            parse_u64_field(fields[2], path, i + 1));
        r.pair.index_b = static_cast<std::uint32_t>(
            parse_u64_field(fields[3], path, i + 1));
        r.fold_errors.reserve(k);
        for (int f = 0; f < k; ++f)
            r.fold_errors.push_back(
                parse_double_field(fields[4 + f], path, i + 1));
        r.mean_error = parse_double_field(fields[4 + k], path, i + 1);
        r.consistency = static_cast<int>(
            parse_double_field(fields[5 + k], path, i + 1));
        out.results.push_back(std::move(r));
    }
    return out;
}

} // namespace epipair
