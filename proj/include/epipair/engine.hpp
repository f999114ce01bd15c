#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "epipair/genotype.hpp"
#include "epipair/mdr.hpp"

namespace epipair {

enum class PairMode : std::uint8_t { CrossProduct, DistinctOnly };

// CrossProduct: every unordered file pair (i <= j, self included), full
// index cross product per pair, row-major. DistinctOnly: each unordered
// variant pair once, self-pairs excluded.
std::vector<PairKey> enumerate_pairs(const std::vector<GenotypeFile>& files,
                                     PairMode mode);

// Same totals as enumerate_pairs but symbolic, so whole-genome variant
// counts can be checked without materializing the task list.
std::uint64_t count_tasks(const std::vector<std::uint64_t>& variants_per_file,
                          PairMode mode);

struct Partition {
    std::uint64_t partition_id = 0;
    std::uint64_t begin = 0;
    std::uint64_t end = 0;  // exclusive
    std::uint64_t size() const { return end - begin; }
};

// Contiguous, disjoint, covering; sizes differ by at most 1.
std::vector<Partition> partition_tasks(std::uint64_t total,
                                       std::uint64_t n_partitions);

struct RunManifest {
    std::vector<std::filesystem::path> files;  // position = file_id
    std::filesystem::path labels_path;
    MdrConfig mdr;
    PairMode pair_mode = PairMode::CrossProduct;
    unsigned n_threads = 0;  // 0 = hardware concurrency
    unsigned partitions_per_thread = 4;
};

unsigned resolve_threads(unsigned requested);

struct StageTimings {
    double load_seconds = 0.0;
    double compute_seconds = 0.0;
    double save_seconds = 0.0;
    double total_seconds = 0.0;
};

struct LoadedInputs {
    std::vector<GenotypeFile> files;
    PhenotypeLabels labels;
};

// Parses labels plus every genotype file and cross-checks patient counts.
LoadedInputs load_inputs(const RunManifest& manifest);

struct RunProgress {
    std::uint64_t total_partitions = 0;
    std::uint64_t completed_partitions = 0;
};

// Computes tasks [begin, end) of the enumeration in global order. Threads
// claim contiguous partitions; each partition's results land in private
// storage merged in partition order, so output is identical for any thread
// count. Errors from worker threads are rethrown after all threads stop;
// progress (when provided) reports how far the run got.
std::vector<PairResult> run_task_range(const LoadedInputs& data,
                                       const MdrConfig& cfg, PairMode mode,
                                       std::uint64_t begin, std::uint64_t end,
                                       unsigned n_threads,
                                       unsigned partitions_per_thread = 4,
                                       RunProgress* progress = nullptr);

struct RunOutput {
    std::vector<PairResult> results;  // global enumeration order, unranked
    StageTimings timings;             // load + compute filled; save is 0
};

RunOutput run_all(const RunManifest& manifest, RunProgress* progress = nullptr);

// Ranked results with per-fold errors at 6 decimal digits.
void write_results_csv(const std::vector<PairResult>& results,
                       const std::filesystem::path& path);

struct ParsedResults {
    std::vector<PairResult> results;
    int k = 0;
};

ParsedResults parse_results_csv(const std::filesystem::path& path);

} // namespace epipair
