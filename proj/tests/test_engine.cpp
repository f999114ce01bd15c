#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "epipair/engine.hpp"
#include "epipair/errors.hpp"
#include "epipair/generator.hpp"
#include "epipair/rng.hpp"
#include "epipair/text_io.hpp"
#include "test_util.hpp"

using namespace epipair;

namespace {

std::vector<GenotypeFile> files_with_sizes(const std::vector<std::size_t>& sizes,
                                           std::size_t n_patients) {
    Rng rng(7);
    std::vector<GenotypeFile> files;
    for (std::size_t f = 0; f < sizes.size(); ++f) {
        auto cohort = testutil::random_cohort(rng, n_patients, sizes[f]);
        GenotypeFile file;
        file.file_id = static_cast<std::uint32_t>(f);
        file.variants = std::move(cohort.variants);
        file.patient_count = n_patients;
        files.push_back(std::move(file));
    }
    return files;
}

RunManifest small_manifest(const std::filesystem::path& dir,
                           std::uint32_t n_files = 2,
                           std::uint32_t variants = 5,
                           std::uint32_t patients = 60) {
    GeneratorConfig gen;
    gen.n_files = n_files;
    gen.variants_per_file = variants;
    gen.n_patients = patients;
    gen.seed = 12;
    gen.gzip = false;
    const auto manifest_files = generate_cohort(gen, dir);
    RunManifest m;
    m.files = manifest_files.genotype_files;
    m.labels_path = manifest_files.labels_file;
    m.n_threads = 1;
    return m;
}

} // namespace

TEST_CASE("task counting covers both enumeration modes") {
    SUBCASE("cross product counts unordered file pairs, self included") {
        // 5 files x 50 variants: 15 unordered file pairs x 2500 = 37,500.
        CHECK(count_tasks({50, 50, 50, 50, 50}, PairMode::CrossProduct) == 37500);
        // One file: the 50x50 self block once.
        CHECK(count_tasks({50}, PairMode::CrossProduct) == 2500);
        // Mixed sizes m={3,4}: 3*3 + 3*4 + 4*4 = 37.
        CHECK(count_tasks({3, 4}, PairMode::CrossProduct) == 37);
    }

    SUBCASE("distinct-only counts unordered variant pairs") {
        CHECK(count_tasks({50}, PairMode::DistinctOnly) == 50 * 49 / 2);
        CHECK(count_tasks({3, 4}, PairMode::DistinctOnly) == 7 * 6 / 2);
    }

    SUBCASE("whole-genome scale stays exact") {
        // 11,297,253 variants in one file, distinct pairs.
        CHECK(count_tasks({11297253}, PairMode::DistinctOnly) ==
              63813957024378ULL);
    }

    SUBCASE("n equal files of m variants give m^2 * n(n+1)/2 cross tasks") {
        for (std::uint64_t n = 1; n <= 6; ++n) {
            for (std::uint64_t m : {1ULL, 5ULL, 17ULL}) {
                std::vector<std::uint64_t> sizes(n, m);
                CHECK(count_tasks(sizes, PairMode::CrossProduct) ==
                      m * m * n * (n + 1) / 2);
            }
        }
    }

    SUBCASE("enumerate_pairs agrees with count_tasks and keeps global order") {
        const auto files = files_with_sizes({3, 4}, 12);
        for (PairMode mode : {PairMode::CrossProduct, PairMode::DistinctOnly}) {
            const auto pairs = enumerate_pairs(files, mode);
            CHECK(pairs.size() == count_tasks({3, 4}, mode));
            for (const PairKey& p : pairs) {
                CHECK(p.file_a <= p.file_b);
                if (mode == PairMode::DistinctOnly) {
                    // Each unordered variant pair exactly once, never self.
                    CHECK(std::make_pair(p.file_a, p.index_a) <
                          std::make_pair(p.file_b, p.index_b));
                    CHECK(!p.is_self());
                }
            }
            // No duplicates.
            auto sorted = pairs;
            std::sort(sorted.begin(), sorted.end());
            CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
        }

        // Cross-product order: file pair (0,0) row-major, then (0,1), then (1,1).
        const auto cross = enumerate_pairs(files, PairMode::CrossProduct);
        CHECK(cross.front() == PairKey{0, 0, 0, 0});
        CHECK(cross[1] == PairKey{0, 0, 0, 1});
        CHECK(cross[9] == PairKey{0, 0, 1, 0});  // 3x3 self block, then file 1
        CHECK(cross.back() == PairKey{1, 3, 1, 3});
    }
}

TEST_CASE("partitioning is contiguous, covering, near-even") {
    SUBCASE("10 tasks over 3 partitions -> sizes 4,3,3") {
        const auto parts = partition_tasks(10, 3);
        REQUIRE(parts.size() == 3);
        CHECK(parts[0].begin == 0);
        CHECK(parts[0].size() == 4);
        CHECK(parts[1].size() == 3);
        CHECK(parts[2].size() == 3);
        CHECK(parts[2].end == 10);
        for (std::size_t i = 1; i < parts.size(); ++i)
            CHECK(parts[i].begin == parts[i - 1].end);
    }

    SUBCASE("more partitions than tasks -> singletons plus empties") {
        const auto parts = partition_tasks(3, 5);
        REQUIRE(parts.size() == 5);
        for (int i = 0; i < 3; ++i)
            CHECK(parts[i].size() == 1);
        CHECK(parts[3].size() == 0);
        CHECK(parts[4].size() == 0);
    }

    SUBCASE("random totals stay covering with skew <= 1") {
        Rng rng(5);
        for (int trial = 0; trial < 25; ++trial) {
            const std::uint64_t total = rng.below(1000);
            const std::uint64_t n = 1 + rng.below(16);
            const auto parts = partition_tasks(total, n);
            REQUIRE(parts.size() == n);
            std::uint64_t covered = 0, lo = UINT64_MAX, hi = 0;
            for (std::size_t i = 0; i < parts.size(); ++i) {
                CHECK(parts[i].partition_id == i);
                CHECK(parts[i].begin == (i == 0 ? 0 : parts[i - 1].end));
                covered += parts[i].size();
                lo = std::min(lo, parts[i].size());
                hi = std::max(hi, parts[i].size());
            }
            CHECK(covered == total);
            CHECK(parts.back().end == total);
            CHECK(hi - lo <= 1);
        }
    }
}

TEST_CASE("run_all equals a sequential per-pair loop") {
    auto dir = testutil::scratch_dir("engine_vs_loop");
    RunManifest m = small_manifest(dir, 2, 4, 50);

    const auto output = run_all(m);
    REQUIRE(output.results.size() == count_tasks({4, 4}, PairMode::CrossProduct));

    const auto data = load_inputs(m);
    const MdrContext ctx(data.labels, m.mdr);
    const auto t = compute_threshold(data.labels);
    const auto folds = make_folds(data.labels, m.mdr.k, m.mdr.seed);
    const auto pairs = enumerate_pairs(data.files, PairMode::CrossProduct);
    REQUIRE(pairs.size() == output.results.size());

    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const PairKey key = pairs[i];
        const auto& va = data.files[key.file_a].variants[key.index_a];
        const auto& vb = data.files[key.file_b].variants[key.index_b];
        const auto expected = mdr_pair(va, vb, data.labels, folds, t, m.mdr, key);
        CHECK(output.results[i].pair == key);
        CHECK(output.results[i].fold_errors == expected.fold_errors);
        CHECK(output.results[i].mean_error == expected.mean_error);
    }

    CHECK(output.timings.load_seconds > 0.0);
    CHECK(output.timings.compute_seconds > 0.0);
}

TEST_CASE("results do not depend on thread count or kernel") {
    auto dir = testutil::scratch_dir("engine_threads");
    RunManifest m = small_manifest(dir, 3, 4, 70);

    m.n_threads = 1;
    const auto base = run_all(m).results;

    m.n_threads = 4;
    CHECK(run_all(m).results == base);

    m.n_threads = 7;
    m.partitions_per_thread = 2;
    CHECK(run_all(m).results == base);

    m.n_threads = 4;
    m.mdr.kernel = Kernel::Scalar;
    CHECK(run_all(m).results == base);
}

TEST_CASE("run_task_range computes exactly the requested slice") {
    auto dir = testutil::scratch_dir("engine_subrange");
    RunManifest m = small_manifest(dir, 2, 3, 50);
    const auto data = load_inputs(m);

    const auto full = run_task_range(data, m.mdr, PairMode::CrossProduct, 0,
                                     count_tasks({3, 3}, PairMode::CrossProduct),
                                     2);
    const auto slice = run_task_range(data, m.mdr, PairMode::CrossProduct, 5, 16, 2);
    REQUIRE(slice.size() == 11);
    for (std::size_t i = 0; i < slice.size(); ++i) {
        CHECK(slice[i].pair == full[i + 5].pair);
        CHECK(slice[i].fold_errors == full[i + 5].fold_errors);
    }

    RunProgress progress;
    const auto again = run_task_range(data, m.mdr, PairMode::CrossProduct, 0,
                                      full.size(), 2, 4, &progress);
    CHECK(again.size() == full.size());
    CHECK(progress.total_partitions > 0);
    CHECK(progress.completed_partitions == progress.total_partitions);
}

TEST_CASE("results CSV round-trips exactly at 6 decimals") {
    auto dir = testutil::scratch_dir("engine_csv");
    RunManifest m = small_manifest(dir, 1, 5, 60);
    auto output = run_all(m);
    auto ranked = select_top_pairs(std::move(output.results), m.mdr);

    const auto csv_path = dir / "results.csv";
    write_results_csv(ranked, csv_path);
    const auto parsed = parse_results_csv(csv_path);

    CHECK(parsed.k == m.mdr.k);
    REQUIRE(parsed.results.size() == ranked.size());
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        CHECK(parsed.results[i].pair == ranked[i].pair);
        CHECK(parsed.results[i].consistency == ranked[i].consistency);
        REQUIRE(parsed.results[i].fold_errors.size() == ranked[i].fold_errors.size());
        for (std::size_t f = 0; f < ranked[i].fold_errors.size(); ++f)
            CHECK(parsed.results[i].fold_errors[f] ==
                  doctest::Approx(ranked[i].fold_errors[f]).epsilon(1e-6));
    }

    // Writing the same results twice is byte-identical.
    const auto csv_path2 = dir / "results2.csv";
    write_results_csv(ranked, csv_path2);
    CHECK(read_binary_file(csv_path) == read_binary_file(csv_path2));
}

TEST_CASE("load_inputs validates existence and patient counts") {
    auto dir = testutil::scratch_dir("engine_load");
    RunManifest m = small_manifest(dir, 2, 3, 40);

    SUBCASE("happy path assigns file ids by manifest position") {
        const auto data = load_inputs(m);
        REQUIRE(data.files.size() == 2);
        CHECK(data.files[0].file_id == 0);
        CHECK(data.files[1].file_id == 1);
        CHECK(data.labels.size() == 40);
    }

    SUBCASE("missing genotype file") {
        m.files.push_back(dir / "missing.csv");
        CHECK_THROWS_AS(load_inputs(m), IoError);
    }

    SUBCASE("missing labels file") {
        m.labels_path = dir / "missing_labels.csv";
        CHECK_THROWS_AS(load_inputs(m), IoError);
    }

    SUBCASE("patient count mismatch against labels") {
        // A second cohort with a different patient count, swapped in.
        auto other_dir = testutil::scratch_dir("engine_load_other");
        GeneratorConfig gen;
        gen.n_files = 1;
        gen.variants_per_file = 3;
        gen.n_patients = 41;
        gen.gzip = false;
        const auto other = generate_cohort(gen, other_dir);
        m.files[1] = other.genotype_files[0];
        CHECK_THROWS_AS(load_inputs(m), MalformedRow);
    }
}

TEST_CASE("resolve_threads maps zero to the hardware") {
    CHECK(resolve_threads(3) == 3);
    CHECK(resolve_threads(0) >= 1);
}
