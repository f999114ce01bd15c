#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "epipair/genotype.hpp"

namespace epipair {

// Cell index = 3*code_a + code_b over {HomRef,Het,HomAlt}.
struct PlantedSignal {
    std::uint32_t file_a = 0;
    std::uint32_t index_a = 0;
    std::uint32_t file_b = 0;
    std::uint32_t index_b = 0;
    std::vector<int> high_risk_cells;
    double p_case_high = 0.9;
    double p_case_low = 0.1;
};

struct GeneratorConfig {
    std::uint32_t n_files = 10;
    std::uint32_t variants_per_file = 50;
    std::uint32_t n_patients = 1128;
    double case_fraction = 0.5;
    std::uint64_t seed = 0;
    bool gzip = true;
    std::optional<PlantedSignal> planted;
};

struct CohortManifest {
    std::vector<std::filesystem::path> genotype_files; // sorted, file_id order
    std::filesystem::path labels_file;
};

// Deterministic given the config: equal configs produce byte-identical files.
// Without a planted signal, status is Bernoulli(case_fraction) independent of
// genotypes. With one, the planted pair's genotypes are drawn uniformly over
// the 9 cells and each status is Bernoulli(p_case_high) when the patient's
// cell is high-risk, Bernoulli(p_case_low) otherwise.
CohortManifest generate_cohort(const GeneratorConfig& cfg,
                               const std::filesystem::path& out_dir);

} // namespace epipair
