#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <vector>

#include "epipair/genotype.hpp"

namespace epipair {

enum class Kernel : std::uint8_t { Scalar, BitPacked };
enum class CellPolicy : std::uint8_t { LowRisk, HighRisk };
enum class TiePolicy : std::uint8_t { Low, High };
enum class RiskLabel : std::uint8_t { Low = 0, High = 1 };

struct MdrConfig {
    int k = 5;
    double top_fraction = 0.2;
    CellPolicy empty_cell_policy = CellPolicy::LowRisk;
    TiePolicy tie_policy = TiePolicy::Low;
    Kernel kernel = Kernel::BitPacked;
    std::uint64_t seed = 0;
};

// Throws InvalidConfig on out-of-range fields.
void validate(const MdrConfig& cfg);

// The cohort-wide cases-to-controls ratio, kept as the two integers so risk
// comparisons can use exact cross-multiplication instead of division.
struct Threshold {
    std::int64_t cases = 0;
    std::int64_t controls = 0;
    double value() const {
        return static_cast<double>(cases) / static_cast<double>(controls);
    }
};

Threshold compute_threshold(const PhenotypeLabels& labels);

struct FoldPlan {
    int k = 0;
    std::vector<int> assignment;  // one fold index per patient
    std::uint64_t seed = 0;
};

// Stratified assignment: within each status class, a seeded shuffle followed
// by round-robin. Deterministic; per-class fold sizes differ by at most 1.
FoldPlan make_folds(const PhenotypeLabels& labels, int k, std::uint64_t seed);

struct CellCounts {
    std::int64_t cases = 0;
    std::int64_t controls = 0;
    bool operator==(const CellCounts&) const = default;
};

// 9 cells indexed by 3*code_a + code_b over the non-Missing codes.
struct ContingencyTable {
    std::array<CellCounts, 9> cells{};
    std::int64_t counted_patients = 0;
    bool operator==(const ContingencyTable&) const = default;
};

ContingencyTable build_contingency(const VariantRecord& var_a,
                                   const VariantRecord& var_b,
                                   const PhenotypeLabels& labels,
                                   const std::vector<std::uint8_t>& train_mask,
                                   Kernel kernel);

struct RiskTable {
    std::array<RiskLabel, 9> labels{};
    bool operator==(const RiskTable&) const = default;
};

RiskTable reduce_risk(const ContingencyTable& table, const Threshold& t,
                      const MdrConfig& cfg);

double classify_and_error(const RiskTable& risk, const VariantRecord& var_a,
                          const VariantRecord& var_b,
                          const PhenotypeLabels& labels,
                          const std::vector<std::uint8_t>& test_mask);

struct PairKey {
    std::uint32_t file_a = 0;
    std::uint32_t index_a = 0;
    std::uint32_t file_b = 0;
    std::uint32_t index_b = 0;
    auto operator<=>(const PairKey&) const = default;
    bool is_self() const { return file_a == file_b && index_a == index_b; }
};

struct PairResult {
    PairKey pair;
    std::vector<double> fold_errors;
    double mean_error = 0.0;
    int consistency = -1;  // filled by select_top_pairs
    bool operator==(const PairResult&) const = default;
};

PairResult mdr_pair(const VariantRecord& var_a, const VariantRecord& var_b,
                    const PhenotypeLabels& labels, const FoldPlan& folds,
                    const Threshold& t, const MdrConfig& cfg,
                    PairKey key = {});

// Marks, per fold, the ceil(top_fraction * N) pairs with the smallest fold
// error (ties by ascending coordinates); consistency counts markings. Output
// sorted by consistency desc, mean_error asc, coordinates asc.
std::vector<PairResult> select_top_pairs(std::vector<PairResult> results,
                                         const MdrConfig& cfg);

// ---- shared per-run state + packed fast path ------------------------------

// One bitmask per genotype code, one bit per patient; a Missing patient has
// no bit set anywhere.
struct PackedVariant {
    std::array<std::vector<std::uint64_t>, 3> code_masks;
};

std::size_t mask_words(std::size_t patients);
PackedVariant pack_variant(const VariantRecord& rec);
std::vector<std::uint64_t> pack_mask(const std::vector<std::uint8_t>& mask);

// Built once per run and shared read-only across worker threads.
struct MdrContext {
    MdrContext(const PhenotypeLabels& labels, const MdrConfig& cfg);

    const PhenotypeLabels* labels;
    MdrConfig cfg;
    Threshold threshold;
    FoldPlan folds;
    std::size_t words;
    // per fold: bitmask of its Case patients and of its Control patients
    std::vector<std::vector<std::uint64_t>> fold_case_masks;
    std::vector<std::vector<std::uint64_t>> fold_control_masks;
};

PairResult mdr_pair_packed(const MdrContext& ctx, const PackedVariant& var_a,
                           const PackedVariant& var_b, PairKey key);

PairResult mdr_pair_scalar(const MdrContext& ctx, const VariantRecord& var_a,
                           const VariantRecord& var_b, PairKey key);

} // namespace epipair
