#pragma once

// Straight-line reference implementation used to cross-check the engine.
// Deliberately naive: per-patient loops, no bit tricks, no caching, and its
// own ranking code. Shares only the input data types with the library.

#include <array>
#include <cstdint>
#include <vector>

#include "epipair/genotype.hpp"

namespace oracle {

struct Table {
    long long cases[9] = {};
    long long controls[9] = {};
    long long counted = 0;
};

Table count_table(const epipair::VariantRecord& a,
                  const epipair::VariantRecord& b,
                  const epipair::PhenotypeLabels& labels,
                  const std::vector<char>& train);

// 1 = high risk, 0 = low risk
std::array<int, 9> label_risk(const Table& t, long long total_cases,
                              long long total_controls, bool tie_is_high,
                              bool empty_is_high);

double test_error(const std::array<int, 9>& risk,
                  const epipair::VariantRecord& a,
                  const epipair::VariantRecord& b,
                  const epipair::PhenotypeLabels& labels,
                  const std::vector<char>& test);

struct PairEval {
    std::vector<double> fold_errors;
    double mean = 0.0;
};

PairEval evaluate_pair(const epipair::VariantRecord& a,
                       const epipair::VariantRecord& b,
                       const epipair::PhenotypeLabels& labels,
                       const std::vector<int>& fold_of, int k,
                       bool tie_is_high, bool empty_is_high);

struct Ranked {
    std::uint32_t file_a = 0, index_a = 0, file_b = 0, index_b = 0;
    std::vector<double> fold_errors;
    double mean = 0.0;
    int consistency = 0;
};

// How many pairs land in the per-fold top set for a decimal fraction.
std::size_t marked_count(double top_fraction, std::size_t n);

std::vector<Ranked> rank(std::vector<Ranked> rows, double top_fraction);

} // namespace oracle
