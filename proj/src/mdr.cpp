#include "epipair/mdr.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

#include "epipair/errors.hpp"
#include "epipair/rng.hpp"

namespace epipair {

namespace {

constexpr std::uint64_t kCaseShuffleTag = 0x666F6C642D636173ULL;
constexpr std::uint64_t kControlShuffleTag = 0x666F6C642D63746CULL;

using u64 = std::uint64_t;
using i64 = std::int64_t;

void check_same_length(std::size_t a, std::size_t b, const char* what) {
    if (a != b)
        throw LengthMismatch(std::string(what) + ": " + std::to_string(a) +
                             " vs " + std::to_string(b));
}

} // namespace

void validate(const MdrConfig& cfg) {
    if (cfg.k < 2)
        throw InvalidConfig("k must be at least 2, got " + std::to_string(cfg.k));
    if (!(cfg.top_fraction > 0.0) || cfg.top_fraction > 1.0)
        throw InvalidConfig("top_fraction must lie in (0,1]");
}

Threshold compute_threshold(const PhenotypeLabels& labels) {
    Threshold t;
    for (Status s : labels.status)
        (s == Status::Case ? t.cases : t.controls) += 1;
    if (t.cases == 0 || t.controls == 0)
        throw DegenerateCohort("threshold needs both cases and controls");
    return t;
}

FoldPlan make_folds(const PhenotypeLabels& labels, int k, std::uint64_t seed) {
    if (k < 2)
        throw InvalidConfig("fold count must be at least 2");
    std::vector<std::uint32_t> members[2];
    for (std::size_t p = 0; p < labels.size(); ++p)
        members[labels.status[p] == Status::Case ? 1 : 0].push_back(
            static_cast<std::uint32_t>(p));
    for (const auto& m : members)
        if (m.size() < static_cast<std::size_t>(k))
            throw TooFewPatients("a status class has " +
                                 std::to_string(m.size()) + " members, need " +
                                 std::to_string(k));

    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.assignment.assign(labels.size(), 0);
    const std::uint64_t tags[2] = {kControlShuffleTag, kCaseShuffleTag};
    for (int cls = 0; cls < 2; ++cls) {
        Rng rng = Rng::stream(seed, tags[cls]);
        rng.shuffle(members[cls]);
        for (std::size_t j = 0; j < members[cls].size(); ++j)
            plan.assignment[members[cls][j]] = static_cast<int>(j % k);
    }
    return plan;
}

std::size_t mask_words(std::size_t patients) { return (patients + 63) / 64; }

PackedVariant pack_variant(const VariantRecord& rec) {
    PackedVariant pv;
    const std::size_t w = mask_words(rec.genotypes.size());
    for (auto& m : pv.code_masks)
        m.assign(w, 0);
    for (std::size_t p = 0; p < rec.genotypes.size(); ++p) {
        const GenotypeCode c = rec.genotypes[p];
        if (c == GenotypeCode::Missing)
            continue;
        pv.code_masks[static_cast<std::size_t>(c)][p / 64] |= u64{1} << (p % 64);
    }
    return pv;
}

std::vector<std::uint64_t> pack_mask(const std::vector<std::uint8_t>& mask) {
    std::vector<u64> out(mask_words(mask.size()), 0);
    for (std::size_t p = 0; p < mask.size(); ++p)
        if (mask[p])
            out[p / 64] |= u64{1} << (p % 64);
    return out;
}

ContingencyTable build_contingency(const VariantRecord& var_a,
                                   const VariantRecord& var_b,
                                   const PhenotypeLabels& labels,
                                   const std::vector<std::uint8_t>& train_mask,
                                   Kernel kernel) {
    const std::size_t n = labels.size();
    check_same_length(var_a.genotypes.size(), n, "variant A vs labels");
    check_same_length(var_b.genotypes.size(), n, "variant B vs labels");
    check_same_length(train_mask.size(), n, "train mask vs labels");

    ContingencyTable table;
    if (kernel == Kernel::Scalar) {
        for (std::size_t p = 0; p < n; ++p) {
            if (!train_mask[p])
                continue;
            const GenotypeCode ca = var_a.genotypes[p];
            const GenotypeCode cb = var_b.genotypes[p];
            if (ca == GenotypeCode::Missing || cb == GenotypeCode::Missing)
                continue;
            CellCounts& cell =
                table.cells[3 * static_cast<std::size_t>(ca) +
                            static_cast<std::size_t>(cb)];
            (labels.status[p] == Status::Case ? cell.cases : cell.controls) += 1;
            ++table.counted_patients;
        }
        return table;
    }

    const PackedVariant pa = pack_variant(var_a);
    const PackedVariant pb = pack_variant(var_b);
    const std::size_t w = mask_words(n);
    std::vector<u64> train_case(w, 0), train_control(w, 0);
    for (std::size_t p = 0; p < n; ++p) {
        if (!train_mask[p])
            continue;
        auto& dst = labels.status[p] == Status::Case ? train_case : train_control;
        dst[p / 64] |= u64{1} << (p % 64);
    }
    for (std::size_t cell = 0; cell < 9; ++cell) {
        const u64* a = pa.code_masks[cell / 3].data();
        const u64* b = pb.code_masks[cell % 3].data();
        i64 cases = 0, controls = 0;
        for (std::size_t i = 0; i < w; ++i) {
            const u64 m = a[i] & b[i];
            cases += std::popcount(m & train_case[i]);
            controls += std::popcount(m & train_control[i]);
        }
        table.cells[cell] = {cases, controls};
        table.counted_patients += cases + controls;
    }
    return table;
}

RiskTable reduce_risk(const ContingencyTable& table, const Threshold& t,
                      const MdrConfig& cfg) {
    if (t.cases <= 0 || t.controls <= 0)
        throw InvalidConfig("risk threshold requires both classes present");
    RiskTable out;
    for (std::size_t c = 0; c < 9; ++c) {
        const CellCounts& cell = table.cells[c];
        RiskLabel label;
        if (cell.controls > 0) {
            // cases/controls vs cases_T/controls_T, compared exactly
            const __int128 lhs =
                static_cast<__int128>(cell.cases) * t.controls;
            const __int128 rhs =
                static_cast<__int128>(t.cases) * cell.controls;
            if (lhs > rhs)
                label = RiskLabel::High;
            else if (lhs < rhs)
                label = RiskLabel::Low;
            else
                label = cfg.tie_policy == TiePolicy::High ? RiskLabel::High
                                                          : RiskLabel::Low;
        } else if (cell.cases > 0) {
            label = RiskLabel::High;  // ratio is +inf
        } else {
            label = cfg.empty_cell_policy == CellPolicy::HighRisk
                        ? RiskLabel::High
                        : RiskLabel::Low;
        }
        out.labels[c] = label;
    }
    return out;
}

double classify_and_error(const RiskTable& risk, const VariantRecord& var_a,
                          const VariantRecord& var_b,
                          const PhenotypeLabels& labels,
                          const std::vector<std::uint8_t>& test_mask) {
    const std::size_t n = labels.size();
    check_same_length(var_a.genotypes.size(), n, "variant A vs labels");
    check_same_length(var_b.genotypes.size(), n, "variant B vs labels");
    check_same_length(test_mask.size(), n, "test mask vs labels");

    i64 evaluated = 0, misclassified = 0;
    for (std::size_t p = 0; p < n; ++p) {
        if (!test_mask[p])
            continue;
        const GenotypeCode ca = var_a.genotypes[p];
        const GenotypeCode cb = var_b.genotypes[p];
        if (ca == GenotypeCode::Missing || cb == GenotypeCode::Missing)
            continue;
        ++evaluated;
        const RiskLabel predicted =
            risk.labels[3 * static_cast<std::size_t>(ca) +
                        static_cast<std::size_t>(cb)];
        const bool is_case = labels.status[p] == Status::Case;
        if ((predicted == RiskLabel::High) != is_case)
            ++misclassified;
    }
    if (evaluated == 0)
        throw EmptyTestSet("no evaluable patients in the test fold");
    return static_cast<double>(misclassified) / static_cast<double>(evaluated);
}

PairResult mdr_pair(const VariantRecord& var_a, const VariantRecord& var_b,
                    const PhenotypeLabels& labels, const FoldPlan& folds,
                    const Threshold& t, const MdrConfig& cfg, PairKey key) {
    const std::size_t n = labels.size();
    check_same_length(folds.assignment.size(), n, "fold plan vs labels");

    PairResult result;
    result.pair = key;
    result.fold_errors.reserve(folds.k);
    double sum = 0.0;
    std::vector<std::uint8_t> train(n), test(n);
    for (int f = 0; f < folds.k; ++f) {
        for (std::size_t p = 0; p < n; ++p) {
            const bool in_test = folds.assignment[p] == f;
            train[p] = !in_test;
            test[p] = in_test;
        }
        const ContingencyTable table =
            build_contingency(var_a, var_b, labels, train, cfg.kernel);
        const RiskTable risk = reduce_risk(table, t, cfg);
        const double err = classify_and_error(risk, var_a, var_b, labels, test);
        result.fold_errors.push_back(err);
        sum += err;
    }
    result.mean_error = sum / folds.k;
    return result;
}

std::vector<PairResult> select_top_pairs(std::vector<PairResult> results,
                                         const MdrConfig& cfg) {
    if (results.empty())
        throw EmptyResults("no pair results to rank");
    const std::size_t n = results.size();
    const std::size_t k = results.front().fold_errors.size();
    for (const PairResult& r : results)
        check_same_length(r.fold_errors.size(), k, "fold error vectors");

    // ceil(top_fraction * n), nudged so exact products do not round up
    std::size_t marked = static_cast<std::size_t>(
        std::ceil(cfg.top_fraction * static_cast<double>(n) - 1e-9));
    marked = std::clamp<std::size_t>(marked, 1, n);

    for (PairResult& r : results)
        r.consistency = 0;
    std::vector<std::uint32_t> order(n);
    for (std::size_t f = 0; f < k; ++f) {
        std::iota(order.begin(), order.end(), 0u);
        std::partial_sort(order.begin(), order.begin() + marked, order.end(),
                          [&](std::uint32_t x, std::uint32_t y) {
                              if (results[x].fold_errors[f] !=
                                  results[y].fold_errors[f])
                                  return results[x].fold_errors[f] <
                                         results[y].fold_errors[f];
                              return results[x].pair < results[y].pair;
                          });
        for (std::size_t i = 0; i < marked; ++i)
            results[order[i]].consistency += 1;
    }

    std::sort(results.begin(), results.end(),
              [](const PairResult& x, const PairResult& y) {
                  if (x.consistency != y.consistency)
                      return x.consistency > y.consistency;
                  if (x.mean_error != y.mean_error)
                      return x.mean_error < y.mean_error;
                  return x.pair < y.pair;
              });
    return results;
}

MdrContext::MdrContext(const PhenotypeLabels& lbls, const MdrConfig& config)
    : labels(&lbls), cfg(config) {
    validate(cfg);
    threshold = compute_threshold(lbls);
    folds = make_folds(lbls, cfg.k, cfg.seed);
    words = mask_words(lbls.size());
    fold_case_masks.assign(cfg.k, std::vector<u64>(words, 0));
    fold_control_masks.assign(cfg.k, std::vector<u64>(words, 0));
    for (std::size_t p = 0; p < lbls.size(); ++p) {
        auto& masks = lbls.status[p] == Status::Case ? fold_case_masks
                                                     : fold_control_masks;
        masks[static_cast<std::size_t>(folds.assignment[p])][p / 64] |=
            u64{1} << (p % 64);
    }
}

namespace {

// Turns per-fold test tables into fold errors. The training table for fold f
// is the full-cohort table minus fold f's own counts, so one counting pass
// over the pair serves all folds.
PairResult finish_from_fold_tables(
    const MdrContext& ctx, const std::vector<std::array<CellCounts, 9>>& fold_tables,
    PairKey key) {
    const int k = ctx.folds.k;
    std::array<CellCounts, 9> full{};
    for (int f = 0; f < k; ++f)
        for (std::size_t c = 0; c < 9; ++c) {
            full[c].cases += fold_tables[f][c].cases;
            full[c].controls += fold_tables[f][c].controls;
        }

    PairResult result;
    result.pair = key;
    result.fold_errors.reserve(k);
    double sum = 0.0;
    for (int f = 0; f < k; ++f) {
        ContingencyTable train;
        for (std::size_t c = 0; c < 9; ++c) {
            train.cells[c].cases = full[c].cases - fold_tables[f][c].cases;
            train.cells[c].controls =
                full[c].controls - fold_tables[f][c].controls;
            train.counted_patients +=
                train.cells[c].cases + train.cells[c].controls;
        }
        const RiskTable risk = reduce_risk(train, ctx.threshold, ctx.cfg);
        i64 evaluated = 0, misclassified = 0;
        for (std::size_t c = 0; c < 9; ++c) {
            const CellCounts& cell = fold_tables[f][c];
            evaluated += cell.cases + cell.controls;
            misclassified += risk.labels[c] == RiskLabel::High ? cell.controls
                                                               : cell.cases;
        }
        if (evaluated == 0)
            throw EmptyTestSet("no evaluable patients in test fold " +
                               std::to_string(f));
        const double err =
            static_cast<double>(misclassified) / static_cast<double>(evaluated);
        result.fold_errors.push_back(err);
        sum += err;
    }
    result.mean_error = sum / k;
    return result;
}

} // namespace

PairResult mdr_pair_packed(const MdrContext& ctx, const PackedVariant& var_a,
                           const PackedVariant& var_b, PairKey key) {
    const int k = ctx.folds.k;
    const std::size_t w = ctx.words;
    std::vector<std::array<CellCounts, 9>> fold_tables(k);
    for (std::size_t cell = 0; cell < 9; ++cell) {
        const u64* a = var_a.code_masks[cell / 3].data();
        const u64* b = var_b.code_masks[cell % 3].data();
        for (std::size_t i = 0; i < w; ++i) {
            const u64 m = a[i] & b[i];
            if (!m)
                continue;
            for (int f = 0; f < k; ++f) {
                fold_tables[f][cell].cases +=
                    std::popcount(m & ctx.fold_case_masks[f][i]);
                fold_tables[f][cell].controls +=
                    std::popcount(m & ctx.fold_control_masks[f][i]);
            }
        }
    }
    return finish_from_fold_tables(ctx, fold_tables, key);
}

PairResult mdr_pair_scalar(const MdrContext& ctx, const VariantRecord& var_a,
                           const VariantRecord& var_b, PairKey key) {
    const std::size_t n = ctx.labels->size();
    check_same_length(var_a.genotypes.size(), n, "variant A vs labels");
    check_same_length(var_b.genotypes.size(), n, "variant B vs labels");

    const int k = ctx.folds.k;
    std::vector<std::array<CellCounts, 9>> fold_tables(k);
    for (std::size_t p = 0; p < n; ++p) {
        const GenotypeCode ca = var_a.genotypes[p];
        const GenotypeCode cb = var_b.genotypes[p];
        if (ca == GenotypeCode::Missing || cb == GenotypeCode::Missing)
            continue;
        CellCounts& cell =
            fold_tables[static_cast<std::size_t>(ctx.folds.assignment[p])]
                       [3 * static_cast<std::size_t>(ca) +
                        static_cast<std::size_t>(cb)];
        (ctx.labels->status[p] == Status::Case ? cell.cases : cell.controls) +=
            1;
    }
    return finish_from_fold_tables(ctx, fold_tables, key);
}

} // namespace epipair
