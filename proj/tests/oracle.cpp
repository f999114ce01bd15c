#include "oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

namespace oracle {

using epipair::GenotypeCode;
using epipair::Status;

namespace {

int code_of(GenotypeCode c) { return static_cast<int>(c); }

bool usable(const epipair::VariantRecord& a, const epipair::VariantRecord& b,
            std::size_t p) {
    return a.genotypes[p] != GenotypeCode::Missing &&
           b.genotypes[p] != GenotypeCode::Missing;
}

} // namespace

Table count_table(const epipair::VariantRecord& a,
                  const epipair::VariantRecord& b,
                  const epipair::PhenotypeLabels& labels,
                  const std::vector<char>& train) {
    Table t;
    for (std::size_t p = 0; p < labels.size(); ++p) {
        if (!train[p] || !usable(a, b, p))
            continue;
        const int cell = 3 * code_of(a.genotypes[p]) + code_of(b.genotypes[p]);
        if (labels.status[p] == Status::Case)
            t.cases[cell] += 1;
        else
            t.controls[cell] += 1;
        t.counted += 1;
    }
    return t;
}

std::array<int, 9> label_risk(const Table& t, long long total_cases,
                              long long total_controls, bool tie_is_high,
                              bool empty_is_high) {
    std::array<int, 9> risk{};
    for (int c = 0; c < 9; ++c) {
        if (t.cases[c] == 0 && t.controls[c] == 0) {
            risk[c] = empty_is_high ? 1 : 0;
        } else if (t.controls[c] == 0) {
            risk[c] = 1;
        } else {
            const long long lhs = t.cases[c] * total_controls;
            const long long rhs = total_cases * t.controls[c];
            if (lhs == rhs)
                risk[c] = tie_is_high ? 1 : 0;
            else
                risk[c] = lhs > rhs ? 1 : 0;
        }
    }
    return risk;
}

double test_error(const std::array<int, 9>& risk,
                  const epipair::VariantRecord& a,
                  const epipair::VariantRecord& b,
                  const epipair::PhenotypeLabels& labels,
                  const std::vector<char>& test) {
    long long evaluated = 0, wrong = 0;
    for (std::size_t p = 0; p < labels.size(); ++p) {
        if (!test[p] || !usable(a, b, p))
            continue;
        evaluated += 1;
        const int cell = 3 * code_of(a.genotypes[p]) + code_of(b.genotypes[p]);
        const int predicted_case = risk[cell];
        const int is_case = labels.status[p] == Status::Case ? 1 : 0;
        if (predicted_case != is_case)
            wrong += 1;
    }
    if (evaluated == 0)
        throw std::runtime_error("oracle: empty test fold");
    return static_cast<double>(wrong) / static_cast<double>(evaluated);
}

PairEval evaluate_pair(const epipair::VariantRecord& a,
                       const epipair::VariantRecord& b,
                       const epipair::PhenotypeLabels& labels,
                       const std::vector<int>& fold_of, int k,
                       bool tie_is_high, bool empty_is_high) {
    long long total_cases = 0, total_controls = 0;
    for (const Status s : labels.status) {
        if (s == Status::Case)
            total_cases += 1;
        else
            total_controls += 1;
    }

    PairEval eval;
    for (int f = 0; f < k; ++f) {
        std::vector<char> train(labels.size()), test(labels.size());
        for (std::size_t p = 0; p < labels.size(); ++p) {
            train[p] = fold_of[p] != f;
            test[p] = fold_of[p] == f;
        }
        const Table t = count_table(a, b, labels, train);
        const std::array<int, 9> risk =
            label_risk(t, total_cases, total_controls, tie_is_high, empty_is_high);
        eval.fold_errors.push_back(test_error(risk, a, b, labels, test));
    }
    double sum = 0.0;
    for (const double e : eval.fold_errors)
        sum += e;
    eval.mean = sum / k;
    return eval;
}

std::size_t marked_count(double top_fraction, std::size_t n) {
    // ceil(top_fraction * n) over the fraction rounded to 9 decimals, done in
    // integers so binary noise in values like 0.2 cannot round the count up.
    const unsigned long long numerator =
        static_cast<unsigned long long>(std::llround(top_fraction * 1e9));
    unsigned long long m = (n * numerator + 999999999ULL) / 1000000000ULL;
    if (m < 1)
        m = 1;
    if (m > n)
        m = n;
    return static_cast<std::size_t>(m);
}

std::vector<Ranked> rank(std::vector<Ranked> rows, double top_fraction) {
    const std::size_t n = rows.size();
    const std::size_t k = rows.empty() ? 0 : rows.front().fold_errors.size();
    const std::size_t m = marked_count(top_fraction, n);

    auto coords = [](const Ranked& r) {
        return std::make_tuple(r.file_a, r.index_a, r.file_b, r.index_b);
    };

    for (Ranked& r : rows)
        r.consistency = 0;
    for (std::size_t f = 0; f < k; ++f) {
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i)
            idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) {
            if (rows[x].fold_errors[f] != rows[y].fold_errors[f])
                return rows[x].fold_errors[f] < rows[y].fold_errors[f];
            return coords(rows[x]) < coords(rows[y]);
        });
        for (std::size_t i = 0; i < m; ++i)
            rows[idx[i]].consistency += 1;
    }

    std::sort(rows.begin(), rows.end(), [&](const Ranked& x, const Ranked& y) {
        if (x.consistency != y.consistency)
            return x.consistency > y.consistency;
        if (x.mean != y.mean)
            return x.mean < y.mean;
        return coords(x) < coords(y);
    });
    return rows;
}

} // namespace oracle
