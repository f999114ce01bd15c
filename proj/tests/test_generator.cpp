#include <doctest.h>

#include <string>
#include <vector>

#include "epipair/errors.hpp"
#include "epipair/generator.hpp"
#include "epipair/genotype.hpp"
#include "epipair/text_io.hpp"
#include "test_util.hpp"

using namespace epipair;

namespace {

GeneratorConfig small_config() {
    GeneratorConfig cfg;
    cfg.n_files = 2;
    cfg.variants_per_file = 3;
    cfg.n_patients = 40;
    cfg.seed = 17;
    cfg.gzip = false;
    return cfg;
}

} // namespace

TEST_CASE("generated cohort has the advertised shape") {
    auto dir = testutil::scratch_dir("gen_shape");
    const auto cfg = small_config();
    const auto manifest = generate_cohort(cfg, dir);

    REQUIRE(manifest.genotype_files.size() == 2);
    CHECK(manifest.genotype_files[0].filename() == "f01.csv");
    CHECK(manifest.genotype_files[1].filename() == "f02.csv");
    CHECK(manifest.labels_file.filename() == "labels.csv");

    for (const auto& path : manifest.genotype_files) {
        const auto file = parse_genotype_file(path, cfg.n_patients);
        CHECK(file.variants.size() == cfg.variants_per_file);
        for (const auto& rec : file.variants) {
            CHECK(!rec.id.empty());
            CHECK(rec.ref_allele != rec.alt_allele);
        }
        // Positions strictly increase within a file.
        for (std::size_t v = 1; v < file.variants.size(); ++v)
            CHECK(file.variants[v].position > file.variants[v - 1].position);
    }

    const auto labels = parse_labels(manifest.labels_file);
    CHECK(labels.size() == cfg.n_patients);
    CHECK(labels.patient_ids.front() == "P0001");
}

TEST_CASE("generated rows carry five id columns") {
    auto dir = testutil::scratch_dir("gen_columns");
    GeneratorConfig cfg;
    cfg.n_files = 1;
    cfg.variants_per_file = 2;
    cfg.n_patients = 1128;
    cfg.gzip = false;
    const auto manifest = generate_cohort(cfg, dir);

    const std::string text = read_text_file(manifest.genotype_files[0]);
    const auto lines = split_lines(text);
    REQUIRE(lines.size() == 2);
    std::vector<std::string_view> fields;
    split_fields(lines[0], ',', fields);
    CHECK(fields.size() == 5 + 3 * 1128); // 3389
}

TEST_CASE("generation is byte deterministic across directories") {
    auto dir_a = testutil::scratch_dir("gen_det_a");
    auto dir_b = testutil::scratch_dir("gen_det_b");
    GeneratorConfig cfg = small_config();
    cfg.gzip = true;

    const auto ma = generate_cohort(cfg, dir_a);
    const auto mb = generate_cohort(cfg, dir_b);

    REQUIRE(ma.genotype_files.size() == mb.genotype_files.size());
    for (std::size_t i = 0; i < ma.genotype_files.size(); ++i)
        CHECK(read_binary_file(ma.genotype_files[i]) ==
              read_binary_file(mb.genotype_files[i]));
    CHECK(read_binary_file(ma.labels_file) == read_binary_file(mb.labels_file));
}

TEST_CASE("different seeds move the data") {
    auto dir_a = testutil::scratch_dir("gen_seed_a");
    auto dir_b = testutil::scratch_dir("gen_seed_b");
    GeneratorConfig cfg = small_config();
    const auto ma = generate_cohort(cfg, dir_a);
    cfg.seed = 18;
    const auto mb = generate_cohort(cfg, dir_b);
    CHECK(read_binary_file(ma.genotype_files[0]) !=
          read_binary_file(mb.genotype_files[0]));
}

TEST_CASE("planted signal skews case rates by cell membership") {
    auto dir = testutil::scratch_dir("gen_planted");
    GeneratorConfig cfg;
    cfg.n_files = 2;
    cfg.variants_per_file = 4;
    cfg.n_patients = 1200;
    cfg.seed = 3;
    cfg.gzip = false;
    PlantedSignal sig;
    sig.file_a = 0;
    sig.index_a = 1;
    sig.file_b = 1;
    sig.index_b = 2;
    sig.high_risk_cells = {0, 4, 8};
    cfg.planted = sig;

    const auto manifest = generate_cohort(cfg, dir);
    const auto fa = parse_genotype_file(manifest.genotype_files[0], cfg.n_patients);
    const auto fb = parse_genotype_file(manifest.genotype_files[1], cfg.n_patients);
    const auto labels = parse_labels(manifest.labels_file);

    const auto& va = fa.variants[sig.index_a].genotypes;
    const auto& vb = fb.variants[sig.index_b].genotypes;

    long long high_cases = 0, high_total = 0, low_cases = 0, low_total = 0;
    for (std::size_t p = 0; p < labels.size(); ++p) {
        const int cell = 3 * static_cast<int>(va[p]) + static_cast<int>(vb[p]);
        const bool high = cell == 0 || cell == 4 || cell == 8;
        const bool is_case = labels.status[p] == Status::Case;
        (high ? high_total : low_total) += 1;
        if (is_case)
            (high ? high_cases : low_cases) += 1;
    }
    REQUIRE(high_total > 100);
    REQUIRE(low_total > 100);
    const double high_rate = double(high_cases) / double(high_total);
    const double low_rate = double(low_cases) / double(low_total);
    // Binomial noise at n>300 stays well inside these bands for p=0.9/0.1.
    CHECK(high_rate > 0.8);
    CHECK(low_rate < 0.2);
}

TEST_CASE("generator rejects broken configs") {
    auto dir = testutil::scratch_dir("gen_invalid");

    GeneratorConfig cfg = small_config();
    cfg.n_files = 0;
    CHECK_THROWS_AS(generate_cohort(cfg, dir), InvalidConfig);

    cfg = small_config();
    cfg.case_fraction = 0.0;
    CHECK_THROWS_AS(generate_cohort(cfg, dir), InvalidConfig);
    cfg.case_fraction = 1.0;
    CHECK_THROWS_AS(generate_cohort(cfg, dir), InvalidConfig);

    cfg = small_config();
    PlantedSignal sig;
    sig.file_a = 0;
    sig.index_a = 0;
    sig.file_b = 0;
    sig.index_b = 0;
    sig.high_risk_cells = {0};
    cfg.planted = sig;
    CHECK_THROWS_AS(generate_cohort(cfg, dir), InvalidConfig); // same variant twice

    cfg.planted->index_b = 99;
    CHECK_THROWS_AS(generate_cohort(cfg, dir), InvalidConfig); // out of range

    cfg.planted->index_b = 1;
    cfg.planted->high_risk_cells = {9};
    CHECK_THROWS_AS(generate_cohort(cfg, dir), InvalidConfig); // bad cell

    cfg.planted->high_risk_cells = {};
    CHECK_THROWS_AS(generate_cohort(cfg, dir), InvalidConfig); // no cells

    cfg.planted->high_risk_cells = {0};
    cfg.planted->p_case_high = 0.1;
    cfg.planted->p_case_low = 0.9;
    CHECK_THROWS_AS(generate_cohort(cfg, dir), InvalidConfig); // inverted rates
}
