#include <doctest.h>

#include <string>

#include "epipair/errors.hpp"
#include "epipair/genotype.hpp"
#include "epipair/text_io.hpp"
#include "test_util.hpp"

using namespace epipair;

TEST_CASE("decode_genotype maps the four legal triples") {
    CHECK(decode_genotype(1, 0, 0) == GenotypeCode::HomRef);
    CHECK(decode_genotype(0, 1, 0) == GenotypeCode::Het);
    CHECK(decode_genotype(0, 0, 1) == GenotypeCode::HomAlt);
    CHECK(decode_genotype(0, 0, 0) == GenotypeCode::Missing);
}

TEST_CASE("decode_genotype rejects everything else") {
    CHECK_THROWS_AS(decode_genotype(1, 1, 0), MalformedGenotype);
    CHECK_THROWS_AS(decode_genotype(1, 0, 1), MalformedGenotype);
    CHECK_THROWS_AS(decode_genotype(0, 1, 1), MalformedGenotype);
    CHECK_THROWS_AS(decode_genotype(1, 1, 1), MalformedGenotype);
    CHECK_THROWS_AS(decode_genotype(2, 0, 0), MalformedGenotype);
    CHECK_THROWS_AS(decode_genotype(0, -1, 0), MalformedGenotype);
    CHECK_THROWS_AS(decode_genotype(0, 0, 7), MalformedGenotype);
}

TEST_CASE("genotype file roundtrip, plain and gzipped") {
    auto dir = testutil::scratch_dir("genotype_roundtrip");
    Rng rng(11);
    auto cohort = testutil::random_cohort(rng, 23, 7, 0.1);

    GenotypeFile file;
    file.variants = cohort.variants;

    for (const char* name : {"round.csv", "round.csv.gz"}) {
        const auto path = dir / name;
        write_genotype_file(file, path);
        const GenotypeFile back = parse_genotype_file(path);
        REQUIRE(back.variants.size() == file.variants.size());
        CHECK(back.patient_count == 23);
        CHECK(back.variants == file.variants);
    }
}

TEST_CASE("id column count is detected from the first row") {
    auto dir = testutil::scratch_dir("genotype_idcols");

    SUBCASE("five id columns keep the variant id") {
        const auto p = dir / "five.csv";
        write_text_file(p, "22,100,rs42,A,G,1,0,0,0,1,0\n");
        const auto f = parse_genotype_file(p);
        REQUIRE(f.variants.size() == 1);
        CHECK(f.patient_count == 2);
        CHECK(f.variants[0].id == "rs42");
        CHECK(f.variants[0].genotypes[0] == GenotypeCode::HomRef);
        CHECK(f.variants[0].genotypes[1] == GenotypeCode::Het);
    }

    SUBCASE("four id columns leave the id empty") {
        const auto p = dir / "four.csv";
        write_text_file(p, "22,100,A,G,1,0,0,0,1,0,0,0,1\n");
        const auto f = parse_genotype_file(p);
        REQUIRE(f.variants.size() == 1);
        CHECK(f.patient_count == 3);
        CHECK(f.variants[0].id.empty());
        CHECK(f.variants[0].ref_allele == "A");
        CHECK(f.variants[0].genotypes[2] == GenotypeCode::HomAlt);
    }

    SUBCASE("column counts fitting neither layout are rejected") {
        const auto p = dir / "neither.csv";
        // 6 columns: 6-5=1 and 6-4=2, neither divisible by 3.
        write_text_file(p, "22,100,rs1,A,G,1\n");
        CHECK_THROWS_AS(parse_genotype_file(p), MalformedRow);
    }
}

TEST_CASE("ragged rows are rejected with the offending row") {
    auto dir = testutil::scratch_dir("genotype_ragged");
    const auto p = dir / "ragged.csv";
    write_text_file(p, "22,100,rs1,A,G,1,0,0\n22,200,rs2,C,T,1,0,0,0,1,0\n");
    CHECK_THROWS_WITH_AS(parse_genotype_file(p),
                         doctest::Contains("row 2"), MalformedRow);
}

TEST_CASE("bad genotype entries are rejected") {
    auto dir = testutil::scratch_dir("genotype_badentry");

    const auto two_hot = dir / "twohot.csv";
    write_text_file(two_hot, "22,100,rs1,A,G,1,1,0\n");
    CHECK_THROWS_AS(parse_genotype_file(two_hot), MalformedGenotype);

    const auto non_binary = dir / "nonbinary.csv";
    write_text_file(non_binary, "22,100,rs1,A,G,2,0,0\n");
    CHECK_THROWS_AS(parse_genotype_file(non_binary), MalformedGenotype);

    const auto junk = dir / "junk.csv";
    write_text_file(junk, "22,100,rs1,A,G,x,0,0\n");
    CHECK_THROWS_AS(parse_genotype_file(junk), MalformedGenotype);
}

TEST_CASE("malformed metadata fields are rejected") {
    auto dir = testutil::scratch_dir("genotype_badmeta");

    const auto bad_pos = dir / "badpos.csv";
    write_text_file(bad_pos, "22,notanumber,rs1,A,G,1,0,0\n");
    CHECK_THROWS_AS(parse_genotype_file(bad_pos), MalformedRow);

    const auto same_alleles = dir / "samealleles.csv";
    write_text_file(same_alleles, "22,100,rs1,A,A,1,0,0\n");
    CHECK_THROWS_AS(parse_genotype_file(same_alleles), MalformedRow);
}

TEST_CASE("empty genotype file parses to zero variants") {
    auto dir = testutil::scratch_dir("genotype_empty");
    const auto p = dir / "empty.csv";
    write_text_file(p, "");
    const auto f = parse_genotype_file(p);
    CHECK(f.variants.empty());
}

TEST_CASE("expected patient count is enforced when given") {
    auto dir = testutil::scratch_dir("genotype_expected");
    const auto p = dir / "two.csv";
    write_text_file(p, "22,100,rs1,A,G,1,0,0,0,1,0\n");
    CHECK(parse_genotype_file(p, 2).patient_count == 2);
    CHECK_THROWS_AS(parse_genotype_file(p, 3), MalformedRow);
}

TEST_CASE("missing file raises IoError") {
    CHECK_THROWS_AS(parse_genotype_file("/nonexistent/nowhere.csv"), IoError);
    CHECK_THROWS_AS(parse_labels("/nonexistent/nowhere.csv"), IoError);
}

TEST_CASE("parse_genotype_bytes matches parse_genotype_file") {
    auto dir = testutil::scratch_dir("genotype_bytes");
    Rng rng(5);
    auto cohort = testutil::random_cohort(rng, 17, 4);
    GenotypeFile file;
    file.variants = cohort.variants;

    const auto p = dir / "b.csv.gz";
    write_genotype_file(file, p);
    const std::string raw = read_binary_file(p);
    const auto from_bytes = parse_genotype_bytes(raw, "b.csv.gz");
    const auto from_file = parse_genotype_file(p);
    CHECK(from_bytes.variants == from_file.variants);
}

TEST_CASE("gzip output is byte deterministic") {
    auto dir = testutil::scratch_dir("genotype_gzdet");
    Rng rng(99);
    auto cohort = testutil::random_cohort(rng, 31, 6);
    GenotypeFile file;
    file.variants = cohort.variants;

    write_genotype_file(file, dir / "a.csv.gz");
    write_genotype_file(file, dir / "b.csv.gz");
    CHECK(read_binary_file(dir / "a.csv.gz") == read_binary_file(dir / "b.csv.gz"));
}

TEST_CASE("labels parse, roundtrip and reject bad rows") {
    auto dir = testutil::scratch_dir("labels");

    SUBCASE("roundtrip") {
        PhenotypeLabels labels;
        labels.patient_ids = {"P1", "P2", "P3"};
        labels.status = {Status::Case, Status::Control, Status::Case};
        const auto p = dir / "labels.csv";
        write_labels(labels, p);
        const auto back = parse_labels(p);
        CHECK(back.patient_ids == labels.patient_ids);
        CHECK(back.status == labels.status);
        CHECK(back.case_count() == 2);
        CHECK(back.control_count() == 1);
    }

    SUBCASE("status outside {0,1}") {
        const auto p = dir / "badstatus.csv";
        write_text_file(p, "P1,1\nP2,2\n");
        CHECK_THROWS_AS(parse_labels(p), MalformedLabel);
    }

    SUBCASE("wrong field count") {
        const auto p = dir / "badfields.csv";
        write_text_file(p, "P1,1,extra\n");
        CHECK_THROWS_AS(parse_labels(p), MalformedLabel);
    }

    SUBCASE("duplicate patient id") {
        const auto p = dir / "dup.csv";
        write_text_file(p, "P1,1\nP1,0\n");
        CHECK_THROWS_AS(parse_labels(p), DuplicatePatient);
    }

    SUBCASE("single-class cohort") {
        const auto p = dir / "onesided.csv";
        write_text_file(p, "P1,1\nP2,1\n");
        CHECK_THROWS_AS(parse_labels(p), DegenerateCohort);
    }
}
