#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace epipair {

// One-hot triple per patient: (1,0,0)=AA, (0,1,0)=Aa, (0,0,1)=aa, (0,0,0)=missing.
enum class GenotypeCode : std::uint8_t { HomRef = 0, Het = 1, HomAlt = 2, Missing = 3 };

GenotypeCode decode_genotype(int a, int b, int c);

enum class Status : std::uint8_t { Control = 0, Case = 1 };

struct VariantRecord {
    std::string chromosome;
    std::uint64_t position = 0;
    std::string id; // empty when the source file had no id column
    std::string ref_allele;
    std::string alt_allele;
    std::vector<GenotypeCode> genotypes;

    bool operator==(const VariantRecord&) const = default;
};

struct GenotypeFile {
    std::uint32_t file_id = 0;
    std::string source_path;
    std::size_t patient_count = 0;
    std::vector<VariantRecord> variants;
};

struct PhenotypeLabels {
    std::vector<std::string> patient_ids;
    std::vector<Status> status;

    std::size_t size() const { return status.size(); }
    std::size_t case_count() const;
    std::size_t control_count() const;
};

// Rows are `id_columns` identification fields followed by 3*n_patients 0/1
// fields. id_columns is detected from the first row: the value in {4,5} that
// makes the remainder divisible by 3 (4: chrom,pos,ref,alt; 5 adds a variant
// id after pos). Transparently gunzips *.gz paths.
GenotypeFile parse_genotype_file(const std::filesystem::path& path,
                                 std::optional<std::size_t> expected_patients = {});

// Same grammar, from an in-memory copy of the file (`name` decides gzipness).
GenotypeFile parse_genotype_bytes(std::string_view bytes, std::string_view name,
                                  std::optional<std::size_t> expected_patients = {});

// Writes 5 id columns when every record carries an id, 4 otherwise;
// gzips when the path ends in ".gz".
void write_genotype_file(const GenotypeFile& file, const std::filesystem::path& path);

// `patient_id,status` with status in {0,1}, no header.
PhenotypeLabels parse_labels(const std::filesystem::path& path);
PhenotypeLabels parse_labels_bytes(std::string_view bytes, std::string_view name);

void write_labels(const PhenotypeLabels& labels, const std::filesystem::path& path);

} // namespace epipair
