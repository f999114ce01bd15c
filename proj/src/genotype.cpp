#include "epipair/genotype.hpp"

#include <algorithm>
#include <charconv>
#include <unordered_set>

#include "epipair/errors.hpp"
#include "epipair/text_io.hpp"

namespace epipair {

GenotypeCode decode_genotype(int a, int b, int c) {
    const int vals[3] = {a, b, c};
    int ones = 0;
    for (int v : vals) {
        if (v != 0 && v != 1)
            throw MalformedGenotype("genotype entry must be 0 or 1, got " +
                                    std::to_string(v));
        ones += v;
    }
    if (ones > 1)
        throw MalformedGenotype("multi-hot genotype triple");
    if (a == 1)
        return GenotypeCode::HomRef;
    if (b == 1)
        return GenotypeCode::Het;
    if (c == 1)
        return GenotypeCode::HomAlt;
    return GenotypeCode::Missing;
}

std::size_t PhenotypeLabels::case_count() const {
    return static_cast<std::size_t>(
        std::count(status.begin(), status.end(), Status::Case));
}

std::size_t PhenotypeLabels::control_count() const {
    return status.size() - case_count();
}

namespace {

bool parse_u64(std::string_view field, std::uint64_t& out) {
    if (field.empty())
        return false;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
    return ec == std::errc() && ptr == field.data() + field.size();
}

int parse_genotype_entry(std::string_view field, std::string_view name, std::size_t row) {
    if (field.size() == 1) {
        if (field[0] == '0')
            return 0;
        if (field[0] == '1')
            return 1;
    }
    throw MalformedGenotype(std::string(name) + " row " + std::to_string(row + 1) +
                            ": genotype entry '" + std::string(field) +
                            "' is not 0 or 1");
}

std::size_t detect_id_columns(std::size_t total, std::string_view name) {
    // Prefer 5 if both fit; they never do (the difference is 1, not a
    // multiple of 3), but the preference is stated for completeness.
    if (total >= 5 && (total - 5) % 3 == 0)
        return 5;
    if (total >= 4 && (total - 4) % 3 == 0)
        return 4;
    throw MalformedRow(std::string(name) + ": first row has " + std::to_string(total) +
                       " columns; no id-column count in {4,5} leaves a multiple of 3");
}

GenotypeFile parse_genotype_text(std::string_view text, std::string_view name,
                                 std::optional<std::size_t> expected_patients) {
    GenotypeFile file;
    file.source_path = std::string(name);

    const auto lines = split_lines(text);
    if (lines.empty()) {
        file.patient_count = expected_patients.value_or(0);
        return file;
    }

    std::vector<std::string_view> fields;
    std::size_t id_columns = 0;
    std::size_t total_columns = 0;

    file.variants.reserve(lines.size());
    for (std::size_t row = 0; row < lines.size(); ++row) {
        split_fields(lines[row], ',', fields);
        if (row == 0) {
            total_columns = fields.size();
            id_columns = detect_id_columns(total_columns, name);
            file.patient_count = (total_columns - id_columns) / 3;
            if (expected_patients && *expected_patients != file.patient_count)
                throw MalformedRow(std::string(name) + ": expected " +
                                   std::to_string(*expected_patients) +
                                   " patients, file has " +
                                   std::to_string(file.patient_count));
        } else if (fields.size() != total_columns) {
            throw MalformedRow(std::string(name) + " row " + std::to_string(row + 1) +
                               ": " + std::to_string(fields.size()) +
                               " columns, first row had " +
                               std::to_string(total_columns));
        }

        VariantRecord rec;
        rec.chromosome = std::string(fields[0]);
        if (rec.chromosome.empty())
            throw MalformedRow(std::string(name) + " row " + std::to_string(row + 1) +
                               ": empty chromosome field");
        if (!parse_u64(fields[1], rec.position))
            throw MalformedRow(std::string(name) + " row " + std::to_string(row + 1) +
                               ": position '" + std::string(fields[1]) +
                               "' is not a non-negative integer");
        std::size_t next = 2;
        if (id_columns == 5)
            rec.id = std::string(fields[next++]);
        rec.ref_allele = std::string(fields[next++]);
        rec.alt_allele = std::string(fields[next++]);
        if (rec.ref_allele.empty() || rec.alt_allele.empty() ||
            rec.ref_allele == rec.alt_allele)
            throw MalformedRow(std::string(name) + " row " + std::to_string(row + 1) +
                               ": ref/alt alleles must be non-empty and distinct");

        rec.genotypes.reserve(file.patient_count);
        for (std::size_t p = 0; p < file.patient_count; ++p) {
            const std::size_t base = id_columns + 3 * p;
            const int a = parse_genotype_entry(fields[base], name, row);
            const int b = parse_genotype_entry(fields[base + 1], name, row);
            const int c = parse_genotype_entry(fields[base + 2], name, row);
            rec.genotypes.push_back(decode_genotype(a, b, c));
        }
        file.variants.push_back(std::move(rec));
    }
    return file;
}

} // namespace

GenotypeFile parse_genotype_file(const std::filesystem::path& path,
                                 std::optional<std::size_t> expected_patients) {
    return parse_genotype_text(read_text_file(path), path.string(), expected_patients);
}

GenotypeFile parse_genotype_bytes(std::string_view bytes, std::string_view name,
                                  std::optional<std::size_t> expected_patients) {
    if (has_gz_suffix(name))
        return parse_genotype_text(gunzip(bytes), name, expected_patients);
    return parse_genotype_text(bytes, name, expected_patients);
}

void write_genotype_file(const GenotypeFile& file, const std::filesystem::path& path) {
    const bool with_id = std::all_of(file.variants.begin(), file.variants.end(),
                                     [](const VariantRecord& r) { return !r.id.empty(); });
    std::string out;
    for (const VariantRecord& rec : file.variants) {
        out += rec.chromosome;
        out += ',';
        out += std::to_string(rec.position);
        out += ',';
        if (with_id) {
            out += rec.id;
            out += ',';
        }
        out += rec.ref_allele;
        out += ',';
        out += rec.alt_allele;
        for (GenotypeCode g : rec.genotypes) {
            switch (g) {
            case GenotypeCode::HomRef: out += ",1,0,0"; break;
            case GenotypeCode::Het:    out += ",0,1,0"; break;
            case GenotypeCode::HomAlt: out += ",0,0,1"; break;
            case GenotypeCode::Missing: out += ",0,0,0"; break;
            }
        }
        out += '\n';
    }
    write_text_file(path, out);
}

namespace {

PhenotypeLabels parse_labels_text(std::string_view text, std::string_view name) {
    PhenotypeLabels labels;
    std::unordered_set<std::string_view> seen;
    std::vector<std::string_view> fields;
    const auto lines = split_lines(text);
    labels.patient_ids.reserve(lines.size());
    labels.status.reserve(lines.size());
    for (std::size_t row = 0; row < lines.size(); ++row) {
        split_fields(lines[row], ',', fields);
        if (fields.size() != 2 || fields[0].empty())
            throw MalformedLabel(std::string(name) + " row " + std::to_string(row + 1) +
                                 ": expected 'patient_id,status'");
        if (fields[1] != "0" && fields[1] != "1")
            throw MalformedLabel(std::string(name) + " row " + std::to_string(row + 1) +
                                 ": status '" + std::string(fields[1]) +
                                 "' is not 0 or 1");
        if (!seen.insert(fields[0]).second)
            throw DuplicatePatient(std::string(name) + ": duplicate patient id '" +
                                   std::string(fields[0]) + "'");
        labels.patient_ids.emplace_back(fields[0]);
        labels.status.push_back(fields[1] == "1" ? Status::Case : Status::Control);
    }
    const std::size_t cases = labels.case_count();
    if (cases == 0 || cases == labels.size())
        throw DegenerateCohort(std::string(name) +
                               ": cohort needs at least one case and one control");
    return labels;
}

} // namespace

PhenotypeLabels parse_labels(const std::filesystem::path& path) {
    return parse_labels_text(read_text_file(path), path.string());
}

PhenotypeLabels parse_labels_bytes(std::string_view bytes, std::string_view name) {
    if (has_gz_suffix(name))
        return parse_labels_text(gunzip(bytes), name);
    return parse_labels_text(bytes, name);
}

void write_labels(const PhenotypeLabels& labels, const std::filesystem::path& path) {
    std::string out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out += labels.patient_ids[i];
        out += labels.status[i] == Status::Case ? ",1\n" : ",0\n";
    }
    write_text_file(path, out);
}

} // namespace epipair
