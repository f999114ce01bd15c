#include "epipair/generator.hpp"

#include <algorithm>
#include <string>

#include "epipair/errors.hpp"
#include "epipair/rng.hpp"
#include "epipair/text_io.hpp"

namespace epipair {

namespace {

// Substream tags; labels and the planted pair get their own streams so file
// contents do not depend on generation order.
constexpr std::uint64_t kLabelsTag = 0x4C4142454C53ULL;  // "LABELS"
constexpr std::uint64_t kPlantedTag = 0x504C414E54ULL;   // "PLANT"
constexpr std::uint64_t kFileTagBase = 0x46494C4500ULL;  // "FILE" << 8

std::string zero_pad(std::uint64_t value, std::size_t width) {
    std::string s = std::to_string(value);
    if (s.size() < width)
        s.insert(0, width - s.size(), '0');
    return s;
}

void validate(const GeneratorConfig& cfg) {
    if (cfg.n_files == 0 || cfg.variants_per_file == 0 || cfg.n_patients == 0)
        throw InvalidConfig("generator counts must be positive");
    if (!(cfg.case_fraction > 0.0 && cfg.case_fraction < 1.0))
        throw InvalidConfig("case_fraction must lie strictly inside (0,1)");
    if (cfg.planted) {
        const PlantedSignal& p = *cfg.planted;
        if (p.file_a >= cfg.n_files || p.file_b >= cfg.n_files ||
            p.index_a >= cfg.variants_per_file || p.index_b >= cfg.variants_per_file)
            throw InvalidConfig("planted pair coordinates out of range");
        if (p.file_a == p.file_b && p.index_a == p.index_b)
            throw InvalidConfig("planted pair must name two distinct variants");
        if (!(p.p_case_high > p.p_case_low))
            throw InvalidConfig("planted p_case_high must exceed p_case_low");
        if (p.high_risk_cells.empty())
            throw InvalidConfig("planted signal needs at least one high-risk cell");
        for (int c : p.high_risk_cells)
            if (c < 0 || c > 8)
                throw InvalidConfig("planted cell indices must lie in 0..8");
    }
}

constexpr char kBases[4] = {'A', 'C', 'G', 'T'};

VariantRecord random_variant(Rng& rng, std::uint32_t file_id, std::uint32_t index,
                             std::uint64_t position, std::uint32_t n_patients) {
    VariantRecord rec;
    rec.chromosome = "22";
    rec.position = position;
    rec.id = "snp_" + std::to_string(file_id) + "_" + std::to_string(index);
    const int ref = static_cast<int>(rng.below(4));
    int alt = static_cast<int>(rng.below(3));
    if (alt >= ref)
        ++alt;
    rec.ref_allele = std::string(1, kBases[ref]);
    rec.alt_allele = std::string(1, kBases[alt]);
    rec.genotypes.resize(n_patients);
    for (std::uint32_t p = 0; p < n_patients; ++p)
        rec.genotypes[p] = static_cast<GenotypeCode>(rng.below(3));
    return rec;
}

} // namespace

CohortManifest generate_cohort(const GeneratorConfig& cfg,
                               const std::filesystem::path& out_dir) {
    validate(cfg);

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec)
        throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

    const std::size_t id_width =
        std::max<std::size_t>(4, std::to_string(cfg.n_patients).size());
    const std::size_t file_width =
        std::max<std::size_t>(2, std::to_string(cfg.n_files).size());

    // Planted pair columns first: statuses depend on them.
    std::vector<GenotypeCode> planted_a, planted_b;
    std::vector<std::uint8_t> cell_is_high(9, 0);
    if (cfg.planted) {
        for (int c : cfg.planted->high_risk_cells)
            cell_is_high[static_cast<std::size_t>(c)] = 1;
        Rng rng = Rng::stream(cfg.seed, kPlantedTag);
        planted_a.resize(cfg.n_patients);
        planted_b.resize(cfg.n_patients);
        for (std::uint32_t p = 0; p < cfg.n_patients; ++p) {
            const std::uint64_t cell = rng.below(9);
            planted_a[p] = static_cast<GenotypeCode>(cell / 3);
            planted_b[p] = static_cast<GenotypeCode>(cell % 3);
        }
    }

    PhenotypeLabels labels;
    labels.patient_ids.reserve(cfg.n_patients);
    labels.status.reserve(cfg.n_patients);
    {
        Rng rng = Rng::stream(cfg.seed, kLabelsTag);
        for (std::uint32_t p = 0; p < cfg.n_patients; ++p) {
            labels.patient_ids.push_back("P" + zero_pad(p + 1, id_width));
            double p_case = cfg.case_fraction;
            if (cfg.planted) {
                const int cell = static_cast<int>(planted_a[p]) * 3 +
                                 static_cast<int>(planted_b[p]);
                p_case = cell_is_high[static_cast<std::size_t>(cell)]
                             ? cfg.planted->p_case_high
                             : cfg.planted->p_case_low;
            }
            labels.status.push_back(rng.bernoulli(p_case) ? Status::Case
                                                          : Status::Control);
        }
    }

    CohortManifest manifest;
    const std::string ext = cfg.gzip ? ".csv.gz" : ".csv";
    for (std::uint32_t f = 0; f < cfg.n_files; ++f) {
        Rng rng = Rng::stream(cfg.seed, kFileTagBase + f);
        GenotypeFile file;
        file.file_id = f;
        file.patient_count = cfg.n_patients;
        file.variants.reserve(cfg.variants_per_file);
        std::uint64_t position = 16'000'000 + 2'000'000ULL * f;
        for (std::uint32_t v = 0; v < cfg.variants_per_file; ++v) {
            position += 1 + rng.below(39'999);
            VariantRecord rec = random_variant(rng, f, v, position, cfg.n_patients);
            if (cfg.planted) {
                if (f == cfg.planted->file_a && v == cfg.planted->index_a)
                    rec.genotypes = planted_a;
                else if (f == cfg.planted->file_b && v == cfg.planted->index_b)
                    rec.genotypes = planted_b;
            }
            file.variants.push_back(std::move(rec));
        }
        const std::filesystem::path path =
            out_dir / ("f" + zero_pad(f + 1, file_width) + ext);
        write_genotype_file(file, path);
        manifest.genotype_files.push_back(path);
    }

    manifest.labels_file = out_dir / "labels.csv";
    write_labels(labels, manifest.labels_file);
    return manifest;
}

} // namespace epipair
