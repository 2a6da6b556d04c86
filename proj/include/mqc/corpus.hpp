#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mqc/degrade.hpp"
#include "mqc/grid.hpp"
#include "mqc/quality_record.hpp"
#include "mqc/vocab.hpp"

namespace mqc {

// Phantom-corpus generator settings. Volumes are synthetic: one ellipsoidal
// structure per class with a class-specific intensity band and size range,
// some placed flush against a neighbour so a dilated or merged mask can cover
// two structures at once.
struct GeneratorConfig {
    int n_volumes = 20;
    int n_test_volumes = 5;
    GridSize grid{32, 64, 64};
    Spacing spacing{3.0, 1.0, 1.0};
    std::vector<std::string> class_names = {"liver", "spleen", "kidney", "pancreas",
                                            "gallbladder"};
    std::vector<DegradationSpec> severities = default_severity_ladder();
    double background_hu = -80.0;
    double noise_sd = 8.0;

    static std::vector<DegradationSpec> default_severity_ladder();
    void validate() const;
};

struct CorpusRecord {
    std::string volume_id;
    int class_id = 0;
    std::string image_path;   // relative to the corpus root
    std::string mask_path;    // degraded mask under evaluation
    std::string mask_gt_path; // exact synthetic ground truth
    double actual_dsc = 0.0;
    std::string split; // "train" or "test"
    int severity = 0;
    DegradationSpec degradation;
};

struct CorpusManifest {
    std::uint64_t seed = 0;
    GeneratorConfig config;
    ClassVocabulary vocabulary;
    std::vector<SubjectMeta> subjects;
    std::vector<CorpusRecord> records;
    std::string root; // directory of the manifest; not serialized

    const SubjectMeta& subject(const std::string& volume_id) const;
    std::vector<std::string> volume_ids() const;
    std::string resolve(const std::string& rel) const;
};

// Synthesizes phantoms, applies every severity to every (volume, class),
// records the exact Dice of each degraded mask, and writes everything under
// out_dir. Record order is (volume, class, severity); identical (config,
// seed) produce byte-identical output.
CorpusManifest build_corpus(const GeneratorConfig& config, std::uint64_t seed,
                            const std::string& out_dir);

// Keeps the m volumes with the highest mean predicted quality subject to
// equal counts per balance group (floor(m/groups) each, ties by volume id).
CorpusManifest resample_corpus(const CorpusManifest& manifest,
                               const std::vector<QualityRecord>& estimates, int m,
                               const std::string& balance_key);

void save_manifest(const CorpusManifest& m, const std::string& path);
CorpusManifest load_manifest(const std::string& path);

} // namespace mqc
