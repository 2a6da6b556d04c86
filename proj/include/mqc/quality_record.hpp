#pragma once

#include <optional>
#include <string>
#include <vector>

namespace mqc {

struct SlicePrediction {
    int z = 0;
    double value = 0.0;
};

// One (volume, class) quality row: the measured Dice when a ground truth was
// available, and the model estimate with its per-slice parts.
struct QualityRecord {
    std::string volume_id;
    int class_id = 0;
    std::optional<double> actual_dsc;
    double predicted_dsc = 0.0;
    std::vector<SlicePrediction> slices;
};

// JSONL, one record per line.
void save_quality_records(const std::vector<QualityRecord>& records, const std::string& path);
std::vector<QualityRecord> load_quality_records(const std::string& path);

} // namespace mqc
