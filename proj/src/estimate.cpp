#include "mqc/estimate.hpp"

#include <unordered_map>

#include "mqc/volume_io.hpp"

namespace mqc {

SlicePrediction estimate_slice(const Model& model, const SlicePair& pair,
                               const EmbeddingTable& table) {
    const auto& cond = table.lookup(pair.class_id);
    return {pair.z_index, model.predict(pair, cond.vector)};
}

QualityRecord estimate_volume(const Volume& image, const Mask& mask, int class_id,
                              const EmbeddingTable& table, const Model& model, int k) {
    const std::vector<int> zs =
        k <= 0 ? nonempty_slices(mask) : sample_slices(mask, k);
    if (zs.empty()) throw EmptyMaskError("mask has no foreground voxels");

    QualityRecord rec;
    rec.volume_id = image.id;
    rec.class_id = class_id;
    for (const int z : zs) {
        const auto pair = preprocess_pair(image, mask, z, class_id);
        if (!pair) continue; // hole inside the z-extent
        rec.slices.push_back(estimate_slice(model, *pair, table));
    }
    if (rec.slices.empty()) throw EmptyMaskError("no scoreable slices for mask");
    double mean = 0.0;
    for (const auto& s : rec.slices) mean += s.value;
    rec.predicted_dsc = mean / static_cast<double>(rec.slices.size());
    return rec;
}

std::vector<QualityRecord> estimate_manifest(const CorpusManifest& manifest,
                                             const EmbeddingTable& table, const Model& model,
                                             const std::string& split, int k) {
    std::vector<QualityRecord> out;
    std::unordered_map<std::string, Volume> images;
    for (const auto& rec : manifest.records) {
        if (!split.empty() && rec.split != split) continue;
        auto it = images.find(rec.volume_id);
        if (it == images.end())
            it = images
                     .emplace(rec.volume_id, load_volume(manifest.resolve(rec.image_path),
                                                         VolumeFormat::portable))
                     .first;
        const Mask mask = load_mask(manifest.resolve(rec.mask_path), VolumeFormat::portable);
        try {
            QualityRecord q = estimate_volume(it->second, mask, rec.class_id, table, model, k);
            q.actual_dsc = rec.actual_dsc;
            out.push_back(std::move(q));
        } catch (const EmptyMaskError&) {
            continue; // a destroyed mask cannot be scored
        }
    }
    return out;
}

} // namespace mqc
