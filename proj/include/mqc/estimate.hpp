#pragma once

#include "mqc/conditioning.hpp"
#include "mqc/corpus.hpp"
#include "mqc/model.hpp"
#include "mqc/quality_record.hpp"

namespace mqc {

constexpr int kDefaultEstimateSlices = 10;

// Score one preprocessed slice.
SlicePrediction estimate_slice(const Model& model, const SlicePair& pair,
                               const EmbeddingTable& table);

// Volume-level estimate: k uniformly sampled slices of the mask, scored
// independently, averaged without weighting. Slices where the mask vanishes
// are skipped. k <= 0 scores every non-empty slice.
QualityRecord estimate_volume(const Volume& image, const Mask& mask, int class_id,
                              const EmbeddingTable& table, const Model& model,
                              int k = kDefaultEstimateSlices);

// Estimates for every record of a manifest split ("train", "test" or "" for
// all). actual_dsc is copied from the manifest.
std::vector<QualityRecord> estimate_manifest(const CorpusManifest& manifest,
                                             const EmbeddingTable& table, const Model& model,
                                             const std::string& split,
                                             int k = kDefaultEstimateSlices);

} // namespace mqc
