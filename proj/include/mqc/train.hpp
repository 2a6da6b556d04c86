#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mqc/conditioning.hpp"
#include "mqc/corpus.hpp"
#include "mqc/loss.hpp"
#include "mqc/model.hpp"

namespace mqc {

struct StepLog {
    int epoch = 0;
    int step = 0;
    double mse_term = 0.0;
    double rank_term = 0.0;
    double total = 0.0;
    int pairs = 0;
};

struct TrainOptions {
    std::string checkpoint_dir; // per-epoch checkpoints + final, when set
    std::string log_path;       // JSONL step log, when set
};

struct TrainResult {
    Model model;
    std::vector<StepLog> log;
    std::vector<double> epoch_mean_loss;
    int n_samples = 0;
};

// Slice pairs are drawn from the train split (slices_per_record per record,
// uniformly over each degraded mask), batches are re-shuffled each epoch with
// the seeded RNG, pairs are formed by assignment over the batch's condition
// embeddings, and the compositional objective is minimized with Adam. Results
// are bit-reproducible for a fixed seed independent of the thread count:
// samples are processed in fixed-size chunks whose gradients are combined in
// chunk order.
TrainResult train(const CorpusManifest& manifest, const EmbeddingTable& table,
                  RegressorConfig cfg, const LossConfig& loss_cfg, std::uint64_t seed,
                  const TrainOptions& options = {});

void save_step_log(const std::vector<StepLog>& log, const std::string& path);

} // namespace mqc
