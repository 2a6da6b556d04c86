#include "mqc/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <unordered_map>

#include "json.hpp"

#include "mqc/rng.hpp"
#include "mqc/volume_io.hpp"

namespace mqc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kChunk = 4; // samples per gradient chunk; fixes the combine order

struct TrainSample {
    std::vector<float> stem; // encoder input after the pooling stem
    int class_id = 0;
    double target = 0.0;
};

std::vector<TrainSample> assemble(const CorpusManifest& manifest, const Model& model,
                                  const EmbeddingTable& table) {
    std::vector<TrainSample> samples;
    std::unordered_map<std::string, Volume> images;
    const int k = model.config().slices_per_record;
    for (const auto& rec : manifest.records) {
        if (rec.split != "train") continue;
        table.lookup(rec.class_id); // throws when the table misses a class
        auto it = images.find(rec.volume_id);
        if (it == images.end())
            it = images
                     .emplace(rec.volume_id,
                              load_volume(manifest.resolve(rec.image_path),
                                          VolumeFormat::portable))
                     .first;
        Mask mask = load_mask(manifest.resolve(rec.mask_path), VolumeFormat::portable);

        std::vector<int> zs;
        try {
            zs = sample_slices(mask, k);
        } catch (const EmptyMaskError&) {
            continue; // fully destroyed masks carry no slices to score
        }
        for (const int z : zs) {
            const auto pair = preprocess_pair(it->second, mask, z, rec.class_id);
            if (!pair) continue;
            TrainSample s;
            s.stem = model.apply_stem(*pair);
            s.class_id = rec.class_id;
            s.target = rec.actual_dsc;
            samples.push_back(std::move(s));
        }
    }
    if (samples.empty()) throw ValueError("train split produced no usable slice pairs");
    return samples;
}

PairingResult pair_batch(const std::vector<int>& class_ids, const EmbeddingTable& table) {
    const int n = static_cast<int>(class_ids.size());
    if (n < 2) {
        PairingResult p;
        if (n == 1) p.leftover = 0;
        return p;
    }
    std::vector<std::vector<float>> vecs;
    vecs.reserve(class_ids.size());
    for (const int c : class_ids) vecs.push_back(table.lookup(c).vector);
    return optimal_pairs(cosine_similarity_matrix(vecs), n);
}

} // namespace

void save_step_log(const std::vector<StepLog>& log, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write training log: " + path);
    for (const auto& s : log) {
        const json j{{"epoch", s.epoch},       {"step", s.step},   {"mse_term", s.mse_term},
                     {"rank_term", s.rank_term}, {"total", s.total}, {"pairs", s.pairs}};
        out << j.dump() << "\n";
    }
}

TrainResult train(const CorpusManifest& manifest, const EmbeddingTable& table,
                  RegressorConfig cfg, const LossConfig& loss_cfg, std::uint64_t seed,
                  const TrainOptions& options) {
    table.validate();
    loss_cfg.validate();
    if (cfg.conditioned) cfg.d_t = table.d_t;

    Model model(cfg);
    model.init_params(derive_seed(seed, "init"));

    std::vector<TrainSample> samples = assemble(manifest, model, table);
    const int n = static_cast<int>(samples.size());

    std::vector<float> grad(model.param_count(), 0.0f);
    std::vector<float> adam_m(model.param_count(), 0.0f);
    std::vector<float> adam_v(model.param_count(), 0.0f);
    std::vector<Activations> acts(cfg.batch_size);

    const int n_chunks_max = (cfg.batch_size + kChunk - 1) / kChunk;
    std::vector<std::vector<float>> chunk_grad(
        n_chunks_max, std::vector<float>(model.param_count(), 0.0f));

    TrainResult result{std::move(model), {}, {}, n};
    Model& net = result.model;

    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    Rng shuffle_rng(derive_seed(seed, "shuffle"));

    if (!options.checkpoint_dir.empty()) fs::create_directories(options.checkpoint_dir);

    long long adam_t = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        int steps = 0;
        for (int start = 0; start < n; start += cfg.batch_size, ++steps) {
            const int bs = std::min(cfg.batch_size, n - start);
            std::vector<int> class_ids(bs);
            for (int i = 0; i < bs; ++i) class_ids[i] = samples[order[start + i]].class_id;

            const int n_chunks = (bs + kChunk - 1) / kChunk;
            std::vector<double> predictions(bs);
#pragma omp parallel for schedule(static)
            for (int c = 0; c < n_chunks; ++c) {
                for (int i = c * kChunk; i < std::min(bs, (c + 1) * kChunk); ++i) {
                    const TrainSample& s = samples[order[start + i]];
                    const float* cond =
                        cfg.conditioned ? table.lookup(s.class_id).vector.data() : nullptr;
                    predictions[i] = net.forward(s.stem.data(), cond, acts[i], false);
                }
            }

            BatchTargets batch;
            batch.predicted = predictions;
            batch.actual.resize(bs);
            for (int i = 0; i < bs; ++i) batch.actual[i] = samples[order[start + i]].target;
            batch.pairing = pair_batch(class_ids, table);

            const LossBreakdown breakdown = compositional_loss(batch, loss_cfg);
            const std::vector<double> dpred = compositional_loss_grad(batch, loss_cfg);

#pragma omp parallel for schedule(static)
            for (int c = 0; c < n_chunks; ++c) {
                std::fill(chunk_grad[c].begin(), chunk_grad[c].end(), 0.0f);
                for (int i = c * kChunk; i < std::min(bs, (c + 1) * kChunk); ++i) {
                    const TrainSample& s = samples[order[start + i]];
                    const float* cond =
                        cfg.conditioned ? table.lookup(s.class_id).vector.data() : nullptr;
                    net.backward(s.stem.data(), cond, acts[i], dpred[i],
                                 chunk_grad[c].data(), false);
                }
            }
            std::fill(grad.begin(), grad.end(), 0.0f);
            for (int c = 0; c < n_chunks; ++c)
                for (std::size_t p = 0; p < grad.size(); ++p) grad[p] += chunk_grad[c][p];

            ++adam_t;
            const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(adam_t));
            const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(adam_t));
            std::vector<float>& params = net.params();
#pragma omp parallel for schedule(static)
            for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(params.size()); ++p) {
                const double g = grad[p];
                const double m = cfg.adam_beta1 * adam_m[p] + (1.0 - cfg.adam_beta1) * g;
                const double v = cfg.adam_beta2 * adam_v[p] + (1.0 - cfg.adam_beta2) * g * g;
                adam_m[p] = static_cast<float>(m);
                adam_v[p] = static_cast<float>(v);
                params[p] -= static_cast<float>(cfg.lr * (m / bc1) /
                                                (std::sqrt(v / bc2) + cfg.adam_eps));
            }

            result.log.push_back({epoch, steps, breakdown.mse_term, breakdown.rank_term,
                                  breakdown.total,
                                  static_cast<int>(batch.pairing.pairs.size())});
            epoch_loss += breakdown.total;
        }
        result.epoch_mean_loss.push_back(epoch_loss / std::max(1, steps));
        if (!options.checkpoint_dir.empty()) {
            char name[32];
            std::snprintf(name, sizeof(name), "ckpt_epoch_%03d.mqckpt", epoch);
            save_checkpoint(net, (fs::path(options.checkpoint_dir) / name).string());
        }
    }

    if (!options.checkpoint_dir.empty())
        save_checkpoint(net, (fs::path(options.checkpoint_dir) / "final.mqckpt").string());
    if (!options.log_path.empty()) save_step_log(result.log, options.log_path);
    return result;
}

} // namespace mqc
