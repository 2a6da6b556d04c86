#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mqc/kernels.hpp"
#include "mqc/preprocess.hpp"

namespace mqc {

struct EncoderConfig {
    int stem_pool = 8;                          // mean-pool factor applied to the 256x256 input
    std::vector<int> channels = {16, 32, 64, 128}; // one stride-2 stage per entry
    int blocks_per_stage = 1;                   // extra stride-1 convs per stage
    bool residual = false;                      // identity skip on the extra convs
};

// Vision encoder + condition-gated regression head. The head computes
//   pred = sigmoid(g2(w2 ⊗ g1(w1 ⊗ f1)))
// where f1 is the pooled encoder feature and [w1, w2] are sigmoid gates from
// an MLP over [f1, condition]. Without conditioning the gates are dropped.
struct RegressorConfig {
    EncoderConfig encoder;
    bool conditioned = true;
    int d_t = 0;          // condition dim; filled in from the embedding table
    int d_g = 64;         // g1 output dim
    int attn_hidden = 128;
    double lr = 1e-3;
    int batch_size = 128;
    int epochs = 30;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int slices_per_record = 3; // training slices sampled per corpus record

    int d_f() const { return encoder.channels.back(); }
    void validate() const;
};

struct TensorView {
    std::string name;
    std::vector<int> shape;
    std::size_t offset = 0;
    std::size_t size = 0;
};

// Per-sample forward state kept for the backward pass.
struct Activations {
    std::vector<std::vector<float>> pre; // conv pre-activations per layer
    std::vector<std::vector<float>> out; // block outputs per layer
    std::vector<float> f1;
    std::vector<float> mlp_in, mlp_hidden_pre, mlp_hidden, gate_pre, gate;
    std::vector<float> a, g1_pre, g1_out, c;
    double z = 0.0;
    double pred = 0.0;
};

class Model {
public:
    explicit Model(RegressorConfig cfg);

    const RegressorConfig& config() const { return cfg_; }
    const std::vector<TensorView>& tensors() const { return tensors_; }
    std::size_t param_count() const { return params_.size(); }
    std::vector<float>& params() { return params_; }
    const std::vector<float>& params() const { return params_; }

    void init_params(std::uint64_t seed);

    int stem_side() const { return kSliceSize / cfg_.encoder.stem_pool; }
    std::size_t stem_size() const {
        return 2u * static_cast<std::size_t>(stem_side()) * stem_side();
    }
    // Mean-pool the 2x256x256 pair down to the encoder input resolution.
    std::vector<float> apply_stem(const SlicePair& pair) const;

    // cond may be null when the model is unconditioned.
    double forward(const float* stem_in, const float* cond, Activations& acts,
                   bool parallel_kernels = false) const;
    // Accumulates parameter gradients for one sample into grad (flat layout).
    void backward(const float* stem_in, const float* cond, const Activations& acts,
                  double dpred, float* grad, bool parallel_kernels = false) const;

    // Convenience single-pair inference; uses the parallel kernels.
    double predict(const SlicePair& pair, const std::vector<float>& cond) const;

private:
    RegressorConfig cfg_;
    std::vector<kernels::Conv2dShape> layers_;
    std::vector<bool> layer_residual_;
    std::vector<std::size_t> layer_w_, layer_b_; // offsets
    std::vector<TensorView> tensors_;
    std::vector<float> params_;

    // Head tensor offsets; unused ones stay SIZE_MAX.
    std::size_t attn_w1_ = SIZE_MAX, attn_b1_ = SIZE_MAX;
    std::size_t attn_w2_ = SIZE_MAX, attn_b2_ = SIZE_MAX;
    std::size_t g1_w_ = SIZE_MAX, g1_b_ = SIZE_MAX;
    std::size_t g2_w_ = SIZE_MAX, g2_b_ = SIZE_MAX;

    std::size_t add_tensor(const std::string& name, std::vector<int> shape);
    void build_layout();
};

void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

} // namespace mqc
