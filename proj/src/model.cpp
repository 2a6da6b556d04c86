#include "mqc/model.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"

#include "mqc/errors.hpp"
#include "mqc/rng.hpp"

namespace mqc {

using nlohmann::json;

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

json encoder_to_json(const EncoderConfig& e) {
    return json{{"stem_pool", e.stem_pool},
                {"channels", e.channels},
                {"blocks_per_stage", e.blocks_per_stage},
                {"residual", e.residual}};
}

EncoderConfig encoder_from_json(const json& j) {
    EncoderConfig e;
    e.stem_pool = j.at("stem_pool").get<int>();
    e.channels = j.at("channels").get<std::vector<int>>();
    e.blocks_per_stage = j.at("blocks_per_stage").get<int>();
    e.residual = j.at("residual").get<bool>();
    return e;
}

json config_to_json(const RegressorConfig& c) {
    return json{{"encoder", encoder_to_json(c.encoder)},
                {"conditioned", c.conditioned},
                {"d_t", c.d_t},
                {"d_g", c.d_g},
                {"attn_hidden", c.attn_hidden},
                {"lr", c.lr},
                {"batch_size", c.batch_size},
                {"epochs", c.epochs},
                {"adam_beta1", c.adam_beta1},
                {"adam_beta2", c.adam_beta2},
                {"adam_eps", c.adam_eps},
                {"slices_per_record", c.slices_per_record}};
}

RegressorConfig config_from_json(const json& j) {
    RegressorConfig c;
    c.encoder = encoder_from_json(j.at("encoder"));
    c.conditioned = j.at("conditioned").get<bool>();
    c.d_t = j.at("d_t").get<int>();
    c.d_g = j.at("d_g").get<int>();
    c.attn_hidden = j.at("attn_hidden").get<int>();
    c.lr = j.at("lr").get<double>();
    c.batch_size = j.at("batch_size").get<int>();
    c.epochs = j.at("epochs").get<int>();
    c.adam_beta1 = j.at("adam_beta1").get<double>();
    c.adam_beta2 = j.at("adam_beta2").get<double>();
    c.adam_eps = j.at("adam_eps").get<double>();
    c.slices_per_record = j.at("slices_per_record").get<int>();
    return c;
}

// y = W x + b, W row-major (rows x cols).
void linear(const float* w, const float* b, const float* x, int rows, int cols, float* y) {
    for (int r = 0; r < rows; ++r) {
        double acc = b ? b[r] : 0.0;
        const float* wr = w + static_cast<std::size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) acc += static_cast<double>(wr[c]) * x[c];
        y[r] = static_cast<float>(acc);
    }
}

// Accumulate dW += dy x^T, db += dy, dx = W^T dy.
void linear_backward(const float* w, const float* x, const float* dy, int rows, int cols,
                     float* dw, float* db, float* dx) {
    for (int r = 0; r < rows; ++r) {
        const float g = dy[r];
        float* dwr = dw + static_cast<std::size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) dwr[c] += g * x[c];
        if (db) db[r] += g;
    }
    if (dx) {
        for (int c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (int r = 0; r < rows; ++r)
                acc += static_cast<double>(w[static_cast<std::size_t>(r) * cols + c]) * dy[r];
            dx[c] = static_cast<float>(acc);
        }
    }
}

} // namespace

void RegressorConfig::validate() const {
    if (encoder.stem_pool < 1 || kSliceSize % encoder.stem_pool != 0)
        throw ValueError("stem_pool must divide 256");
    if (encoder.channels.empty()) throw ValueError("encoder needs at least one stage");
    if (encoder.blocks_per_stage < 1) throw ValueError("blocks_per_stage must be >= 1");
    int side = kSliceSize / encoder.stem_pool;
    for (std::size_t i = 0; i < encoder.channels.size(); ++i) {
        if (encoder.channels[i] < 1) throw ValueError("channel counts must be positive");
        side = (side + 2 - 3) / 2 + 1;
        if (side < 1) throw ValueError("encoder downsamples below 1x1");
    }
    if (d_g < 1 || attn_hidden < 1) throw ValueError("head dims must be positive");
    if (conditioned && d_t < 1)
        throw ValueError("conditioned model needs d_t >= 1 (set from the embedding table)");
    if (lr <= 0 || batch_size < 1 || epochs < 1) throw ValueError("bad optimizer settings");
    if (slices_per_record < 1) throw ValueError("slices_per_record must be >= 1");
}

Model::Model(RegressorConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    build_layout();
}

std::size_t Model::add_tensor(const std::string& name, std::vector<int> shape) {
    TensorView t;
    t.name = name;
    t.shape = std::move(shape);
    t.size = 1;
    for (const int d : t.shape) t.size *= static_cast<std::size_t>(d);
    t.offset = params_.size();
    params_.resize(params_.size() + t.size, 0.0f);
    tensors_.push_back(t);
    return t.offset;
}

void Model::build_layout() {
    int side = stem_side();
    int in_c = 2;
    int stage = 0;
    for (const int out_c : cfg_.encoder.channels) {
        for (int b = 0; b < cfg_.encoder.blocks_per_stage; ++b) {
            kernels::Conv2dShape s;
            s.in_c = b == 0 ? in_c : out_c;
            s.in_h = s.in_w = side;
            s.out_c = out_c;
            s.stride = b == 0 ? 2 : 1;
            if (b == 0) side = s.out_h();
            const std::string tag =
                "enc" + std::to_string(stage) + "_" + std::to_string(b);
            layers_.push_back(s);
            layer_residual_.push_back(b > 0 && cfg_.encoder.residual);
            layer_w_.push_back(add_tensor(tag + "_w", {s.out_c, s.in_c, 3, 3}));
            layer_b_.push_back(add_tensor(tag + "_b", {s.out_c}));
        }
        in_c = out_c;
        ++stage;
    }
    const int d_f = cfg_.d_f();
    if (cfg_.conditioned) {
        attn_w1_ = add_tensor("attn_w1", {cfg_.attn_hidden, d_f + cfg_.d_t});
        attn_b1_ = add_tensor("attn_b1", {cfg_.attn_hidden});
        attn_w2_ = add_tensor("attn_w2", {d_f + cfg_.d_g, cfg_.attn_hidden});
        attn_b2_ = add_tensor("attn_b2", {d_f + cfg_.d_g});
    }
    g1_w_ = add_tensor("g1_w", {cfg_.d_g, d_f});
    g1_b_ = add_tensor("g1_b", {cfg_.d_g});
    g2_w_ = add_tensor("g2_w", {1, cfg_.d_g});
    g2_b_ = add_tensor("g2_b", {1});
}

void Model::init_params(std::uint64_t seed) {
    for (std::size_t t = 0; t < tensors_.size(); ++t) {
        const TensorView& tv = tensors_[t];
        const bool is_bias = tv.shape.size() == 1;
        if (is_bias) {
            std::fill_n(params_.begin() + tv.offset, tv.size, 0.0f);
            continue;
        }
        std::size_t fan_in = 1;
        for (std::size_t d = 1; d < tv.shape.size(); ++d)
            fan_in *= static_cast<std::size_t>(tv.shape[d]);
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        Rng rng(derive_seed(seed, tv.name));
        for (std::size_t i = 0; i < tv.size; ++i)
            params_[tv.offset + i] = static_cast<float>(rng.uniform(-limit, limit));
    }
}

std::vector<float> Model::apply_stem(const SlicePair& pair) const {
    const int f = cfg_.encoder.stem_pool;
    std::vector<float> out(stem_size());
    kernels::par::avgpool2d(pair.pixels.data(), 2, kSliceSize, kSliceSize, f, out.data());
    return out;
}

double Model::forward(const float* stem_in, const float* cond, Activations& acts,
                      bool parallel_kernels) const {
    const int d_f = cfg_.d_f();
    if (cfg_.conditioned && cond == nullptr)
        throw ValueError("conditioned model called without a condition vector");

    acts.pre.resize(layers_.size());
    acts.out.resize(layers_.size());
    const float* x = stem_in;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& s = layers_[l];
        const std::size_t out_n =
            static_cast<std::size_t>(s.out_c) * s.out_h() * s.out_w();
        acts.pre[l].resize(out_n);
        acts.out[l].resize(out_n);
        const float* w = params_.data() + layer_w_[l];
        const float* b = params_.data() + layer_b_[l];
        if (parallel_kernels)
            kernels::par::conv2d_forward(s, x, w, b, acts.pre[l].data());
        else
            kernels::serial::conv2d_forward(s, x, w, b, acts.pre[l].data());
        for (std::size_t i = 0; i < out_n; ++i) {
            float v = acts.pre[l][i] > 0.0f ? acts.pre[l][i] : 0.0f;
            if (layer_residual_[l]) v += x[i];
            acts.out[l][i] = v;
        }
        x = acts.out[l].data();
    }

    const auto& last = layers_.back();
    const int hw = last.out_h() * last.out_w();
    acts.f1.resize(d_f);
    if (parallel_kernels)
        kernels::par::global_avgpool(x, d_f, hw, acts.f1.data());
    else
        kernels::serial::global_avgpool(x, d_f, hw, acts.f1.data());

    if (cfg_.conditioned) {
        const int d_in = d_f + cfg_.d_t;
        const int d_gate = d_f + cfg_.d_g;
        acts.mlp_in.resize(d_in);
        std::copy_n(acts.f1.data(), d_f, acts.mlp_in.data());
        std::copy_n(cond, cfg_.d_t, acts.mlp_in.data() + d_f);

        acts.mlp_hidden_pre.resize(cfg_.attn_hidden);
        linear(params_.data() + attn_w1_, params_.data() + attn_b1_, acts.mlp_in.data(),
               cfg_.attn_hidden, d_in, acts.mlp_hidden_pre.data());
        acts.mlp_hidden.resize(cfg_.attn_hidden);
        for (int i = 0; i < cfg_.attn_hidden; ++i)
            acts.mlp_hidden[i] = acts.mlp_hidden_pre[i] > 0.0f ? acts.mlp_hidden_pre[i] : 0.0f;

        acts.gate_pre.resize(d_gate);
        linear(params_.data() + attn_w2_, params_.data() + attn_b2_, acts.mlp_hidden.data(),
               d_gate, cfg_.attn_hidden, acts.gate_pre.data());
        acts.gate.resize(d_gate);
        for (int i = 0; i < d_gate; ++i)
            acts.gate[i] = static_cast<float>(sigmoid(acts.gate_pre[i]));

        acts.a.resize(d_f);
        for (int i = 0; i < d_f; ++i) acts.a[i] = acts.gate[i] * acts.f1[i];
    } else {
        acts.a = acts.f1;
    }

    acts.g1_pre.resize(cfg_.d_g);
    linear(params_.data() + g1_w_, params_.data() + g1_b_, acts.a.data(), cfg_.d_g, d_f,
           acts.g1_pre.data());
    acts.g1_out.resize(cfg_.d_g);
    for (int i = 0; i < cfg_.d_g; ++i)
        acts.g1_out[i] = acts.g1_pre[i] > 0.0f ? acts.g1_pre[i] : 0.0f;

    acts.c.resize(cfg_.d_g);
    if (cfg_.conditioned) {
        for (int i = 0; i < cfg_.d_g; ++i) acts.c[i] = acts.gate[d_f + i] * acts.g1_out[i];
    } else {
        acts.c = acts.g1_out;
    }

    double z = params_[g2_b_];
    for (int i = 0; i < cfg_.d_g; ++i)
        z += static_cast<double>(params_[g2_w_ + i]) * acts.c[i];
    acts.z = z;
    acts.pred = sigmoid(z);
    if (!std::isfinite(acts.pred)) throw ValueError("non-finite model output");
    return acts.pred;
}

void Model::backward(const float* stem_in, const float* cond, const Activations& acts,
                     double dpred, float* grad, bool parallel_kernels) const {
    const int d_f = cfg_.d_f();
    const double dz = dpred * acts.pred * (1.0 - acts.pred);

    std::vector<float> dc(cfg_.d_g);
    grad[g2_b_] += static_cast<float>(dz);
    for (int i = 0; i < cfg_.d_g; ++i) {
        grad[g2_w_ + i] += static_cast<float>(dz * acts.c[i]);
        dc[i] = static_cast<float>(dz * params_[g2_w_ + i]);
    }

    std::vector<float> dgate;
    std::vector<float> dg1_out(cfg_.d_g);
    if (cfg_.conditioned) {
        dgate.assign(d_f + cfg_.d_g, 0.0f);
        for (int i = 0; i < cfg_.d_g; ++i) {
            dgate[d_f + i] = dc[i] * acts.g1_out[i];
            dg1_out[i] = dc[i] * acts.gate[d_f + i];
        }
    } else {
        dg1_out = dc;
    }

    std::vector<float> dg1_pre(cfg_.d_g);
    for (int i = 0; i < cfg_.d_g; ++i)
        dg1_pre[i] = acts.g1_pre[i] > 0.0f ? dg1_out[i] : 0.0f;

    std::vector<float> da(d_f);
    linear_backward(params_.data() + g1_w_, acts.a.data(), dg1_pre.data(), cfg_.d_g, d_f,
                    grad + g1_w_, grad + g1_b_, da.data());

    std::vector<float> df1(d_f);
    if (cfg_.conditioned) {
        for (int i = 0; i < d_f; ++i) {
            dgate[i] = da[i] * acts.f1[i];
            df1[i] = da[i] * acts.gate[i];
        }
        const int d_gate = d_f + cfg_.d_g;
        std::vector<float> dgate_pre(d_gate);
        for (int i = 0; i < d_gate; ++i)
            dgate_pre[i] =
                static_cast<float>(dgate[i] * acts.gate[i] * (1.0f - acts.gate[i]));

        std::vector<float> dhidden(cfg_.attn_hidden);
        linear_backward(params_.data() + attn_w2_, acts.mlp_hidden.data(), dgate_pre.data(),
                        d_gate, cfg_.attn_hidden, grad + attn_w2_, grad + attn_b2_,
                        dhidden.data());
        for (int i = 0; i < cfg_.attn_hidden; ++i)
            if (acts.mlp_hidden_pre[i] <= 0.0f) dhidden[i] = 0.0f;

        const int d_in = d_f + cfg_.d_t;
        std::vector<float> dmlp_in(d_in);
        linear_backward(params_.data() + attn_w1_, acts.mlp_in.data(), dhidden.data(),
                        cfg_.attn_hidden, d_in, grad + attn_w1_, grad + attn_b1_,
                        dmlp_in.data());
        for (int i = 0; i < d_f; ++i) df1[i] += dmlp_in[i]; // condition part has no params
        (void)cond;
    } else {
        df1 = da;
    }

    // GAP backward: spread evenly over the last feature map.
    const auto& last = layers_.back();
    const int hw = last.out_h() * last.out_w();
    std::vector<float> dout(static_cast<std::size_t>(d_f) * hw);
    for (int ch = 0; ch < d_f; ++ch) {
        const float g = df1[ch] / static_cast<float>(hw);
        for (int i = 0; i < hw; ++i) dout[static_cast<std::size_t>(ch) * hw + i] = g;
    }

    for (int l = static_cast<int>(layers_.size()) - 1; l >= 0; --l) {
        const auto& s = layers_[l];
        const float* x = l == 0 ? stem_in : acts.out[l - 1].data();
        const std::size_t out_n = acts.pre[l].size();
        std::vector<float> dpre(out_n);
        for (std::size_t i = 0; i < out_n; ++i)
            dpre[i] = acts.pre[l][i] > 0.0f ? dout[i] : 0.0f;

        if (parallel_kernels)
            kernels::par::conv2d_backward_params(s, x, dpre.data(), grad + layer_w_[l],
                                                 grad + layer_b_[l]);
        else
            kernels::serial::conv2d_backward_params(s, x, dpre.data(), grad + layer_w_[l],
                                                    grad + layer_b_[l]);
        if (l == 0) break; // no gradient needed below the first conv

        std::vector<float> dx(static_cast<std::size_t>(s.in_c) * s.in_h * s.in_w);
        if (parallel_kernels)
            kernels::par::conv2d_backward_input(s, dpre.data(), params_.data() + layer_w_[l],
                                                dx.data());
        else
            kernels::serial::conv2d_backward_input(s, dpre.data(),
                                                   params_.data() + layer_w_[l], dx.data());
        if (layer_residual_[l])
            for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dout[i];
        dout.swap(dx);
    }
}

double Model::predict(const SlicePair& pair, const std::vector<float>& cond) const {
    if (cfg_.conditioned && static_cast<int>(cond.size()) != cfg_.d_t)
        throw ShapeError("condition vector dimension mismatch");
    const std::vector<float> stem = apply_stem(pair);
    Activations acts;
    return forward(stem.data(), cfg_.conditioned ? cond.data() : nullptr, acts, true);
}

void save_checkpoint(const Model& model, const std::string& path) {
    json tensors = json::array();
    for (const auto& t : model.tensors())
        tensors.push_back(
            json{{"name", t.name}, {"shape", t.shape}, {"offset", t.offset}, {"size", t.size}});
    json j{{"format", "mqc-checkpoint"},
           {"version", 1},
           {"config", config_to_json(model.config())},
           {"tensors", tensors},
           {"payload_bytes", model.param_count() * sizeof(float)}};
    const std::string header = j.dump() + "\n";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(reinterpret_cast<const char*>(model.params().data()),
              static_cast<std::streamsize>(model.param_count() * sizeof(float)));
    if (!out) throw IoError("short checkpoint write: " + path);
}

Model load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    std::string line;
    if (!std::getline(in, line)) throw FormatError("missing checkpoint header: " + path);
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw FormatError("corrupt checkpoint header: " + std::string(e.what()));
    }
    if (j.value("format", "") != "mqc-checkpoint")
        throw FormatError("not a checkpoint file: " + path);

    Model model(config_from_json(j.at("config")));
    const auto bytes = j.at("payload_bytes").get<std::uint64_t>();
    if (bytes != model.param_count() * sizeof(float))
        throw FormatError("checkpoint payload does not match its config: " + path);
    in.read(reinterpret_cast<char*>(model.params().data()),
            static_cast<std::streamsize>(bytes));
    if (static_cast<std::uint64_t>(in.gcount()) != bytes)
        throw FormatError("checkpoint payload truncated: " + path);
    return model;
}

} // namespace mqc
