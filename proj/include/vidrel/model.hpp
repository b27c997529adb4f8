#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "vidrel/autodiff.hpp"
#include "vidrel/config.hpp"
#include "vidrel/io.hpp"

namespace vidrel::nn {

// One graph-convolution layer: self transform plus transformed weighted-mean
// neighborhood aggregate.
struct LayerParams {
    Tensor2 self_weight;      // in x out
    Tensor2 neighbor_weight;  // in x out
    Tensor2 bias;             // 1 x out
};

struct LayerVars {
    Var self_weight, neighbor_weight, bias;
};

// out = act(x * W_self + aggregate_mean(x, edges) * W_neigh + bias)
inline Var graph_conv(const Var& x, const std::vector<GraphEdge>& edges, const LayerVars& layer,
                      bool activation) {
    Var combined = add(matmul(x, layer.self_weight),
                       matmul(aggregate_mean(x, edges), layer.neighbor_weight));
    Var out = add_rowvec(combined, layer.bias);
    return activation ? relu(out) : out;
}

// g = sigmoid([f_pos; f_sem] * W_w); out = g .* ([f_pos; f_sem] * W_f)
inline Var gated_fusion(const Var& f_pos, const Var& f_sem, const Var& gate_w, const Var& fuse_w) {
    Var cat = concat_cols(f_pos, f_sem);
    return hadamard(sigmoid(matmul(cat, gate_w)), matmul(cat, fuse_w));
}

// f_rel = [ [f_i; f_j] * W_s ; f_rp ] * W_r, batched over pair rows.
inline Var relation_feature(const Var& subject_rows, const Var& object_rows, const Var& pair_feat,
                            const Var& pair_proj, const Var& rel_proj) {
    Var projected = matmul(concat_cols(subject_rows, object_rows), pair_proj);
    return matmul(concat_cols(projected, pair_feat), rel_proj);
}

// Two affine layers with a ReLU between; returns logits.
inline Var mlp_head(const Var& x, const Var& w1, const Var& b1, const Var& w2, const Var& b2) {
    Var hidden = relu(add_rowvec(matmul(x, w1), b1));
    return add_rowvec(matmul(hidden, w2), b2);
}

// Per-architecture layer-stack input widths. The first layer of each stack
// absorbs whatever representation feeds it; later layers are hidden x hidden.
struct ModelDims {
    int feature_dim = 0;
    int hidden = 0;
    int depth = 0;
    int predicates = 0;
    Architecture arch = Architecture::kHierarchical;
    SpatialMode spatial_mode = SpatialMode::kBoth;
    TemporalMode temporal_mode = TemporalMode::kOn;

    static constexpr int kPairFeatDim = 10;

    bool has_pos() const {
        return spatial_mode == SpatialMode::kBoth || spatial_mode == SpatialMode::kPosOnly;
    }
    bool has_sem() const {
        return spatial_mode == SpatialMode::kBoth || spatial_mode == SpatialMode::kSemOnly;
    }
    bool has_spatial() const { return spatial_mode != SpatialMode::kOff; }
    bool has_temporal() const { return temporal_mode != TemporalMode::kOff; }
    bool has_gate() const { return spatial_mode == SpatialMode::kBoth; }

    int spatial_in() const {
        // reversed runs its spatial stacks on relation nodes, after W_r
        return arch == Architecture::kReversed ? hidden : feature_dim;
    }
    int spatial_out() const { return has_spatial() ? hidden : spatial_in(); }

    int temporal_in() const {
        switch (arch) {
            case Architecture::kHierarchical: return hidden;             // relation features
            case Architecture::kParallel: return 2 * feature_dim + kPairFeatDim;
            case Architecture::kReversed: return feature_dim;            // raw object features
            case Architecture::kPureObject: return spatial_out();        // spatial object features
        }
        return hidden;
    }
    int temporal_out() const { return has_temporal() ? hidden : temporal_in(); }

    // width of the object representation entering the pair projection W_s
    int pair_object_dim() const {
        switch (arch) {
            case Architecture::kHierarchical:
            case Architecture::kParallel: return spatial_out();
            case Architecture::kReversed: return temporal_out();
            case Architecture::kPureObject: return temporal_out();
        }
        return hidden;
    }
};

inline ModelDims model_dims(int feature_dim, int predicates, const PipelineConfig& cfg) {
    ModelDims d;
    d.feature_dim = feature_dim;
    d.hidden = cfg.hidden_width;
    d.depth = cfg.depth;
    d.predicates = predicates;
    d.arch = cfg.architecture;
    d.spatial_mode = cfg.spatial_mode;
    d.temporal_mode = cfg.temporal_mode;
    return d;
}

struct ModelParams {
    ModelDims dims;
    std::vector<LayerParams> pos_layers;
    std::vector<LayerParams> sem_layers;
    std::vector<LayerParams> temporal_layers;
    Tensor2 gate_weight;   // W_w: 2*spatial_out x spatial_out-sized gate (both mode only)
    Tensor2 fusion_weight; // W_f
    Tensor2 pair_proj;     // W_s: 2*pair_object_dim x hidden
    Tensor2 rel_proj;      // W_r: (hidden + 10) x hidden
    Tensor2 head_w1, head_b1;  // hidden x hidden, 1 x hidden
    Tensor2 head_w2, head_b2;  // hidden x predicates, 1 x predicates

    // Fixed enumeration used by the optimizer, checkpoints and grad checks.
    std::vector<std::pair<std::string, Tensor2*>> named_tensors() {
        std::vector<std::pair<std::string, Tensor2*>> out;
        auto add_stack = [&](const char* prefix, std::vector<LayerParams>& stack) {
            for (size_t l = 0; l < stack.size(); ++l) {
                std::string base = std::string(prefix) + "." + std::to_string(l) + ".";
                out.push_back({base + "self", &stack[l].self_weight});
                out.push_back({base + "neigh", &stack[l].neighbor_weight});
                out.push_back({base + "bias", &stack[l].bias});
            }
        };
        add_stack("pos", pos_layers);
        add_stack("sem", sem_layers);
        add_stack("temporal", temporal_layers);
        if (gate_weight.size() > 0) out.push_back({"gate_w", &gate_weight});
        if (fusion_weight.size() > 0) out.push_back({"fuse_w", &fusion_weight});
        out.push_back({"pair_proj", &pair_proj});
        out.push_back({"rel_proj", &rel_proj});
        out.push_back({"head.w1", &head_w1});
        out.push_back({"head.b1", &head_b1});
        out.push_back({"head.w2", &head_w2});
        out.push_back({"head.b2", &head_b2});
        return out;
    }
};

namespace detail {

inline Tensor2 glorot(int rows, int cols, Rng& rng) {
    Tensor2 t(rows, cols);
    double limit = std::sqrt(6.0 / (rows + cols));
    for (double& v : t.data) v = rng.uniform(-limit, limit);
    return t;
}

// Biases draw from the same fan-based uniform as weights; exact-zero biases
// would park dead-ReLU nodes precisely on the activation kink.
inline std::vector<LayerParams> init_stack(int in_dim, int hidden, int depth, Rng& rng) {
    std::vector<LayerParams> stack;
    for (int l = 0; l < depth; ++l) {
        int in = l == 0 ? in_dim : hidden;
        LayerParams p;
        p.self_weight = glorot(in, hidden, rng);
        p.neighbor_weight = glorot(in, hidden, rng);
        p.bias = glorot(1, hidden, rng);
        stack.push_back(std::move(p));
    }
    return stack;
}

}  // namespace detail

inline ModelParams init_params(const ModelDims& dims, uint64_t seed) {
    Rng rng(seed ^ 0x6d6f64656cULL);
    ModelParams p;
    p.dims = dims;
    if (dims.has_pos()) p.pos_layers = detail::init_stack(dims.spatial_in(), dims.hidden, dims.depth, rng);
    if (dims.has_sem()) p.sem_layers = detail::init_stack(dims.spatial_in(), dims.hidden, dims.depth, rng);
    if (dims.has_temporal())
        p.temporal_layers = detail::init_stack(dims.temporal_in(), dims.hidden, dims.depth, rng);
    if (dims.has_gate()) {
        p.gate_weight = detail::glorot(2 * dims.hidden, dims.hidden, rng);
        p.fusion_weight = detail::glorot(2 * dims.hidden, dims.hidden, rng);
    }
    p.pair_proj = detail::glorot(2 * dims.pair_object_dim(), dims.hidden, rng);
    p.rel_proj = detail::glorot(dims.hidden + ModelDims::kPairFeatDim, dims.hidden, rng);
    p.head_w1 = detail::glorot(dims.hidden, dims.hidden, rng);
    p.head_b1 = detail::glorot(1, dims.hidden, rng);
    p.head_w2 = detail::glorot(dims.hidden, dims.predicates, rng);
    p.head_b2 = detail::glorot(1, dims.predicates, rng);
    return p;
}

// Leaf graph vars over the current parameter values, shared layout with
// named_tensors(). `vars[i]` wraps `named[i]`.
struct ParamVars {
    std::vector<Var> vars;
    std::vector<LayerVars> pos_layers, sem_layers, temporal_layers;
    Var gate_weight, fusion_weight, pair_proj, rel_proj;
    Var head_w1, head_b1, head_w2, head_b2;
};

inline ParamVars make_param_vars(ModelParams& params, bool requires_grad) {
    ParamVars pv;
    auto named = params.named_tensors();
    pv.vars.reserve(named.size());
    size_t idx = 0;
    auto next = [&]() {
        pv.vars.push_back(leaf(*named[idx].second, requires_grad));
        return pv.vars[idx++];
    };
    auto take_stack = [&](const std::vector<LayerParams>& stack) {
        std::vector<LayerVars> out;
        for (size_t l = 0; l < stack.size(); ++l) {
            LayerVars lv;
            lv.self_weight = next();
            lv.neighbor_weight = next();
            lv.bias = next();
            out.push_back(std::move(lv));
        }
        return out;
    };
    pv.pos_layers = take_stack(params.pos_layers);
    pv.sem_layers = take_stack(params.sem_layers);
    pv.temporal_layers = take_stack(params.temporal_layers);
    if (params.gate_weight.size() > 0) pv.gate_weight = next();
    if (params.fusion_weight.size() > 0) pv.fusion_weight = next();
    pv.pair_proj = next();
    pv.rel_proj = next();
    pv.head_w1 = next();
    pv.head_b1 = next();
    pv.head_w2 = next();
    pv.head_b2 = next();
    return pv;
}

// Runs a stack with ReLU on all but the last layer.
inline Var run_stack(Var x, const std::vector<LayerVars>& stack, const std::vector<GraphEdge>& edges) {
    for (size_t l = 0; l < stack.size(); ++l)
        x = graph_conv(x, edges, stack[l], l + 1 < stack.size());
    return x;
}

// ---------------------------------------------------------------------------
// Decoupled-weight-decay adaptive-moment optimizer.
// ---------------------------------------------------------------------------

struct OptimizerState {
    double learning_rate = 1e-3;
    double weight_decay = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long step_count = 0;
    std::vector<Tensor2> first_moment;
    std::vector<Tensor2> second_moment;
};

inline OptimizerState make_optimizer(ModelParams& params, double lr, double weight_decay) {
    OptimizerState st;
    st.learning_rate = lr;
    st.weight_decay = weight_decay;
    for (auto& [name, t] : params.named_tensors()) {
        st.first_moment.push_back(Tensor2::zeros(t->rows, t->cols));
        st.second_moment.push_back(Tensor2::zeros(t->rows, t->cols));
    }
    return st;
}

// grads[i] pairs with params.named_tensors()[i]. Weight decay is applied
// directly to the parameters, not through the gradients.
inline void optimizer_step(ModelParams& params, const std::vector<Tensor2>& grads,
                           OptimizerState& st) {
    auto named = params.named_tensors();
    if (grads.size() != named.size()) throw ValidationError("optimizer_step: gradient count mismatch");
    for (const auto& g : grads)
        for (double v : g.data)
            if (!std::isfinite(v)) throw std::runtime_error("optimizer_step: diverged (non-finite gradient)");
    st.step_count++;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step_count));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step_count));
    for (size_t t = 0; t < named.size(); ++t) {
        Tensor2& p = *named[t].second;
        Tensor2& m = st.first_moment[t];
        Tensor2& v = st.second_moment[t];
        const Tensor2& g = grads[t];
        for (size_t i = 0; i < p.size(); ++i) {
            m.data[i] = st.beta1 * m.data[i] + (1.0 - st.beta1) * g.data[i];
            v.data[i] = st.beta2 * v.data[i] + (1.0 - st.beta2) * g.data[i] * g.data[i];
            double m_hat = m.data[i] / bc1;
            double v_hat = v.data[i] / bc2;
            p.data[i] -= st.learning_rate * m_hat / (std::sqrt(v_hat) + st.epsilon);
            p.data[i] -= st.learning_rate * st.weight_decay * p.data[i];
        }
    }
}

// ---------------------------------------------------------------------------
// Checkpoints: JSON manifest (shapes, config, vocabularies, co-occurrence,
// seed) plus one binary record holding every weight, 64-bit, so that
// load(save(p)) reproduces the parameters bit for bit.
// ---------------------------------------------------------------------------

struct Checkpoint {
    ModelParams params;
    PipelineConfig config;
    uint64_t seed = 0;
    Vocabulary objects;
    Vocabulary predicates;
    CooccurrenceTable cooccurrence;
};

inline void save_checkpoint(Checkpoint& ckpt, const fs::path& prefix) {
    nlohmann::ordered_json manifest;
    manifest["format_version"] = 1;
    manifest["config"] = pipeline_config_to_json(ckpt.config);
    manifest["seed"] = ckpt.seed;
    manifest["feature_dim"] = ckpt.params.dims.feature_dim;
    manifest["object_vocabulary"] = ckpt.objects.names;
    manifest["predicate_vocabulary"] = ckpt.predicates.names;
    manifest["cooccurrence"] = ckpt.cooccurrence.matrix;
    manifest["tensors"] = nlohmann::ordered_json::array();
    std::vector<double> flat;
    for (auto& [name, t] : ckpt.params.named_tensors()) {
        manifest["tensors"].push_back({{"name", name}, {"rows", t->rows}, {"cols", t->cols}});
        flat.insert(flat.end(), t->data.begin(), t->data.end());
    }
    if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
    write_json_file(fs::path(prefix.string() + ".json"), manifest);
    FeatureMap weights;
    weights["model.weights"] = std::move(flat);
    save_features(weights, fs::path(prefix.string() + ".bin"),
                  static_cast<int>(weights["model.weights"].size()), /*version=*/2);
}

inline Checkpoint load_checkpoint(const fs::path& prefix) {
    auto manifest = load_json_file(fs::path(prefix.string() + ".json"));
    Checkpoint ckpt;
    ckpt.config = pipeline_config_from_json(manifest.at("config"));
    ckpt.seed = manifest.at("seed").get<uint64_t>();
    ckpt.objects = Vocabulary::from_names(manifest.at("object_vocabulary").get<std::vector<std::string>>());
    ckpt.predicates =
        Vocabulary::from_names(manifest.at("predicate_vocabulary").get<std::vector<std::string>>());
    ckpt.cooccurrence.categories = ckpt.objects;
    ckpt.cooccurrence.matrix = manifest.at("cooccurrence").get<std::vector<double>>();
    int feature_dim = manifest.at("feature_dim").get<int>();
    ckpt.params = init_params(model_dims(feature_dim, ckpt.predicates.size(), ckpt.config), 0);

    auto loaded = load_features(fs::path(prefix.string() + ".bin"));
    if (loaded.version != 2) throw ValidationError("checkpoint: expected 64-bit weight payload");
    const auto& flat = loaded.features.at("model.weights");
    auto named = ckpt.params.named_tensors();
    const auto& tensor_list = manifest.at("tensors");
    if (tensor_list.size() != named.size())
        throw ValidationError("checkpoint: tensor list does not match configured architecture");
    size_t offset = 0;
    for (size_t i = 0; i < named.size(); ++i) {
        const auto& meta = tensor_list.at(i);
        if (meta.at("name").get<std::string>() != named[i].first ||
            meta.at("rows").get<int>() != named[i].second->rows ||
            meta.at("cols").get<int>() != named[i].second->cols)
            throw ValidationError("checkpoint: tensor '" + named[i].first + "' shape mismatch");
        Tensor2& t = *named[i].second;
        if (offset + t.size() > flat.size()) throw ValidationError("checkpoint: weight payload too short");
        std::copy(flat.begin() + static_cast<long>(offset),
                  flat.begin() + static_cast<long>(offset + t.size()), t.data.begin());
        offset += t.size();
    }
    if (offset != flat.size()) throw ValidationError("checkpoint: weight payload size mismatch");
    return ckpt;
}

}  // namespace vidrel::nn
