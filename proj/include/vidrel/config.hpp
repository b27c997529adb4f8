#pragma once

#include <string>

#include <json.hpp>

#include "vidrel/graph.hpp"

namespace vidrel {

enum class Architecture { kHierarchical, kParallel, kReversed, kPureObject };
enum class SpatialMode { kBoth, kPosOnly, kSemOnly, kOff };
enum class TemporalMode { kOn, kOff, kDenseUnweighted };
enum class LossKind { kFocal, kBce };

namespace detail {

template <typename E>
E parse_enum(const std::string& s, std::initializer_list<std::pair<const char*, E>> table,
             const std::string& field) {
    for (const auto& [name, value] : table)
        if (s == name) return value;
    throw ValidationError("config: unknown " + field + " '" + s + "'");
}

}  // namespace detail

inline Architecture parse_architecture(const std::string& s) {
    return detail::parse_enum<Architecture>(s,
                                            {{"hierarchical", Architecture::kHierarchical},
                                             {"parallel", Architecture::kParallel},
                                             {"reversed", Architecture::kReversed},
                                             {"pure_object", Architecture::kPureObject}},
                                            "architecture");
}

inline TemporalDirection parse_direction(const std::string& s) {
    return detail::parse_enum<TemporalDirection>(s,
                                                 {{"forward", TemporalDirection::kForward},
                                                  {"backward", TemporalDirection::kBackward},
                                                  {"bidirectional", TemporalDirection::kBidirectional}},
                                                 "temporal_direction");
}

inline SpatialMode parse_spatial_mode(const std::string& s) {
    return detail::parse_enum<SpatialMode>(s,
                                           {{"both", SpatialMode::kBoth},
                                            {"pos_only", SpatialMode::kPosOnly},
                                            {"sem_only", SpatialMode::kSemOnly},
                                            {"off", SpatialMode::kOff}},
                                           "spatial_mode");
}

inline TemporalMode parse_temporal_mode(const std::string& s) {
    return detail::parse_enum<TemporalMode>(s,
                                            {{"on", TemporalMode::kOn},
                                             {"off", TemporalMode::kOff},
                                             {"dense_unweighted", TemporalMode::kDenseUnweighted}},
                                            "temporal_mode");
}

inline LossKind parse_loss(const std::string& s) {
    return detail::parse_enum<LossKind>(s, {{"focal", LossKind::kFocal}, {"bce", LossKind::kBce}},
                                        "loss");
}

inline const char* to_string(Architecture a) {
    switch (a) {
        case Architecture::kHierarchical: return "hierarchical";
        case Architecture::kParallel: return "parallel";
        case Architecture::kReversed: return "reversed";
        case Architecture::kPureObject: return "pure_object";
    }
    return "?";
}

inline const char* to_string(TemporalDirection d) {
    switch (d) {
        case TemporalDirection::kForward: return "forward";
        case TemporalDirection::kBackward: return "backward";
        case TemporalDirection::kBidirectional: return "bidirectional";
    }
    return "?";
}

inline const char* to_string(SpatialMode m) {
    switch (m) {
        case SpatialMode::kBoth: return "both";
        case SpatialMode::kPosOnly: return "pos_only";
        case SpatialMode::kSemOnly: return "sem_only";
        case SpatialMode::kOff: return "off";
    }
    return "?";
}

inline const char* to_string(TemporalMode m) {
    switch (m) {
        case TemporalMode::kOn: return "on";
        case TemporalMode::kOff: return "off";
        case TemporalMode::kDenseUnweighted: return "dense_unweighted";
    }
    return "?";
}

inline const char* to_string(LossKind l) {
    return l == LossKind::kFocal ? "focal" : "bce";
}

// Everything the end-to-end pipeline needs. JSON keys match field names;
// unknown keys are rejected.
struct PipelineConfig {
    int clip_length = 30;
    int clip_stride = 15;
    int hidden_width = 768;
    int depth = 3;
    Architecture architecture = Architecture::kHierarchical;
    TemporalDirection temporal_direction = TemporalDirection::kForward;
    SpatialMode spatial_mode = SpatialMode::kBoth;
    TemporalMode temporal_mode = TemporalMode::kOn;
    bool spatial_affinity_weighted = true;  // false: unweighted adjacency ablation
    LossKind loss = LossKind::kFocal;
    double focal_gamma = 2.0;
    double focal_balance = 0.25;
    AffinityConfig affinity;
    int epochs = 20;
    double learning_rate = 1e-3;
    int lr_drop_epoch = 10;
    double weight_decay = 0.01;
    int batch_clip_budget = 32;
    uint64_t seed = 0;
    int top_k_per_pair = 10;

    void validate() const {
        if (clip_length <= 0) throw ValidationError("config: clip_length must be positive");
        if (clip_stride <= 0 || clip_stride > clip_length)
            throw ValidationError("config: clip_stride must be in [1, clip_length]");
        if (hidden_width <= 0) throw ValidationError("config: hidden_width must be positive");
        if (depth <= 0) throw ValidationError("config: depth must be positive");
        if (epochs <= 0) throw ValidationError("config: epochs must be positive");
        if (batch_clip_budget <= 0) throw ValidationError("config: batch_clip_budget must be positive");
        if (top_k_per_pair <= 0) throw ValidationError("config: top_k_per_pair must be positive");
        if (learning_rate <= 0.0) throw ValidationError("config: learning_rate must be positive");
        affinity.validate();
    }
};

inline nlohmann::ordered_json pipeline_config_to_json(const PipelineConfig& c) {
    nlohmann::ordered_json j;
    j["clip_length"] = c.clip_length;
    j["clip_stride"] = c.clip_stride;
    j["hidden_width"] = c.hidden_width;
    j["depth"] = c.depth;
    j["architecture"] = to_string(c.architecture);
    j["temporal_direction"] = to_string(c.temporal_direction);
    j["spatial_mode"] = to_string(c.spatial_mode);
    j["temporal_mode"] = to_string(c.temporal_mode);
    j["spatial_affinity_weighted"] = c.spatial_affinity_weighted;
    j["loss"] = to_string(c.loss);
    j["focal_gamma"] = c.focal_gamma;
    j["focal_balance"] = c.focal_balance;
    j["alpha"] = c.affinity.alpha;
    j["beta"] = c.affinity.beta;
    j["lambda"] = c.affinity.lambda;
    j["epochs"] = c.epochs;
    j["learning_rate"] = c.learning_rate;
    j["lr_drop_epoch"] = c.lr_drop_epoch;
    j["weight_decay"] = c.weight_decay;
    j["batch_clip_budget"] = c.batch_clip_budget;
    j["seed"] = c.seed;
    j["top_k_per_pair"] = c.top_k_per_pair;
    return j;
}

inline PipelineConfig pipeline_config_from_json(const nlohmann::ordered_json& j) {
    PipelineConfig c;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        const auto& v = it.value();
        try {
            if (k == "clip_length") c.clip_length = v.get<int>();
            else if (k == "clip_stride") c.clip_stride = v.get<int>();
            else if (k == "hidden_width") c.hidden_width = v.get<int>();
            else if (k == "depth") c.depth = v.get<int>();
            else if (k == "architecture") c.architecture = parse_architecture(v.get<std::string>());
            else if (k == "temporal_direction") c.temporal_direction = parse_direction(v.get<std::string>());
            else if (k == "spatial_mode") c.spatial_mode = parse_spatial_mode(v.get<std::string>());
            else if (k == "temporal_mode") c.temporal_mode = parse_temporal_mode(v.get<std::string>());
            else if (k == "spatial_affinity_weighted") c.spatial_affinity_weighted = v.get<bool>();
            else if (k == "loss") c.loss = parse_loss(v.get<std::string>());
            else if (k == "focal_gamma") c.focal_gamma = v.get<double>();
            else if (k == "focal_balance") c.focal_balance = v.get<double>();
            else if (k == "alpha") c.affinity.alpha = v.get<double>();
            else if (k == "beta") c.affinity.beta = v.get<double>();
            else if (k == "lambda") c.affinity.lambda = v.get<double>();
            else if (k == "epochs") c.epochs = v.get<int>();
            else if (k == "learning_rate") c.learning_rate = v.get<double>();
            else if (k == "lr_drop_epoch") c.lr_drop_epoch = v.get<int>();
            else if (k == "weight_decay") c.weight_decay = v.get<double>();
            else if (k == "batch_clip_budget") c.batch_clip_budget = v.get<int>();
            else if (k == "seed") c.seed = v.get<uint64_t>();
            else if (k == "top_k_per_pair") c.top_k_per_pair = v.get<int>();
            else throw ValidationError("config: unknown field '" + k + "'");
        } catch (const nlohmann::json::exception&) {
            throw ValidationError("config: field '" + k + "' has wrong type");
        }
    }
    c.validate();
    return c;
}

// Applies one "key=value" override on top of a parsed config.
inline void apply_config_override(PipelineConfig& c, const std::string& kv) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw ValidationError("override '" + kv + "' is not key=value");
    nlohmann::ordered_json j = pipeline_config_to_json(c);
    const std::string key = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    if (!j.contains(key)) throw ValidationError("config: unknown field '" + key + "'");
    if (j[key].is_string()) {
        j[key] = value;
    } else {
        try {
            j[key] = nlohmann::ordered_json::parse(value);
        } catch (const nlohmann::json::exception&) {
            throw ValidationError("override '" + kv + "': cannot parse value");
        }
    }
    c = pipeline_config_from_json(j);
}

}  // namespace vidrel
