#include "riskpipe/fusion.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "riskpipe/errors.hpp"

namespace riskpipe {

using nlohmann::json;
namespace fs = std::filesystem;

Hyperparams FusionConfig::hyperparams() const {
    Hyperparams hp;
    hp.epochs = epochs;
    hp.learning_rate = learning_rate;
    hp.batch_size = batch_size;
    hp.seed = seed;
    return hp;
}

void FusionConfig::validate() const {
    if (hidden_dim != 256) throw ValidationError("fusion hidden_dim is fixed to 256");
    if (dropout != 0.1) throw ValidationError("fusion dropout is fixed to 0.1");
    hyperparams().validate();
}

FusedInput fuse(const Representation& text_repr, const Representation& speech_repr) {
    if (text_repr.subject_id != speech_repr.subject_id)
        throw ValidationError("fuse: subject mismatch " + text_repr.subject_id + " vs " +
                              speech_repr.subject_id);
    if (text_repr.task != speech_repr.task)
        throw ValidationError("fuse: task mismatch for subject " + text_repr.subject_id);
    for (double v : text_repr.vector)
        if (!std::isfinite(v)) throw ValidationError("fuse: non-finite text representation");
    for (double v : speech_repr.vector)
        if (!std::isfinite(v)) throw ValidationError("fuse: non-finite speech representation");

    FusedInput fused;
    fused.subject_id = text_repr.subject_id;
    fused.task = text_repr.task;
    fused.vector.reserve(text_repr.vector.size() + speech_repr.vector.size());
    fused.vector.insert(fused.vector.end(), text_repr.vector.begin(), text_repr.vector.end());
    fused.vector.insert(fused.vector.end(), speech_repr.vector.begin(),
                        speech_repr.vector.end());
    return fused;
}

FusionModel train_fusion(const std::vector<LabeledFused>& train,
                         const std::vector<LabeledFused>& dev, int text_dim, int speech_dim,
                         const FusionConfig& config) {
    config.validate();
    const int input_dim = text_dim + speech_dim;

    auto to_vectors = [&](const std::vector<LabeledFused>& items) {
        std::vector<LabeledVector> out;
        out.reserve(items.size());
        for (const auto& item : items) {
            if (static_cast<int>(item.fused.vector.size()) != input_dim)
                throw ValidationError("fused vector for subject " + item.fused.subject_id +
                                      " has dimension " +
                                      std::to_string(item.fused.vector.size()) + ", expected " +
                                      std::to_string(input_dim));
            out.push_back({item.fused.subject_id, item.fused.vector, item.label});
        }
        return out;
    };

    FusionModel model;
    model.config = config;
    model.text_dim = text_dim;
    model.speech_dim = speech_dim;
    model.model_id = "fusion:" + config.text_encoder_id + "+" + config.speech_encoder_id;
    model.head = train_head_on_vectors(to_vectors(train), to_vectors(dev), input_dim,
                                       config.hidden_dim, config.dropout, config.hyperparams(),
                                       model.history);
    return model;
}

Logits fusion_predict(const FusionModel& model, const FusedInput& input, TaskKind task) {
    if (task == TaskKind::PR)
        throw ValidationError("PR prediction takes the speech model path, not a fused input");
    if (input.task != task)
        throw ValidationError("fused input task " + to_string(input.task) +
                              " does not match requested task " + to_string(task));
    Logits out;
    out.subject_id = input.subject_id;
    out.task = task;
    out.source_id = model.model_id;
    out.values = model.head.forward(input.vector);
    return out;
}

Logits fusion_predict_pr(const TrainedModel& speech_model, const Representation& speech_repr) {
    if (speech_repr.task != TaskKind::PR)
        throw ValidationError("fusion_predict_pr expects a PR representation");
    return predict_logits(speech_model, speech_repr);
}

void save_fusion_model(const FusionModel& model, const fs::path& params_path,
                       const fs::path& meta_path) {
    TrainedModel as_trained;
    as_trained.model_id = model.model_id;
    as_trained.encoder_id = model.config.text_encoder_id + "+" + model.config.speech_encoder_id;
    as_trained.head = model.head;
    as_trained.hyperparams = model.config.hyperparams();
    as_trained.history = model.history;
    save_model(as_trained, params_path, meta_path);

    // Fusion keeps its configuration alongside the shared model format.
    json extra;
    extra["text_encoder_id"] = model.config.text_encoder_id;
    extra["speech_encoder_id"] = model.config.speech_encoder_id;
    extra["text_dim"] = model.text_dim;
    extra["speech_dim"] = model.speech_dim;
    const fs::path extra_path = meta_path.parent_path() / (meta_path.stem().string() +
                                                           ".fusion.json");
    std::ofstream out(extra_path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write fusion metadata: " + extra_path.string());
    out << extra.dump(2) << "\n";
}

FusionModel load_fusion_model(const fs::path& params_path, const fs::path& meta_path) {
    const TrainedModel as_trained = load_model(params_path, meta_path);
    const fs::path extra_path = meta_path.parent_path() / (meta_path.stem().string() +
                                                           ".fusion.json");
    std::ifstream in(extra_path, std::ios::binary);
    if (!in) throw MissingArtifactError("missing fusion metadata: " + extra_path.string());
    json extra;
    try {
        extra = json::parse(in);
    } catch (const json::exception& e) {
        throw Error("malformed fusion metadata " + extra_path.string() + ": " + e.what());
    }

    FusionModel model;
    model.model_id = as_trained.model_id;
    model.head = as_trained.head;
    model.history = as_trained.history;
    model.text_dim = extra.at("text_dim").get<int>();
    model.speech_dim = extra.at("speech_dim").get<int>();
    model.config.text_encoder_id = extra.at("text_encoder_id").get<std::string>();
    model.config.speech_encoder_id = extra.at("speech_encoder_id").get<std::string>();
    model.config.epochs = as_trained.hyperparams.epochs;
    model.config.learning_rate = as_trained.hyperparams.learning_rate;
    model.config.batch_size = as_trained.hyperparams.batch_size;
    model.config.seed = as_trained.hyperparams.seed;
    model.config.hidden_dim = model.head.hidden_dim();
    model.config.dropout = model.head.dropout();
    return model;
}

}  // namespace riskpipe
