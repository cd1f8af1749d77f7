#include "riskpipe/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "riskpipe/errors.hpp"
#include "riskpipe/optimizer.hpp"

namespace riskpipe {

using nlohmann::json;
namespace fs = std::filesystem;

Hyperparams Hyperparams::text_defaults() {
    Hyperparams hp;
    hp.learning_rate = 5e-5;
    hp.batch_size = 16;
    return hp;
}

Hyperparams Hyperparams::speech_defaults() {
    Hyperparams hp;
    hp.learning_rate = 1e-5;
    hp.batch_size = 8;
    return hp;
}

void Hyperparams::validate() const {
    if (epochs < 1) throw ValidationError("epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
    if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
    if (optimizer != "adam") throw ValidationError("optimizer is fixed to adam");
    if (schedule != "cosine") throw ValidationError("schedule is fixed to cosine");
}

double eval_accuracy(const TwoLayerHead& head, const std::vector<LabeledVector>& items) {
    if (items.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::size_t correct = 0;
    for (const auto& item : items) {
        const auto logits = head.forward(item.vector);
        // Exact tie predicts AtRisk, matching the voting convention.
        const RiskLabel predicted =
            logits[1] >= logits[0] ? RiskLabel::AtRisk : RiskLabel::NonRisk;
        if (predicted == item.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(items.size());
}

TwoLayerHead train_head_on_vectors(const std::vector<LabeledVector>& train,
                                   const std::vector<LabeledVector>& dev, int input_dim,
                                   int hidden_dim, double dropout, const Hyperparams& hp,
                                   TrainingHistory& history) {
    hp.validate();
    if (train.empty()) throw ValidationError("training set is empty");

    bool has_0 = false, has_1 = false;
    for (const auto& item : train) {
        if (item.label == RiskLabel::NonRisk) has_0 = true;
        else has_1 = true;
        if (static_cast<int>(item.vector.size()) != input_dim)
            throw ValidationError("training vector for subject " + item.subject_id +
                                  " has dimension " + std::to_string(item.vector.size()) +
                                  ", expected " + std::to_string(input_dim));
    }
    if (!has_0 || !has_1)
        throw ValidationError("training set contains a single class; both labels are required");

    TwoLayerHead head(input_dim, hidden_dim, 2, dropout);
    Rng rng(hp.seed);
    head.init_parameters(rng);

    const std::size_t n = train.size();
    const std::int64_t batches_per_epoch =
        static_cast<std::int64_t>((n + hp.batch_size - 1) / static_cast<std::size_t>(hp.batch_size));
    const std::int64_t total_steps = static_cast<std::int64_t>(hp.epochs) * batches_per_epoch;

    AdamOptimizer adam(head.parameter_count());
    // Canonicalize rows by subject id before the seeded shuffle, so the
    // caller's row order never affects the trained parameters.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return train[a].subject_id < train[b].subject_id;
    });

    std::vector<double> grads(head.parameter_count());
    std::vector<double> mask;
    std::int64_t step = 0;

    history.train_loss.clear();
    history.dev_accuracy.clear();

    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(hp.batch_size)) {
            const std::size_t end = std::min(n, start + static_cast<std::size_t>(hp.batch_size));
            std::fill(grads.begin(), grads.end(), 0.0);
            double batch_loss = 0.0;
            for (std::size_t i = start; i < end; ++i) {
                const auto& item = train[order[i]];
                // forward_train draws the dropout mask; the same mask
                // feeds the backward pass.
                head.forward_train(item.vector, rng, mask);
                batch_loss += head.accumulate_grad_train(item.vector, label_to_int(item.label),
                                                         mask, grads);
            }
            const double scale = 1.0 / static_cast<double>(end - start);
            for (auto& g : grads) g *= scale;
            batch_loss *= scale;
            if (!std::isfinite(batch_loss))
                throw Error("non-finite training loss at epoch " + std::to_string(epoch) +
                            " step " + std::to_string(step) +
                            "; inputs or learning rate are pathological");
            epoch_loss += batch_loss * static_cast<double>(end - start);

            adam.step(head.parameters(), grads, cosine_lr(step, total_steps, hp.learning_rate));
            ++step;
        }
        history.train_loss.push_back(epoch_loss / static_cast<double>(n));
        history.dev_accuracy.push_back(eval_accuracy(head, dev));
    }
    return head;
}

namespace {

LabeledVector encode_labeled(Encoder& encoder, const LabeledInput& item, TaskKind task) {
    Representation rep = encode(encoder, item.input, item.subject_id, task);
    return LabeledVector{item.subject_id, std::move(rep.vector), item.label};
}

}  // namespace

TrainedModel train_classifier(const std::vector<LabeledInput>& train_set,
                              const std::vector<LabeledInput>& dev_set, Encoder& encoder,
                              const ClassifierHeadConfig& head_config, const Hyperparams& hp,
                              TaskKind task) {
    const EncoderDescriptor& d = encoder.descriptor();
    if (task == TaskKind::PR && d.modality == Modality::Text)
        throw ValidationError("no text model is trained for PR: every PR transcript reads the "
                              "same fixed passage");
    if (d.trainable)
        throw Error("encoder " + d.encoder_id +
                    " requests gradient-based fine-tuning, which requires an encoder plugin "
                    "with backward support; the core harness trains heads on frozen "
                    "representations");
    if (head_config.input_dim != d.repr_dim)
        throw ValidationError("head input_dim " + std::to_string(head_config.input_dim) +
                              " does not match encoder repr_dim " + std::to_string(d.repr_dim));

    std::vector<LabeledVector> train_vecs, dev_vecs;
    train_vecs.reserve(train_set.size());
    dev_vecs.reserve(dev_set.size());
    for (const auto& item : train_set) train_vecs.push_back(encode_labeled(encoder, item, task));
    for (const auto& item : dev_set) dev_vecs.push_back(encode_labeled(encoder, item, task));

    TrainedModel model;
    model.encoder_id = d.encoder_id;
    model.model_id = d.encoder_id + "@" + to_string(task);
    model.hyperparams = hp;
    model.head = train_head_on_vectors(train_vecs, dev_vecs, head_config.input_dim,
                                       head_config.hidden_dim, head_config.dropout, hp,
                                       model.history);
    return model;
}

Logits predict_logits(const TrainedModel& model, const Representation& representation) {
    if (representation.encoder_id != model.encoder_id)
        throw ValidationError("representation from encoder " + representation.encoder_id +
                              " fed to model trained on " + model.encoder_id);
    Logits out;
    out.subject_id = representation.subject_id;
    out.task = representation.task;
    out.source_id = model.model_id;
    out.values = model.head.forward(representation.vector);
    return out;
}

Logits predict_logits(const TrainedModel& model, Encoder& encoder, const EncoderInput& input,
                      const std::string& subject_id, TaskKind task) {
    return predict_logits(model, encode(encoder, input, subject_id, task));
}

ExportResult export_representations(Encoder& encoder, const std::vector<ExportItem>& items,
                                    TaskKind task) {
    ExportResult result;
    for (const auto& item : items) {
        try {
            result.representations.push_back(encode(encoder, item.input, item.subject_id, task));
        } catch (const std::exception&) {
            result.missing.push_back(item.subject_id);
        }
    }
    return result;
}

namespace {

constexpr char kModelMagic[8] = {'R', 'P', 'H', 'E', 'A', 'D', '0', '1'};

void write_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::ifstream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_model(const TrainedModel& model, const fs::path& params_path,
                const fs::path& meta_path) {
    fs::create_directories(params_path.parent_path());
    std::ofstream bin(params_path, std::ios::binary | std::ios::trunc);
    if (!bin) throw Error("cannot write model parameters: " + params_path.string());
    bin.write(kModelMagic, 8);
    write_u32(bin, static_cast<std::uint32_t>(model.head.input_dim()));
    write_u32(bin, static_cast<std::uint32_t>(model.head.hidden_dim()));
    write_u32(bin, static_cast<std::uint32_t>(model.head.num_classes()));
    write_u32(bin, 0);
    for (double v : model.head.parameters()) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
        bin.write(reinterpret_cast<const char*>(b), 8);
    }

    json meta;
    meta["model_id"] = model.model_id;
    meta["encoder_id"] = model.encoder_id;
    meta["head"] = {{"input_dim", model.head.input_dim()},
                    {"hidden_dim", model.head.hidden_dim()},
                    {"num_classes", model.head.num_classes()},
                    {"dropout", model.head.dropout()}};
    meta["hyperparams"] = {{"epochs", model.hyperparams.epochs},
                           {"learning_rate", model.hyperparams.learning_rate},
                           {"batch_size", model.hyperparams.batch_size},
                           {"optimizer", model.hyperparams.optimizer},
                           {"schedule", model.hyperparams.schedule},
                           {"seed", model.hyperparams.seed}};
    // NaN marks "no dev set"; JSON has no NaN, so it serializes as null.
    json dev_accuracy = json::array();
    for (double v : model.history.dev_accuracy) {
        if (std::isfinite(v))
            dev_accuracy.push_back(v);
        else
            dev_accuracy.push_back(nullptr);
    }
    meta["history"] = {{"train_loss", model.history.train_loss},
                       {"dev_accuracy", dev_accuracy}};
    std::ofstream out(meta_path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write model metadata: " + meta_path.string());
    out << meta.dump(2) << "\n";
}

TrainedModel load_model(const fs::path& params_path, const fs::path& meta_path) {
    std::ifstream meta_in(meta_path, std::ios::binary);
    if (!meta_in) throw MissingArtifactError("missing model metadata: " + meta_path.string());
    json meta;
    try {
        meta = json::parse(meta_in);
    } catch (const json::exception& e) {
        throw Error("malformed model metadata " + meta_path.string() + ": " + e.what());
    }

    TrainedModel model;
    model.model_id = meta.at("model_id").get<std::string>();
    model.encoder_id = meta.at("encoder_id").get<std::string>();
    model.hyperparams.epochs = meta.at("hyperparams").at("epochs").get<int>();
    model.hyperparams.learning_rate = meta.at("hyperparams").at("learning_rate").get<double>();
    model.hyperparams.batch_size = meta.at("hyperparams").at("batch_size").get<int>();
    model.hyperparams.optimizer = meta.at("hyperparams").at("optimizer").get<std::string>();
    model.hyperparams.schedule = meta.at("hyperparams").at("schedule").get<std::string>();
    model.hyperparams.seed = meta.at("hyperparams").at("seed").get<std::uint64_t>();
    model.history.train_loss = meta.at("history").at("train_loss").get<std::vector<double>>();
    for (const auto& v : meta.at("history").at("dev_accuracy"))
        model.history.dev_accuracy.push_back(
            v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());

    std::ifstream bin(params_path, std::ios::binary);
    if (!bin) throw MissingArtifactError("missing model parameters: " + params_path.string());
    char magic[8];
    bin.read(magic, 8);
    if (!bin || std::memcmp(magic, kModelMagic, 8) != 0)
        throw Error("bad model parameter file: " + params_path.string());
    const int input_dim = static_cast<int>(read_u32(bin));
    const int hidden_dim = static_cast<int>(read_u32(bin));
    const int num_classes = static_cast<int>(read_u32(bin));
    read_u32(bin);

    model.head = TwoLayerHead(input_dim, hidden_dim, num_classes,
                              meta.at("head").at("dropout").get<double>());
    for (auto& v : model.head.parameters()) {
        unsigned char b[8];
        bin.read(reinterpret_cast<char*>(b), 8);
        if (!bin) throw Error("truncated model parameter file: " + params_path.string());
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        std::memcpy(&v, &bits, 8);
    }
    return model;
}

}  // namespace riskpipe
