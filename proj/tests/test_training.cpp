#include <doctest.h>

#include <cmath>

#include "riskpipe/encoder.hpp"
#include "riskpipe/errors.hpp"
#include "riskpipe/hashing.hpp"
#include "riskpipe/rng.hpp"
#include "riskpipe/training.hpp"
#include "test_helpers.hpp"

using namespace riskpipe;
using riskpipe::testing::TempDir;
using riskpipe::testing::write_text;

namespace {

const std::vector<std::string> kSurfaces = {"s0", "s1", "cry", "dark", "alone",
                                            "s5", "s6", "s7"};

// Class-separable synthetic texts: each of 10 sentences carries one marker
// with probability p (0.9 at-risk vs 0.1 non-risk).
std::string synth_text(double p_marker, Rng& rng) {
    std::string text;
    for (int s = 0; s < 10; ++s) {
        text += "filler words here";
        if (rng.bernoulli(p_marker))
            text += " " + kSurfaces[2 + rng.bounded(3)];
        text += ". ";
    }
    return text;
}

std::vector<LabeledInput> synth_items(int n, Rng& rng) {
    std::vector<LabeledInput> items;
    for (int i = 0; i < n; ++i) {
        const RiskLabel label = i % 2 == 0 ? RiskLabel::AtRisk : RiskLabel::NonRisk;
        const double p = label == RiskLabel::AtRisk ? 0.9 : 0.1;
        items.push_back({"S" + std::to_string(i), EncoderInput::from_text(synth_text(p, rng)),
                         label});
    }
    return items;
}

Hyperparams text_hp(std::uint64_t seed) {
    Hyperparams hp = Hyperparams::text_defaults();
    hp.seed = seed;
    return hp;
}

// The published 5e-5 rate targets full-encoder fine-tuning; training only
// a head over frozen mock features needs the head-scale rate to converge
// within 10 epochs.
Hyperparams head_scale_hp(std::uint64_t seed) {
    Hyperparams hp = Hyperparams::text_defaults();
    hp.learning_rate = 3e-3;
    hp.seed = seed;
    return hp;
}

double input_accuracy(const TrainedModel& model, Encoder& encoder,
                      const std::vector<LabeledInput>& items, TaskKind task) {
    int correct = 0;
    for (const auto& item : items) {
        const Logits logits = predict_logits(model, encoder, item.input, item.subject_id, task);
        const RiskLabel predicted =
            logits.values[1] >= logits.values[0] ? RiskLabel::AtRisk : RiskLabel::NonRisk;
        if (predicted == item.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(items.size());
}

}  // namespace

TEST_SUITE("encoders") {

TEST_CASE("bag-of-markers counts land in the right slots") {
    MockTextEncoder encoder("bag8", kSurfaces);
    CHECK(encoder.descriptor().repr_dim == 8);
    const auto v = encoder.encode_text("cry cry");
    REQUIRE(v.size() == 8);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(v[i] == (i == 2 ? 2.0 : 0.0));
}

TEST_CASE("encode is deterministic and validates modality") {
    MockTextEncoder text_encoder("bag8", kSurfaces);
    const auto a = encode(text_encoder, EncoderInput::from_text("cry dark dark"), "S1",
                          TaskKind::ER);
    const auto b = encode(text_encoder, EncoderInput::from_text("cry dark dark"), "S1",
                          TaskKind::ER);
    CHECK(a.vector == b.vector);
    CHECK(a.encoder_id == "bag8");
    CHECK_THROWS_AS(
        encode(text_encoder, EncoderInput::from_audio("x.tok"), "S1", TaskKind::ER),
        ValidationError);
}

TEST_CASE("speech encoder counts tokens from surrogate files") {
    TempDir dir("speech_enc");
    write_text(dir.path() / "a.tok", "tremor steady tremor sigh\n");
    MockSpeechEncoder encoder("acoustic", {"tremor", "sigh", "steady", "clear"});
    const auto v = encoder.encode_audio(dir.path() / "a.tok");
    CHECK(v == std::vector<double>{2.0, 1.0, 1.0, 0.0});
    CHECK_THROWS_AS(encoder.encode_audio(dir.path() / "missing.tok"), Error);
}

TEST_CASE("registry creates registered encoders and rejects unknown ids") {
    EncoderRegistry registry;
    registry.register_factory("bag8", [](const std::map<std::string, std::string>&) {
        return std::make_shared<MockTextEncoder>("bag8", kSurfaces);
    });
    CHECK(registry.has("bag8"));
    CHECK(registry.create("bag8")->descriptor().repr_dim == 8);
    CHECK_THROWS_AS(registry.create("bert-base"), ValidationError);
}

TEST_CASE("representation store round-trips rows in order") {
    TempDir dir("repr_store");
    std::vector<Representation> reps;
    for (int i = 0; i < 5; ++i) {
        Representation r;
        r.subject_id = "S" + std::to_string(i);
        r.task = TaskKind::ER;
        r.encoder_id = "bag8";
        r.vector = {static_cast<double>(i), 0.5, -1.25};
        reps.push_back(r);
    }
    save_representations(dir.path(), "bag8", TaskKind::ER, Split::Dev, reps);
    const auto loaded = load_representations(dir.path(), "bag8", TaskKind::ER, Split::Dev);
    REQUIRE(loaded.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(loaded[i].subject_id == reps[i].subject_id);
        CHECK(loaded[i].vector == reps[i].vector);  // exact at float32 precision
    }
    CHECK_THROWS_AS(load_representations(dir.path(), "bag8", TaskKind::ED, Split::Dev),
                    MissingArtifactError);
}

}  // TEST_SUITE

TEST_SUITE("training") {

TEST_CASE("separable synthetic set trains to high accuracy") {
    Rng rng(7);
    const auto train_items = synth_items(240, rng);
    const auto dev_items = synth_items(40, rng);
    MockTextEncoder encoder("bag8", kSurfaces);
    ClassifierHeadConfig head_config;
    head_config.input_dim = 8;

    const TrainedModel model = train_classifier(train_items, dev_items, encoder, head_config,
                                                head_scale_hp(11), TaskKind::ER);
    CHECK(model.history.train_loss.size() == 10);
    CHECK(model.history.dev_accuracy.size() == 10);
    CHECK(input_accuracy(model, encoder, train_items, TaskKind::ER) >= 0.95);
    CHECK(input_accuracy(model, encoder, dev_items, TaskKind::ER) >= 0.85);
    CHECK(model.history.dev_accuracy.back() >= 0.85);
    CHECK(model.history.train_loss.back() < model.history.train_loss.front());
}

TEST_CASE("training is bitwise deterministic for a fixed seed") {
    Rng rng(8);
    const auto train_items = synth_items(40, rng);
    const auto dev_items = synth_items(10, rng);
    MockTextEncoder encoder("bag8", kSurfaces);
    ClassifierHeadConfig head_config;
    head_config.input_dim = 8;

    const TrainedModel a = train_classifier(train_items, dev_items, encoder, head_config,
                                            text_hp(5), TaskKind::ER);
    const TrainedModel b = train_classifier(train_items, dev_items, encoder, head_config,
                                            text_hp(5), TaskKind::ER);
    CHECK(a.history.train_loss == b.history.train_loss);
    CHECK(a.head.parameters() == b.head.parameters());

    const TrainedModel c = train_classifier(train_items, dev_items, encoder, head_config,
                                            text_hp(6), TaskKind::ER);
    CHECK(a.head.parameters() != c.head.parameters());
}

TEST_CASE("hyperparameters are recorded on the trained model") {
    Rng rng(9);
    const auto train_items = synth_items(20, rng);
    MockTextEncoder encoder("bag8", kSurfaces);
    ClassifierHeadConfig head_config;
    head_config.input_dim = 8;
    const TrainedModel model =
        train_classifier(train_items, {}, encoder, head_config, text_hp(1), TaskKind::ER);
    CHECK(model.hyperparams.learning_rate == 5e-5);
    CHECK(model.hyperparams.batch_size == 16);
    CHECK(model.hyperparams.epochs == 10);
    CHECK(model.encoder_id == "bag8");
}

TEST_CASE("single-class training sets are rejected") {
    std::vector<LabeledInput> items;
    for (int i = 0; i < 8; ++i)
        items.push_back({"S" + std::to_string(i), EncoderInput::from_text("cry"),
                         RiskLabel::AtRisk});
    MockTextEncoder encoder("bag8", kSurfaces);
    ClassifierHeadConfig head_config;
    head_config.input_dim = 8;
    CHECK_THROWS_WITH_AS(
        train_classifier(items, {}, encoder, head_config, text_hp(1), TaskKind::ER),
        doctest::Contains("single class"), ValidationError);
}

TEST_CASE("no text model is ever trained for PR") {
    Rng rng(10);
    const auto items = synth_items(10, rng);
    MockTextEncoder encoder("bag8", kSurfaces);
    ClassifierHeadConfig head_config;
    head_config.input_dim = 8;
    CHECK_THROWS_WITH_AS(
        train_classifier(items, {}, encoder, head_config, text_hp(1), TaskKind::PR),
        doctest::Contains("PR"), ValidationError);
}

TEST_CASE("a trainable encoder without backward support is refused") {
    struct TrainableStub : Encoder {
        TrainableStub() {
            d.encoder_id = "stub";
            d.modality = Modality::Text;
            d.repr_dim = 2;
            d.trainable = true;
        }
        const EncoderDescriptor& descriptor() const override { return d; }
        std::vector<double> encode_text(const std::string&) override { return {0.0, 0.0}; }
        EncoderDescriptor d;
    } stub;
    std::vector<LabeledInput> items = {
        {"a", EncoderInput::from_text("x"), RiskLabel::AtRisk},
        {"b", EncoderInput::from_text("y"), RiskLabel::NonRisk}};
    ClassifierHeadConfig head_config;
    head_config.input_dim = 2;
    CHECK_THROWS_AS(train_classifier(items, {}, stub, head_config, text_hp(1), TaskKind::ER),
                    Error);
}

TEST_CASE("zero-parameter model predicts (0,0) deterministically") {
    TrainedModel model;
    model.model_id = "zero";
    model.encoder_id = "bag8";
    model.head = TwoLayerHead(8, 512, 2, 0.1);
    Representation rep;
    rep.subject_id = "S1";
    rep.task = TaskKind::ED;
    rep.encoder_id = "bag8";
    rep.vector.assign(8, 1.0);
    const Logits a = predict_logits(model, rep);
    CHECK(a.values[0] == 0.0);
    CHECK(a.values[1] == 0.0);
    CHECK(a.source_id == "zero");
    const Logits b = predict_logits(model, rep);
    CHECK(a.values == b.values);

    rep.encoder_id = "other";
    CHECK_THROWS_AS(predict_logits(model, rep), ValidationError);
}

TEST_CASE("export_representations covers present items and lists missing ones") {
    TempDir dir("export");
    MockSpeechEncoder encoder("acoustic", {"tremor", "sigh"});
    std::vector<ExportItem> items;
    for (int i = 0; i < 4; ++i) {
        const auto path = dir.path() / ("s" + std::to_string(i) + ".tok");
        if (i != 2) write_text(path, "tremor sigh\n");
        items.push_back({"S" + std::to_string(i), EncoderInput::from_audio(path)});
    }
    const ExportResult result = export_representations(encoder, items, TaskKind::PR);
    CHECK(result.representations.size() == 3);
    REQUIRE(result.missing.size() == 1);
    CHECK(result.missing[0] == "S2");
    for (const auto& r : result.representations) CHECK(r.vector.size() == 2);

    // Persisting twice produces byte-identical store files.
    save_representations(dir.path() / "store", "acoustic", TaskKind::PR, Split::Train,
                         result.representations);
    const auto h1 = hash_file_hex(
        representation_data_file(dir.path() / "store", "acoustic", TaskKind::PR, Split::Train));
    save_representations(dir.path() / "store", "acoustic", TaskKind::PR, Split::Train,
                         result.representations);
    const auto h2 = hash_file_hex(
        representation_data_file(dir.path() / "store", "acoustic", TaskKind::PR, Split::Train));
    CHECK(h1 == h2);
}

TEST_CASE("model save/load round-trips parameters bitwise") {
    Rng rng(12);
    const auto train_items = synth_items(20, rng);
    MockTextEncoder encoder("bag8", kSurfaces);
    ClassifierHeadConfig head_config;
    head_config.input_dim = 8;
    const TrainedModel model =
        train_classifier(train_items, {}, encoder, head_config, text_hp(2), TaskKind::ED);

    TempDir dir("model_io");
    save_model(model, dir.path() / "m.bin", dir.path() / "m.json");
    const TrainedModel loaded = load_model(dir.path() / "m.bin", dir.path() / "m.json");
    CHECK(loaded.head.parameters() == model.head.parameters());
    CHECK(loaded.model_id == model.model_id);
    CHECK(loaded.hyperparams.learning_rate == model.hyperparams.learning_rate);
    CHECK(loaded.history.train_loss == model.history.train_loss);
    CHECK_THROWS_AS(load_model(dir.path() / "nope.bin", dir.path() / "m.json"),
                    MissingArtifactError);
}

}  // TEST_SUITE
