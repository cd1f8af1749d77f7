#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "riskpipe/domain.hpp"
#include "riskpipe/lexicon.hpp"

namespace riskpipe {

enum class Modality { Text, Speech };

std::string to_string(Modality m);

struct EncoderDescriptor {
    std::string encoder_id;
    Modality modality = Modality::Text;
    int repr_dim = 0;
    bool trainable = false;
    // Self-description so experiment records explain how variable-length
    // inputs became fixed vectors.
    std::string pooling;
    std::string truncation;
};

struct EncoderInput {
    Modality modality = Modality::Text;
    std::string text;
    std::filesystem::path audio_path;

    static EncoderInput from_text(std::string t) {
        EncoderInput in;
        in.modality = Modality::Text;
        in.text = std::move(t);
        return in;
    }
    static EncoderInput from_audio(std::filesystem::path p) {
        EncoderInput in;
        in.modality = Modality::Speech;
        in.audio_path = std::move(p);
        return in;
    }
};

struct Representation {
    std::string subject_id;
    TaskKind task = TaskKind::ER;
    std::string encoder_id;
    std::vector<double> vector;  // length == repr_dim, finite entries
};

class Encoder {
public:
    virtual ~Encoder() = default;
    virtual const EncoderDescriptor& descriptor() const = 0;
    virtual std::vector<double> encode_text(const std::string& text);
    virtual std::vector<double> encode_audio(const std::filesystem::path& audio_path);
};

// Modality-checked encode; validates output length and finiteness.
Representation encode(Encoder& encoder, const EncoderInput& input, const std::string& subject_id,
                      TaskKind task);

// Frozen bag-of-markers text encoder: slot i counts non-overlapping
// occurrences of surface form i. The surfaces come from one language of
// the marker lexicon, so the zh and en feature branches share slots.
class MockTextEncoder : public Encoder {
public:
    MockTextEncoder(std::string encoder_id, std::vector<std::string> surfaces);
    const EncoderDescriptor& descriptor() const override { return descriptor_; }
    std::vector<double> encode_text(const std::string& text) override;

private:
    EncoderDescriptor descriptor_;
    std::vector<std::string> surfaces_;
};

// Frozen bag-of-tokens speech encoder over surrogate acoustic token files
// (whitespace-separated tokens, one file per recording).
class MockSpeechEncoder : public Encoder {
public:
    MockSpeechEncoder(std::string encoder_id, std::vector<std::string> vocabulary);
    const EncoderDescriptor& descriptor() const override { return descriptor_; }
    std::vector<double> encode_audio(const std::filesystem::path& audio_path) override;

private:
    EncoderDescriptor descriptor_;
    std::vector<std::string> vocabulary_;
};

// Pretrained checkpoints plug in through this registry; the core pipeline
// only ships the mock encoders.
class EncoderRegistry {
public:
    using Factory = std::function<std::shared_ptr<Encoder>(
        const std::map<std::string, std::string>& config)>;

    void register_factory(const std::string& encoder_id, Factory factory);
    bool has(const std::string& encoder_id) const;
    std::shared_ptr<Encoder> create(const std::string& encoder_id,
                                    const std::map<std::string, std::string>& config = {}) const;

private:
    std::map<std::string, Factory> factories_;
};

// "mock-text-bag" (per feature language) and "mock-speech-bag". The text
// encoder id carries the language suffix so representation files from
// the two branches never collide.
std::shared_ptr<Encoder> make_mock_text_encoder(const MarkerLexicon& lexicon,
                                                const std::string& language);
std::shared_ptr<Encoder> make_mock_speech_encoder(const MarkerLexicon& lexicon);

// Representation store: <dir>/<encoder_id>__<TASK>__<split>.f32 holds
// row-major little-endian 32-bit floats; the .idx sidecar lists
// "subject_id<TAB>row" per line.
std::filesystem::path representation_data_file(const std::filesystem::path& dir,
                                               const std::string& encoder_id, TaskKind task,
                                               Split split);
std::filesystem::path representation_index_file(const std::filesystem::path& dir,
                                                const std::string& encoder_id, TaskKind task,
                                                Split split);

void save_representations(const std::filesystem::path& dir, const std::string& encoder_id,
                          TaskKind task, Split split,
                          const std::vector<Representation>& representations);

std::vector<Representation> load_representations(const std::filesystem::path& dir,
                                                 const std::string& encoder_id, TaskKind task,
                                                 Split split);

}  // namespace riskpipe
