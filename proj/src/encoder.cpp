#include "riskpipe/encoder.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "riskpipe/cache.hpp"
#include "riskpipe/errors.hpp"

namespace riskpipe {

namespace fs = std::filesystem;

std::string to_string(Modality m) {
    return m == Modality::Text ? "text" : "speech";
}

std::vector<double> Encoder::encode_text(const std::string&) {
    throw ValidationError("encoder " + descriptor().encoder_id + " has modality " +
                          to_string(descriptor().modality) + ", cannot encode text");
}

std::vector<double> Encoder::encode_audio(const fs::path&) {
    throw ValidationError("encoder " + descriptor().encoder_id + " has modality " +
                          to_string(descriptor().modality) + ", cannot encode audio");
}

Representation encode(Encoder& encoder, const EncoderInput& input, const std::string& subject_id,
                      TaskKind task) {
    const EncoderDescriptor& d = encoder.descriptor();
    if (input.modality != d.modality)
        throw ValidationError("input modality " + to_string(input.modality) +
                              " does not match encoder " + d.encoder_id + " modality " +
                              to_string(d.modality));
    Representation rep;
    rep.subject_id = subject_id;
    rep.task = task;
    rep.encoder_id = d.encoder_id;
    rep.vector = input.modality == Modality::Text ? encoder.encode_text(input.text)
                                                  : encoder.encode_audio(input.audio_path);
    if (static_cast<int>(rep.vector.size()) != d.repr_dim)
        throw Error("encoder " + d.encoder_id + " produced dimension " +
                    std::to_string(rep.vector.size()) + ", declared " +
                    std::to_string(d.repr_dim));
    for (double v : rep.vector)
        if (!std::isfinite(v))
            throw Error("encoder " + d.encoder_id + " produced a non-finite value");
    return rep;
}

namespace {

std::size_t count_non_overlapping(const std::string& hay, const std::string& needle) {
    if (needle.empty()) return 0;
    std::size_t count = 0;
    for (std::size_t pos = hay.find(needle); pos != std::string::npos;
         pos = hay.find(needle, pos + needle.size()))
        ++count;
    return count;
}

}  // namespace

MockTextEncoder::MockTextEncoder(std::string encoder_id, std::vector<std::string> surfaces)
    : surfaces_(std::move(surfaces)) {
    if (surfaces_.empty()) throw ValidationError("mock text encoder needs a non-empty lexicon");
    descriptor_.encoder_id = std::move(encoder_id);
    descriptor_.modality = Modality::Text;
    descriptor_.repr_dim = static_cast<int>(surfaces_.size());
    descriptor_.trainable = false;
    descriptor_.pooling = "marker-count";
    descriptor_.truncation = "none";
}

std::vector<double> MockTextEncoder::encode_text(const std::string& text) {
    std::vector<double> v(surfaces_.size(), 0.0);
    for (std::size_t i = 0; i < surfaces_.size(); ++i)
        v[i] = static_cast<double>(count_non_overlapping(text, surfaces_[i]));
    return v;
}

MockSpeechEncoder::MockSpeechEncoder(std::string encoder_id, std::vector<std::string> vocabulary)
    : vocabulary_(std::move(vocabulary)) {
    if (vocabulary_.empty())
        throw ValidationError("mock speech encoder needs a non-empty vocabulary");
    descriptor_.encoder_id = std::move(encoder_id);
    descriptor_.modality = Modality::Speech;
    descriptor_.repr_dim = static_cast<int>(vocabulary_.size());
    descriptor_.trainable = false;
    descriptor_.pooling = "token-count";
    descriptor_.truncation = "none";
}

std::vector<double> MockSpeechEncoder::encode_audio(const fs::path& audio_path) {
    std::ifstream in(audio_path, std::ios::binary);
    if (!in) throw Error("cannot open audio surrogate file: " + audio_path.string());
    std::vector<double> v(vocabulary_.size(), 0.0);
    std::string token;
    while (in >> token) {
        for (std::size_t i = 0; i < vocabulary_.size(); ++i) {
            if (token == vocabulary_[i]) {
                v[i] += 1.0;
                break;
            }
        }
    }
    return v;
}

void EncoderRegistry::register_factory(const std::string& encoder_id, Factory factory) {
    factories_[encoder_id] = std::move(factory);
}

bool EncoderRegistry::has(const std::string& encoder_id) const {
    return factories_.count(encoder_id) > 0;
}

std::shared_ptr<Encoder> EncoderRegistry::create(
    const std::string& encoder_id, const std::map<std::string, std::string>& config) const {
    auto it = factories_.find(encoder_id);
    if (it == factories_.end())
        throw ValidationError("unknown encoder_id \"" + encoder_id +
                              "\"; no plugin registered under this id");
    return it->second(config);
}

std::shared_ptr<Encoder> make_mock_text_encoder(const MarkerLexicon& lexicon,
                                                const std::string& language) {
    return std::make_shared<MockTextEncoder>("mock-text-bag-" + language,
                                             lexicon.marker_surfaces(language));
}

std::shared_ptr<Encoder> make_mock_speech_encoder(const MarkerLexicon& lexicon) {
    return std::make_shared<MockSpeechEncoder>("mock-speech-bag", lexicon.acoustic_vocabulary());
}

fs::path representation_data_file(const fs::path& dir, const std::string& encoder_id,
                                  TaskKind task, Split split) {
    return dir / (encoder_id + "__" + to_string(task) + "__" + to_string(split) + ".f32");
}

fs::path representation_index_file(const fs::path& dir, const std::string& encoder_id,
                                   TaskKind task, Split split) {
    return dir / (encoder_id + "__" + to_string(task) + "__" + to_string(split) + ".idx");
}

void save_representations(const fs::path& dir, const std::string& encoder_id, TaskKind task,
                          Split split, const std::vector<Representation>& representations) {
    require_path_safe_id(encoder_id, "encoder_id");
    fs::create_directories(dir);

    std::size_t dim = 0;
    for (const auto& r : representations) {
        if (r.encoder_id != encoder_id)
            throw ValidationError("representation for encoder " + r.encoder_id +
                                  " in a store write for " + encoder_id);
        if (dim == 0) dim = r.vector.size();
        if (r.vector.size() != dim)
            throw ValidationError("inconsistent representation dimensions in store write");
    }

    std::ofstream data(representation_data_file(dir, encoder_id, task, split),
                       std::ios::binary | std::ios::trunc);
    std::ofstream index(representation_index_file(dir, encoder_id, task, split),
                        std::ios::binary | std::ios::trunc);
    if (!data || !index) throw Error("cannot write representation store files in " + dir.string());

    std::size_t row = 0;
    for (const auto& r : representations) {
        for (double value : r.vector) {
            const float f = static_cast<float>(value);
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            const unsigned char bytes[4] = {
                static_cast<unsigned char>(bits & 0xff),
                static_cast<unsigned char>((bits >> 8) & 0xff),
                static_cast<unsigned char>((bits >> 16) & 0xff),
                static_cast<unsigned char>((bits >> 24) & 0xff),
            };
            data.write(reinterpret_cast<const char*>(bytes), 4);
        }
        index << r.subject_id << '\t' << row << '\n';
        ++row;
    }
}

std::vector<Representation> load_representations(const fs::path& dir,
                                                 const std::string& encoder_id, TaskKind task,
                                                 Split split) {
    const fs::path data_path = representation_data_file(dir, encoder_id, task, split);
    const fs::path index_path = representation_index_file(dir, encoder_id, task, split);
    std::ifstream index(index_path, std::ios::binary);
    if (!index) throw MissingArtifactError("missing representation index: " + index_path.string());
    std::ifstream data(data_path, std::ios::binary);
    if (!data) throw MissingArtifactError("missing representation data: " + data_path.string());

    std::vector<std::string> subjects;
    std::string line;
    while (std::getline(index, line)) {
        if (line.empty()) continue;
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw Error("malformed representation index line: " + line);
        const std::size_t row = std::stoul(line.substr(tab + 1));
        if (row != subjects.size())
            throw Error("representation index rows out of order in " + index_path.string());
        subjects.push_back(line.substr(0, tab));
    }

    data.seekg(0, std::ios::end);
    const std::size_t bytes = static_cast<std::size_t>(data.tellg());
    data.seekg(0);
    if (subjects.empty()) {
        if (bytes != 0) throw Error("representation data not empty but index is");
        return {};
    }
    if (bytes % (4 * subjects.size()) != 0)
        throw Error("representation data size does not divide into " +
                    std::to_string(subjects.size()) + " rows");
    const std::size_t dim = bytes / (4 * subjects.size());

    std::vector<Representation> out;
    out.reserve(subjects.size());
    for (const auto& subject : subjects) {
        Representation rep;
        rep.subject_id = subject;
        rep.task = task;
        rep.encoder_id = encoder_id;
        rep.vector.resize(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            unsigned char bytes4[4];
            data.read(reinterpret_cast<char*>(bytes4), 4);
            if (!data) throw Error("truncated representation data: " + data_path.string());
            const std::uint32_t bits = static_cast<std::uint32_t>(bytes4[0]) |
                                       (static_cast<std::uint32_t>(bytes4[1]) << 8) |
                                       (static_cast<std::uint32_t>(bytes4[2]) << 16) |
                                       (static_cast<std::uint32_t>(bytes4[3]) << 24);
            float f;
            std::memcpy(&f, &bits, 4);
            rep.vector[i] = static_cast<double>(f);
        }
        out.push_back(std::move(rep));
    }
    return out;
}

}  // namespace riskpipe
