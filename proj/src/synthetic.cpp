#include "riskpipe/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "riskpipe/errors.hpp"
#include "riskpipe/manifest.hpp"
#include "riskpipe/rng.hpp"

namespace riskpipe {

namespace fs = std::filesystem;

void SyntheticSpec::validate() const {
    if (n_subjects < 1) throw ValidationError("n_subjects must be >= 1");
    if (label_balance < 0.0 || label_balance > 1.0)
        throw ValidationError("label_balance must be in [0,1]");
    if (!(p_marker_non_risk >= 0.0 && p_marker_non_risk < p_marker_at_risk &&
          p_marker_at_risk <= 1.0))
        throw ValidationError("require 0 <= p_marker_non_risk < p_marker_at_risk <= 1");
    if (sentences_per_transcript < 1)
        throw ValidationError("sentences_per_transcript must be >= 1");
    if (tokens_per_recording < 1) throw ValidationError("tokens_per_recording must be >= 1");
    lexicon.validate();
}

namespace {

std::string make_sentence(const SyntheticSpec& spec, bool with_marker, Rng& rng) {
    const auto& fillers = spec.lexicon.text_fillers;
    const int n_fillers = 2 + static_cast<int>(rng.bounded(3));
    std::vector<std::string> tokens;
    for (int i = 0; i < n_fillers; ++i)
        tokens.push_back(fillers[rng.bounded(fillers.size())]);
    if (with_marker) {
        const auto& marker = spec.lexicon.text_markers[rng.bounded(spec.lexicon.text_markers.size())];
        const std::size_t pos = rng.bounded(tokens.size() + 1);
        tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(pos), marker.zh);
    }
    std::string sentence;
    for (const auto& t : tokens) sentence += t;
    return sentence + "。";
}

std::string make_transcript(const SyntheticSpec& spec, double p_marker, Rng& rng) {
    std::string text;
    for (int s = 0; s < spec.sentences_per_transcript; ++s)
        text += make_sentence(spec, rng.bernoulli(p_marker), rng);
    return text;
}

// Every subject reads the same marker-free passage.
std::string fixed_passage(const SyntheticSpec& spec) {
    const auto& fillers = spec.lexicon.text_fillers;
    std::string text;
    for (std::size_t s = 0; s + 1 < fillers.size(); ++s)
        text += fillers[s] + fillers[s + 1] + "。";
    return text;
}

std::string make_token_sequence(const SyntheticSpec& spec, double p_marker, Rng& rng) {
    const auto& markers = spec.lexicon.acoustic_markers;
    const auto& fillers = spec.lexicon.acoustic_fillers;
    std::string out;
    for (int i = 0; i < spec.tokens_per_recording; ++i) {
        const bool marked = !markers.empty() && rng.bernoulli(p_marker);
        const std::string& token = marked ? markers[rng.bounded(markers.size())]
                                          : fillers[rng.bounded(fillers.size())];
        if (!out.empty()) out += " ";
        out += token;
    }
    return out + "\n";
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write synthetic file: " + path.string());
    out << content;
}

}  // namespace

DatasetManifest generate_synthetic(const SyntheticSpec& spec, const fs::path& out_dir) {
    spec.validate();
    if (spec.lexicon.acoustic_fillers.empty())
        throw ValidationError("synthetic generation needs acoustic filler tokens");

    fs::create_directories(out_dir / "audio");
    Rng rng(spec.seed);

    const int n_at_risk =
        static_cast<int>(std::lround(spec.label_balance * spec.n_subjects));

    DatasetManifest manifest;
    const std::string passage = fixed_passage(spec);

    for (int i = 0; i < spec.n_subjects; ++i) {
        char id_buf[16];
        std::snprintf(id_buf, sizeof(id_buf), "S%04d", i + 1);
        const std::string subject_id = id_buf;
        const RiskLabel label = i < n_at_risk ? RiskLabel::AtRisk : RiskLabel::NonRisk;
        const double p_marker =
            label == RiskLabel::AtRisk ? spec.p_marker_at_risk : spec.p_marker_non_risk;

        SubjectRecord subject;
        subject.subject_id = subject_id;
        subject.age = 10 + static_cast<int>(rng.bounded(9));
        subject.sex = rng.bernoulli(0.7) ? Sex::F : Sex::M;  // corpus skews female
        subject.label = label;
        manifest.subjects.push_back(subject);

        for (TaskKind task : kAllTasks) {
            const std::string stem = subject_id + "__" + to_string(task);
            const std::string transcript =
                task == TaskKind::PR ? passage : make_transcript(spec, p_marker, rng);
            const std::string tokens = make_token_sequence(spec, p_marker, rng);

            write_file(out_dir / "audio" / (stem + ".tok"), tokens);
            write_file(out_dir / "audio" / (stem + ".txt"), transcript);

            RecordingRef recording;
            recording.subject_id = subject_id;
            recording.task = task;
            recording.audio_uri = "audio/" + stem + ".tok";
            recording.duration_s = static_cast<double>(spec.tokens_per_recording) / 4.0;
            manifest.recordings.push_back(recording);
        }
    }

    write_manifest(manifest, out_dir / "manifest.jsonl");
    return manifest;
}

}  // namespace riskpipe
