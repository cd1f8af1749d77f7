#include "riskpipe/domain.hpp"

#include "riskpipe/errors.hpp"

namespace riskpipe {

std::string to_string(TaskKind task) {
    switch (task) {
        case TaskKind::ER: return "ER";
        case TaskKind::PR: return "PR";
        case TaskKind::ED: return "ED";
    }
    throw Error("invalid TaskKind");
}

std::string to_string(Split split) {
    switch (split) {
        case Split::Train: return "train";
        case Split::Dev: return "dev";
        case Split::Test: return "test";
    }
    throw Error("invalid Split");
}

std::string to_string(Sex sex) {
    return sex == Sex::F ? "F" : "M";
}

TaskKind task_from_string(const std::string& s) {
    if (s == "ER") return TaskKind::ER;
    if (s == "PR") return TaskKind::PR;
    if (s == "ED") return TaskKind::ED;
    throw ValidationError("unknown task: \"" + s + "\" (expected ER, PR or ED)");
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "dev") return Split::Dev;
    if (s == "test") return Split::Test;
    throw ValidationError("unknown split: \"" + s + "\" (expected train, dev or test)");
}

Sex sex_from_string(const std::string& s) {
    if (s == "F") return Sex::F;
    if (s == "M") return Sex::M;
    throw ValidationError("unknown sex: \"" + s + "\" (expected F or M)");
}

RiskLabel label_from_int(int v) {
    if (v == 0) return RiskLabel::NonRisk;
    if (v == 1) return RiskLabel::AtRisk;
    throw ValidationError("label must be 0 or 1, got " + std::to_string(v));
}

const SubjectRecord* DatasetManifest::find_subject(const std::string& subject_id) const {
    for (const auto& s : subjects)
        if (s.subject_id == subject_id) return &s;
    return nullptr;
}

const RecordingRef* DatasetManifest::find_recording(const std::string& subject_id,
                                                    TaskKind task) const {
    for (const auto& r : recordings)
        if (r.subject_id == subject_id && r.task == task) return &r;
    return nullptr;
}

const Transcript* DatasetManifest::find_transcript(const std::string& subject_id,
                                                   TaskKind task) const {
    for (const auto& t : transcripts)
        if (t.subject_id == subject_id && t.task == task) return &t;
    return nullptr;
}

std::vector<const SubjectRecord*> DatasetManifest::subjects_in(Split split) const {
    std::vector<const SubjectRecord*> out;
    for (const auto& s : subjects)
        if (s.split && *s.split == split) out.push_back(&s);
    return out;
}

}  // namespace riskpipe
