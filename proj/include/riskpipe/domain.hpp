#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace riskpipe {

// The three speech tasks every subject performs.
enum class TaskKind { ER, PR, ED };

// Binary screening label. AtRisk is the positive class everywhere:
// files, metric counts, classifier heads (logit index 1).
enum class RiskLabel : int { NonRisk = 0, AtRisk = 1 };

enum class Split { Train, Dev, Test };
enum class Sex { F, M };

std::string to_string(TaskKind task);
std::string to_string(Split split);
std::string to_string(Sex sex);

TaskKind task_from_string(const std::string& s);
Split split_from_string(const std::string& s);
Sex sex_from_string(const std::string& s);
RiskLabel label_from_int(int v);

inline int label_to_int(RiskLabel l) { return static_cast<int>(l); }

constexpr TaskKind kAllTasks[] = {TaskKind::ER, TaskKind::PR, TaskKind::ED};
constexpr Split kAllSplits[] = {Split::Train, Split::Dev, Split::Test};

struct SubjectRecord {
    std::string subject_id;
    std::optional<int> age;  // years, 10-18 when present
    std::optional<Sex> sex;
    RiskLabel label = RiskLabel::NonRisk;
    std::optional<Split> split;
};

struct RecordingRef {
    std::string subject_id;
    TaskKind task = TaskKind::ER;
    std::string audio_uri;  // relative to the manifest's directory
    std::optional<double> duration_s;
};

struct Transcript {
    std::string subject_id;
    TaskKind task = TaskKind::ER;
    std::string language = "zh";
    std::string text;
    std::string provider_id;
};

struct DatasetManifest {
    std::vector<SubjectRecord> subjects;
    std::vector<RecordingRef> recordings;
    std::vector<Transcript> transcripts;

    const SubjectRecord* find_subject(const std::string& subject_id) const;
    const RecordingRef* find_recording(const std::string& subject_id, TaskKind task) const;
    const Transcript* find_transcript(const std::string& subject_id, TaskKind task) const;
    std::vector<const SubjectRecord*> subjects_in(Split split) const;
};

struct Violation {
    std::string code;     // stable identifier, e.g. "duplicate-recording"
    std::string message;  // human-readable, names the offending ids
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
};

}  // namespace riskpipe
