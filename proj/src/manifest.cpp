#include "riskpipe/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "riskpipe/errors.hpp"
#include "riskpipe/rng.hpp"

namespace riskpipe {

using nlohmann::json;

namespace {

void reject_unknown_fields(const json& obj, const std::set<std::string>& allowed, int line_no) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key())) {
            throw ValidationError("manifest line " + std::to_string(line_no) +
                                  ": unknown field \"" + it.key() + "\"");
        }
    }
}

std::string require_string(const json& obj, const char* key, int line_no) {
    if (!obj.contains(key) || !obj[key].is_string() || obj[key].get<std::string>().empty()) {
        throw ValidationError("manifest line " + std::to_string(line_no) +
                              ": missing or empty \"" + std::string(key) + "\"");
    }
    return obj[key].get<std::string>();
}

SubjectRecord parse_subject(const json& obj, int line_no) {
    reject_unknown_fields(obj, {"record_type", "subject_id", "age", "sex", "label", "split"},
                          line_no);
    SubjectRecord s;
    s.subject_id = require_string(obj, "subject_id", line_no);
    if (obj.contains("age")) {
        if (!obj["age"].is_number_integer())
            throw ValidationError("manifest line " + std::to_string(line_no) +
                                  ": age must be an integer");
        s.age = obj["age"].get<int>();
    }
    if (obj.contains("sex")) s.sex = sex_from_string(require_string(obj, "sex", line_no));
    if (!obj.contains("label") || !obj["label"].is_number_integer())
        throw ValidationError("manifest line " + std::to_string(line_no) +
                              ": missing integer \"label\"");
    s.label = label_from_int(obj["label"].get<int>());
    if (obj.contains("split")) s.split = split_from_string(require_string(obj, "split", line_no));
    return s;
}

RecordingRef parse_recording(const json& obj, int line_no) {
    reject_unknown_fields(obj, {"record_type", "subject_id", "task", "audio_uri", "duration_s"},
                          line_no);
    RecordingRef r;
    r.subject_id = require_string(obj, "subject_id", line_no);
    r.task = task_from_string(require_string(obj, "task", line_no));
    r.audio_uri = require_string(obj, "audio_uri", line_no);
    if (obj.contains("duration_s")) {
        if (!obj["duration_s"].is_number())
            throw ValidationError("manifest line " + std::to_string(line_no) +
                                  ": duration_s must be a number");
        r.duration_s = obj["duration_s"].get<double>();
        if (*r.duration_s < 0.0)
            throw ValidationError("manifest line " + std::to_string(line_no) +
                                  ": duration_s must be nonnegative");
    }
    return r;
}

Transcript parse_transcript(const json& obj, int line_no) {
    reject_unknown_fields(obj, {"record_type", "subject_id", "task", "language", "text",
                                "provider_id"},
                          line_no);
    Transcript t;
    t.subject_id = require_string(obj, "subject_id", line_no);
    t.task = task_from_string(require_string(obj, "task", line_no));
    t.language = require_string(obj, "language", line_no);
    if (t.language != "zh")
        throw ValidationError("manifest line " + std::to_string(line_no) +
                              ": transcript language must be \"zh\"");
    if (!obj.contains("text") || !obj["text"].is_string())
        throw ValidationError("manifest line " + std::to_string(line_no) +
                              ": missing \"text\"");
    t.text = obj["text"].get<std::string>();
    t.provider_id = require_string(obj, "provider_id", line_no);
    return t;
}

}  // namespace

DatasetManifest parse_manifest_text(const std::string& text) {
    DatasetManifest m;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        // Tolerate a trailing \r and blank lines.
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;

        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::exception& e) {
            throw ValidationError("manifest line " + std::to_string(line_no) +
                                  ": malformed record: " + e.what());
        }
        if (!obj.is_object())
            throw ValidationError("manifest line " + std::to_string(line_no) +
                                  ": record must be a JSON object");
        const std::string type = require_string(obj, "record_type", line_no);
        if (type == "subject") {
            m.subjects.push_back(parse_subject(obj, line_no));
        } else if (type == "recording") {
            m.recordings.push_back(parse_recording(obj, line_no));
        } else if (type == "transcript") {
            m.transcripts.push_back(parse_transcript(obj, line_no));
        } else {
            throw ValidationError("manifest line " + std::to_string(line_no) +
                                  ": unknown record_type \"" + type + "\"");
        }
    }

    ValidationReport report = validate_manifest(m);
    if (!report.ok()) {
        std::string msg = "manifest invalid:";
        for (const auto& v : report.violations) msg += "\n  - " + v.message;
        throw ValidationError(msg);
    }
    return m;
}

DatasetManifest parse_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open manifest file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_manifest_text(buf.str());
}

std::string serialize_manifest(const DatasetManifest& manifest) {
    std::string out;
    for (const auto& s : manifest.subjects) {
        json obj;
        obj["record_type"] = "subject";
        obj["subject_id"] = s.subject_id;
        if (s.age) obj["age"] = *s.age;
        if (s.sex) obj["sex"] = to_string(*s.sex);
        obj["label"] = label_to_int(s.label);
        if (s.split) obj["split"] = to_string(*s.split);
        out += obj.dump() + "\n";
    }
    for (const auto& r : manifest.recordings) {
        json obj;
        obj["record_type"] = "recording";
        obj["subject_id"] = r.subject_id;
        obj["task"] = to_string(r.task);
        obj["audio_uri"] = r.audio_uri;
        if (r.duration_s) obj["duration_s"] = *r.duration_s;
        out += obj.dump() + "\n";
    }
    for (const auto& t : manifest.transcripts) {
        json obj;
        obj["record_type"] = "transcript";
        obj["subject_id"] = t.subject_id;
        obj["task"] = to_string(t.task);
        obj["language"] = t.language;
        obj["text"] = t.text;
        obj["provider_id"] = t.provider_id;
        out += obj.dump() + "\n";
    }
    return out;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write manifest file: " + path.string());
    out << serialize_manifest(manifest);
}

ValidationReport validate_manifest(const DatasetManifest& manifest) {
    ValidationReport report;
    auto add = [&](std::string code, std::string message) {
        report.violations.push_back({std::move(code), std::move(message)});
    };

    std::set<std::string> subject_ids;
    for (const auto& s : manifest.subjects) {
        if (!subject_ids.insert(s.subject_id).second)
            add("duplicate-subject", "duplicate subject_id " + s.subject_id);
        if (s.age && (*s.age < 10 || *s.age > 18))
            add("age-out-of-range", "subject " + s.subject_id + " age " +
                                        std::to_string(*s.age) + " outside [10,18]");
    }

    std::set<std::pair<std::string, TaskKind>> recording_keys;
    for (const auto& r : manifest.recordings) {
        if (!subject_ids.count(r.subject_id))
            add("dangling-recording",
                "recording references unknown subject " + r.subject_id);
        if (!recording_keys.insert({r.subject_id, r.task}).second)
            add("duplicate-recording", "duplicate recording for subject " + r.subject_id +
                                           " task " + to_string(r.task));
    }

    std::set<std::pair<std::string, TaskKind>> transcript_keys;
    for (const auto& t : manifest.transcripts) {
        if (!subject_ids.count(t.subject_id))
            add("dangling-transcript",
                "transcript references unknown subject " + t.subject_id);
        if (!transcript_keys.insert({t.subject_id, t.task}).second)
            add("duplicate-transcript", "duplicate transcript for subject " + t.subject_id +
                                            " task " + to_string(t.task));
        // PR text is unused downstream, so an empty PR transcript is fine.
        if (t.task != TaskKind::PR && t.text.empty())
            add("empty-transcript", "empty transcript text for subject " + t.subject_id +
                                        " task " + to_string(t.task));
    }

    return report;
}

DatasetManifest split_dataset(const DatasetManifest& manifest,
                              const std::array<int, 3>& ratios,
                              std::uint64_t seed) {
    for (int r : ratios)
        if (r <= 0) throw ValidationError("split ratios must be positive");

    const std::size_t assigned =
        static_cast<std::size_t>(std::count_if(manifest.subjects.begin(), manifest.subjects.end(),
                                               [](const SubjectRecord& s) { return s.split.has_value(); }));
    if (assigned == manifest.subjects.size() && !manifest.subjects.empty())
        return manifest;  // official split present, never reassign
    if (assigned != 0)
        throw ValidationError("manifest has a partial split assignment; "
                              "clear the split fields or assign all of them");

    const std::size_t n = manifest.subjects.size();
    const long ratio_sum = ratios[0] + ratios[1] + ratios[2];

    // Overall split sizes: floor for dev/test, remainder goes to train.
    std::array<std::size_t, 3> totals{};
    totals[1] = n * static_cast<std::size_t>(ratios[1]) / static_cast<std::size_t>(ratio_sum);
    totals[2] = n * static_cast<std::size_t>(ratios[2]) / static_cast<std::size_t>(ratio_sum);
    totals[0] = n - totals[1] - totals[2];

    // Group subject indices by label, in manifest order.
    std::map<RiskLabel, std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < n; ++i) by_label[manifest.subjects[i].label].push_back(i);

    for (const auto& [label, members] : by_label) {
        if (members.size() < 3)
            throw ValidationError("label class " + std::to_string(label_to_int(label)) +
                                  " has only " + std::to_string(members.size()) +
                                  " subjects, fewer than the 3 splits");
    }

    // Per class, allocate floor(g * total_i / n) to each split, then hand the
    // leftovers to the splits with the largest fractional remainder that
    // still have capacity. Keeps both the split totals and the per-split
    // label balance as close to exact as integers allow.
    std::array<std::size_t, 3> capacity = totals;
    std::map<RiskLabel, std::array<std::size_t, 3>> alloc;
    for (const auto& [label, members] : by_label) {
        const std::size_t g = members.size();
        std::array<std::size_t, 3> a{};
        for (int i = 0; i < 3; ++i) {
            a[i] = g * totals[i] / n;
            capacity[i] -= a[i];
        }
        alloc[label] = a;
    }
    for (auto& [label, a] : alloc) {
        const std::size_t g = by_label[label].size();
        std::size_t remaining = g - (a[0] + a[1] + a[2]);
        while (remaining > 0) {
            int best = -1;
            double best_frac = -1.0;
            for (int i = 0; i < 3; ++i) {
                if (capacity[i] == 0) continue;
                const double frac = static_cast<double>(g * totals[i] % n) / static_cast<double>(n);
                if (frac > best_frac) {
                    best_frac = frac;
                    best = i;
                }
            }
            if (best < 0) throw Error("split allocation ran out of capacity");
            ++a[best];
            --capacity[best];
            --remaining;
        }
    }

    DatasetManifest out = manifest;
    Rng rng(seed);
    for (auto& [label, members] : by_label) {
        rng.shuffle(members);
        const auto& a = alloc[label];
        std::size_t pos = 0;
        for (int i = 0; i < 3; ++i) {
            for (std::size_t k = 0; k < a[i]; ++k)
                out.subjects[members[pos++]].split = kAllSplits[i];
        }
    }
    return out;
}

}  // namespace riskpipe
