#include <doctest.h>

#include <map>
#include <set>

#include "riskpipe/errors.hpp"
#include "riskpipe/manifest.hpp"
#include "riskpipe/rng.hpp"
#include "test_helpers.hpp"

using namespace riskpipe;
using riskpipe::testing::TempDir;
using riskpipe::testing::write_text;

namespace {

std::string subject_line(const std::string& id, int label, const std::string& split = "") {
    std::string line = R"({"record_type":"subject","subject_id":")" + id +
                       R"(","label":)" + std::to_string(label);
    if (!split.empty()) line += R"(,"split":")" + split + "\"";
    return line + "}\n";
}

std::string recording_line(const std::string& id, const std::string& task) {
    return R"({"record_type":"recording","subject_id":")" + id + R"(","task":")" + task +
           R"(","audio_uri":"audio/)" + id + "__" + task + R"(.tok"})" + "\n";
}

std::string transcript_line(const std::string& id, const std::string& task,
                            const std::string& text) {
    return R"({"record_type":"transcript","subject_id":")" + id + R"(","task":")" + task +
           R"(","language":"zh","text":")" + text + R"(","provider_id":"file"})" + "\n";
}

DatasetManifest balanced_manifest(int n) {
    DatasetManifest m;
    for (int i = 0; i < n; ++i) {
        SubjectRecord s;
        s.subject_id = "S" + std::to_string(1000 + i);
        s.label = i % 2 == 0 ? RiskLabel::AtRisk : RiskLabel::NonRisk;
        m.subjects.push_back(s);
    }
    return m;
}

std::map<Split, int> split_sizes(const DatasetManifest& m) {
    std::map<Split, int> sizes;
    for (const auto& s : m.subjects) {
        REQUIRE(s.split.has_value());
        ++sizes[*s.split];
    }
    return sizes;
}

}  // namespace

TEST_SUITE("domain") {

TEST_CASE("manifest with official 4:1:1 split parses with the expected split counts") {
    std::string text;
    for (int i = 0; i < 600; ++i) {
        const std::string split = i < 400 ? "train" : (i < 500 ? "dev" : "test");
        text += subject_line("S" + std::to_string(i), i % 2, split);
    }
    const DatasetManifest m = parse_manifest_text(text);
    CHECK(m.subjects.size() == 600);
    const auto sizes = split_sizes(m);
    CHECK(sizes.at(Split::Train) == 400);
    CHECK(sizes.at(Split::Dev) == 100);
    CHECK(sizes.at(Split::Test) == 100);
}

TEST_CASE("empty file parses to an empty manifest") {
    const DatasetManifest m = parse_manifest_text("");
    CHECK(m.subjects.empty());
    CHECK(m.recordings.empty());
    CHECK(m.transcripts.empty());
}

TEST_CASE("duplicate recording key is rejected naming the subject and task") {
    const std::string text = subject_line("S001", 1) + recording_line("S001", "ER") +
                             recording_line("S001", "ER");
    CHECK_THROWS_WITH_AS(parse_manifest_text(text),
                         doctest::Contains("duplicate recording for subject S001 task ER"),
                         ValidationError);
}

TEST_CASE("malformed line reports its line number") {
    const std::string text = subject_line("S001", 0) + "{not json\n";
    CHECK_THROWS_WITH_AS(parse_manifest_text(text), doctest::Contains("line 2"),
                         ValidationError);
}

TEST_CASE("unknown task and unknown fields are rejected") {
    CHECK_THROWS_AS(parse_manifest_text(subject_line("S001", 0) +
                                        recording_line("S001", "XX")),
                    ValidationError);
    CHECK_THROWS_WITH_AS(
        parse_manifest_text(
            R"({"record_type":"subject","subject_id":"S1","label":0,"extra":1})"),
        doctest::Contains("unknown field \"extra\""), ValidationError);
}

TEST_CASE("dangling references are rejected at parse and reported by validate") {
    const std::string text = subject_line("S001", 0) + transcript_line("S777", "ER", "text");
    CHECK_THROWS_WITH_AS(parse_manifest_text(text), doctest::Contains("S777"),
                         ValidationError);

    DatasetManifest m;
    m.subjects.push_back({"S001", std::nullopt, std::nullopt, RiskLabel::NonRisk, std::nullopt});
    Transcript t;
    t.subject_id = "S777";
    t.task = TaskKind::ER;
    t.text = "text";
    t.provider_id = "file";
    m.transcripts.push_back(t);
    const ValidationReport report = validate_manifest(m);
    REQUIRE(report.violations.size() == 1);
    CHECK(report.violations[0].message.find("S777") != std::string::npos);
}

TEST_CASE("valid manifest yields an empty validation report") {
    const DatasetManifest m = parse_manifest_text(subject_line("S001", 1) +
                                                  recording_line("S001", "ER") +
                                                  transcript_line("S001", "ER", "hello"));
    CHECK(validate_manifest(m).ok());
}

TEST_CASE("missing or empty PR transcript is not a violation, empty ER text is") {
    DatasetManifest m = parse_manifest_text(subject_line("S001", 1));
    Transcript pr;
    pr.subject_id = "S001";
    pr.task = TaskKind::PR;
    pr.provider_id = "file";
    m.transcripts.push_back(pr);  // empty PR text: fine, PR text unused
    CHECK(validate_manifest(m).ok());

    Transcript er = pr;
    er.task = TaskKind::ER;
    m.transcripts.push_back(er);
    const ValidationReport report = validate_manifest(m);
    REQUIRE(report.violations.size() == 1);
    CHECK(report.violations[0].code == "empty-transcript");
}

TEST_CASE("age outside 10-18 is a violation") {
    DatasetManifest m = parse_manifest_text(subject_line("S001", 0));
    m.subjects[0].age = 9;
    CHECK_FALSE(validate_manifest(m).ok());
    m.subjects[0].age = 10;
    CHECK(validate_manifest(m).ok());
    m.subjects[0].age = 19;
    CHECK_FALSE(validate_manifest(m).ok());
}

TEST_CASE("serialize then parse round-trips the manifest") {
    std::string text = subject_line("S001", 1, "train") + subject_line("S002", 0, "dev") +
                       recording_line("S001", "ER") + transcript_line("S001", "ER", "hi");
    const DatasetManifest m = parse_manifest_text(text);
    const DatasetManifest again = parse_manifest_text(serialize_manifest(m));
    REQUIRE(again.subjects.size() == m.subjects.size());
    for (std::size_t i = 0; i < m.subjects.size(); ++i) {
        CHECK(again.subjects[i].subject_id == m.subjects[i].subject_id);
        CHECK(again.subjects[i].label == m.subjects[i].label);
        CHECK(again.subjects[i].split == m.subjects[i].split);
    }
    REQUIRE(again.recordings.size() == 1);
    CHECK(again.recordings[0].audio_uri == m.recordings[0].audio_uri);
    REQUIRE(again.transcripts.size() == 1);
    CHECK(again.transcripts[0].text == "hi");
    // Serialized form is stable.
    CHECK(serialize_manifest(again) == serialize_manifest(m));
}

TEST_CASE("parse_manifest reads from a file") {
    TempDir dir("manifest");
    write_text(dir.path() / "m.jsonl", subject_line("S001", 1));
    const DatasetManifest m = parse_manifest(dir.path() / "m.jsonl");
    CHECK(m.subjects.size() == 1);
    CHECK_THROWS_AS(parse_manifest(dir.path() / "missing.jsonl"), ValidationError);
}

TEST_CASE("split_dataset produces 400/100/100 for 600 balanced subjects") {
    const DatasetManifest m = split_dataset(balanced_manifest(600), {4, 1, 1}, 7);
    const auto sizes = split_sizes(m);
    CHECK(sizes.at(Split::Train) == 400);
    CHECK(sizes.at(Split::Dev) == 100);
    CHECK(sizes.at(Split::Test) == 100);

    // Stratified: equal label counts inside every split.
    std::map<Split, std::map<RiskLabel, int>> by_split;
    for (const auto& s : m.subjects) ++by_split[*s.split][s.label];
    for (Split split : kAllSplits)
        CHECK(by_split[split][RiskLabel::AtRisk] == by_split[split][RiskLabel::NonRisk]);
}

TEST_CASE("split_dataset handles the minimal 6-subject instance") {
    const DatasetManifest m = split_dataset(balanced_manifest(6), {4, 1, 1}, 3);
    const auto sizes = split_sizes(m);
    CHECK(sizes.at(Split::Train) == 4);
    CHECK(sizes.at(Split::Dev) == 1);
    CHECK(sizes.at(Split::Test) == 1);
}

TEST_CASE("split_dataset is deterministic and seed-sensitive") {
    const DatasetManifest base = balanced_manifest(60);
    const DatasetManifest a = split_dataset(base, {4, 1, 1}, 11);
    const DatasetManifest b = split_dataset(base, {4, 1, 1}, 11);
    const DatasetManifest c = split_dataset(base, {4, 1, 1}, 12);
    bool differs = false;
    for (std::size_t i = 0; i < base.subjects.size(); ++i) {
        CHECK(a.subjects[i].split == b.subjects[i].split);
        if (a.subjects[i].split != c.subjects[i].split) differs = true;
    }
    CHECK(differs);
}

TEST_CASE("split_dataset passes through an already-split manifest") {
    DatasetManifest m = balanced_manifest(6);
    for (auto& s : m.subjects) s.split = Split::Train;
    const DatasetManifest out = split_dataset(m, {4, 1, 1}, 1);
    for (const auto& s : out.subjects) CHECK(*s.split == Split::Train);

    // Partial assignments are ambiguous and rejected.
    m.subjects[0].split = std::nullopt;
    CHECK_THROWS_AS(split_dataset(m, {4, 1, 1}, 1), ValidationError);
}

TEST_CASE("split_dataset rejects a label class smaller than the split count") {
    DatasetManifest m = balanced_manifest(4);  // 2 per class
    CHECK_THROWS_AS(split_dataset(m, {4, 1, 1}, 1), ValidationError);
}

TEST_CASE("splits partition the subject set for random manifest sizes") {
    Rng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 6 + static_cast<int>(rng.bounded(200));
        DatasetManifest m = balanced_manifest(n);
        // Random-ish label pattern while keeping >= 3 per class.
        for (int i = 6; i < n; ++i)
            m.subjects[static_cast<std::size_t>(i)].label =
                rng.bernoulli(0.3) ? RiskLabel::AtRisk : RiskLabel::NonRisk;
        const DatasetManifest out = split_dataset(m, {4, 1, 1}, rng.next_u64());

        std::set<std::string> all;
        std::map<Split, std::set<std::string>> per_split;
        for (const auto& s : out.subjects) {
            REQUIRE(s.split.has_value());
            all.insert(s.subject_id);
            per_split[*s.split].insert(s.subject_id);
        }
        std::size_t total = 0;
        for (const auto& [split, members] : per_split) total += members.size();
        CHECK(total == all.size());  // disjoint (ids unique) and covering
        CHECK(all.size() == out.subjects.size());
    }
}

}  // TEST_SUITE
