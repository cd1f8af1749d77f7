#include <doctest.h>

#include "riskpipe/asr.hpp"
#include "riskpipe/errors.hpp"
#include "test_helpers.hpp"

using namespace riskpipe;
using riskpipe::testing::TempDir;
using riskpipe::testing::write_text;

namespace {

RecordingRef make_recording(const std::string& id, TaskKind task, const std::string& uri) {
    RecordingRef r;
    r.subject_id = id;
    r.task = task;
    r.audio_uri = uri;
    return r;
}

DatasetManifest manifest_with_recordings(const TempDir& dir, int n,
                                         const std::string& text = "hello there") {
    DatasetManifest m;
    for (int i = 0; i < n; ++i) {
        const std::string id = "S" + std::to_string(100 + i);
        SubjectRecord s;
        s.subject_id = id;
        s.label = RiskLabel::NonRisk;
        m.subjects.push_back(s);
        const std::string stem = id + "__ER";
        write_text(dir.path() / "audio" / (stem + ".tok"), "steady clear\n");
        write_text(dir.path() / "audio" / (stem + ".txt"), text);
        m.recordings.push_back(
            make_recording(id, TaskKind::ER, (dir.path() / "audio" / (stem + ".tok")).string()));
    }
    return m;
}

RetryPolicy fast_retry() {
    return RetryPolicy{3, std::chrono::milliseconds(1)};
}

}  // namespace

TEST_SUITE("asr") {

TEST_CASE("file provider returns the sibling transcript verbatim") {
    TempDir dir("asr_file");
    write_text(dir.path() / "a.tok", "tok tok\n");
    write_text(dir.path() / "a.txt", "exact transcript contents");

    AsrGateway gateway(dir.path() / "cache", fast_retry());
    gateway.register_provider("file", std::make_shared<FileAsrProvider>());
    const Transcript t = gateway.transcribe(
        make_recording("S001", TaskKind::ER, (dir.path() / "a.tok").string()), {"file", {}});
    CHECK(t.text == "exact transcript contents");
    CHECK(t.language == "zh");
    CHECK(t.provider_id == "file");
}

TEST_CASE("file provider reports a missing transcript file") {
    TempDir dir("asr_missing");
    write_text(dir.path() / "a.tok", "tok\n");
    AsrGateway gateway(dir.path() / "cache", fast_retry());
    gateway.register_provider("file", std::make_shared<FileAsrProvider>());
    CHECK_THROWS_WITH_AS(
        gateway.transcribe(make_recording("S001", TaskKind::ER, (dir.path() / "a.tok").string()),
                           {"file", {}}),
        doctest::Contains("missing transcript file"), ProviderError);
}

TEST_CASE("second transcribe call hits the cache with zero provider invocations") {
    TempDir dir("asr_cache");
    auto mock = std::make_shared<MockAsrProvider>("fixed text T");
    AsrGateway gateway(dir.path() / "cache", fast_retry());
    gateway.register_provider("mock", mock);

    const auto rec = make_recording("S001", TaskKind::ER, (dir.path() / "a.tok").string());
    const Transcript first = gateway.transcribe(rec, {"mock", {}});
    CHECK(first.text == "fixed text T");
    CHECK(mock->calls() == 1);

    const Transcript second = gateway.transcribe(rec, {"mock", {}});
    CHECK(second.text == first.text);
    CHECK(mock->calls() == 1);

    // Cache entry is inspectable and carries the composed key.
    const auto entry = gateway.cached_entry("mock", "S001", TaskKind::ER);
    REQUIRE(entry.has_value());
    CHECK(entry->key == "mock/S001/ER");
    CHECK(entry->transcript.text == "fixed text T");
}

TEST_CASE("mock provider returns its configured text for any recording") {
    TempDir dir("asr_mock");
    auto mock = std::make_shared<MockAsrProvider>("T");
    AsrGateway gateway(dir.path() / "cache", fast_retry());
    gateway.register_provider("mock", mock);
    for (int i = 0; i < 3; ++i) {
        const auto rec =
            make_recording("S" + std::to_string(i), TaskKind::ED, "whatever_" + std::to_string(i));
        CHECK(gateway.transcribe(rec, {"mock", {}}).text == "T");
    }
}

TEST_CASE("cache keys separate providers") {
    TempDir dir("asr_providers");
    auto a = std::make_shared<MockAsrProvider>("from A");
    auto b = std::make_shared<MockAsrProvider>("from B");
    AsrGateway gateway(dir.path() / "cache", fast_retry());
    gateway.register_provider("prov-a", a);
    gateway.register_provider("prov-b", b);

    const auto rec = make_recording("S001", TaskKind::ER, "x");
    CHECK(gateway.transcribe(rec, {"prov-a", {}}).text == "from A");
    CHECK(gateway.transcribe(rec, {"prov-b", {}}).text == "from B");
    CHECK(gateway.transcribe(rec, {"prov-a", {}}).text == "from A");
    CHECK(a->calls() == 1);
    CHECK(b->calls() == 1);
}

TEST_CASE("empty provider output is an error for ER but allowed for PR") {
    TempDir dir("asr_empty");
    auto mock = std::make_shared<MockAsrProvider>();  // no fixed text, reads sibling
    AsrGateway gateway(dir.path() / "cache", fast_retry());
    gateway.register_provider("mock", mock);
    write_text(dir.path() / "er.tok", "t\n");
    write_text(dir.path() / "er.txt", "");
    write_text(dir.path() / "pr.tok", "t\n");
    write_text(dir.path() / "pr.txt", "");

    CHECK_THROWS_WITH_AS(
        gateway.transcribe(make_recording("S1", TaskKind::ER, (dir.path() / "er.tok").string()),
                           {"mock", {}}),
        doctest::Contains("empty transcription"), ProviderError);
    const Transcript pr = gateway.transcribe(
        make_recording("S1", TaskKind::PR, (dir.path() / "pr.tok").string()), {"mock", {}});
    CHECK(pr.text.empty());
}

TEST_CASE("retryable failures are retried with backoff until success") {
    TempDir dir("asr_retry");
    auto mock = std::make_shared<MockAsrProvider>("ok");
    mock->fail_next(2, /*retryable=*/true);
    AsrGateway gateway(dir.path() / "cache", fast_retry());
    gateway.register_provider("mock", mock);
    const Transcript t =
        gateway.transcribe(make_recording("S1", TaskKind::ER, "x"), {"mock", {}});
    CHECK(t.text == "ok");
    CHECK(mock->calls() == 3);
}

TEST_CASE("retries stop after max attempts and non-retryable errors fail fast") {
    TempDir dir("asr_retry_fail");
    auto mock = std::make_shared<MockAsrProvider>("ok");
    mock->fail_next(3, /*retryable=*/true);
    AsrGateway gateway(dir.path() / "cache", fast_retry());
    gateway.register_provider("mock", mock);
    CHECK_THROWS_AS(gateway.transcribe(make_recording("S1", TaskKind::ER, "x"), {"mock", {}}),
                    RetryableProviderError);
    CHECK(mock->calls() == 3);

    mock->fail_next(1, /*retryable=*/false);
    CHECK_THROWS_AS(gateway.transcribe(make_recording("S2", TaskKind::ER, "x"), {"mock", {}}),
                    ProviderError);
    CHECK(mock->calls() == 4);
}

TEST_CASE("batch_transcribe on a warm cache performs zero provider invocations") {
    TempDir dir("asr_batch_warm");
    auto mock = std::make_shared<MockAsrProvider>("T");
    AsrGateway gateway(dir.path() / "cache", fast_retry());
    gateway.register_provider("mock", mock);
    const DatasetManifest m = manifest_with_recordings(dir, 6);

    const BatchAsrResult first = gateway.batch_transcribe(m, {"mock", {}}, 2);
    CHECK(first.transcripts.size() == 6);
    CHECK(mock->calls() == 6);

    const BatchAsrResult second = gateway.batch_transcribe(m, {"mock", {}}, 2);
    CHECK(second.transcripts.size() == 6);
    CHECK(second.failures.empty());
    CHECK(mock->calls() == 6);
    for (std::size_t i = 0; i < 6; ++i) CHECK(second.transcripts[i].text == "T");
}

TEST_CASE("batch_transcribe bounds in-flight provider calls") {
    TempDir dir("asr_batch_limit");
    auto mock = std::make_shared<MockAsrProvider>("T", std::chrono::milliseconds(4));
    AsrGateway gateway(dir.path() / "cache", fast_retry());
    gateway.register_provider("mock", mock);
    const DatasetManifest m = manifest_with_recordings(dir, 10);

    gateway.batch_transcribe(m, {"mock", {}}, 3);
    CHECK(mock->calls() == 10);
    CHECK(mock->max_in_flight() <= 3);
    CHECK(mock->max_in_flight() >= 1);
}

TEST_CASE("batch_transcribe collects partial failures without aborting") {
    TempDir dir("asr_batch_fail");
    auto mock = std::make_shared<MockAsrProvider>("T");
    mock->fail_next(1, /*retryable=*/false);
    AsrGateway gateway(dir.path() / "cache", fast_retry());
    gateway.register_provider("mock", mock);
    const DatasetManifest m = manifest_with_recordings(dir, 10);

    const BatchAsrResult result = gateway.batch_transcribe(m, {"mock", {}}, 1);
    CHECK(result.transcripts.size() == 9);
    REQUIRE(result.failures.size() == 1);
    CHECK(result.failures[0].subject_id == "S100");

    // Output order matches manifest order for the surviving items.
    for (std::size_t i = 0; i < result.transcripts.size(); ++i)
        CHECK(result.transcripts[i].subject_id == "S" + std::to_string(101 + i));
}

TEST_CASE("batch_transcribe throws when every item fails") {
    TempDir dir("asr_batch_allfail");
    AsrGateway gateway(dir.path() / "cache", fast_retry());
    gateway.register_provider("file", std::make_shared<FileAsrProvider>());
    DatasetManifest m;
    m.recordings.push_back(make_recording("S1", TaskKind::ER, "nope.tok"));
    m.recordings.push_back(make_recording("S2", TaskKind::ER, "alsonope.tok"));
    CHECK_THROWS_AS(gateway.batch_transcribe(m, {"file", {}}, 2), Error);
}

TEST_CASE("unregistered provider and bad concurrency are rejected") {
    TempDir dir("asr_reject");
    AsrGateway gateway(dir.path() / "cache", fast_retry());
    CHECK_THROWS_AS(gateway.transcribe(make_recording("S1", TaskKind::ER, "x"), {"ghost", {}}),
                    ProviderError);
    gateway.register_provider("mock", std::make_shared<MockAsrProvider>("T"));
    DatasetManifest m;
    CHECK_THROWS_AS(gateway.batch_transcribe(m, {"mock", {}}, 0), ValidationError);
}

TEST_CASE("built-in provider factory knows file and mock") {
    CHECK(make_builtin_asr_provider({"file", {}}) != nullptr);
    CHECK(make_builtin_asr_provider({"mock", {{"text", "T"}}}) != nullptr);
    CHECK_THROWS_AS(make_builtin_asr_provider({"paraformer", {}}), ProviderError);
}

}  // TEST_SUITE
