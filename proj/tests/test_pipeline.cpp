#include <doctest.h>

#include <nlohmann/json.hpp>

#include "riskpipe/errors.hpp"
#include "riskpipe/hashing.hpp"
#include "riskpipe/manifest.hpp"
#include "riskpipe/pipeline.hpp"
#include "riskpipe/synthetic.hpp"
#include "test_helpers.hpp"

using namespace riskpipe;
using riskpipe::testing::TempDir;
using riskpipe::testing::read_text;
using riskpipe::testing::write_text;
using nlohmann::json;

namespace {

const std::filesystem::path kTemplatesDir = RISKPIPE_TEMPLATES_DIR;

// Shared synthetic corpus + config scaffold for the pipeline tests.
struct Workbench {
    TempDir dir{"pipeline"};

    Workbench() {
        SyntheticSpec spec;
        spec.n_subjects = 48;
        spec.sentences_per_transcript = 8;
        spec.seed = 21;
        generate_synthetic(spec, dir.path() / "corpus");
    }

    ExperimentConfig make_config(const std::string& experiment_id,
                                 const std::string& extra = "") const {
        const std::string text = "experiment_id = " + experiment_id + "\n" +
                                 "[dataset]\n"
                                 "manifest = corpus/manifest.jsonl\n"
                                 "split_seed = 13\n"
                                 "[asr]\n"
                                 "provider = mock\n"
                                 "[extraction]\n"
                                 "templates_dir = " + kTemplatesDir.string() + "\n" +
                                 "[runtime]\n"
                                 "seed = 7\n"
                                 "cache_root = cache\n"
                                 "output_root = runs\n" +
                                 extra;
        return parse_config_text(text, dir.path());
    }
};

double combined_dev_accuracy(const ExperimentRunner& runner) {
    const json doc = json::parse(read_text(runner.metrics_path(Split::Dev)));
    for (const auto& method : doc.at("methods"))
        if (method.contains("combined")) return method.at("combined").at("acc").get<double>();
    FAIL("no combined metrics found");
    return 0.0;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("full synthetic run produces every stage artifact and a sane combined accuracy") {
    Workbench bench;
    ExperimentRunner runner(bench.make_config("smoke"));
    const auto outcomes = runner.run(Stage::All);
    REQUIRE(outcomes.size() == pipeline_stages().size());
    for (const auto& outcome : outcomes) CHECK_FALSE(outcome.skipped);

    CHECK(std::filesystem::exists(runner.ingest_manifest_path()));
    CHECK(std::filesystem::exists(runner.transcripts_path()));
    CHECK(std::filesystem::exists(runner.features_path()));
    for (TaskKind task : {TaskKind::ER, TaskKind::ED}) {
        CHECK(std::filesystem::exists(runner.model_params_path(Stage::TrainText, task)));
        CHECK(std::filesystem::exists(runner.model_params_path(Stage::TrainFusion, task)));
    }
    for (TaskKind task : kAllTasks)
        CHECK(std::filesystem::exists(runner.model_params_path(Stage::TrainSpeech, task)));
    CHECK(std::filesystem::exists(runner.predictions_path(Split::Dev)));
    CHECK(std::filesystem::exists(runner.predictions_path(Split::Test)));
    CHECK(std::filesystem::exists(runner.metrics_path(Split::Dev)));
    CHECK(std::filesystem::exists(runner.run_records_path()));
    CHECK(std::filesystem::exists(runner.stage_dir(Stage::Report) /
                                  "smoke__dev.report.txt"));
    CHECK(std::filesystem::exists(runner.stage_dir(Stage::Report) / "smoke__dev.report.csv"));

    CHECK(combined_dev_accuracy(runner) >= 0.75);

    // The ingested split is 32/8/8 with balanced labels.
    const DatasetManifest m = parse_manifest(runner.ingest_manifest_path());
    CHECK(m.subjects_in(Split::Train).size() == 32);
    CHECK(m.subjects_in(Split::Dev).size() == 8);
    CHECK(m.subjects_in(Split::Test).size() == 8);
}

TEST_CASE("rerunning with unchanged inputs skips every stage") {
    Workbench bench;
    ExperimentRunner runner(bench.make_config("skip"));
    runner.run(Stage::All);
    const auto second = runner.run(Stage::All);
    for (const auto& outcome : second) CHECK(outcome.skipped);

    // Run records carry one completed and one skipped entry per stage.
    int completed = 0, skipped = 0;
    std::istringstream in(read_text(runner.run_records_path()));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json record = json::parse(line);
        CHECK_FALSE(record.at("config_hash").get<std::string>().empty());
        CHECK_FALSE(record.at("input_hash").get<std::string>().empty());
        if (record.at("status") == "completed") ++completed;
        else ++skipped;
    }
    CHECK(completed == static_cast<int>(pipeline_stages().size()));
    CHECK(skipped == static_cast<int>(pipeline_stages().size()));
}

TEST_CASE("deleting a stage's outputs and rerunning reproduces them bit-exactly") {
    Workbench bench;
    ExperimentRunner runner(bench.make_config("isolate"));
    runner.run(Stage::All);

    const std::string predictions_before = read_text(runner.predictions_path(Split::Dev));
    const std::string ingest_hash_before = hash_file_hex(runner.ingest_manifest_path());

    std::filesystem::remove_all(runner.stage_dir(Stage::Predict));
    const auto outcomes = runner.run(Stage::Predict);
    CHECK_FALSE(outcomes.front().skipped);
    CHECK(read_text(runner.predictions_path(Split::Dev)) == predictions_before);
    CHECK(hash_file_hex(runner.ingest_manifest_path()) == ingest_hash_before);
}

TEST_CASE("predict without train_fusion names the missing fusion model") {
    Workbench bench;
    ExperimentRunner runner(bench.make_config("missing"));
    for (Stage stage : {Stage::Ingest, Stage::Transcribe, Stage::Extract, Stage::TrainText,
                        Stage::TrainSpeech, Stage::ExportRepr})
        runner.run(stage);
    CHECK_THROWS_WITH_AS(runner.run(Stage::Predict), doctest::Contains("fusion model"),
                         MissingArtifactError);

    // And a completely fresh experiment reports its first missing input.
    ExperimentRunner fresh(bench.make_config("missing2"));
    CHECK_THROWS_AS(fresh.run(Stage::Predict), MissingArtifactError);
}

TEST_CASE("a changed config refuses to reuse an existing experiment directory") {
    Workbench bench;
    ExperimentRunner first(bench.make_config("mix"));
    first.run(Stage::Ingest);

    ExperimentRunner second(bench.make_config("mix", "[decision]\npolicy = prob_sum\n"));
    CHECK_THROWS_WITH_AS(second.run(Stage::Ingest), doctest::Contains("different configuration"),
                         ValidationError);
}

TEST_CASE("forced reruns recompute byte-identical predictions and reports") {
    Workbench bench;
    ExperimentRunner runner(bench.make_config("determinism"));
    runner.run(Stage::All);
    const std::string predictions = read_text(runner.predictions_path(Split::Dev));
    const std::string report =
        read_text(runner.stage_dir(Stage::Report) / "determinism__dev.report.txt");

    ExperimentRunner forced(bench.make_config("determinism"), /*force=*/true);
    const auto outcomes = forced.run(Stage::All);
    for (const auto& outcome : outcomes) CHECK_FALSE(outcome.skipped);
    CHECK(read_text(runner.predictions_path(Split::Dev)) == predictions);
    CHECK(read_text(runner.stage_dir(Stage::Report) / "determinism__dev.report.txt") == report);
}

TEST_CASE("a subject missing one modality falls back to the other branch, flagged") {
    Workbench bench;
    ExperimentRunner runner(bench.make_config("fallback"));
    runner.run(Stage::All);

    // Drop one dev subject's ER features; downstream stages rerun because
    // their input hashes change, and the subject's ER vote degrades to the
    // speech branch.
    const DatasetManifest m = parse_manifest(runner.ingest_manifest_path());
    const std::string victim = m.subjects_in(Split::Dev).front()->subject_id;
    std::string kept;
    std::istringstream in(read_text(runner.features_path()));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json row = json::parse(line);
        if (row.at("subject_id") == victim && row.at("task") == "ER") continue;
        kept += line + "\n";
    }
    write_text(runner.features_path(), kept);
    runner.run(Stage::All);

    bool found = false;
    std::istringstream logits(read_text(runner.logits_path("fused", Split::Dev)));
    while (std::getline(logits, line)) {
        if (line.empty()) continue;
        const json row = json::parse(line);
        if (row.at("subject_id") == victim && row.at("task") == "ER") {
            found = true;
            CHECK(row.value("fallback", false));
            CHECK(row.at("source_id").get<std::string>().find("mock-speech-bag") !=
                  std::string::npos);
        }
    }
    CHECK(found);

    // The subject still receives a final prediction.
    const auto preds = parse_predictions(read_text(runner.predictions_path(Split::Dev)));
    bool predicted = false;
    for (const auto& p : preds)
        if (p.subject_id == victim) predicted = true;
    CHECK(predicted);
}

TEST_CASE("stage names round-trip") {
    for (Stage stage : pipeline_stages()) CHECK(stage_from_string(to_string(stage)) == stage);
    CHECK(stage_from_string("all") == Stage::All);
    CHECK_THROWS_AS(stage_from_string("bogus"), ValidationError);
}

}  // TEST_SUITE
