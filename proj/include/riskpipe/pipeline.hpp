#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "riskpipe/config.hpp"
#include "riskpipe/lexicon.hpp"

namespace riskpipe {

enum class Stage {
    Ingest,
    Transcribe,
    Extract,
    TrainText,
    TrainSpeech,
    ExportRepr,
    TrainFusion,
    Predict,
    Evaluate,
    Report,
    All,
};

std::string to_string(Stage stage);
Stage stage_from_string(const std::string& s);

// The stages of All, in execution order.
const std::vector<Stage>& pipeline_stages();

struct StageOutcome {
    Stage stage = Stage::Ingest;
    bool skipped = false;
    double duration_ms = 0.0;
};

// Runs stages against output_root/<experiment_id>/<stage>/. Each stage
// verifies its upstream artifacts, hashes its inputs, skips when nothing
// changed (unless forced), and appends an immutable run record. A config
// snapshot guards the experiment directory against mixing runs from
// different configurations.
class ExperimentRunner {
public:
    explicit ExperimentRunner(ExperimentConfig config, bool force = false);

    std::vector<StageOutcome> run(Stage stage);

    const ExperimentConfig& config() const { return config_; }
    const std::filesystem::path& experiment_dir() const { return experiment_dir_; }
    std::filesystem::path stage_dir(Stage stage) const;

    std::filesystem::path ingest_manifest_path() const;
    std::filesystem::path transcripts_path() const;
    std::filesystem::path features_path() const;
    std::filesystem::path model_params_path(Stage stage, TaskKind task) const;
    std::filesystem::path model_meta_path(Stage stage, TaskKind task) const;
    std::filesystem::path representations_dir() const;
    std::filesystem::path predictions_path(Split split) const;
    std::filesystem::path logits_path(const std::string& branch, Split split) const;
    std::filesystem::path metrics_path(Split split) const;
    std::filesystem::path run_records_path() const;

    const MarkerLexicon& lexicon() const { return lexicon_; }
    std::string text_encoder_instance_id() const;

private:
    ExperimentConfig config_;
    bool force_;
    std::filesystem::path experiment_dir_;
    MarkerLexicon lexicon_;
    bool snapshot_checked_ = false;

    void ensure_config_snapshot();
    StageOutcome run_single(Stage stage);

    std::string stage_input_hash(Stage stage);
    std::vector<std::filesystem::path> stage_outputs(Stage stage) const;

    void execute(Stage stage);
    void do_ingest();
    void do_transcribe();
    void do_extract();
    void do_train_text();
    void do_train_speech();
    void do_export_repr();
    void do_train_fusion();
    void do_predict();
    void do_evaluate();
    void do_report();
};

}  // namespace riskpipe
