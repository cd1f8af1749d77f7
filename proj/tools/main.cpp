#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "riskpipe/config.hpp"
#include "riskpipe/errors.hpp"
#include "riskpipe/manifest.hpp"
#include "riskpipe/pipeline.hpp"
#include "riskpipe/synthetic.hpp"

namespace {

int run_stages(const std::string& config_path, riskpipe::Stage stage, bool force) {
    if (config_path.empty()) {
        std::cerr << "error: --config <path> is required\n";
        return 1;
    }
    riskpipe::ExperimentConfig config = riskpipe::load_config(config_path);
    riskpipe::ExperimentRunner runner(std::move(config), force);
    for (const auto& outcome : runner.run(stage)) {
        if (outcome.skipped)
            std::printf("[%s] skipped (inputs unchanged)\n",
                        riskpipe::to_string(outcome.stage).c_str());
        else
            std::printf("[%s] completed in %.0f ms\n",
                        riskpipe::to_string(outcome.stage).c_str(), outcome.duration_ms);
    }
    return 0;
}

int run_validate(const std::string& config_path) {
    if (config_path.empty()) {
        std::cerr << "error: --config <path> is required\n";
        return 1;
    }
    const riskpipe::ExperimentConfig config = riskpipe::load_config(config_path);
    const riskpipe::DatasetManifest manifest = riskpipe::parse_manifest(config.dataset.manifest);
    const riskpipe::ValidationReport report = riskpipe::validate_manifest(manifest);
    if (!report.ok()) {
        for (const auto& v : report.violations)
            std::printf("violation [%s]: %s\n", v.code.c_str(), v.message.c_str());
        return 1;
    }
    std::printf("config ok: experiment %s, %zu subjects, %zu recordings, %zu transcripts\n",
                config.experiment_id.c_str(), manifest.subjects.size(),
                manifest.recordings.size(), manifest.transcripts.size());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"speech+text risk assessment experiment pipeline"};
    app.require_subcommand(0, 1);
    app.fallthrough();  // global flags may follow the subcommand

    std::string config_path;
    std::string stage_name;
    bool force = false;
    app.add_option("--config", config_path, "experiment config file");
    app.add_option("--stage", stage_name, "stage to run when no subcommand is given");
    app.add_flag("--force", force, "re-run stages even when inputs are unchanged");

    // One subcommand per pipeline stage, plus "all".
    std::vector<std::pair<CLI::App*, riskpipe::Stage>> stage_commands;
    for (riskpipe::Stage stage : riskpipe::pipeline_stages()) {
        CLI::App* sub = app.add_subcommand(riskpipe::to_string(stage),
                                           "run the " + riskpipe::to_string(stage) + " stage");
        stage_commands.emplace_back(sub, stage);
    }
    stage_commands.emplace_back(app.add_subcommand("all", "run every stage in order"),
                                riskpipe::Stage::All);

    CLI::App* validate = app.add_subcommand("validate", "check the config and its manifest");

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic corpus");
    std::string synth_out;
    riskpipe::SyntheticSpec spec;
    std::string lexicon_path;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--subjects", spec.n_subjects, "number of subjects");
    synth->add_option("--balance", spec.label_balance, "fraction of at-risk subjects");
    synth->add_option("--p-at-risk", spec.p_marker_at_risk,
                      "per-sentence marker probability, at-risk");
    synth->add_option("--p-non-risk", spec.p_marker_non_risk,
                      "per-sentence marker probability, non-risk");
    synth->add_option("--sentences", spec.sentences_per_transcript,
                      "sentences per ER/ED transcript");
    synth->add_option("--tokens", spec.tokens_per_recording, "acoustic tokens per recording");
    synth->add_option("--seed", spec.seed, "generation seed");
    synth->add_option("--lexicon", lexicon_path, "marker lexicon JSON (default: built-in)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            if (!lexicon_path.empty()) spec.lexicon = riskpipe::MarkerLexicon::load(lexicon_path);
            const riskpipe::DatasetManifest manifest =
                riskpipe::generate_synthetic(spec, synth_out);
            std::printf("wrote %zu subjects, %zu recordings to %s\n", manifest.subjects.size(),
                        manifest.recordings.size(), synth_out.c_str());
            return 0;
        }
        if (validate->parsed()) return run_validate(config_path);
        for (const auto& [sub, stage] : stage_commands)
            if (sub->parsed()) return run_stages(config_path, stage, force);
        if (!stage_name.empty())
            return run_stages(config_path, riskpipe::stage_from_string(stage_name), force);
        std::cerr << app.help();
        return 1;
    } catch (const riskpipe::MissingArtifactError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const riskpipe::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
