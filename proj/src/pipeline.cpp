#include "riskpipe/pipeline.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "riskpipe/asr.hpp"
#include "riskpipe/encoder.hpp"
#include "riskpipe/errors.hpp"
#include "riskpipe/extraction.hpp"
#include "riskpipe/fusion.hpp"
#include "riskpipe/hashing.hpp"
#include "riskpipe/manifest.hpp"
#include "riskpipe/metrics.hpp"
#include "riskpipe/training.hpp"

namespace riskpipe {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Stage stage) {
    switch (stage) {
        case Stage::Ingest: return "ingest";
        case Stage::Transcribe: return "transcribe";
        case Stage::Extract: return "extract";
        case Stage::TrainText: return "train_text";
        case Stage::TrainSpeech: return "train_speech";
        case Stage::ExportRepr: return "export_repr";
        case Stage::TrainFusion: return "train_fusion";
        case Stage::Predict: return "predict";
        case Stage::Evaluate: return "evaluate";
        case Stage::Report: return "report";
        case Stage::All: return "all";
    }
    throw Error("invalid Stage");
}

Stage stage_from_string(const std::string& s) {
    for (Stage stage : pipeline_stages())
        if (to_string(stage) == s) return stage;
    if (s == "all") return Stage::All;
    throw ValidationError("unknown stage: " + s);
}

const std::vector<Stage>& pipeline_stages() {
    static const std::vector<Stage> kStages = {
        Stage::Ingest,     Stage::Transcribe,  Stage::Extract, Stage::TrainText,
        Stage::TrainSpeech, Stage::ExportRepr, Stage::TrainFusion, Stage::Predict,
        Stage::Evaluate,   Stage::Report,
    };
    return kStages;
}

namespace {

constexpr TaskKind kTextTasks[] = {TaskKind::ER, TaskKind::ED};

std::string iso_utc_now() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

void require_file(const fs::path& path, const std::string& what) {
    if (!fs::is_regular_file(path))
        throw MissingArtifactError("missing " + what + ": " + path.string() +
                                   " (run the upstream stage first)");
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << content;
}

std::uint64_t hash_files(const std::vector<fs::path>& files, std::uint64_t seed_hash) {
    std::uint64_t h = seed_hash;
    for (const auto& f : files) h = fnv1a64(read_file(f), h);
    return h;
}

// --- stage artifact row formats -----------------------------------------

json transcript_to_json(const Transcript& t) {
    return {{"subject_id", t.subject_id}, {"task", to_string(t.task)},
            {"language", t.language},     {"text", t.text},
            {"provider_id", t.provider_id}};
}

Transcript transcript_from_json(const json& row) {
    Transcript t;
    t.subject_id = row.at("subject_id").get<std::string>();
    t.task = task_from_string(row.at("task").get<std::string>());
    t.language = row.at("language").get<std::string>();
    t.text = row.at("text").get<std::string>();
    t.provider_id = row.at("provider_id").get<std::string>();
    return t;
}

json feature_to_json(const RiskFeatureText& f) {
    return {{"subject_id", f.subject_id},   {"task", to_string(f.task)},
            {"language", f.language},       {"text", f.text},
            {"provider_id", f.provider_id}, {"prompt_version", f.prompt_version}};
}

RiskFeatureText feature_from_json(const json& row) {
    RiskFeatureText f;
    f.subject_id = row.at("subject_id").get<std::string>();
    f.task = task_from_string(row.at("task").get<std::string>());
    f.language = row.at("language").get<std::string>();
    f.text = row.at("text").get<std::string>();
    f.provider_id = row.at("provider_id").get<std::string>();
    f.prompt_version = row.at("prompt_version").get<std::string>();
    return f;
}

json logits_to_json(const Logits& l, bool fallback) {
    json row = {{"subject_id", l.subject_id}, {"task", to_string(l.task)},
                {"source_id", l.source_id},   {"v0", l.values[0]},
                {"v1", l.values[1]}};
    if (fallback) row["fallback"] = true;
    return row;
}

Logits logits_from_json(const json& row) {
    Logits l;
    l.subject_id = row.at("subject_id").get<std::string>();
    l.task = task_from_string(row.at("task").get<std::string>());
    l.source_id = row.at("source_id").get<std::string>();
    l.values[0] = row.at("v0").get<double>();
    l.values[1] = row.at("v1").get<double>();
    return l;
}

template <typename T, typename FromJson>
std::vector<T> read_jsonl(const fs::path& path, FromJson from_json) {
    std::vector<T> out;
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(from_json(json::parse(line)));
    }
    return out;
}

std::map<std::string, RiskLabel> label_map(const DatasetManifest& manifest) {
    std::map<std::string, RiskLabel> labels;
    for (const auto& s : manifest.subjects) labels[s.subject_id] = s.label;
    return labels;
}

}  // namespace

ExperimentRunner::ExperimentRunner(ExperimentConfig config, bool force)
    : config_(std::move(config)), force_(force) {
    experiment_dir_ = config_.runtime.output_root / config_.experiment_id;
    lexicon_ = config_.extraction.lexicon.empty() ? MarkerLexicon::builtin_default()
                                                  : MarkerLexicon::load(config_.extraction.lexicon);
}

fs::path ExperimentRunner::stage_dir(Stage stage) const {
    return experiment_dir_ / to_string(stage);
}

fs::path ExperimentRunner::ingest_manifest_path() const {
    return stage_dir(Stage::Ingest) / "manifest.jsonl";
}
fs::path ExperimentRunner::transcripts_path() const {
    return stage_dir(Stage::Transcribe) / "transcripts.jsonl";
}
fs::path ExperimentRunner::features_path() const {
    return stage_dir(Stage::Extract) / "features.jsonl";
}
fs::path ExperimentRunner::model_params_path(Stage stage, TaskKind task) const {
    return stage_dir(stage) / to_string(task) / "model.bin";
}
fs::path ExperimentRunner::model_meta_path(Stage stage, TaskKind task) const {
    return stage_dir(stage) / to_string(task) / "model.json";
}
fs::path ExperimentRunner::representations_dir() const { return stage_dir(Stage::ExportRepr); }
fs::path ExperimentRunner::predictions_path(Split split) const {
    return stage_dir(Stage::Predict) / ("predictions_" + to_string(split) + ".csv");
}
fs::path ExperimentRunner::logits_path(const std::string& branch, Split split) const {
    return stage_dir(Stage::Predict) / ("logits_" + branch + "_" + to_string(split) + ".jsonl");
}
fs::path ExperimentRunner::metrics_path(Split split) const {
    return stage_dir(Stage::Evaluate) / ("metrics_" + to_string(split) + ".json");
}
fs::path ExperimentRunner::run_records_path() const {
    return experiment_dir_ / "run_records.jsonl";
}

std::string ExperimentRunner::text_encoder_instance_id() const {
    if (config_.text_model.encoder_id == "mock-text-bag")
        return "mock-text-bag-" + config_.text_model.feature_language;
    return config_.text_model.encoder_id;
}

void ExperimentRunner::ensure_config_snapshot() {
    if (snapshot_checked_) return;
    const fs::path snapshot = experiment_dir_ / "config.resolved.txt";
    const std::string canonical = config_.canonical_string();
    if (fs::exists(snapshot)) {
        if (read_file(snapshot) != canonical)
            throw ValidationError(
                "experiment directory " + experiment_dir_.string() +
                " was produced by a different configuration; refusing to mix outputs "
                "(use a new experiment_id or output_root)");
    } else {
        write_file(snapshot, canonical);
    }
    snapshot_checked_ = true;
}

std::vector<StageOutcome> ExperimentRunner::run(Stage stage) {
    std::vector<StageOutcome> outcomes;
    if (stage == Stage::All) {
        for (Stage s : pipeline_stages()) outcomes.push_back(run_single(s));
    } else {
        outcomes.push_back(run_single(stage));
    }
    return outcomes;
}

StageOutcome ExperimentRunner::run_single(Stage stage) {
    ensure_config_snapshot();

    const auto started = std::chrono::steady_clock::now();
    const std::string started_at = iso_utc_now();
    const std::string input_hash = stage_input_hash(stage);

    StageOutcome outcome;
    outcome.stage = stage;

    const fs::path stamp_path = stage_dir(stage) / ".stamp.json";
    bool skip = false;
    if (!force_ && fs::exists(stamp_path)) {
        try {
            const json stamp = json::parse(read_file(stamp_path));
            skip = stamp.at("input_hash").get<std::string>() == input_hash;
        } catch (const std::exception&) {
            skip = false;
        }
        if (skip) {
            for (const auto& out : stage_outputs(stage))
                if (!fs::exists(out)) skip = false;
        }
    }

    if (!skip) {
        execute(stage);
        json stamp;
        stamp["stage"] = to_string(stage);
        stamp["input_hash"] = input_hash;
        write_file(stamp_path, stamp.dump(2) + "\n");
    }

    outcome.skipped = skip;
    outcome.duration_ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - started)
                              .count();

    json record;
    record["stage"] = to_string(stage);
    record["status"] = skip ? "skipped" : "completed";
    record["started_at"] = started_at;
    record["duration_ms"] = outcome.duration_ms;
    record["config_hash"] = hash_hex(config_.config_hash());
    record["input_hash"] = input_hash;
    json outputs = json::array();
    for (const auto& out : stage_outputs(stage))
        if (fs::exists(out)) outputs.push_back({{"path", out.string()},
                                                {"hash", hash_file_hex(out)}});
    record["outputs"] = outputs;
    fs::create_directories(experiment_dir_);
    std::ofstream log(run_records_path(), std::ios::binary | std::ios::app);
    if (!log) throw Error("cannot append run record: " + run_records_path().string());
    log << record.dump() << "\n";

    return outcome;
}

std::string ExperimentRunner::stage_input_hash(Stage stage) {
    std::vector<fs::path> files;
    auto need = [&](const fs::path& p, const std::string& what) {
        require_file(p, what);
        files.push_back(p);
    };

    switch (stage) {
        case Stage::Ingest:
            require_file(config_.dataset.manifest, "dataset manifest");
            files.push_back(config_.dataset.manifest);
            break;
        case Stage::Transcribe:
            need(ingest_manifest_path(), "ingested manifest");
            break;
        case Stage::Extract: {
            need(transcripts_path(), "transcripts");
            for (TaskKind task : kTextTasks)
                for (const auto& language : config_.extraction.languages)
                    need(config_.extraction.templates_dir / config_.extraction.prompt_version /
                             (to_string(task) + "_" + language + ".txt"),
                         "prompt template");
            if (!config_.extraction.lexicon.empty())
                need(config_.extraction.lexicon, "marker lexicon");
            break;
        }
        case Stage::TrainText:
            need(ingest_manifest_path(), "ingested manifest");
            need(features_path(), "risk features");
            break;
        case Stage::TrainSpeech: {
            need(ingest_manifest_path(), "ingested manifest");
            const DatasetManifest manifest = parse_manifest(ingest_manifest_path());
            for (const auto& r : manifest.recordings)
                need(fs::path(r.audio_uri), "audio for " + r.subject_id);
            break;
        }
        case Stage::ExportRepr: {
            need(ingest_manifest_path(), "ingested manifest");
            need(features_path(), "risk features");
            const DatasetManifest manifest = parse_manifest(ingest_manifest_path());
            for (const auto& r : manifest.recordings)
                need(fs::path(r.audio_uri), "audio for " + r.subject_id);
            break;
        }
        case Stage::TrainFusion: {
            need(ingest_manifest_path(), "ingested manifest");
            const std::string text_id = text_encoder_instance_id();
            for (TaskKind task : kTextTasks) {
                for (Split split : {Split::Train, Split::Dev}) {
                    need(representation_data_file(representations_dir(), text_id, task, split),
                         "text representations");
                    need(representation_data_file(representations_dir(), "mock-speech-bag", task,
                                                  split),
                         "speech representations");
                }
            }
            break;
        }
        case Stage::Predict: {
            need(ingest_manifest_path(), "ingested manifest");
            for (TaskKind task : kTextTasks) {
                need(model_params_path(Stage::TrainText, task), "text model");
                need(model_params_path(Stage::TrainFusion, task), "fusion model");
            }
            for (TaskKind task : kAllTasks)
                need(model_params_path(Stage::TrainSpeech, task), "speech model");
            // Prediction consumes the evaluation-split representations, so
            // they participate in the change detection.
            const DatasetManifest manifest = parse_manifest(ingest_manifest_path());
            const std::string text_id = text_encoder_instance_id();
            for (Split split : {Split::Dev, Split::Test}) {
                if (manifest.subjects_in(split).empty()) continue;
                for (TaskKind task : kTextTasks) {
                    need(representation_data_file(representations_dir(), text_id, task, split),
                         "text representations");
                    need(representation_index_file(representations_dir(), text_id, task, split),
                         "text representation index");
                }
                for (TaskKind task : kAllTasks) {
                    need(representation_data_file(representations_dir(), "mock-speech-bag", task,
                                                  split),
                         "speech representations");
                    need(representation_index_file(representations_dir(), "mock-speech-bag",
                                                   task, split),
                         "speech representation index");
                }
            }
            break;
        }
        case Stage::Evaluate: {
            need(ingest_manifest_path(), "ingested manifest");
            const DatasetManifest manifest = parse_manifest(ingest_manifest_path());
            for (Split split : {Split::Dev, Split::Test}) {
                if (manifest.subjects_in(split).empty()) continue;
                need(predictions_path(split), "predictions");
                need(logits_path("text", split), "text logits");
                need(logits_path("speech", split), "speech logits");
                need(logits_path("fused", split), "fused logits");
            }
            break;
        }
        case Stage::Report: {
            need(ingest_manifest_path(), "ingested manifest");
            const DatasetManifest manifest = parse_manifest(ingest_manifest_path());
            for (Split split : {Split::Dev, Split::Test}) {
                if (manifest.subjects_in(split).empty()) continue;
                need(metrics_path(split), "metrics");
            }
            break;
        }
        case Stage::All:
            throw Error("stage_input_hash called with All");
    }
    return hash_hex(hash_files(files, config_.config_hash()));
}

std::vector<fs::path> ExperimentRunner::stage_outputs(Stage stage) const {
    std::vector<fs::path> outputs;
    switch (stage) {
        case Stage::Ingest:
            outputs.push_back(ingest_manifest_path());
            break;
        case Stage::Transcribe:
            outputs.push_back(transcripts_path());
            break;
        case Stage::Extract:
            outputs.push_back(features_path());
            break;
        case Stage::TrainText:
            for (TaskKind task : kTextTasks) {
                outputs.push_back(model_params_path(Stage::TrainText, task));
                outputs.push_back(model_meta_path(Stage::TrainText, task));
            }
            break;
        case Stage::TrainSpeech:
            for (TaskKind task : kAllTasks) {
                outputs.push_back(model_params_path(Stage::TrainSpeech, task));
                outputs.push_back(model_meta_path(Stage::TrainSpeech, task));
            }
            break;
        case Stage::ExportRepr: {
            const std::string text_id = text_encoder_instance_id();
            for (Split split : kAllSplits) {
                for (TaskKind task : kTextTasks)
                    outputs.push_back(
                        representation_data_file(representations_dir(), text_id, task, split));
                for (TaskKind task : kAllTasks)
                    outputs.push_back(representation_data_file(representations_dir(),
                                                               "mock-speech-bag", task, split));
            }
            break;
        }
        case Stage::TrainFusion:
            for (TaskKind task : kTextTasks) {
                outputs.push_back(model_params_path(Stage::TrainFusion, task));
                outputs.push_back(model_meta_path(Stage::TrainFusion, task));
            }
            break;
        case Stage::Predict:
        case Stage::Evaluate:
        case Stage::Report:
            // Split-dependent; existence is checked inside the stage.
            break;
        case Stage::All:
            break;
    }
    return outputs;
}

void ExperimentRunner::execute(Stage stage) {
    switch (stage) {
        case Stage::Ingest: do_ingest(); return;
        case Stage::Transcribe: do_transcribe(); return;
        case Stage::Extract: do_extract(); return;
        case Stage::TrainText: do_train_text(); return;
        case Stage::TrainSpeech: do_train_speech(); return;
        case Stage::ExportRepr: do_export_repr(); return;
        case Stage::TrainFusion: do_train_fusion(); return;
        case Stage::Predict: do_predict(); return;
        case Stage::Evaluate: do_evaluate(); return;
        case Stage::Report: do_report(); return;
        case Stage::All: throw Error("execute called with All");
    }
}

void ExperimentRunner::do_ingest() {
    DatasetManifest manifest = parse_manifest(config_.dataset.manifest);
    const fs::path base_dir = fs::absolute(config_.dataset.manifest).parent_path();
    for (auto& r : manifest.recordings) {
        const fs::path uri(r.audio_uri);
        if (!uri.is_absolute()) r.audio_uri = (base_dir / uri).string();
    }
    manifest = split_dataset(manifest, config_.dataset.split_ratios, config_.dataset.split_seed);

    const ValidationReport report = validate_manifest(manifest);
    if (!report.ok()) {
        std::string msg = "ingest: manifest invalid:";
        for (const auto& v : report.violations) msg += "\n  - " + v.message;
        throw ValidationError(msg);
    }
    fs::create_directories(stage_dir(Stage::Ingest));
    write_manifest(manifest, ingest_manifest_path());
}

void ExperimentRunner::do_transcribe() {
    const DatasetManifest manifest = parse_manifest(ingest_manifest_path());

    AsrProviderDescriptor descriptor{config_.asr.provider_id, config_.asr.provider_config};
    RetryPolicy retry{config_.asr.retry_attempts,
                      std::chrono::milliseconds(config_.asr.retry_backoff_ms)};
    AsrGateway gateway(config_.runtime.cache_root, retry);
    gateway.register_provider(descriptor.provider_id, make_builtin_asr_provider(descriptor));

    // Transcripts already present in the manifest are kept as-is; only the
    // remaining recordings go to the provider.
    DatasetManifest pending = manifest;
    pending.recordings.clear();
    for (const auto& r : manifest.recordings)
        if (!manifest.find_transcript(r.subject_id, r.task)) pending.recordings.push_back(r);

    const BatchAsrResult batch =
        gateway.batch_transcribe(pending, descriptor, config_.asr.concurrency);

    std::string rows;
    std::size_t fresh = 0;
    for (const auto& r : manifest.recordings) {
        if (const Transcript* given = manifest.find_transcript(r.subject_id, r.task)) {
            rows += transcript_to_json(*given).dump() + "\n";
        } else if (fresh < batch.transcripts.size() &&
                   batch.transcripts[fresh].subject_id == r.subject_id &&
                   batch.transcripts[fresh].task == r.task) {
            rows += transcript_to_json(batch.transcripts[fresh]).dump() + "\n";
            ++fresh;
        }
    }
    write_file(transcripts_path(), rows);

    json failures = json::array();
    for (const auto& f : batch.failures)
        failures.push_back(
            {{"subject_id", f.subject_id}, {"task", to_string(f.task)}, {"error", f.error}});
    write_file(stage_dir(Stage::Transcribe) / "failures.json", failures.dump(2) + "\n");
}

void ExperimentRunner::do_extract() {
    const auto transcripts = read_jsonl<Transcript>(transcripts_path(), transcript_from_json);

    std::vector<Transcript> eligible;
    for (const auto& t : transcripts)
        if (t.task != TaskKind::PR) eligible.push_back(t);

    PromptTemplateStore templates =
        PromptTemplateStore::load(config_.extraction.templates_dir,
                                  config_.extraction.prompt_version);
    ExtractionProviderDescriptor descriptor{config_.extraction.provider_id,
                                            config_.extraction.provider_config};
    RetryPolicy retry{config_.extraction.retry_attempts,
                      std::chrono::milliseconds(config_.extraction.retry_backoff_ms)};
    ExtractionGateway gateway(config_.runtime.cache_root, std::move(templates), retry);
    gateway.register_provider(descriptor.provider_id,
                              make_builtin_extraction_provider(descriptor, lexicon_));

    const BatchExtractionResult batch = gateway.batch_extract(
        eligible, config_.extraction.languages, descriptor, config_.extraction.concurrency);

    std::string rows;
    for (const auto& f : batch.features) rows += feature_to_json(f).dump() + "\n";
    write_file(features_path(), rows);

    json failures = json::array();
    for (const auto& f : batch.failures)
        failures.push_back({{"subject_id", f.subject_id},
                            {"task", to_string(f.task)},
                            {"language", f.language},
                            {"error", f.error}});
    write_file(stage_dir(Stage::Extract) / "failures.json", failures.dump(2) + "\n");
}

namespace {

std::shared_ptr<Encoder> resolve_text_encoder(const ExperimentConfig& config,
                                              const MarkerLexicon& lexicon) {
    if (config.text_model.encoder_id == "mock-text-bag")
        return make_mock_text_encoder(lexicon, config.text_model.feature_language);
    throw ValidationError("unknown text encoder \"" + config.text_model.encoder_id +
                          "\"; pretrained checkpoints load through an encoder plugin");
}

std::shared_ptr<Encoder> resolve_speech_encoder(const ExperimentConfig& config,
                                                const MarkerLexicon& lexicon) {
    if (config.speech_model.encoder_id == "mock-speech-bag")
        return make_mock_speech_encoder(lexicon);
    throw ValidationError("unknown speech encoder \"" + config.speech_model.encoder_id +
                          "\"; pretrained checkpoints load through an encoder plugin");
}

Hyperparams hyperparams_for(const ModelConfig& model, std::uint64_t stage_seed) {
    Hyperparams hp;
    hp.epochs = model.epochs;
    hp.learning_rate = model.learning_rate;
    hp.batch_size = model.batch_size;
    hp.seed = stage_seed;
    return hp;
}

}  // namespace

void ExperimentRunner::do_train_text() {
    const DatasetManifest manifest = parse_manifest(ingest_manifest_path());
    const auto features = read_jsonl<RiskFeatureText>(features_path(), feature_from_json);
    auto encoder = resolve_text_encoder(config_, lexicon_);

    for (TaskKind task : kTextTasks) {
        std::map<std::string, const RiskFeatureText*> by_subject;
        for (const auto& f : features)
            if (f.task == task && f.language == config_.text_model.feature_language)
                by_subject[f.subject_id] = &f;

        auto collect = [&](Split split) {
            std::vector<LabeledInput> items;
            for (const SubjectRecord* s : manifest.subjects_in(split)) {
                auto it = by_subject.find(s->subject_id);
                if (it == by_subject.end()) continue;  // missing feature: explicit gap
                items.push_back(
                    {s->subject_id, EncoderInput::from_text(it->second->text), s->label});
            }
            return items;
        };

        const Hyperparams hp = hyperparams_for(
            config_.text_model,
            derive_seed(config_.runtime.seed, "train_text:" + to_string(task)));
        ClassifierHeadConfig head_config;
        head_config.input_dim = encoder->descriptor().repr_dim;

        const TrainedModel model = train_classifier(collect(Split::Train), collect(Split::Dev),
                                                    *encoder, head_config, hp, task);
        save_model(model, model_params_path(Stage::TrainText, task),
                   model_meta_path(Stage::TrainText, task));
    }
}

void ExperimentRunner::do_train_speech() {
    const DatasetManifest manifest = parse_manifest(ingest_manifest_path());
    auto encoder = resolve_speech_encoder(config_, lexicon_);

    for (TaskKind task : kAllTasks) {
        auto collect = [&](Split split) {
            std::vector<LabeledInput> items;
            for (const SubjectRecord* s : manifest.subjects_in(split)) {
                const RecordingRef* r = manifest.find_recording(s->subject_id, task);
                if (!r) continue;
                items.push_back(
                    {s->subject_id, EncoderInput::from_audio(r->audio_uri), s->label});
            }
            return items;
        };

        const Hyperparams hp = hyperparams_for(
            config_.speech_model,
            derive_seed(config_.runtime.seed, "train_speech:" + to_string(task)));
        ClassifierHeadConfig head_config;
        head_config.input_dim = encoder->descriptor().repr_dim;

        const TrainedModel model = train_classifier(collect(Split::Train), collect(Split::Dev),
                                                    *encoder, head_config, hp, task);
        save_model(model, model_params_path(Stage::TrainSpeech, task),
                   model_meta_path(Stage::TrainSpeech, task));
    }
}

void ExperimentRunner::do_export_repr() {
    const DatasetManifest manifest = parse_manifest(ingest_manifest_path());
    const auto features = read_jsonl<RiskFeatureText>(features_path(), feature_from_json);
    auto text_encoder = resolve_text_encoder(config_, lexicon_);
    auto speech_encoder = resolve_speech_encoder(config_, lexicon_);

    json missing = json::array();

    for (Split split : kAllSplits) {
        const auto subjects = manifest.subjects_in(split);

        for (TaskKind task : kTextTasks) {
            std::map<std::string, const RiskFeatureText*> by_subject;
            for (const auto& f : features)
                if (f.task == task && f.language == config_.text_model.feature_language)
                    by_subject[f.subject_id] = &f;

            std::vector<ExportItem> items;
            for (const SubjectRecord* s : subjects) {
                auto it = by_subject.find(s->subject_id);
                if (it == by_subject.end()) {
                    missing.push_back({{"subject_id", s->subject_id},
                                       {"task", to_string(task)},
                                       {"branch", "text"},
                                       {"split", to_string(split)}});
                    continue;
                }
                items.push_back({s->subject_id, EncoderInput::from_text(it->second->text)});
            }
            const ExportResult result = export_representations(*text_encoder, items, task);
            for (const auto& id : result.missing)
                missing.push_back({{"subject_id", id},
                                   {"task", to_string(task)},
                                   {"branch", "text"},
                                   {"split", to_string(split)}});
            save_representations(representations_dir(), text_encoder->descriptor().encoder_id,
                                 task, split, result.representations);
        }

        for (TaskKind task : kAllTasks) {
            std::vector<ExportItem> items;
            for (const SubjectRecord* s : subjects) {
                const RecordingRef* r = manifest.find_recording(s->subject_id, task);
                if (!r) {
                    missing.push_back({{"subject_id", s->subject_id},
                                       {"task", to_string(task)},
                                       {"branch", "speech"},
                                       {"split", to_string(split)}});
                    continue;
                }
                items.push_back({s->subject_id, EncoderInput::from_audio(r->audio_uri)});
            }
            const ExportResult result = export_representations(*speech_encoder, items, task);
            for (const auto& id : result.missing)
                missing.push_back({{"subject_id", id},
                                   {"task", to_string(task)},
                                   {"branch", "speech"},
                                   {"split", to_string(split)}});
            save_representations(representations_dir(), speech_encoder->descriptor().encoder_id,
                                 task, split, result.representations);
        }
    }

    write_file(stage_dir(Stage::ExportRepr) / "missing.json", missing.dump(2) + "\n");
}

void ExperimentRunner::do_train_fusion() {
    const DatasetManifest manifest = parse_manifest(ingest_manifest_path());
    const auto labels = label_map(manifest);
    const std::string text_id = text_encoder_instance_id();

    for (TaskKind task : kTextTasks) {
        auto collect = [&](Split split) {
            const auto text_reps =
                load_representations(representations_dir(), text_id, task, split);
            const auto speech_reps =
                load_representations(representations_dir(), "mock-speech-bag", task, split);
            std::map<std::string, const Representation*> speech_by_subject;
            for (const auto& r : speech_reps) speech_by_subject[r.subject_id] = &r;

            std::vector<LabeledFused> items;
            for (const auto& t : text_reps) {
                auto it = speech_by_subject.find(t.subject_id);
                if (it == speech_by_subject.end()) continue;  // fusion needs both modalities
                items.push_back({fuse(t, *it->second), labels.at(t.subject_id)});
            }
            return items;
        };

        const auto train = collect(Split::Train);
        const auto dev = collect(Split::Dev);
        if (train.empty())
            throw MissingArtifactError("no fused training rows for task " + to_string(task) +
                                       "; check export_repr outputs");

        FusionConfig fusion_config;
        fusion_config.text_encoder_id = text_id;
        fusion_config.speech_encoder_id = "mock-speech-bag";
        fusion_config.epochs = config_.fusion.epochs;
        fusion_config.learning_rate = config_.fusion.learning_rate;
        fusion_config.batch_size = config_.fusion.batch_size;
        fusion_config.seed = derive_seed(config_.runtime.seed, "train_fusion:" + to_string(task));

        const auto probe = load_representations(representations_dir(), text_id, task, Split::Train);
        const int text_dim = probe.empty() ? 0 : static_cast<int>(probe.front().vector.size());
        const int speech_dim = static_cast<int>(train.front().fused.vector.size()) - text_dim;

        const FusionModel model = train_fusion(train, dev, text_dim, speech_dim, fusion_config);
        save_fusion_model(model, model_params_path(Stage::TrainFusion, task),
                          model_meta_path(Stage::TrainFusion, task));
    }
}

void ExperimentRunner::do_predict() {
    const DatasetManifest manifest = parse_manifest(ingest_manifest_path());
    const std::string text_id = text_encoder_instance_id();

    std::map<TaskKind, TrainedModel> text_models, speech_models;
    std::map<TaskKind, FusionModel> fusion_models;
    for (TaskKind task : kTextTasks) {
        text_models[task] = load_model(model_params_path(Stage::TrainText, task),
                                       model_meta_path(Stage::TrainText, task));
        fusion_models[task] = load_fusion_model(model_params_path(Stage::TrainFusion, task),
                                                model_meta_path(Stage::TrainFusion, task));
    }
    for (TaskKind task : kAllTasks)
        speech_models[task] = load_model(model_params_path(Stage::TrainSpeech, task),
                                         model_meta_path(Stage::TrainSpeech, task));

    for (Split split : {Split::Dev, Split::Test}) {
        const auto subjects = manifest.subjects_in(split);
        if (subjects.empty()) continue;

        std::map<TaskKind, std::map<std::string, Representation>> text_reps, speech_reps;
        for (TaskKind task : kTextTasks)
            for (auto& r : load_representations(representations_dir(), text_id, task, split))
                text_reps[task].emplace(r.subject_id, std::move(r));
        for (TaskKind task : kAllTasks)
            for (auto& r :
                 load_representations(representations_dir(), "mock-speech-bag", task, split))
                speech_reps[task].emplace(r.subject_id, std::move(r));

        std::string text_rows, speech_rows, fused_rows;
        std::map<std::string, TaskLogitsSet> sets;
        for (const SubjectRecord* s : subjects) sets[s->subject_id].subject_id = s->subject_id;

        for (const SubjectRecord* s : subjects) {
            const std::string& id = s->subject_id;
            for (TaskKind task : kAllTasks) {
                const auto speech_it = speech_reps[task].find(id);
                std::optional<Logits> speech_logits;
                if (speech_it != speech_reps[task].end()) {
                    speech_logits = predict_logits(speech_models[task], speech_it->second);
                    speech_rows += logits_to_json(*speech_logits, false).dump() + "\n";
                }

                if (task == TaskKind::PR) {
                    if (speech_logits) {
                        fused_rows += logits_to_json(*speech_logits, false).dump() + "\n";
                        sets[id].by_task[task] = *speech_logits;
                    }
                    continue;
                }

                const auto text_it = text_reps[task].find(id);
                std::optional<Logits> text_logits;
                if (text_it != text_reps[task].end()) {
                    text_logits = predict_logits(text_models[task], text_it->second);
                    text_rows += logits_to_json(*text_logits, false).dump() + "\n";
                }

                // ER/ED: fused when both modalities exist; otherwise fall
                // back to the single available branch, flagged.
                std::optional<Logits> fused;
                bool fallback = false;
                if (text_it != text_reps[task].end() && speech_it != speech_reps[task].end()) {
                    fused = fusion_predict(fusion_models[task],
                                           fuse(text_it->second, speech_it->second), task);
                } else if (speech_logits) {
                    fused = *speech_logits;
                    fallback = true;
                } else if (text_logits) {
                    fused = *text_logits;
                    fallback = true;
                }
                if (fused) {
                    fused_rows += logits_to_json(*fused, fallback).dump() + "\n";
                    sets[id].by_task[task] = *fused;
                }
            }
        }

        write_file(logits_path("text", split), text_rows);
        write_file(logits_path("speech", split), speech_rows);
        write_file(logits_path("fused", split), fused_rows);

        std::vector<TaskLogitsSet> ordered;
        for (const SubjectRecord* s : subjects) {
            const auto& set = sets[s->subject_id];
            if (!set.by_task.empty()) ordered.push_back(set);
        }
        write_predictions(aggregate_dataset(ordered, config_.policy), predictions_path(split));
    }
}

namespace {

json metrics_to_json(const MetricsResult& m) {
    json row;
    row["n"] = m.n;
    row["tp"] = m.counts.tp;
    row["tn"] = m.counts.tn;
    row["fp"] = m.counts.fp;
    row["fn"] = m.counts.fn;
    row["acc"] = m.acc;
    if (m.f1) row["f1"] = *m.f1;
    return row;
}

MetricsResult metrics_from_json(const json& row) {
    MetricsResult m;
    m.n = row.at("n").get<long>();
    m.counts.tp = row.at("tp").get<long>();
    m.counts.tn = row.at("tn").get<long>();
    m.counts.fp = row.at("fp").get<long>();
    m.counts.fn = row.at("fn").get<long>();
    m.acc = row.at("acc").get<double>();
    if (row.contains("f1")) m.f1 = row.at("f1").get<double>();
    return m;
}

}  // namespace

void ExperimentRunner::do_evaluate() {
    const DatasetManifest manifest = parse_manifest(ingest_manifest_path());
    const auto all_labels = label_map(manifest);

    for (Split split : {Split::Dev, Split::Test}) {
        const auto subjects = manifest.subjects_in(split);
        if (subjects.empty()) continue;

        std::map<std::string, RiskLabel> labels;
        for (const SubjectRecord* s : subjects) labels[s->subject_id] = s->label;

        auto branch_metrics = [&](const std::string& branch) {
            std::map<TaskKind, std::vector<Logits>> by_task;
            for (const auto& l :
                 read_jsonl<Logits>(logits_path(branch, split), logits_from_json))
                by_task[l.task].push_back(l);
            std::map<TaskKind, MetricsResult> out;
            for (const auto& [task, rows] : by_task)
                out[task] = compute_metrics(confusion_from_logits(rows, labels));
            return out;
        };

        json doc;
        doc["split"] = to_string(split);
        json methods = json::array();

        auto add_method = [&](const std::string& name,
                              const std::map<TaskKind, MetricsResult>& per_task,
                              const std::optional<MetricsResult>& combined) {
            json m;
            m["method"] = name;
            json tasks;
            for (const auto& [task, metrics] : per_task)
                tasks[to_string(task)] = metrics_to_json(metrics);
            m["per_task"] = tasks;
            if (combined) m["combined"] = metrics_to_json(*combined);
            methods.push_back(m);
        };

        add_method("text:" + text_encoder_instance_id(), branch_metrics("text"), std::nullopt);
        add_method("speech:" + config_.speech_model.encoder_id, branch_metrics("speech"),
                   std::nullopt);

        const auto predictions = parse_predictions(read_file(predictions_path(split)));
        const MetricsResult combined = compute_metrics(confusion(predictions, labels));
        add_method("fusion:" + text_encoder_instance_id() + "+" + config_.speech_model.encoder_id,
                   branch_metrics("fused"), combined);

        doc["methods"] = methods;
        write_file(metrics_path(split), doc.dump(2) + "\n");
    }
}

void ExperimentRunner::do_report() {
    const DatasetManifest manifest = parse_manifest(ingest_manifest_path());

    for (Split split : {Split::Dev, Split::Test}) {
        if (manifest.subjects_in(split).empty()) continue;

        const json doc = json::parse(read_file(metrics_path(split)));
        std::vector<MethodResults> results;
        for (const auto& m : doc.at("methods")) {
            MethodResults row;
            row.method = m.at("method").get<std::string>();
            for (const auto& [task_name, metrics] : m.at("per_task").items())
                row.per_task[task_from_string(task_name)] = metrics_from_json(metrics);
            if (m.contains("combined")) row.combined = metrics_from_json(m.at("combined"));
            results.push_back(std::move(row));
        }

        const RenderedReport rendered =
            render_report(results, config_.experiment_id + " [" + to_string(split) + "]",
                          config_.acc_precision);
        write_report(rendered, stage_dir(Stage::Report), config_.experiment_id,
                     to_string(split));
    }
}

}  // namespace riskpipe
