#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "riskpipe/config.hpp"
#include "riskpipe/errors.hpp"
#include "riskpipe/extraction.hpp"
#include "riskpipe/head.hpp"
#include "riskpipe/manifest.hpp"
#include "riskpipe/metrics.hpp"
#include "riskpipe/optimizer.hpp"
#include "riskpipe/pipeline.hpp"
#include "riskpipe/synthetic.hpp"
#include "riskpipe/voting.hpp"

namespace py = pybind11;
using namespace riskpipe;

namespace {

ConfusionCounts make_counts(long tp, long tn, long fp, long fn) {
    return ConfusionCounts{tp, tn, fp, fn};
}

py::dict aggregate_py(const py::dict& task_logits, const std::string& policy,
                      const std::string& subject_id) {
    TaskLogitsSet set;
    set.subject_id = subject_id;
    for (const auto& item : task_logits) {
        const TaskKind task = task_from_string(item.first.cast<std::string>());
        const auto values = item.second.cast<std::pair<double, double>>();
        Logits logits;
        logits.subject_id = subject_id;
        logits.task = task;
        logits.values = {values.first, values.second};
        set.by_task[task] = logits;
    }
    const FinalPrediction pred = aggregate(set, voting_policy_from_string(policy));
    py::dict votes;
    for (const auto& [task, vote] : pred.per_task_votes)
        votes[py::str(to_string(task))] = label_to_int(vote);
    py::dict out;
    out["subject_id"] = pred.subject_id;
    out["label"] = label_to_int(pred.label);
    out["at_risk_score"] = pred.at_risk_score;
    out["votes"] = votes;
    out["policy"] = to_string(pred.policy);
    return out;
}

py::list run_experiment_py(const std::filesystem::path& config_path, const std::string& stage,
                           bool force) {
    ExperimentConfig config = load_config(config_path);
    ExperimentRunner runner(std::move(config), force);
    py::list out;
    for (const auto& outcome : runner.run(stage_from_string(stage))) {
        py::dict row;
        row["stage"] = to_string(outcome.stage);
        row["skipped"] = outcome.skipped;
        row["duration_ms"] = outcome.duration_ms;
        out.append(row);
    }
    return out;
}

std::vector<std::string> validate_manifest_file(const std::filesystem::path& path) {
    const ValidationReport report = validate_manifest(parse_manifest(path));
    std::vector<std::string> out;
    for (const auto& v : report.violations) out.push_back(v.message);
    return out;
}

std::string mock_extract_py(const std::string& text, const std::string& language,
                            const std::optional<std::filesystem::path>& lexicon_path) {
    const MarkerLexicon lexicon = lexicon_path ? MarkerLexicon::load(*lexicon_path)
                                               : MarkerLexicon::builtin_default();
    return mock_extract(text, lexicon, language);
}

std::string render_prompt_py(const std::filesystem::path& templates_dir,
                             const std::string& version, const std::string& task,
                             const std::string& language, const std::string& transcript_text) {
    const PromptTemplateStore store = PromptTemplateStore::load(templates_dir, version);
    Transcript transcript;
    transcript.subject_id = "adhoc";
    transcript.task = task_from_string(task);
    transcript.text = transcript_text;
    return render_prompt(store.get(transcript.task, language), transcript);
}

py::dict generate_synthetic_py(const std::filesystem::path& out_dir, int subjects,
                               double balance, double p_at_risk, double p_non_risk,
                               int sentences, int tokens, std::uint64_t seed) {
    SyntheticSpec spec;
    spec.n_subjects = subjects;
    spec.label_balance = balance;
    spec.p_marker_at_risk = p_at_risk;
    spec.p_marker_non_risk = p_non_risk;
    spec.sentences_per_transcript = sentences;
    spec.tokens_per_recording = tokens;
    spec.seed = seed;
    const DatasetManifest manifest = generate_synthetic(spec, out_dir);
    py::dict out;
    out["subjects"] = manifest.subjects.size();
    out["recordings"] = manifest.recordings.size();
    out["manifest"] = (out_dir / "manifest.jsonl").string();
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "speech+text risk assessment pipeline: numeric primitives and pipeline entry "
              "points";

    py::register_exception<ValidationError>(m, "ConfigurationError", PyExc_ValueError);
    py::register_exception<MissingArtifactError>(m, "MissingArtifactError", PyExc_FileNotFoundError);

    m.def("cosine_lr", &cosine_lr, py::arg("step"), py::arg("total_steps"), py::arg("base_lr"),
          "Cosine learning-rate schedule value at an optimizer step.");
    m.def(
        "softmax",
        [](double v0, double v1) {
            const auto p = softmax2({v0, v1});
            return std::make_pair(p[0], p[1]);
        },
        py::arg("non_risk_logit"), py::arg("at_risk_logit"));

    m.def(
        "accuracy",
        [](long tp, long tn, long fp, long fn) { return accuracy(make_counts(tp, tn, fp, fn)); },
        py::arg("tp"), py::arg("tn"), py::arg("fp"), py::arg("fn"));
    m.def(
        "f1",
        [](long tp, long tn, long fp, long fn) -> std::optional<double> {
            return f1(make_counts(tp, tn, fp, fn));
        },
        py::arg("tp"), py::arg("tn"), py::arg("fp"), py::arg("fn"),
        "F1 score, or None when 2*TP + FP + FN is zero.");

    m.def(
        "head_parameter_count",
        [](int input_dim, int hidden_dim) {
            return TwoLayerHead::parameter_count(input_dim, hidden_dim, 2);
        },
        py::arg("input_dim"), py::arg("hidden_dim") = 512);

    m.def("split_sentences", &split_sentences, py::arg("text"));
    m.def("mock_extract", &mock_extract_py, py::arg("text"), py::arg("language") = "zh",
          py::arg("lexicon_path") = std::nullopt,
          "Deterministic marker-sentence extraction used by the mock provider.");
    m.def("render_prompt", &render_prompt_py, py::arg("templates_dir"), py::arg("version"),
          py::arg("task"), py::arg("language"), py::arg("transcript"));

    m.def("aggregate", &aggregate_py, py::arg("task_logits"),
          py::arg("policy") = "majority_argmax", py::arg("subject_id") = "subject",
          "Vote per-task (non_risk, at_risk) logits into a final prediction.");

    m.def("validate_manifest", &validate_manifest_file, py::arg("path"),
          "Returns the list of manifest violations (empty when valid).");

    m.def("generate_synthetic", &generate_synthetic_py, py::arg("out_dir"),
          py::arg("subjects") = 120, py::arg("balance") = 0.5, py::arg("p_at_risk") = 0.9,
          py::arg("p_non_risk") = 0.1, py::arg("sentences") = 10, py::arg("tokens") = 40,
          py::arg("seed") = 0);

    m.def("run_experiment", &run_experiment_py, py::arg("config_path"), py::arg("stage") = "all",
          py::arg("force") = false, "Run one pipeline stage (or \"all\") for a config file.");

    m.attr("__version__") = "0.1.0";
}
