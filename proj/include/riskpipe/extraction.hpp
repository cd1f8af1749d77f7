#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "riskpipe/cache.hpp"
#include "riskpipe/domain.hpp"
#include "riskpipe/lexicon.hpp"
#include "riskpipe/retry.hpp"

namespace riskpipe {

inline constexpr const char* kTranscriptPlaceholder = "{transcript}";
inline constexpr const char* kNoRiskSentinel = "no risk-related content";

struct PromptTemplate {
    TaskKind task = TaskKind::ER;  // ER or ED only
    std::string language;          // requested output language, "zh" or "en"
    std::string version;
    std::string body;  // contains exactly one {transcript} placeholder
};

// Loads the four (task, language) template files of one version from
// <root>/<version>/<TASK>_<language>.txt.
class PromptTemplateStore {
public:
    static PromptTemplateStore load(const std::filesystem::path& templates_root,
                                    const std::string& version);

    const PromptTemplate& get(TaskKind task, const std::string& language) const;
    const std::string& version() const { return version_; }

private:
    std::string version_;
    std::vector<PromptTemplate> templates_;
};

std::string render_prompt(const PromptTemplate& tmpl, const Transcript& transcript);

struct RiskFeatureText {
    std::string subject_id;
    TaskKind task = TaskKind::ER;
    std::string language;
    std::string text;
    std::string provider_id;
    std::string prompt_version;
};

struct ExtractionProviderDescriptor {
    std::string provider_id;
    std::map<std::string, std::string> config;

    std::string config_value(const std::string& key, const std::string& fallback = "") const {
        auto it = config.find(key);
        return it == config.end() ? fallback : it->second;
    }
};

struct ExtractionRequest {
    std::string prompt;
    TaskKind task = TaskKind::ER;
    std::string language;
    std::string subject_id;
    std::map<std::string, std::string> model_config;
};

class ExtractionProvider {
public:
    virtual ~ExtractionProvider() = default;
    virtual std::string extract(const ExtractionRequest& request) = 0;
};

// Splits on sentence-final punctuation (ASCII .!? and the usual fullwidth
// forms), keeping the terminator with its sentence.
std::vector<std::string> split_sentences(const std::string& text);

// The deterministic extraction oracle: keep the sentences that contain at
// least one zh marker, in order; for en output swap every marker for its
// en surface form. No match yields the fixed sentinel.
std::string mock_extract(const std::string& text, const MarkerLexicon& lexicon,
                         const std::string& language);

// Applies mock_extract to the rendered prompt. Template instructions carry
// no zh markers, so only transcript sentences survive the filter.
class MockExtractionProvider : public ExtractionProvider {
public:
    explicit MockExtractionProvider(MarkerLexicon lexicon) : lexicon_(std::move(lexicon)) {}

    std::string extract(const ExtractionRequest& request) override;

    int calls() const { return calls_.load(); }
    int max_in_flight() const { return max_in_flight_.load(); }

private:
    MarkerLexicon lexicon_;
    std::atomic<int> calls_{0};
    std::atomic<int> in_flight_{0};
    std::atomic<int> max_in_flight_{0};
};

// Minimal chat-completions style client. Config keys: endpoint, model,
// api_key_env (credentials come from the environment, never the config
// file), temperature (default 0), timeout_s.
class HttpExtractionProvider : public ExtractionProvider {
public:
    explicit HttpExtractionProvider(std::map<std::string, std::string> config);
    std::string extract(const ExtractionRequest& request) override;

private:
    std::string endpoint_;
    std::string model_;
    std::string api_key_;
    double temperature_ = 0.0;
    int timeout_s_ = 60;
};

struct ExtractionFailure {
    std::string subject_id;
    TaskKind task = TaskKind::ER;
    std::string language;
    std::string error;
};

struct BatchExtractionResult {
    std::vector<RiskFeatureText> features;  // input order, zh before en per item
    std::vector<ExtractionFailure> failures;
};

class ExtractionGateway {
public:
    ExtractionGateway(std::filesystem::path cache_root, PromptTemplateStore templates,
                      RetryPolicy retry = {});

    void register_provider(const std::string& provider_id,
                           std::shared_ptr<ExtractionProvider> provider);

    // One RiskFeatureText per requested language; results are cached under
    // (provider, subject, task, language, prompt_version).
    std::vector<RiskFeatureText> extract_features(const Transcript& transcript, TaskKind task,
                                                  const std::set<std::string>& languages,
                                                  const ExtractionProviderDescriptor& provider);

    BatchExtractionResult batch_extract(const std::vector<Transcript>& transcripts,
                                        const std::set<std::string>& languages,
                                        const ExtractionProviderDescriptor& provider,
                                        int concurrency_limit);

    static std::string cache_file_key(const std::string& provider_id,
                                      const std::string& prompt_version,
                                      const std::string& subject_id, TaskKind task,
                                      const std::string& language);

private:
    FileCache cache_;
    PromptTemplateStore templates_;
    RetryPolicy retry_;
    std::map<std::string, std::shared_ptr<ExtractionProvider>> providers_;

    RiskFeatureText extract_one(const Transcript& transcript, TaskKind task,
                                const std::string& language,
                                const ExtractionProviderDescriptor& descriptor);
};

// Built-in provider ids: "mock" (lexicon-driven) and "http". External
// services register through ExtractionGateway::register_provider.
std::shared_ptr<ExtractionProvider> make_builtin_extraction_provider(
    const ExtractionProviderDescriptor& descriptor, const MarkerLexicon& lexicon);

}  // namespace riskpipe
