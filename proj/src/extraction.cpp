#include "riskpipe/extraction.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "riskpipe/errors.hpp"
#include "riskpipe/parallel.hpp"

namespace riskpipe {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::size_t count_occurrences(const std::string& hay, const std::string& needle) {
    std::size_t count = 0;
    for (std::size_t pos = hay.find(needle); pos != std::string::npos;
         pos = hay.find(needle, pos + needle.size()))
        ++count;
    return count;
}

std::string replace_all(std::string text, const std::string& from, const std::string& to) {
    std::string out;
    out.reserve(text.size());
    std::size_t pos = 0;
    for (std::size_t hit = text.find(from); hit != std::string::npos;
         hit = text.find(from, pos)) {
        out.append(text, pos, hit - pos);
        out.append(to);
        pos = hit + from.size();
    }
    out.append(text, pos, std::string::npos);
    return out;
}

std::string trim(const std::string& s) {
    const char* ws = " \t\r\n";
    const std::size_t begin = s.find_first_not_of(ws);
    if (begin == std::string::npos) return "";
    const std::size_t end = s.find_last_not_of(ws);
    return s.substr(begin, end - begin + 1);
}

}  // namespace

PromptTemplateStore PromptTemplateStore::load(const fs::path& templates_root,
                                              const std::string& version) {
    require_path_safe_id(version, "prompt version");
    PromptTemplateStore store;
    store.version_ = version;
    for (TaskKind task : {TaskKind::ER, TaskKind::ED}) {
        for (const std::string language : {"zh", "en"}) {
            const fs::path file =
                templates_root / version / (to_string(task) + "_" + language + ".txt");
            std::ifstream in(file, std::ios::binary);
            if (!in)
                throw ValidationError("missing prompt template file: " + file.string());
            std::ostringstream buf;
            buf << in.rdbuf();
            PromptTemplate tmpl{task, language, version, buf.str()};
            if (count_occurrences(tmpl.body, kTranscriptPlaceholder) != 1)
                throw ValidationError("template " + file.string() + " must contain exactly one " +
                                      kTranscriptPlaceholder + " placeholder");
            store.templates_.push_back(std::move(tmpl));
        }
    }
    return store;
}

const PromptTemplate& PromptTemplateStore::get(TaskKind task, const std::string& language) const {
    if (task == TaskKind::PR)
        throw ValidationError("no prompt template exists for task PR; "
                              "PR text is identical across subjects and is not extracted");
    for (const auto& t : templates_)
        if (t.task == task && t.language == language) return t;
    throw ValidationError("no prompt template for task " + to_string(task) + " language " +
                          language + " in version " + version_);
}

std::string render_prompt(const PromptTemplate& tmpl, const Transcript& transcript) {
    if (tmpl.task == TaskKind::PR)
        throw ValidationError("no prompt template exists for task PR");
    if (transcript.task != tmpl.task)
        throw ValidationError("transcript task " + to_string(transcript.task) +
                              " does not match template task " + to_string(tmpl.task));
    const std::size_t n = count_occurrences(tmpl.body, kTranscriptPlaceholder);
    if (n != 1)
        throw ValidationError("prompt template must contain exactly one " +
                              std::string(kTranscriptPlaceholder) + " placeholder, found " +
                              std::to_string(n));
    return replace_all(tmpl.body, kTranscriptPlaceholder, transcript.text);
}

std::vector<std::string> split_sentences(const std::string& text) {
    // Terminators stay attached to their sentence. The fullwidth forms are
    // multi-byte UTF-8 sequences, matched before the single-byte ones.
    static const std::vector<std::string> kTerminators = {
        "。", "！", "？",  // fullwidth . ! ?
        ".", "!", "?", "\n"};

    std::vector<std::string> sentences;
    std::string current;
    std::size_t pos = 0;
    while (pos < text.size()) {
        bool matched = false;
        for (const auto& term : kTerminators) {
            if (text.compare(pos, term.size(), term) == 0) {
                if (term != "\n") current += term;
                const std::string sentence = trim(current);
                if (!sentence.empty()) sentences.push_back(sentence);
                current.clear();
                pos += term.size();
                matched = true;
                break;
            }
        }
        if (!matched) {
            current += text[pos];
            ++pos;
        }
    }
    const std::string tail = trim(current);
    if (!tail.empty()) sentences.push_back(tail);
    return sentences;
}

std::string mock_extract(const std::string& text, const MarkerLexicon& lexicon,
                         const std::string& language) {
    if (lexicon.text_markers.empty()) throw ValidationError("lexicon has no text markers");
    if (language != "zh" && language != "en")
        throw ValidationError("unknown output language: " + language);

    std::string kept;
    for (const auto& sentence : split_sentences(text)) {
        bool has_marker = false;
        for (const auto& m : lexicon.text_markers) {
            if (sentence.find(m.zh) != std::string::npos) {
                has_marker = true;
                break;
            }
        }
        if (!has_marker) continue;
        if (!kept.empty()) kept += " ";
        kept += sentence;
    }
    if (kept.empty()) return kNoRiskSentinel;

    if (language == "en")
        for (const auto& m : lexicon.text_markers) kept = replace_all(kept, m.zh, m.en);
    return kept;
}

std::string MockExtractionProvider::extract(const ExtractionRequest& request) {
    calls_.fetch_add(1);
    const int now = in_flight_.fetch_add(1) + 1;
    int seen = max_in_flight_.load();
    while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
    }
    struct InFlightGuard {
        std::atomic<int>& counter;
        ~InFlightGuard() { counter.fetch_sub(1); }
    } guard{in_flight_};

    return mock_extract(request.prompt, lexicon_, request.language);
}

HttpExtractionProvider::HttpExtractionProvider(std::map<std::string, std::string> config) {
    auto value = [&](const char* key, const std::string& fallback) {
        auto it = config.find(key);
        return it == config.end() ? fallback : it->second;
    };
    endpoint_ = value("endpoint", "");
    if (endpoint_.empty())
        throw ValidationError("http extraction provider requires an \"endpoint\" config value");
    model_ = value("model", "");
    temperature_ = std::stod(value("temperature", "0"));
    timeout_s_ = std::stoi(value("timeout_s", "60"));

    const std::string key_env = value("api_key_env", "");
    if (!key_env.empty()) {
        const char* key = std::getenv(key_env.c_str());
        if (!key || !*key)
            throw ValidationError("environment variable " + key_env +
                                  " named by api_key_env is not set");
        api_key_ = key;
    }
}

std::string HttpExtractionProvider::extract(const ExtractionRequest& request) {
    const std::size_t scheme_end = endpoint_.find("://");
    if (scheme_end == std::string::npos)
        throw ProviderError("bad endpoint url: " + endpoint_);
    const std::size_t path_start = endpoint_.find('/', scheme_end + 3);
    const std::string base =
        path_start == std::string::npos ? endpoint_ : endpoint_.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : endpoint_.substr(path_start);

    json body;
    body["model"] = model_;
    body["temperature"] = temperature_;
    body["messages"] = json::array({{{"role", "user"}, {"content", request.prompt}}});

    httplib::Client client(base);
    client.set_connection_timeout(timeout_s_);
    client.set_read_timeout(timeout_s_);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res)
        throw RetryableProviderError("extraction endpoint unreachable: " + endpoint_);
    if (res->status == 429 || res->status >= 500)
        throw RetryableProviderError("extraction endpoint returned status " +
                                     std::to_string(res->status));
    if (res->status != 200)
        throw ProviderError("extraction endpoint returned status " +
                            std::to_string(res->status) + ": " + res->body);

    try {
        const json reply = json::parse(res->body);
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw ProviderError(std::string("malformed extraction response: ") + e.what());
    }
}

ExtractionGateway::ExtractionGateway(fs::path cache_root, PromptTemplateStore templates,
                                     RetryPolicy retry)
    : cache_(std::move(cache_root)), templates_(std::move(templates)), retry_(retry) {}

void ExtractionGateway::register_provider(const std::string& provider_id,
                                          std::shared_ptr<ExtractionProvider> provider) {
    require_path_safe_id(provider_id, "provider_id");
    providers_[provider_id] = std::move(provider);
}

std::string ExtractionGateway::cache_file_key(const std::string& provider_id,
                                              const std::string& prompt_version,
                                              const std::string& subject_id, TaskKind task,
                                              const std::string& language) {
    return "features/" + provider_id + "/" + prompt_version + "/" + subject_id + "__" +
           to_string(task) + "__" + language + ".txt";
}

RiskFeatureText ExtractionGateway::extract_one(const Transcript& transcript, TaskKind task,
                                               const std::string& language,
                                               const ExtractionProviderDescriptor& descriptor) {
    if (task == TaskKind::PR)
        throw ValidationError("risk features are not extracted for PR");
    if (transcript.task != task)
        throw ValidationError("transcript task " + to_string(transcript.task) +
                              " does not match requested task " + to_string(task));
    if (transcript.text.empty())
        throw ValidationError("empty transcript for subject " + transcript.subject_id);
    require_path_safe_id(descriptor.provider_id, "provider_id");
    require_path_safe_id(transcript.subject_id, "subject_id");

    RiskFeatureText feature;
    feature.subject_id = transcript.subject_id;
    feature.task = task;
    feature.language = language;
    feature.provider_id = descriptor.provider_id;
    feature.prompt_version = templates_.version();

    const std::string key = cache_file_key(descriptor.provider_id, templates_.version(),
                                           transcript.subject_id, task, language);
    if (auto cached = cache_.get(key)) {
        feature.text = *cached;
        return feature;
    }

    auto it = providers_.find(descriptor.provider_id);
    if (it == providers_.end())
        throw ProviderError("extraction provider not registered: " + descriptor.provider_id);

    ExtractionRequest request;
    request.prompt = render_prompt(templates_.get(task, language), transcript);
    request.task = task;
    request.language = language;
    request.subject_id = transcript.subject_id;
    request.model_config = descriptor.config;

    std::string text;
    int attempt = 0;
    auto backoff = retry_.initial_backoff;
    for (;;) {
        ++attempt;
        try {
            text = it->second->extract(request);
            break;
        } catch (const RetryableProviderError&) {
            if (attempt >= retry_.max_attempts) throw;
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }
    if (text.empty())
        throw ProviderError("empty extraction response for subject " + transcript.subject_id +
                            " task " + to_string(task) + " language " + language);

    cache_.put(key, text);
    feature.text = text;
    return feature;
}

std::vector<RiskFeatureText> ExtractionGateway::extract_features(
    const Transcript& transcript, TaskKind task, const std::set<std::string>& languages,
    const ExtractionProviderDescriptor& descriptor) {
    if (languages.empty()) throw ValidationError("no extraction languages requested");
    std::vector<RiskFeatureText> out;
    for (const auto& language : languages)
        out.push_back(extract_one(transcript, task, language, descriptor));
    return out;
}

BatchExtractionResult ExtractionGateway::batch_extract(
    const std::vector<Transcript>& transcripts, const std::set<std::string>& languages,
    const ExtractionProviderDescriptor& descriptor, int concurrency_limit) {
    if (concurrency_limit < 1) throw ValidationError("concurrency_limit must be >= 1");
    if (languages.empty()) throw ValidationError("no extraction languages requested");

    // Flatten to (transcript, language) units; languages iterate in set
    // order, so output order is deterministic for a fixed input.
    struct Unit {
        const Transcript* transcript;
        std::string language;
    };
    std::vector<Unit> units;
    for (const auto& t : transcripts)
        for (const auto& language : languages) units.push_back({&t, language});

    std::vector<std::optional<RiskFeatureText>> slots(units.size());
    std::vector<std::optional<ExtractionFailure>> errors(units.size());

    bounded_parallel_for(units.size(), concurrency_limit, [&](std::size_t i) {
        const Unit& u = units[i];
        try {
            slots[i] = extract_one(*u.transcript, u.transcript->task, u.language, descriptor);
        } catch (const std::exception& e) {
            errors[i] = ExtractionFailure{u.transcript->subject_id, u.transcript->task,
                                          u.language, e.what()};
        }
    });

    BatchExtractionResult result;
    for (std::size_t i = 0; i < units.size(); ++i) {
        if (slots[i]) result.features.push_back(std::move(*slots[i]));
        if (errors[i]) result.failures.push_back(std::move(*errors[i]));
    }
    if (!units.empty() && result.failures.size() == units.size())
        throw Error("all " + std::to_string(units.size()) + " extraction attempts failed; " +
                    "first error: " + result.failures.front().error);
    return result;
}

std::shared_ptr<ExtractionProvider> make_builtin_extraction_provider(
    const ExtractionProviderDescriptor& descriptor, const MarkerLexicon& lexicon) {
    if (descriptor.provider_id == "mock")
        return std::make_shared<MockExtractionProvider>(lexicon);
    if (descriptor.provider_id == "http")
        return std::make_shared<HttpExtractionProvider>(descriptor.config);
    throw ProviderError("no built-in extraction provider \"" + descriptor.provider_id +
                        "\"; register an external provider for this id");
}

}  // namespace riskpipe
