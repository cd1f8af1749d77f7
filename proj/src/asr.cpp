#include "riskpipe/asr.hpp"

#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "riskpipe/errors.hpp"
#include "riskpipe/parallel.hpp"

namespace riskpipe {

namespace fs = std::filesystem;

std::string FileAsrProvider::transcribe_audio(const RecordingRef&,
                                              const fs::path& audio_path) {
    fs::path transcript_path = audio_path;
    transcript_path.replace_extension(".txt");
    std::ifstream in(transcript_path, std::ios::binary);
    if (!in)
        throw ProviderError("file provider: missing transcript file " + transcript_path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string MockAsrProvider::transcribe_audio(const RecordingRef& recording,
                                              const fs::path& audio_path) {
    calls_.fetch_add(1);
    const int now = in_flight_.fetch_add(1) + 1;
    int seen = max_in_flight_.load();
    while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
    }
    if (delay_.count() > 0) std::this_thread::sleep_for(delay_);

    struct InFlightGuard {
        std::atomic<int>& counter;
        ~InFlightGuard() { counter.fetch_sub(1); }
    } guard{in_flight_};

    if (failures_remaining_.load() > 0 && failures_remaining_.fetch_sub(1) > 0) {
        if (failures_retryable_)
            throw RetryableProviderError("mock provider: transient failure");
        throw ProviderError("mock provider: permanent failure");
    }

    if (!fixed_text_.empty()) return fixed_text_;
    FileAsrProvider fallback;
    return fallback.transcribe_audio(recording, audio_path);
}

AsrGateway::AsrGateway(fs::path cache_root, RetryPolicy retry)
    : cache_(std::move(cache_root)), retry_(retry) {}

void AsrGateway::register_provider(const std::string& provider_id,
                                   std::shared_ptr<AsrProvider> provider) {
    require_path_safe_id(provider_id, "provider_id");
    providers_[provider_id] = std::move(provider);
}

bool AsrGateway::has_provider(const std::string& provider_id) const {
    return providers_.count(provider_id) > 0;
}

AsrProvider& AsrGateway::provider_for(const AsrProviderDescriptor& descriptor) {
    auto it = providers_.find(descriptor.provider_id);
    if (it == providers_.end())
        throw ProviderError("ASR provider not registered: " + descriptor.provider_id);
    return *it->second;
}

std::string AsrGateway::cache_file_key(const std::string& provider_id,
                                       const std::string& subject_id, TaskKind task) {
    return "asr/" + provider_id + "/" + subject_id + "__" + to_string(task) + ".txt";
}

Transcript AsrGateway::transcribe_uncached(const RecordingRef& recording,
                                           const AsrProviderDescriptor& descriptor,
                                           const fs::path& base_dir) {
    AsrProvider& provider = provider_for(descriptor);
    const fs::path audio_path = base_dir / recording.audio_uri;

    std::string text;
    int attempt = 0;
    auto backoff = retry_.initial_backoff;
    for (;;) {
        ++attempt;
        try {
            text = provider.transcribe_audio(recording, audio_path);
            break;
        } catch (const RetryableProviderError&) {
            if (attempt >= retry_.max_attempts) throw;
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }

    if (text.empty() && recording.task != TaskKind::PR)
        throw ProviderError("empty transcription for subject " + recording.subject_id + " task " +
                            to_string(recording.task));

    Transcript t;
    t.subject_id = recording.subject_id;
    t.task = recording.task;
    t.language = "zh";
    t.text = text;
    t.provider_id = descriptor.provider_id;
    return t;
}

Transcript AsrGateway::transcribe(const RecordingRef& recording,
                                  const AsrProviderDescriptor& descriptor,
                                  const fs::path& base_dir) {
    require_path_safe_id(descriptor.provider_id, "provider_id");
    require_path_safe_id(recording.subject_id, "subject_id");
    const std::string key =
        cache_file_key(descriptor.provider_id, recording.subject_id, recording.task);

    if (auto cached = cache_.get(key)) {
        Transcript t;
        t.subject_id = recording.subject_id;
        t.task = recording.task;
        t.language = "zh";
        t.text = *cached;
        t.provider_id = descriptor.provider_id;
        return t;
    }

    Transcript t = transcribe_uncached(recording, descriptor, base_dir);
    cache_.put(key, t.text);
    return t;
}

BatchAsrResult AsrGateway::batch_transcribe(const DatasetManifest& manifest,
                                            const AsrProviderDescriptor& descriptor,
                                            int concurrency_limit, const fs::path& base_dir) {
    if (concurrency_limit < 1) throw ValidationError("concurrency_limit must be >= 1");

    const auto& items = manifest.recordings;
    std::vector<std::optional<Transcript>> slots(items.size());
    std::vector<std::optional<BatchFailure>> errors(items.size());

    bounded_parallel_for(items.size(), concurrency_limit, [&](std::size_t i) {
        try {
            slots[i] = transcribe(items[i], descriptor, base_dir);
        } catch (const std::exception& e) {
            errors[i] = BatchFailure{items[i].subject_id, items[i].task, e.what()};
        }
    });

    BatchAsrResult result;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (slots[i]) result.transcripts.push_back(std::move(*slots[i]));
        if (errors[i]) result.failures.push_back(std::move(*errors[i]));
    }
    if (!items.empty() && result.failures.size() == items.size())
        throw Error("all " + std::to_string(items.size()) + " transcription attempts failed; " +
                    "first error: " + result.failures.front().error);
    return result;
}

std::optional<AsrCacheEntry> AsrGateway::cached_entry(const std::string& provider_id,
                                                      const std::string& subject_id,
                                                      TaskKind task) const {
    const std::string key = cache_file_key(provider_id, subject_id, task);
    auto content = cache_.get(key);
    if (!content) return std::nullopt;
    AsrCacheEntry entry;
    entry.key = provider_id + "/" + subject_id + "/" + to_string(task);
    entry.transcript.subject_id = subject_id;
    entry.transcript.task = task;
    entry.transcript.language = "zh";
    entry.transcript.text = *content;
    entry.transcript.provider_id = provider_id;
    entry.created_at = cache_.created_at(key).value_or(std::chrono::system_clock::time_point{});
    return entry;
}

std::shared_ptr<AsrProvider> make_builtin_asr_provider(const AsrProviderDescriptor& descriptor) {
    if (descriptor.provider_id == "file") return std::make_shared<FileAsrProvider>();
    if (descriptor.provider_id == "mock") {
        const auto delay = std::chrono::milliseconds(
            std::stol(descriptor.config_value("delay_ms", "0")));
        return std::make_shared<MockAsrProvider>(descriptor.config_value("text"), delay);
    }
    throw ProviderError("no built-in ASR provider \"" + descriptor.provider_id +
                        "\"; register an external provider for this id");
}

}  // namespace riskpipe
