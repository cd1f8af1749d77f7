#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "riskpipe/cache.hpp"
#include "riskpipe/domain.hpp"
#include "riskpipe/retry.hpp"

namespace riskpipe {

struct AsrProviderDescriptor {
    std::string provider_id;                   // part of every cache key
    std::map<std::string, std::string> config;

    std::string config_value(const std::string& key, const std::string& fallback = "") const {
        auto it = config.find(key);
        return it == config.end() ? fallback : it->second;
    }
};

struct AsrCacheEntry {
    std::string key;  // provider_id + "/" + subject_id + "/" + task
    Transcript transcript;
    std::chrono::system_clock::time_point created_at;
};

class AsrProvider {
public:
    virtual ~AsrProvider() = default;
    // audio_path is the recording's audio_uri resolved against the manifest
    // directory. Throws RetryableProviderError for transient failures,
    // ProviderError otherwise.
    virtual std::string transcribe_audio(const RecordingRef& recording,
                                         const std::filesystem::path& audio_path) = 0;
};

// Reads a precomputed transcript next to the audio file, extension
// replaced by .txt.
class FileAsrProvider : public AsrProvider {
public:
    std::string transcribe_audio(const RecordingRef& recording,
                                 const std::filesystem::path& audio_path) override;
};

// Deterministic stand-in for an external ASR service. Returns the
// configured text (or the sibling transcript when none is configured) and
// records call counts plus the maximum number of concurrent invocations,
// so tests can assert cache hits and concurrency bounds.
class MockAsrProvider : public AsrProvider {
public:
    explicit MockAsrProvider(std::string fixed_text = "",
                             std::chrono::milliseconds delay = std::chrono::milliseconds(0))
        : fixed_text_(std::move(fixed_text)), delay_(delay) {}

    std::string transcribe_audio(const RecordingRef& recording,
                                 const std::filesystem::path& audio_path) override;

    void fail_next(int n, bool retryable = true) {
        failures_remaining_ = n;
        failures_retryable_ = retryable;
    }

    int calls() const { return calls_.load(); }
    int max_in_flight() const { return max_in_flight_.load(); }

private:
    std::string fixed_text_;
    std::chrono::milliseconds delay_;
    std::atomic<int> calls_{0};
    std::atomic<int> in_flight_{0};
    std::atomic<int> max_in_flight_{0};
    std::atomic<int> failures_remaining_{0};
    bool failures_retryable_ = true;
};

struct BatchFailure {
    std::string subject_id;
    TaskKind task = TaskKind::ER;
    std::string error;
};

struct BatchAsrResult {
    std::vector<Transcript> transcripts;  // manifest order
    std::vector<BatchFailure> failures;
};

class AsrGateway {
public:
    explicit AsrGateway(std::filesystem::path cache_root, RetryPolicy retry = {});

    void register_provider(const std::string& provider_id, std::shared_ptr<AsrProvider> provider);
    bool has_provider(const std::string& provider_id) const;

    Transcript transcribe(const RecordingRef& recording, const AsrProviderDescriptor& provider,
                          const std::filesystem::path& base_dir = ".");

    BatchAsrResult batch_transcribe(const DatasetManifest& manifest,
                                    const AsrProviderDescriptor& provider, int concurrency_limit,
                                    const std::filesystem::path& base_dir = ".");

    std::optional<AsrCacheEntry> cached_entry(const std::string& provider_id,
                                              const std::string& subject_id, TaskKind task) const;

    static std::string cache_file_key(const std::string& provider_id,
                                      const std::string& subject_id, TaskKind task);

private:
    FileCache cache_;
    RetryPolicy retry_;
    std::map<std::string, std::shared_ptr<AsrProvider>> providers_;

    AsrProvider& provider_for(const AsrProviderDescriptor& descriptor);
    Transcript transcribe_uncached(const RecordingRef& recording,
                                   const AsrProviderDescriptor& descriptor,
                                   const std::filesystem::path& base_dir);
};

// Built-in provider ids: "file" and "mock" ("text" and "delay_ms" config
// keys). External services register through AsrGateway::register_provider.
std::shared_ptr<AsrProvider> make_builtin_asr_provider(const AsrProviderDescriptor& descriptor);

}  // namespace riskpipe
