#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>

#include "riskpipe/report.hpp"
#include "riskpipe/voting.hpp"

namespace riskpipe {

struct DatasetConfig {
    std::filesystem::path manifest;
    std::array<int, 3> split_ratios{4, 1, 1};
    std::uint64_t split_seed = 0;  // resolved from runtime seed when absent
};

struct AsrConfig {
    std::string provider_id = "file";
    int concurrency = 4;
    int retry_attempts = 3;
    int retry_backoff_ms = 250;
    std::map<std::string, std::string> provider_config;  // "provider.*" keys
};

struct ExtractionConfig {
    std::string provider_id = "mock";
    std::string prompt_version = "v1";
    std::filesystem::path templates_dir;
    std::set<std::string> languages{"zh", "en"};
    std::filesystem::path lexicon;  // empty: built-in lexicon
    int concurrency = 4;
    int retry_attempts = 3;
    int retry_backoff_ms = 250;
    std::map<std::string, std::string> provider_config;
};

struct ModelConfig {
    std::string encoder_id;
    std::string feature_language = "zh";  // text branch only
    int epochs = 10;
    double learning_rate = 0.0;
    int batch_size = 0;
};

struct FusionSectionConfig {
    int epochs = 10;
    double learning_rate = 1e-3;
    int batch_size = 32;
};

struct RuntimeConfig {
    std::uint64_t seed = 0;
    std::filesystem::path cache_root;
    std::filesystem::path output_root;
};

struct ExperimentConfig {
    std::string experiment_id;
    DatasetConfig dataset;
    AsrConfig asr;
    ExtractionConfig extraction;
    ModelConfig text_model;    // defaults: lr 5e-5, batch 16
    ModelConfig speech_model;  // defaults: lr 1e-5, batch 8
    FusionSectionConfig fusion;
    VotingPolicy policy = VotingPolicy::MajorityArgmax;
    AccPrecision acc_precision = AccPrecision::IntegerPercent;
    RuntimeConfig runtime;

    // Deterministic full-field dump; its hash guards experiment outputs
    // against silent config mixing.
    std::string canonical_string() const;
    std::uint64_t config_hash() const;
};

// Sectioned UTF-8 key-value document. Unknown sections and keys are
// rejected; "provider." prefixed keys inside [asr] and [extraction] pass
// through to the provider. Relative paths resolve against the config
// file's directory. Environment variables may supply credentials (via
// provider.api_key_env) but never hyperparameters.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config_text(const std::string& text,
                                   const std::filesystem::path& base_dir);

}  // namespace riskpipe
